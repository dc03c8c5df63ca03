use approx::assert_relative_eq;
use proptest::prelude::*;
use vfd_core::selfsim::*;
use vfd_core::{phi_m, Error};

// Independent DOP853 integration (rtol 1e-12) of the same profile problem.
const A1_ORACLE: f64 = 1.696_601_802_3;
const ETA_ORACLE: f64 = 0.120_692_505_4;
const W50_ORACLE: f64 = 3.7125;

#[test]
fn unit_mass_matches_oracle() {
    let (curve, mass) = unit_profile(-0.5, 1e-3, 1e-4).unwrap();
    assert_eq!(curve.eta, 1.0);
    assert_relative_eq!(mass.total(), A1_ORACLE, max_relative = 1e-4);
    assert!(mass.tail < 0.05 * mass.grid);
}

#[test]
fn calibrated_eta_matches_oracle() {
    let curve = calibrated_profile(-0.5, 1.0).unwrap();
    assert_relative_eq!(curve.eta, ETA_ORACLE, max_relative = 1e-4);
    assert_eq!(curve.mu, Some(1.0));
}

#[test]
fn slope_at_fifty_matches_oracle() {
    let curve = calibrated_profile(-0.5, 1.0).unwrap();
    let w = asymptotic_slope(&curve, 50.0).unwrap();
    assert_relative_eq!(w, W50_ORACLE, max_relative = 1e-3);
}

#[test]
fn profile_converges_at_second_order() {
    let at = |dr: f64| {
        integrate_profile(-0.5, 1.0, 10.0, dr)
            .unwrap()
            .value(10.0)
            .unwrap()
    };
    let (a, b, c) = (at(0.04), at(0.02), at(0.01));
    let order = ((a - b) / (b - c)).abs().log2();
    assert!(order > 1.8, "observed order {order}");
}

#[test]
fn eta_scaling_is_exact_up_to_integration_error() {
    // f_eta(r) = eta f_1(eta^{(1-m)/2} r)
    let m = -0.5;
    let eta: f64 = 0.3;
    let lambda = eta.powf((1.0 - m) / 2.0);
    let unit = integrate_profile(m, 1.0, 40.0, 1e-3).unwrap();
    let scaled = integrate_profile(m, eta, 40.0 / lambda, 1e-3 / lambda).unwrap();
    for r in [0.5, 5.0, 20.0, 90.0] {
        let direct = scaled.value(r).unwrap();
        let via_unit = eta * unit.value(lambda * r).unwrap();
        assert_relative_eq!(direct, via_unit, max_relative = 1e-9);
    }
}

#[test]
fn decay_bound_holds_across_parameters() {
    for m in [-0.9, -0.3] {
        for eta in [0.5, 2.0] {
            let c = default_profile(m, eta).unwrap();
            let checks = check_profile(&c);
            // The one-sided difference at the origin is O(dr |f''(0)|).
            assert!(checks.all_hold(100.0 * c.dr), "m={m} eta={eta}: {checks:?}");
        }
    }
}

#[test]
fn sandwich_holds_for_calibrated_profile() {
    let curve = calibrated_profile(-0.5, 1.0).unwrap();
    let fit = fit_sandwich(&curve, 1.0, 2.0).unwrap();
    assert!(fit.holds(0.0), "{fit:?}");
    assert_relative_eq!(fit.w_limit, 4.0, epsilon = 1e-12);
    assert!(fit.a > 0.0 && fit.r0 >= 2.0);
}

#[test]
fn sandwich_rejects_non_positive_mu() {
    let curve = integrate_profile(-0.5, 1.0, 5.0, 1e-2).unwrap();
    assert!(matches!(
        fit_sandwich(&curve, 0.0, 1.0),
        Err(Error::ParameterOutOfRange { name: "mu", .. })
    ));
}

#[test]
fn self_similar_mass_decays_linearly() {
    let v = SelfSimilarSolution::calibrated(-0.5, 1.0, 1.0).unwrap();
    for t in [0.0, 0.3, 0.8] {
        let mass = v.spatial_mass(t, 100_000).unwrap();
        assert_relative_eq!(mass, v.predicted_mass(t).unwrap(), max_relative = 1e-3);
    }
}

#[test]
fn self_similar_is_even_and_rejects_late_times() {
    let v = SelfSimilarSolution::calibrated(-0.5, 1.0, 1.0).unwrap();
    for x in [0.1, 1.0, 7.5] {
        assert_eq!(v.value(x, 0.2).unwrap(), v.value(-x, 0.2).unwrap());
    }
    assert!(matches!(
        v.value(0.0, 1.0),
        Err(Error::TimeBeyondExtinction { .. })
    ));
}

#[test]
fn potential_slope_matches_finite_difference() {
    let v = SelfSimilarSolution::calibrated(-0.5, 1.0, 1.0).unwrap();
    let d = 1e-5;
    for (x, t) in [(0.7, 0.1), (-2.0, 0.4), (5.0, 0.6)] {
        let fd = (phi_m(v.value(x + d, t).unwrap(), -0.5)
            - phi_m(v.value(x - d, t).unwrap(), -0.5))
            / (2.0 * d);
        assert_relative_eq!(v.potential_slope(x, t).unwrap(), fd, max_relative = 1e-4);
    }
    let far = 1e9;
    assert_eq!(v.potential_slope(far, 0.5).unwrap(), -1.0);
    assert_eq!(v.potential_slope(-far, 0.5).unwrap(), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn profiles_are_positive_and_decreasing(m in -0.9f64..-0.1, eta in 0.5f64..2.0) {
        let c = integrate_profile(m, eta, 20.0, default_dr(m, eta)).unwrap();
        let checks = check_profile(&c);
        prop_assert!(checks.positive && checks.strictly_decreasing);
        prop_assert!(checks.decay_ratio < 1.0);
    }

    #[test]
    fn calibration_scales_mass(mu in 0.2f64..5.0) {
        let eta = calibrate_eta(-0.5, mu, A1_ORACLE).unwrap();
        let back = calibrate_eta(-0.5, 1.0, A1_ORACLE).unwrap();
        // mass scales as eta^{(1+m)/2}, so eta scales as mu^{2/(1+m)} = mu^4 at m = -1/2
        prop_assert!((eta / back - mu.powi(4)).abs() < 1e-9 * mu.powi(4));
    }
}
