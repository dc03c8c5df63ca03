use approx::assert_relative_eq;
use vfd_core::experiments::*;
use vfd_core::solver::{BoundaryKind, TimeFn};
use vfd_core::Error;

/// Coarse variant of the standard fixture so the suite stays fast.
fn coarse() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::standard();
    cfg.r_list = vec![5.0, 10.0];
    cfg.resolution = Resolution { h: 0.1, dt: 4e-3 };
    cfg.window.x_probes = 21;
    cfg
}

fn self_similar_fixture() -> ExperimentConfig {
    let mut cfg = coarse();
    cfg.initial = InitialDatum::SelfSimilar {
        mu: 1.0,
        t_ext: 1.0,
    };
    cfg
}

#[test]
fn self_similar_data_are_reproduced_on_every_domain() {
    let cfg = self_similar_fixture();
    let check = self_similar_check(&cfg).unwrap();
    for e in check.dirichlet_errors.iter().chain(&check.neumann_errors) {
        assert!(*e < check.discretization_tol, "{check:?}");
    }
}

#[test]
fn expanding_domain_reports_decreasing_differences() {
    let report = expanding_domain(&coarse()).unwrap();
    assert_eq!(report.d_k.len(), 1);
    assert_eq!(report.d_k_refined.len(), 1);
    assert!(report.check("d_k_decreasing").is_some());
    assert!(report.check("d_k_last").is_some());
    assert!(!report.mass_rows.is_empty());
    let mut csv = Vec::new();
    report.write_dk_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("k,R,d_k\n"));
}

#[test]
fn identical_configurations_are_trivially_ordered() {
    let cfg = coarse();
    let r = ordered_pair_check(&cfg, &cfg, BoundaryKind::Dirichlet, 5.0).unwrap();
    assert_eq!(r.max_excess, 0.0);
    assert_eq!(r.min_margin, 0.0);
    assert!(r.passed);
}

#[test]
fn larger_outflux_gives_smaller_solution() {
    let cfg = coarse();
    let lesser = cfg.clone().with_mu(1.5);
    for kind in [BoundaryKind::Dirichlet, BoundaryKind::NeumannFlux] {
        let r = ordered_pair_check(&lesser, &cfg, kind, 10.0).unwrap();
        assert_eq!(r.max_excess, 0.0, "{kind:?}");
        assert!(r.min_margin > 0.0, "{kind:?}");
    }
}

#[test]
fn unordered_hypotheses_are_rejected() {
    let cfg = coarse();
    let smaller_flux = cfg.clone().with_mu(0.5);
    assert!(matches!(
        ordered_pair_check(&smaller_flux, &cfg, BoundaryKind::Dirichlet, 5.0),
        Err(Error::HypothesisViolated(_))
    ));
    let mut bigger_datum = cfg.clone();
    bigger_datum.initial = InitialDatum::Bump {
        mass: 3.0,
        width: 2.0,
    };
    assert!(matches!(
        ordered_pair_check(&bigger_datum, &cfg, BoundaryKind::Dirichlet, 5.0),
        Err(Error::HypothesisViolated(_))
    ));
}

#[test]
fn single_interval_composition_is_the_direct_solve() {
    let cfg = coarse();
    let composed = composed_solve(&cfg, 5.0).unwrap();
    let direct = run_single(&cfg, 5.0, BoundaryKind::Dirichlet, cfg.window.t_end, &[]).unwrap();
    assert_eq!(
        sample_window(&composed, &cfg.window).unwrap(),
        sample_window(&direct, &cfg.window).unwrap()
    );
}

#[test]
fn step_composition_and_envelopes() {
    let mut cfg = coarse();
    cfg.f = FluxSpec::Step {
        breaks: vec![0.0, 0.3],
        values: vec![1.0, 2.0],
    };
    cfg.g = cfg.f.clone();
    let smooth = FluxSpec::Affine {
        intercept: 1.0,
        slope: 1.0,
    };
    let report = step_flux_composition(&cfg, &smooth, &[1, 2, 3]).unwrap();
    assert_eq!(report.composed_vs_direct, 0.0);
    assert_eq!(report.envelope_min_increment.len(), 2);
    assert!(report.all_passed(), "{report:?}");
}

#[test]
fn dyadic_envelope_dominates_and_decreases_with_level() {
    let smooth = FluxSpec::Affine {
        intercept: 1.0,
        slope: 2.0,
    };
    let f = smooth.to_time_fn();
    let coarse = dyadic_envelope(&smooth, 1.0, 2).to_time_fn();
    let fine = dyadic_envelope(&smooth, 1.0, 3).to_time_fn();
    for i in 0..100 {
        let t = i as f64 / 100.0;
        assert!(fine.eval(t) >= f.eval(t) - 1e-12);
        assert!(coarse.eval(t) >= fine.eval(t) - 1e-12);
    }
    assert_relative_eq!(coarse.eval(0.0), 1.5, max_relative = 1e-12);
}

#[test]
fn neumann_mass_law_and_zero_flux() {
    let cfg = coarse();
    let traj = run_single(&cfg, 10.0, BoundaryKind::NeumannFlux, 0.5, &[]).unwrap();
    let rows = mass_law_check(&traj, &cfg, false).unwrap();
    assert!(rows.iter().all(|r| r.deviation < 1e-6), "{rows:?}");

    let still = cfg.clone().with_mu(0.0);
    let traj = run_single(&still, 10.0, BoundaryKind::NeumannFlux, 0.5, &[]).unwrap();
    let m0 = traj.states[0].mass();
    let drift = traj
        .states
        .iter()
        .map(|s| (s.mass() - m0).abs() / m0)
        .fold(0.0, f64::max);
    assert!(drift < 1e-8, "relative mass drift {drift:e}");
    for row in &traj.ledger.rows {
        assert!(row.scheme_flux_integral.abs() < 1e-11);
        // one-sided differences carry O(h²) truncation error
        assert!(
            row.flux_left.abs() < 1e-4 && row.flux_right.abs() < 1e-4,
            "{row:?}"
        );
    }
}

#[test]
fn unequal_outflux_moves_mass_to_the_weaker_side() {
    let mut cfg = coarse();
    cfg.f = FluxSpec::constant(2.0);
    cfg.g = FluxSpec::constant(0.5);
    let traj = run_single(&cfg, 10.0, BoundaryKind::NeumannFlux, 0.4, &[]).unwrap();
    let start = traj.states[0].first_moment();
    let end = traj.final_state().first_moment();
    assert!(end < start, "first moment {start} -> {end}");
}

#[test]
fn predicted_extinction_integrates_the_outflux() {
    let t = predicted_extinction(&TimeFn::Constant(1.0), &TimeFn::Constant(1.0), 2.0).unwrap();
    assert_relative_eq!(t, 1.0, max_relative = 1e-12);
    // ∫(2 + t) = t² / 2 + 2t = 1
    let t = predicted_extinction(
        &TimeFn::Affine {
            intercept: 1.0,
            slope: 1.0,
        },
        &TimeFn::Constant(1.0),
        1.0,
    )
    .unwrap();
    assert_relative_eq!(t, -2.0 + 6f64.sqrt(), max_relative = 1e-10);
    // piecewise: 2 on [0, 0.25), 4 afterwards; mass 1.5 is gone at 0.25 + 1/4
    let step = TimeFn::step(vec![0.0, 0.25], vec![1.0, 2.0]);
    let t = predicted_extinction(&step, &step, 1.5).unwrap();
    assert_relative_eq!(t, 0.5, max_relative = 1e-10);
}

#[test]
fn extinction_time_with_step_flux() {
    let mut cfg = coarse();
    cfg.f = FluxSpec::Step {
        breaks: vec![0.0, 0.25],
        values: vec![1.0, 2.0],
    };
    cfg.g = cfg.f.clone();
    cfg.window.t_end = 0.4;
    let mass = cfg.initial_mass(10.0).unwrap();
    let predicted = predicted_extinction(&cfg.f.to_time_fn(), &cfg.g.to_time_fn(), mass).unwrap();
    let traj = run_to_extinction(&cfg, 10.0).unwrap();
    let estimated = extinction_time(&traj).unwrap();
    assert!((estimated - predicted).abs() < 0.01 * predicted);
}

#[test]
fn error_cases() {
    let mut wide = coarse();
    wide.window.half_width = 6.0;
    assert!(matches!(
        expanding_domain(&wide),
        Err(Error::WindowOutsideDomain { .. })
    ));

    let cfg = coarse();
    let traj = run_single(&cfg, 5.0, BoundaryKind::Dirichlet, 0.5, &[]).unwrap();
    assert!(matches!(
        slope_at_infinity(&traj, &cfg, &[0.2]),
        Err(Error::ProbeInsideWindow { .. })
    ));
    // Ten percent of the run is not near extinction.
    let early = run_single(&cfg, 5.0, BoundaryKind::NeumannFlux, 0.1, &[]).unwrap();
    assert!(matches!(
        extinction_time(&early),
        Err(Error::NotNearExtinction { .. })
    ));
    let mut bad = coarse();
    bad.r_list = vec![10.0, 5.0];
    assert!(bad.validate().is_err());
}

#[test]
fn slopes_are_symmetric_for_even_data() {
    let cfg = coarse();
    let traj = run_single(&cfg, 10.0, BoundaryKind::Dirichlet, 0.5, &[]).unwrap();
    let rows = slope_at_infinity(&traj, &cfg, &[0.75, 0.9]).unwrap();
    for pair in rows.chunks(2) {
        assert_eq!(pair[0].x, -pair[1].x);
        assert_relative_eq!(pair[0].slope, -pair[1].slope, max_relative = 1e-10);
        assert_relative_eq!(pair[0].deviation, pair[1].deviation, max_relative = 1e-8);
    }
}

#[test]
fn fixture_helpers() {
    let spec = FluxSpec::Step {
        breaks: vec![0.0, 1.0],
        values: vec![1.0, 3.0],
    };
    assert_eq!(spec.min_on(2.0), 1.0);
    let bad = FluxSpec::Step {
        breaks: vec![0.5],
        values: vec![1.0],
    };
    assert!(bad.validate("f").is_err());
    assert_relative_eq!(Resolution { h: 0.1, dt: 0.01 }.discretization_tol(), 0.02);
    assert_eq!(Window::standard().refined().ts().len(), 9);
}
