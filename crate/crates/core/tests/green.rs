use approx::assert_relative_eq;
use proptest::prelude::*;
use vfd_core::green::*;

#[test]
fn identity_report_shows_second_order() {
    let report = identity_report(1.0, &[64, 128, 256], 100).unwrap();
    for (&e, &n) in report.reproduction_errors.iter().zip(&report.ladder) {
        let h = 2.0 / n as f64;
        assert!(e < 1e-3 * h * h, "reproduction error {e} at {n} cells");
    }
    for o in &report.observed_orders {
        assert!((o - 2.0).abs() < 0.02, "order {o}");
    }
    assert!(report.star_error < 1e-12);
    assert!(report.averaged_kernel_error < 1e-12);
    assert_eq!(report.triples, 100);
}

#[test]
fn identity_report_needs_levels() {
    assert!(identity_report(1.0, &[], 10).is_err());
}

#[test]
fn second_difference_reproduces_input_for_several_functions() {
    let r = 2.0;
    let op = GreenOperator::new(r, 200).unwrap();
    let h = op.grid().h();
    let fs: [fn(f64) -> f64; 4] = [
        |_| 1.0,
        |x| x,
        |x| (std::f64::consts::PI * x / 2.0).sin(),
        |x| (x * x).exp() * (1.0 + 0.3 * x),
    ];
    for f in fs {
        let s = op.sample(f);
        let g = op.apply_green(&s).unwrap();
        let d2 = second_difference(&g, h);
        for j in 1..200 {
            assert!((d2[j] - s[j]).abs() < 1e-8 * (1.0 + s[j].abs()));
        }
        assert_eq!(g[0], 0.0);
        assert_eq!(g[200], 0.0);
    }
}

#[test]
fn averaged_kernel_closed_form_examples() {
    assert_relative_eq!(averaged_kernel(1.0, 0.0), 0.5);
    assert_eq!(averaged_kernel(1.0, 1.5), 0.0);
    assert_eq!(averaged_kernel(1.0, -1.0), 0.0);
}

#[test]
fn decomposition_reproduces_green_star() {
    let m = -0.5;
    let f = |x: f64| (1.0 + x.abs()).powf(1.0 / m);
    let mut normalised = Vec::new();
    let mut relative = Vec::new();
    for r in [10.0, 20.0, 40.0] {
        let op = GreenOperator::new(r, (40.0 * r) as usize).unwrap();
        let s = op.sample(f);
        let hyp = DecayHypothesis { m, c: 1.0, r0: 1.0 };
        let d = op.asymptotic_decomposition(&s, &hyp).unwrap();
        assert!(d.decay_violation.is_none());
        let star = op.apply_green_star(&s).unwrap();
        let scale = star.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in d.sum().iter().zip(&star) {
            assert!((a - b).abs() <= 1e-8 * scale);
        }
        // f is even, so the boundary correction vanishes
        assert!(d.i3.iter().all(|v| v.abs() < 1e-12));
        let total = 2.0; // ∫(1+|y|)^{-2} dy
        let remainder: Vec<(f64, f64)> =
            d.x.iter()
                .zip(&star)
                .filter(|(x, _)| x.abs() <= r / 2.0)
                .map(|(x, g)| (x.abs(), (g - 0.5 * x.abs() * total).abs()))
                .collect();
        normalised.push(
            remainder
                .iter()
                .map(|(x, e)| e / (1.0 + x.powf(2.0 + 1.0 / m)))
                .fold(0.0, f64::max),
        );
        relative.push(
            remainder
                .iter()
                .filter(|(x, _)| *x >= r / 4.0)
                .map(|(x, e)| e / x)
                .fold(0.0, f64::max),
        );
    }
    // At m = -1/2 the weight is constant and the remainder grows like log(R)/2 ...
    for w in normalised.windows(2) {
        let step = w[1] - w[0];
        assert!(
            step > 0.25 && step < 0.5 * 2f64.ln() + 0.01,
            "{normalised:?}"
        );
    }
    // ... which is still o(|x|).
    assert!(
        relative.windows(2).all(|w| w[1] < 0.8 * w[0]),
        "{relative:?}"
    );
    assert!(relative[2] < 0.3, "{relative:?}");
}

#[test]
fn decomposition_flags_slow_decay() {
    let op = GreenOperator::new(10.0, 200).unwrap();
    let s = op.sample(|x| 1.0 / (1.0 + x.abs()));
    let hyp = DecayHypothesis {
        m: -0.5,
        c: 1.0,
        r0: 1.0,
    };
    let d = op.asymptotic_decomposition(&s, &hyp).unwrap();
    assert!(d.decay_violation.is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn apply_green_is_linear(
        a in -5.0f64..5.0,
        b in -5.0f64..5.0,
        k in 1.0f64..4.0,
        p in -1.0f64..1.0,
    ) {
        let op = GreenOperator::new(1.5, 60).unwrap();
        let f = op.sample(|x| (k * x).cos());
        let g = op.sample(|x| x * x + p * x);
        let combo: Vec<f64> = f.iter().zip(&g).map(|(u, v)| a * u + b * v).collect();
        let lhs = op.apply_green(&combo).unwrap();
        let gf = op.apply_green(&f).unwrap();
        let gg = op.apply_green(&g).unwrap();
        for j in 0..lhs.len() {
            let rhs = a * gf[j] + b * gg[j];
            prop_assert!((lhs[j] - rhs).abs() <= 1e-13 * (1.0 + rhs.abs()) * 10.0);
        }
    }

    #[test]
    fn averaged_kernel_identity(r_big in 0.1f64..50.0, s in 0.01f64..1.0, t in -1.0f64..1.0) {
        let r = s * r_big;
        let y = t * r_big;
        let lhs = 0.5 * (kernel(r_big, r, y).unwrap() + kernel(r_big, -r, y).unwrap())
            - kernel(r_big, 0.0, y).unwrap();
        prop_assert!((lhs - averaged_kernel(r, y)).abs() <= 1e-12 * r_big.max(1.0));
    }

    #[test]
    fn kernel_is_symmetric(r_big in 0.1f64..10.0, s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let (x, y) = (s * r_big, t * r_big);
        prop_assert_eq!(kernel(r_big, x, y).unwrap(), kernel(r_big, y, x).unwrap());
    }
}
