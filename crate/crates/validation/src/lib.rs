//! Acceptance criteria, each evaluated end to end against the core library.
//!
//! Every criterion returns a [`Criterion`] with the measured quantities in its
//! summary; thresholds are fixed here and never read from configuration.

use vfd_core::experiments::{self, ExperimentConfig, FluxSpec, InitialDatum, Resolution};
use vfd_core::selfsim::{self, SelfSimilarSolution};
use vfd_core::solver::{self, BoundaryKind, BoundarySpec, Controls, TimeFn};
use vfd_core::{green, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub summary: String,
}

impl Criterion {
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("{status} [{:2}] {}: {}", self.id, self.title, self.summary)
    }
}

type Eval = fn() -> Result<(bool, String)>;

const CRITERIA: [(u8, &str, Eval); 14] = [
    (1, "profile decay bound", profile_bound),
    (2, "mass calibration", mass_calibration),
    (3, "self-similar mass law", self_similar_mass),
    (4, "slope limit and sandwich", slope_limit),
    (5, "Green identities", green_identities),
    (6, "solver oracle order", solver_oracle),
    (7, "mass law", mass_law),
    (8, "extinction time", extinction),
    (9, "expanding-domain convergence", expanding_domain),
    (10, "far-field slope", far_field_slope),
    (11, "Dirichlet-Neumann equality", dirichlet_neumann),
    (12, "orderings", orderings),
    (13, "step-flux composition", composition),
    (14, "barrier", barrier),
];

/// Evaluates criterion `id` (1 to 14). Numerical errors count as failures.
pub fn evaluate(id: u8) -> Criterion {
    let (id, title, eval) = CRITERIA
        .iter()
        .copied()
        .find(|c| c.0 == id)
        .expect("criterion ids run from 1 to 14");
    let (passed, summary) = match eval() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Criterion {
        id,
        title,
        passed,
        summary,
    }
}

pub fn ids() -> impl Iterator<Item = u8> {
    CRITERIA.iter().map(|c| c.0)
}

fn profile_bound() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for m in [-0.2, -0.5, -0.8] {
        for eta in [0.5, 1.0, 2.0] {
            let curve = selfsim::default_profile(m, eta)?;
            worst = worst.max(selfsim::check_profile(&curve).decay_ratio);
        }
    }
    let closed_form = (selfsim::decay_bound(-0.5) - (2.0f64 / 3.0).powf(2.0 / 3.0)).abs();
    Ok((
        worst < 1.0 && closed_form < 1e-15,
        format!(
            "max r^(2/(1-m)) f / bound = {worst:.6} (< 1), bound(-1/2) - (2/3)^(2/3) = {closed_form:.1e}"
        ),
    ))
}

fn mass_calibration() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for m in [-0.2, -0.5] {
        let (_, unit_mass) = selfsim::unit_profile(m, 1e-3, 1e-4)?;
        for mu in [0.5, 1.0, 2.0] {
            let eta = selfsim::calibrate_eta(m, mu, unit_mass.total())?;
            // Independent grid: half the natural step, finer cutoff.
            let dr = 0.5 * selfsim::default_dr(m, eta);
            let curve = selfsim::integrate_profile_until(m, eta, dr, 1e-5)?;
            let mass = selfsim::profile_mass(&curve)?.total();
            worst = worst.max((mass - mu).abs() / mu);
        }
    }
    Ok((
        worst < 5e-3,
        format!("max |mass - mu| / mu = {worst:.3e} (< 5e-3)"),
    ))
}

fn self_similar_mass() -> Result<(bool, String)> {
    let (mu, t_ext) = (1.0, 1.0);
    let v = SelfSimilarSolution::calibrated(-0.5, mu, t_ext)?;
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.5 * t_ext] {
        let mass = v.spatial_mass(t, 200_000)?;
        let predicted = 2.0 * mu * (t_ext - t);
        worst = worst.max((mass - predicted).abs() / predicted);
    }
    Ok((
        worst < 1e-2,
        format!("max relative deviation from 2 mu (T - t) = {worst:.3e} (< 1e-2)"),
    ))
}

fn slope_limit() -> Result<(bool, String)> {
    let (m, mu) = (-0.5, 1.0);
    let curve = selfsim::calibrated_profile(m, mu)?;
    let fit = selfsim::fit_sandwich(&curve, mu, 2.0)?;
    let w50 = selfsim::asymptotic_slope(&curve, 50.0)?;
    let rel = (w50 - fit.w_limit).abs() / fit.w_limit;
    let monotone = fit.max_w_decrease <= 0.0;
    let sandwich = fit.upper_violation <= 0.0 && fit.lower_violation <= 0.0;
    Ok((
        monotone && sandwich && rel < 0.02,
        format!(
            "w nondecreasing: {monotone}; w(50) = {w50:.5} vs limit {:.1}, relative gap {rel:.4} (< 0.02); \
             sandwich with a = {:.4} for r >= {:.3}: {sandwich}",
            fit.w_limit, fit.a, fit.r0
        ),
    ))
}

fn green_identities() -> Result<(bool, String)> {
    let ladder = [64, 128, 256];
    let r = 1.0;
    let report = green::identity_report(r, &ladder, 100)?;
    let over_h2 = report
        .reproduction_errors
        .iter()
        .zip(ladder)
        .map(|(e, n)| e / (2.0 * r / n as f64).powi(2))
        .fold(0.0, f64::max);
    let order = report
        .observed_orders
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let passed = over_h2 <= 1.0
        && order >= 1.8
        && report.star_error <= 1e-6
        && report.averaged_kernel_error <= 1e-12;
    Ok((
        passed,
        format!(
            "max |D2 G f - f| / h^2 = {over_h2:.2e} (<= 1), G_R order {order:.3} (>= 1.8), \
             |G*(2) - x^2| = {:.1e} (<= 1e-6), H identity {:.1e} on {} triples (<= 1e-12)",
            report.star_error, report.averaged_kernel_error, report.triples
        ),
    ))
}

/// Max error against `v` over `[0, T/2]` for matched Dirichlet data on `[-4, 4]`
/// with `dt = h²/2`.
pub fn solver_oracle_errors(cells: &[usize]) -> Result<Vec<f64>> {
    let (m, t_ext, r) = (-0.5, 1.0, 4.0);
    let v = std::sync::Arc::new(SelfSimilarSolution::calibrated(m, 1.0, t_ext)?);
    cells
        .iter()
        .map(|&n| {
            let grid = vfd_core::grid::UniformGrid::new(r, n)?;
            let h = grid.h();
            let initial = solver::make_initial(|x| v.value(x, 0.0).unwrap(), 0.0, grid)?;
            let (vl, vr) = (v.clone(), v.clone());
            let bc = BoundarySpec::dirichlet(
                TimeFn::custom(move |t| vl.value(-r, t).unwrap()),
                TimeFn::custom(move |t| vr.value(r, t).unwrap()),
            );
            let controls = Controls {
                dt_initial: Some(0.5 * h * h),
                dt_max: 0.5 * h * h,
                fixed_dt: true,
                ..Controls::default()
            };
            let traj = solver::solve(initial, &bc, m, 0.5 * t_ext, &controls)?;
            let mut worst: f64 = 0.0;
            for s in &traj.states {
                for (j, u) in s.u.iter().enumerate() {
                    worst = worst.max((u - v.value(grid.x(j), s.t)?).abs());
                }
            }
            Ok(worst)
        })
        .collect()
}

fn solver_oracle() -> Result<(bool, String)> {
    let errors = solver_oracle_errors(&[40, 80, 160, 320])?;
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        min_order >= 1.8,
        format!(
            "errors {:?}, orders {:?} (min {min_order:.3} >= 1.8)",
            errors
                .iter()
                .map(|e| format!("{e:.3e}"))
                .collect::<Vec<_>>(),
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()
        ),
    ))
}

fn neumann_mass_deviation(cfg: &ExperimentConfig) -> Result<f64> {
    let r = *cfg.r_list.last().unwrap();
    let traj = experiments::run_single(cfg, r, BoundaryKind::NeumannFlux, cfg.window.t_end, &[])?;
    Ok(experiments::mass_law_check(&traj, cfg, false)?
        .iter()
        .filter(|row| row.t >= cfg.window.t_start && row.t <= cfg.window.t_end)
        .map(|row| row.deviation)
        .fold(0.0, f64::max))
}

fn mass_law() -> Result<(bool, String)> {
    let constant = neumann_mass_deviation(&ExperimentConfig::standard())?;
    let mut general = ExperimentConfig::standard();
    general.f = FluxSpec::Affine {
        intercept: 1.0,
        slope: 1.0,
    };
    let general = neumann_mass_deviation(&general)?;
    Ok((
        constant < 1e-2 && general < 2e-2,
        format!(
            "constant mu deviation {constant:.3e} (< 1e-2), (f, g) = (1 + t, 1) deviation {general:.3e} (< 2e-2)"
        ),
    ))
}

fn extinction() -> Result<(bool, String)> {
    let report = experiments::extinction(&ExperimentConfig::standard())?;
    let est = report.extinction.expect("extinction estimate");
    let ratio = report
        .check("doubled_flux_ratio_error")
        .map_or(f64::NAN, |c| c.value);
    Ok((
        est.relative_error < 0.1 && ratio < 0.05,
        format!(
            "T_est = {:.5} vs T = {:.5} (relative {:.2e} < 0.1), doubled-mu ratio error {ratio:.2e} (< 0.05)",
            est.estimated, est.predicted, est.relative_error
        ),
    ))
}

fn expanding_domain() -> Result<(bool, String)> {
    let report = experiments::expanding_domain(&ExperimentConfig::standard())?;
    let d = &report.d_k;
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let last = *d.last().unwrap();
    Ok((
        decreasing && last < 1e-2,
        format!(
            "d_k = {:?} over R = {:?}: decreasing {decreasing}, d_last = {last:.3e} (< 1e-2), fitted decay R^-{:.2}",
            d.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            report.r_list,
            report.fitted_decay.unwrap_or(f64::NAN)
        ),
    ))
}

fn far_field_slope() -> Result<(bool, String)> {
    let report = experiments::far_field_slope(&ExperimentConfig::standard())?;
    let profile = experiments::slope_deviation_profile(&report.slope_rows);
    let at_075 = profile[0].1;
    Ok((
        at_075 < 0.05,
        format!(
            "max |u^m/(m|x|) + mu| at |x| = {:.0}, t in [0.1, 0.5]: {at_075:.4} (< 0.05); at |x| = {:.0}: {:.4}",
            profile[0].0,
            profile.last().unwrap().0,
            profile.last().unwrap().1
        ),
    ))
}

fn dirichlet_neumann() -> Result<(bool, String)> {
    let report = experiments::compare_dirichlet_neumann(&ExperimentConfig::standard())?;
    let d = &report.d_k;
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let last = *d.last().unwrap();
    Ok((
        decreasing && last < 1e-2,
        format!(
            "sup-window differences {:?} over R = {:?}: decreasing {decreasing}, at R = 40: {last:.3e} (< 1e-2)",
            d.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            report.r_list
        ),
    ))
}

fn orderings() -> Result<(bool, String)> {
    let base = ExperimentConfig::standard();
    // Corollary: larger mu gives the smaller solution.
    let cor = experiments::ordered_pair_check(
        &base.clone().with_mu(1.5),
        &base,
        BoundaryKind::Dirichlet,
        40.0,
    )?;
    // Lemma: larger outflux and smaller datum give the smaller solution.
    let mut lesser = base.clone();
    lesser.f = FluxSpec::constant(1.5);
    lesser.initial = InitialDatum::Bump {
        mass: 1.8,
        width: 2.0,
    };
    let lemma = experiments::ordered_pair_check(&lesser, &base, BoundaryKind::NeumannFlux, 40.0)?;
    Ok((
        cor.passed && lemma.passed,
        format!(
            "mu 1.5 vs 1: excess {:.1e}, margin {:.2e}; f 1.5 vs 1 with smaller datum: excess {:.1e}, margin {:.2e} \
             (tolerance 10 (h^2 + dt) = {:.1e})",
            cor.max_excess, cor.min_margin, lemma.max_excess, lemma.min_margin, cor.tolerance
        ),
    ))
}

fn composition() -> Result<(bool, String)> {
    let mut cfg = ExperimentConfig::standard();
    cfg.f = FluxSpec::Step {
        breaks: vec![0.0, 0.3],
        values: vec![1.0, 2.0],
    };
    cfg.g = cfg.f.clone();
    let smooth = FluxSpec::Affine {
        intercept: 1.0,
        slope: 1.0,
    };
    let report = experiments::step_flux_composition(&cfg, &smooth, &[2, 3, 4])?;
    Ok((
        report.all_passed(),
        format!(
            "composed vs direct {:.2e} (< 1e-2); min(v_(k+1) - v_k) over k = 2, 3, 4: {:?} (>= -{:.1e})",
            report.composed_vs_direct,
            report
                .envelope_min_increment
                .iter()
                .map(|v| format!("{v:.3e}"))
                .collect::<Vec<_>>(),
            report.tolerance_order
        ),
    ))
}

fn barrier() -> Result<(bool, String)> {
    let mut cfg = ExperimentConfig::standard();
    cfg.resolution = Resolution { h: 0.025, dt: 5e-4 };
    let mut worst = f64::NEG_INFINITY;
    for kind in [BoundaryKind::Dirichlet, BoundaryKind::NeumannFlux] {
        for &r in &cfg.r_list {
            let traj = experiments::run_single(&cfg, r, kind, cfg.window.t_end, &[])?;
            worst = worst.max(solver::barrier_check(&traj, cfg.mu0, cfg.r0));
        }
    }
    if !worst.is_finite() {
        return Err(Error::InvalidInput("no nodes beyond R0".into()));
    }
    Ok((
        worst <= 1e-6,
        format!(
            "max (u - (mu0 |m| (|x| - R0))^(1/m)) beyond R0 = {worst:.3e} (<= 1e-6), h = 0.025, both boundary kinds"
        ),
    ))
}
