//! Numerical reproductions of the convergence, mass-loss, extinction, slope,
//! equality, ordering and composition statements.
//!
//! Every solve uses a fixed time step and lands on the window probe times, so
//! runs that are compared share their time grid exactly.

mod fixtures;
mod report;

use std::sync::Arc;

use rayon::prelude::*;

pub use fixtures::{ExperimentConfig, FluxSpec, InitialDatum, Resolution, Tolerances, Window};
pub use report::{
    Check, ConvergenceReport, ExtinctionEstimate, FluxCheck, MassRow, SelfSimilarCheck, SlopeRow,
};

use crate::selfsim::SelfSimilarSolution;
use crate::solver::{solve, BoundaryKind, BoundarySpec, RunStatus, TimeFn, Trajectory};
use crate::{phi_m, Error, Result};

/// Interpolates `traj` at every `(x, t)` of the window (time-major order).
///
/// Times are matched to recorded snapshots, which must lie within `1e-9` of the probe time.
pub fn sample_window(traj: &Trajectory, window: &Window) -> Result<Vec<f64>> {
    let grid = traj.grid();
    if window.half_width > grid.half_width() {
        return Err(Error::WindowOutsideDomain {
            window: window.half_width,
            half_width: grid.half_width(),
        });
    }
    let xs = window.xs();
    let mut out = Vec::with_capacity(xs.len() * window.t_probes);
    for t in window.ts() {
        let s = traj.nearest_state(t);
        if (s.t - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "no snapshot at probe time {t} (nearest {})",
                s.t
            )));
        }
        out.extend(xs.iter().map(|&x| grid.interpolate(&s.u, x)));
    }
    Ok(out)
}

fn sup_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Solves `cfg` on `[-R, R]` with the given boundary kind up to `t_end`.
pub fn run_single(
    cfg: &ExperimentConfig,
    half_width: f64,
    kind: BoundaryKind,
    t_end: f64,
    extra_landing: &[f64],
) -> Result<Trajectory> {
    let exact = cfg.self_similar()?;
    run_with(cfg, half_width, kind, t_end, extra_landing, exact.as_ref())
}

fn run_with(
    cfg: &ExperimentConfig,
    half_width: f64,
    kind: BoundaryKind,
    t_end: f64,
    extra_landing: &[f64],
    exact: Option<&Arc<SelfSimilarSolution>>,
) -> Result<Trajectory> {
    let initial = cfg.initial_state(half_width, exact.map(|v| v.as_ref()))?;
    let bc = match kind {
        BoundaryKind::Dirichlet => cfg.dirichlet_bc(half_width, exact),
        BoundaryKind::NeumannFlux => cfg.neumann_bc(half_width, exact),
    };
    solve(initial, &bc, cfg.m, t_end, &cfg.controls(extra_landing))
}

/// Solves on every `R` of `cfg.r_list` in parallel, up to the window end.
pub fn run_family(cfg: &ExperimentConfig, kind: BoundaryKind) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let exact = cfg.self_similar()?;
    cfg.r_list
        .par_iter()
        .map(|&r| run_with(cfg, r, kind, cfg.window.t_end, &[], exact.as_ref()))
        .collect()
}

/// Window errors against the self-similar solution, one per `R`.
fn exact_window_errors(
    family: &[Trajectory],
    window: &Window,
    exact: &SelfSimilarSolution,
) -> Result<Vec<f64>> {
    let mut ref_vals = Vec::new();
    for t in window.ts() {
        for x in window.xs() {
            ref_vals.push(exact.value(x, t)?);
        }
    }
    family
        .iter()
        .map(|tr| Ok(sup_difference(&sample_window(tr, window)?, &ref_vals)))
        .collect()
}

/// Dirichlet expanding-domain study.
///
/// Asserts that `d_k` decreases beyond the first pair and that the last
/// difference is below `tolerances.compact`. Mass-law and slope diagnostics of
/// the largest domain are attached for reference.
pub fn expanding_domain(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let family = run_family(cfg, BoundaryKind::Dirichlet)?;
    let mut report = ConvergenceReport::new("expanding_domain", cfg.r_list.clone());
    let refined = cfg.window.refined();
    for pair in family.windows(2) {
        report.d_k.push(sup_difference(
            &sample_window(&pair[0], &cfg.window)?,
            &sample_window(&pair[1], &cfg.window)?,
        ));
        report.d_k_refined.push(sup_difference(
            &sample_window(&pair[0], &refined)?,
            &sample_window(&pair[1], &refined)?,
        ));
    }
    report.fitted_decay = report::fitted_decay(&cfg.r_list, &report.d_k);
    push_convergence_checks(&mut report, cfg.tolerances.compact, "d_k");

    let largest = family.last().expect("nonempty R_list");
    report.mass_rows = mass_law_check(largest, cfg, true)?;
    let mass_dev = max_deviation_on(&report.mass_rows, &cfg.window);
    report
        .checks
        .push(Check::below("mass_law_deviation", mass_dev, cfg.tolerances.mass).informational());
    report.slope_rows = slope_at_infinity(largest, cfg, &[0.75, 0.8, 0.85, 0.9, 0.95])?;
    report.checks.push(
        Check::below(
            "slope_deviation_at_0.75R",
            slope_deviation_at(&report.slope_rows, 0.75 * largest.grid().half_width()),
            cfg.tolerances.slope,
        )
        .informational(),
    );

    if let Some(exact) = cfg.self_similar()? {
        let errs = exact_window_errors(&family, &cfg.window, &exact)?;
        let worst = errs.iter().copied().fold(0.0, f64::max);
        report.checks.push(
            Check::below(
                "max_error_vs_exact",
                worst,
                cfg.resolution.discretization_tol(),
            )
            .informational(),
        );
    }
    Ok(report)
}

fn push_convergence_checks(report: &mut ConvergenceReport, tol: f64, label: &str) {
    let d = &report.d_k;
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let last = d.last().copied().unwrap_or(f64::NAN);
    report
        .checks
        .push(Check::flag(format!("{label}_decreasing"), decreasing, last));
    report
        .checks
        .push(Check::below(format!("{label}_last"), last, tol));
    let stability = report
        .d_k
        .iter()
        .zip(&report.d_k_refined)
        .map(|(a, b)| (a - b).abs() / a.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    report.checks.push(
        Check::below(format!("{label}_probe_refinement_change"), stability, 0.1).informational(),
    );
}

fn max_deviation_on(rows: &[MassRow], window: &Window) -> f64 {
    rows.iter()
        .filter(|r| r.t >= window.t_start - 1e-12 && r.t <= window.t_end + 1e-12)
        .map(|r| r.deviation)
        .fold(0.0, f64::max)
}

fn slope_deviation_at(rows: &[SlopeRow], abs_x: f64) -> f64 {
    rows.iter()
        .filter(|r| (r.x.abs() - abs_x).abs() < 1e-9 * abs_x.max(1.0))
        .map(|r| r.deviation)
        .fold(0.0, f64::max)
}

/// `∫_R^∞ (mu0 |m| (x - R0))^{1/m} dx`, the barrier bound on one tail.
pub fn barrier_tail_mass(mu0: f64, m: f64, r0: f64, half_width: f64) -> f64 {
    crate::far_field_tail_mass(mu0, m, half_width - r0)
}

/// Mass law `∫u = ∫u0 - ∫_0^t (f + g)` along `traj`.
///
/// With `tail_completion` the barrier bound on both tails beyond `±R` is added to
/// the domain mass (used for Dirichlet runs, whose domain misses the far field);
/// flux problems are closed on `[-R, R]` and need none. `∫u0` is the recorded
/// initial mass.
pub fn mass_law_check(
    traj: &Trajectory,
    cfg: &ExperimentConfig,
    tail_completion: bool,
) -> Result<Vec<MassRow>> {
    let (f, g) = (cfg.f.to_time_fn(), cfg.g.to_time_fn());
    let half_width = traj.grid().half_width();
    let tail = if tail_completion {
        2.0 * barrier_tail_mass(cfg.mu0, cfg.m, cfg.r0, half_width)
    } else {
        0.0
    };
    let m0 = traj.ledger.initial_mass();
    Ok(traj
        .ledger
        .rows
        .iter()
        .map(|row| {
            let tail = if row.t > 0.0 { tail } else { 0.0 };
            let mass = row.mass + tail;
            let predicted = m0 - f.integral(row.t) - g.integral(row.t);
            MassRow {
                t: row.t,
                mass,
                predicted_mass: predicted,
                deviation: (mass - predicted).abs() / predicted.abs().max(f64::MIN_POSITIVE),
                tail,
            }
        })
        .collect())
}

/// Root of `∫_0^T (f + g) = mass` by bisection.
pub fn predicted_extinction(f: &TimeFn, g: &TimeFn, mass: f64) -> Result<f64> {
    let drained = |t: f64| f.integral(t) + g.integral(t) - mass;
    let mut hi = 1.0;
    let mut tries = 0;
    while drained(hi) < 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::InvalidInput(
                "boundary fluxes never drain the initial mass".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if drained(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mass fraction below which a run counts as close enough to extinction to extrapolate.
pub const EXTRAPOLATION_FRACTION: f64 = 0.1;

/// Extinction time by a least-squares line through the mass curve over the last
/// 10% of the recorded time span, extended to zero mass.
pub fn extinction_time(traj: &Trajectory) -> Result<f64> {
    extinction_fit(traj).map(|(t, _)| t)
}

fn extinction_fit(traj: &Trajectory) -> Result<(f64, usize)> {
    let rows = &traj.ledger.rows;
    let m0 = traj.ledger.initial_mass();
    let last = rows.last().expect("ledger holds the initial row");
    let fraction = last.mass / m0;
    if traj.status != RunStatus::ExtinctionReached && fraction > EXTRAPOLATION_FRACTION {
        return Err(Error::NotNearExtinction { fraction });
    }
    let t0 = rows[0].t;
    let cut = last.t - 0.1 * (last.t - t0);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.t >= cut)
        .map(|r| (r.t, r.mass))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidInput(
            "too few recorded states near extinction".into(),
        ));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stm: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mm)).sum();
    let slope = stm / stt;
    if !(slope < 0.0) {
        return Err(Error::InvalidInput(
            "mass curve is not decreasing near the end of the run".into(),
        ));
    }
    Ok((mt - mm / slope, pts.len()))
}

/// Flux run on the largest domain until extinction.
pub fn run_to_extinction(cfg: &ExperimentConfig, half_width: f64) -> Result<Trajectory> {
    let t_pred = predicted_extinction(
        &cfg.f.to_time_fn(),
        &cfg.g.to_time_fn(),
        cfg.initial_mass(half_width)?,
    )?;
    let traj = run_single(
        cfg,
        half_width,
        BoundaryKind::NeumannFlux,
        2.0 * t_pred,
        &[],
    )?;
    Ok(traj)
}

fn extinction_estimate(cfg: &ExperimentConfig, traj: &Trajectory) -> Result<ExtinctionEstimate> {
    let m0 = traj.ledger.initial_mass();
    let predicted = predicted_extinction(&cfg.f.to_time_fn(), &cfg.g.to_time_fn(), m0)?;
    let (estimated, fit_points) = extinction_fit(traj)?;
    let last = traj.ledger.rows.last().unwrap();
    Ok(ExtinctionEstimate {
        estimated,
        predicted,
        relative_error: (estimated - predicted).abs() / predicted,
        final_fraction: last.mass / m0,
        fit_points,
    })
}

/// Flux-problem mass law and extinction study on the largest domain.
///
/// Asserts the mass law on the window, the extinction-time error, and that
/// doubling both fluxes changes the estimated extinction time by the predicted
/// ratio (one half for constant fluxes) within 5%.
pub fn extinction(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let r = *cfg.r_list.last().unwrap();
    let mut doubled = cfg.clone();
    doubled.f = scale_flux(&cfg.f, 2.0);
    doubled.g = scale_flux(&cfg.g, 2.0);
    let (base, fast) = rayon::join(
        || run_to_extinction(cfg, r),
        || run_to_extinction(&doubled, r),
    );
    let (base, fast) = (base?, fast?);

    let mut report = ConvergenceReport::new("extinction", vec![r]);
    report.mass_rows = mass_law_check(&base, cfg, false)?;
    report.checks.push(Check::below(
        "mass_law_deviation",
        max_deviation_on(&report.mass_rows, &cfg.window),
        cfg.tolerances.mass,
    ));
    let est = extinction_estimate(cfg, &base)?;
    let est_fast = extinction_estimate(&doubled, &fast)?;
    report.checks.push(Check::below(
        "extinction_time_error",
        est.relative_error,
        cfg.tolerances.extinction,
    ));
    // Reduces to 1/2 for constant fluxes.
    let expected_ratio = est_fast.predicted / est.predicted;
    let ratio = est_fast.estimated / est.estimated;
    report.checks.push(Check::below(
        "doubled_flux_ratio_error",
        (ratio - expected_ratio).abs() / expected_ratio,
        0.05,
    ));
    report.extinction = Some(est);
    Ok(report)
}

fn scale_flux(spec: &FluxSpec, k: f64) -> FluxSpec {
    match spec {
        FluxSpec::Constant { value } => FluxSpec::Constant { value: k * value },
        FluxSpec::Affine { intercept, slope } => FluxSpec::Affine {
            intercept: k * intercept,
            slope: k * slope,
        },
        FluxSpec::Step { breaks, values } => FluxSpec::Step {
            breaks: breaks.clone(),
            values: values.iter().map(|v| k * v).collect(),
        },
    }
}

/// `s(x,t) = u^m/(m x)` at `x = ±frac R` for every window time.
///
/// Each row carries the deviation from `-f(t)` (right) or `g(t)` (left).
pub fn slope_at_infinity(
    traj: &Trajectory,
    cfg: &ExperimentConfig,
    fractions: &[f64],
) -> Result<Vec<SlopeRow>> {
    let grid = traj.grid();
    let r = grid.half_width();
    let (f, g) = (cfg.f.to_time_fn(), cfg.g.to_time_fn());
    let m = traj.m;
    let mut rows = Vec::new();
    for t in cfg.window.ts() {
        let s = traj.nearest_state(t);
        for &frac in fractions {
            let probe = frac * r;
            if probe <= cfg.window.half_width {
                return Err(Error::ProbeInsideWindow {
                    probe,
                    window: cfg.window.half_width,
                });
            }
            if frac > 1.0 {
                return Err(Error::InvalidInput(format!(
                    "probe fraction {frac} lies outside the domain"
                )));
            }
            for x in [-probe, probe] {
                let u = grid.interpolate(&s.u, x);
                let slope = phi_m(u, m) / x;
                let expected = if x > 0.0 { -f.eval(s.t) } else { g.eval(s.t) };
                rows.push(SlopeRow {
                    x,
                    t: s.t,
                    slope,
                    expected,
                    deviation: (slope - expected).abs(),
                });
            }
        }
    }
    Ok(rows)
}

/// Largest slope deviation at each probe `|x|`, in increasing `|x|`.
pub fn slope_deviation_profile(rows: &[SlopeRow]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        let ax = r.x.abs();
        match out
            .iter_mut()
            .find(|(x, _)| (x - ax).abs() < 1e-9 * ax.max(1.0))
        {
            Some(e) => e.1 = e.1.max(r.deviation),
            None => out.push((ax, r.deviation)),
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Far-field slope study on the largest Dirichlet domain: asserts the deviation
/// at `0.75 R` is below `tolerances.slope` and shrinks toward the boundary.
pub fn far_field_slope(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let r = *cfg.r_list.last().unwrap();
    let traj = run_single(cfg, r, BoundaryKind::Dirichlet, cfg.window.t_end, &[])?;
    let mut report = ConvergenceReport::new("far_field_slope", vec![r]);
    report.slope_rows = slope_at_infinity(&traj, cfg, &[0.75, 0.8, 0.85, 0.9, 0.95])?;
    let profile = slope_deviation_profile(&report.slope_rows);
    report.checks.push(Check::below(
        "slope_deviation_at_0.75R",
        profile[0].1,
        cfg.tolerances.slope,
    ));
    report.checks.push(Check::flag(
        "slope_deviation_shrinks",
        profile.windows(2).all(|w| w[1].1 <= w[0].1),
        profile.last().unwrap().1,
    ));
    report.flux = Some(flux_at_infinity_check(
        &traj,
        &cfg.f.to_time_fn(),
        &cfg.g.to_time_fn(),
        cfg.window.t_start,
        cfg.window.t_end,
    )?);
    Ok(report)
}

/// Dirichlet and flux problems on every `R`, compared on the window.
///
/// Asserts that the difference decreases with `R` and is below `tolerances.equal`
/// on the largest domain.
pub fn compare_dirichlet_neumann(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let (dir, neu) = rayon::join(
        || run_family(cfg, BoundaryKind::Dirichlet),
        || run_family(cfg, BoundaryKind::NeumannFlux),
    );
    let (dir, neu) = (dir?, neu?);
    let mut report = ConvergenceReport::new("compare_dirichlet_neumann", cfg.r_list.clone());
    let refined = cfg.window.refined();
    for (a, b) in dir.iter().zip(&neu) {
        report.d_k.push(sup_difference(
            &sample_window(a, &cfg.window)?,
            &sample_window(b, &cfg.window)?,
        ));
        report.d_k_refined.push(sup_difference(
            &sample_window(a, &refined)?,
            &sample_window(b, &refined)?,
        ));
    }
    report.fitted_decay = report::fitted_decay(&cfg.r_list, &report.d_k);
    push_convergence_checks(&mut report, cfg.tolerances.equal, "difference");
    report.mass_rows = mass_law_check(neu.last().unwrap(), cfg, false)?;
    Ok(report)
}

/// Outcome of an ordering comparison.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OrderingReport {
    /// `max (u_lesser - u_greater)_+` over the window probes.
    pub max_excess: f64,
    /// `min (u_greater - u_lesser)` over the window probes.
    pub min_margin: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check_flux_order(lesser: &FluxSpec, greater: &FluxSpec, t_end: f64, name: &str) -> Result<()> {
    let (a, b) = (lesser.to_time_fn(), greater.to_time_fn());
    for i in 0..=1000 {
        let t = t_end * i as f64 / 1000.0;
        if a.eval(t) < b.eval(t) || a.eval_left(t) < b.eval_left(t) {
            return Err(Error::HypothesisViolated(format!(
                "{name} of the lesser solution must dominate at t = {t}"
            )));
        }
    }
    Ok(())
}

/// Checks `u_lesser <= u_greater` on the window at domain size `half_width`.
///
/// Hypotheses (checked): `u0_lesser <= u0_greater` nodewise and larger outfluxes
/// for the lesser solution, `f_l >= f_g` and `g_l >= g_g` on `[0, b]`.
pub fn ordered_pair_check(
    lesser: &ExperimentConfig,
    greater: &ExperimentConfig,
    kind: BoundaryKind,
    half_width: f64,
) -> Result<OrderingReport> {
    lesser.validate()?;
    greater.validate()?;
    let t_end = lesser.window.t_end;
    check_flux_order(&lesser.f, &greater.f, t_end, "f")?;
    check_flux_order(&lesser.g, &greater.g, t_end, "g")?;
    let (ex_l, ex_g) = (lesser.self_similar()?, greater.self_similar()?);
    let u_l = lesser.initial_state(half_width, ex_l.as_deref())?;
    let u_g = greater.initial_state(half_width, ex_g.as_deref())?;
    if let Some(j) = (0..u_l.u.len()).find(|&j| u_l.u[j] > u_g.u[j]) {
        return Err(Error::HypothesisViolated(format!(
            "initial data not ordered at x = {}",
            u_l.grid.x(j)
        )));
    }
    let mut landing = lesser.f.to_time_fn().breakpoints();
    for spec in [&lesser.g, &greater.f, &greater.g] {
        landing.extend(spec.to_time_fn().breakpoints());
    }
    let (a, b) = rayon::join(
        || run_with(lesser, half_width, kind, t_end, &landing, ex_l.as_ref()),
        || run_with(greater, half_width, kind, t_end, &landing, ex_g.as_ref()),
    );
    let (a, b) = (a?, b?);
    let refined = lesser.window.refined();
    let (sa, sb) = (sample_window(&a, &refined)?, sample_window(&b, &refined)?);
    let max_excess = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| (x - y).max(0.0))
        .fold(0.0, f64::max);
    let min_margin = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| y - x)
        .fold(f64::INFINITY, f64::min);
    let tolerance = lesser.tolerances.order_factor * lesser.resolution.discretization_tol();
    Ok(OrderingReport {
        max_excess,
        min_margin,
        tolerance,
        passed: max_excess <= tolerance,
    })
}

/// Outcome of the step-flux composition study.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CompositionReport {
    /// Sup-window difference between the restarted and the direct solve.
    pub composed_vs_direct: f64,
    pub tolerance_equal: f64,
    /// Extinction time of the smooth data used to build the envelopes.
    pub envelope_horizon: f64,
    pub envelope_levels: Vec<u32>,
    /// `min (v_{k+1} - v_k)` over the probes, one per consecutive pair of levels.
    pub envelope_min_increment: Vec<f64>,
    pub tolerance_order: f64,
    pub checks: Vec<Check>,
}

impl CompositionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.asserted).all(|c| c.passed)
    }
}

fn union_breaks(f: &FluxSpec, g: &FluxSpec) -> Vec<f64> {
    let mut b = vec![0.0];
    b.extend(f.to_time_fn().breakpoints());
    b.extend(g.to_time_fn().breakpoints());
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Restarts a constant-data Dirichlet solve on every interval of the step data,
/// each from the end state of the previous one.
pub fn composed_solve(cfg: &ExperimentConfig, half_width: f64) -> Result<Trajectory> {
    let breaks = union_breaks(&cfg.f, &cfg.g);
    let (f, g) = (cfg.f.to_time_fn(), cfg.g.to_time_fn());
    let t_end = cfg.window.t_end;
    let mut state = cfg.initial_state(half_width, None)?;
    let mut joined: Option<Trajectory> = None;
    for (i, &a) in breaks.iter().enumerate() {
        if a >= t_end {
            break;
        }
        let b = breaks.get(i + 1).copied().unwrap_or(t_end).min(t_end);
        let bc = BoundarySpec::dirichlet_far_field(
            TimeFn::Constant(f.eval(a)),
            TimeFn::Constant(g.eval(a)),
            cfg.m,
            half_width,
        );
        let piece = solve(state, &bc, cfg.m, b, &cfg.controls(&breaks))?;
        state = piece.final_state().clone();
        joined = Some(match joined {
            None => piece,
            Some(mut acc) => {
                acc.states.extend(piece.states.into_iter().skip(1));
                acc.ledger
                    .rows
                    .extend(piece.ledger.rows.into_iter().skip(1));
                acc
            }
        });
    }
    joined.ok_or_else(|| Error::InvalidInput("empty composition".into()))
}

/// Right-continuous dyadic envelope of `spec` on `[0, horizon)` with `2^k` cells,
/// taking the supremum of `spec` over each cell.
pub fn dyadic_envelope(spec: &FluxSpec, horizon: f64, k: u32) -> FluxSpec {
    let f = spec.to_time_fn();
    let cells = 1usize << k;
    let width = horizon / cells as f64;
    let breaks: Vec<f64> = (0..cells).map(|i| i as f64 * width).collect();
    let values = breaks
        .iter()
        .map(|&a| {
            (0..=64)
                .map(|j| f.eval_left(a + width * j as f64 / 64.0))
                .chain([f.eval(a)])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    FluxSpec::Step { breaks, values }
}

/// Composition check on step data (restarted vs direct), then the monotonicity
/// of Dirichlet solutions driven by dyadic envelopes of `smooth` (`f = g = smooth`).
pub fn step_flux_composition(
    cfg: &ExperimentConfig,
    smooth: &FluxSpec,
    levels: &[u32],
) -> Result<CompositionReport> {
    cfg.validate()?;
    let r = *cfg.r_list.last().unwrap();
    let t_end = cfg.window.t_end;
    let breaks = union_breaks(&cfg.f, &cfg.g);
    let (direct, composed) = rayon::join(
        || run_single(cfg, r, BoundaryKind::Dirichlet, t_end, &breaks),
        || composed_solve(cfg, r),
    );
    let composed_vs_direct = sup_difference(
        &sample_window(&direct?, &cfg.window)?,
        &sample_window(&composed?, &cfg.window)?,
    );

    let m0 = cfg.initial_mass(r)?;
    let horizon = predicted_extinction(&smooth.to_time_fn(), &smooth.to_time_fn(), m0)?;
    let finest = levels.iter().copied().max().unwrap_or(0);
    let landing: Vec<f64> = (1..(1usize << finest))
        .map(|i| horizon * i as f64 / (1usize << finest) as f64)
        .collect();
    let runs: Vec<Trajectory> = levels
        .par_iter()
        .map(|&k| {
            let env = dyadic_envelope(smooth, horizon, k);
            let mut c = cfg.clone();
            c.f = env.clone();
            c.g = env;
            run_single(&c, r, BoundaryKind::Dirichlet, t_end, &landing)
        })
        .collect::<Result<_>>()?;
    let refined = cfg.window.refined();
    let samples: Vec<Vec<f64>> = runs
        .iter()
        .map(|t| sample_window(t, &refined))
        .collect::<Result<_>>()?;
    let increments: Vec<f64> = samples
        .windows(2)
        .map(|w| {
            w[1].iter()
                .zip(&w[0])
                .map(|(a, b)| a - b)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let tol_order = cfg.tolerances.order_factor * cfg.resolution.discretization_tol();
    let worst = increments.iter().copied().fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::below(
            "composed_vs_direct",
            composed_vs_direct,
            cfg.tolerances.equal,
        ),
        Check::below("envelope_decrease", (-worst).max(0.0), tol_order),
    ];
    Ok(CompositionReport {
        composed_vs_direct,
        tolerance_equal: cfg.tolerances.equal,
        envelope_horizon: horizon,
        envelope_levels: levels.to_vec(),
        envelope_min_increment: increments,
        tolerance_order: tol_order,
        checks,
    })
}

/// `∫_{t1}^{t2} (u^m/m)_x(±0.75 R, s) ds` by the trapezoid rule over the recorded
/// states, compared with `-∫f` (right) and `+∫g` (left).
pub fn flux_at_infinity_check(
    traj: &Trajectory,
    f: &TimeFn,
    g: &TimeFn,
    t1: f64,
    t2: f64,
) -> Result<FluxCheck> {
    if !(0.0 < t1 && t1 < t2) {
        return Err(Error::InvalidInput(format!(
            "flux window needs 0 < t1 < t2, got [{t1}, {t2}]"
        )));
    }
    let grid = traj.grid();
    let h = grid.h();
    let m = traj.m;
    let station = 0.75 * grid.half_width();
    let (jr, jl) = (grid.nearest(station), grid.nearest(-station));
    let slope_at = |u: &[f64], j: usize| (phi_m(u[j + 1], m) - phi_m(u[j - 1], m)) / (2.0 * h);
    let pts: Vec<(f64, f64, f64)> = traj
        .states
        .iter()
        .filter(|s| s.t >= t1 - 1e-12 && s.t <= t2 + 1e-12)
        .map(|s| (s.t, slope_at(&s.u, jr), slope_at(&s.u, jl)))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "trajectory does not cover [{t1}, {t2}]"
        )));
    }
    let mut right = 0.0;
    let mut left = 0.0;
    for w in pts.windows(2) {
        let dt = w[1].0 - w[0].0;
        right += 0.5 * dt * (w[0].1 + w[1].1);
        left += 0.5 * dt * (w[0].2 + w[1].2);
    }
    let right_expected = -(f.integral(t2) - f.integral(t1));
    let left_expected = g.integral(t2) - g.integral(t1);
    let dev = |a: f64, e: f64| {
        if e.abs() > 0.0 {
            (a - e).abs() / e.abs()
        } else {
            a.abs()
        }
    };
    Ok(FluxCheck {
        station,
        t1,
        t2,
        right_integral: right,
        right_expected,
        left_integral: left,
        left_expected,
        right_deviation: dev(right, right_expected),
        left_deviation: dev(left, left_expected),
    })
}

/// Error of solver trajectories against the self-similar solution.
pub fn self_similar_check(cfg: &ExperimentConfig) -> Result<SelfSimilarCheck> {
    let exact = cfg.self_similar()?.ok_or_else(|| {
        Error::InvalidInput("self-similar check needs a self-similar initial datum".into())
    })?;
    let dir = run_family(cfg, BoundaryKind::Dirichlet)?;
    let neu = run_family(cfg, BoundaryKind::NeumannFlux)?;
    Ok(SelfSimilarCheck {
        r_list: cfg.r_list.clone(),
        dirichlet_errors: exact_window_errors(&dir, &cfg.window, &exact)?,
        neumann_errors: exact_window_errors(&neu, &cfg.window, &exact)?,
        discretization_tol: cfg.resolution.discretization_tol(),
    })
}
