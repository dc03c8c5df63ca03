//! Implicit finite-difference solver for `u_t = (u^m/m)_xx` on `(-R, R)`.
//!
//! Each step solves the backward-Euler system
//!
//! ```text
//!     u_j^{n+1} - (dt/h²) (w_{j+1} - 2 w_j + w_{j-1}) = u_j^n,     w = u^m/m,
//! ```
//!
//! by damped Newton on the tridiagonal Jacobian. The unknown is the potential `w`
//! (`u = (m w)^{1/m}` is then positive for every `w < 0`), and the Jacobian in `w`
//! has diagonal `u^{1-m} + 2 dt/h²`, an M-matrix. Flux rows use the half-cell
//! balance
//!
//! ```text
//!     (h/2)(u_N^{n+1} - u_N^n) = dt (q_R - (w_N - w_{N-1})/h),    q_R = -f,
//! ```
//!
//! which keeps the system tridiagonal and makes the trapezoid mass change exactly
//! `-dt (f + g)`.

mod boundary;
mod ledger;

use std::io::{self, Write};

use serde::Serialize;

pub use boundary::{BoundaryKind, BoundarySpec, TimeFn};
pub use ledger::{ab_residual, one_sided_fluxes, scheme_fluxes, LedgerRow, MassLedger};

use crate::grid::UniformGrid;
use crate::{check_exponent, phi_m, phi_m_inv, tridiag, Error, Result};

/// Positive samples on a uniform grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    pub grid: UniformGrid,
    pub u: Vec<f64>,
    pub t: f64,
}

impl PdeState {
    pub fn new(grid: UniformGrid, u: Vec<f64>, t: f64) -> Result<Self> {
        grid.check_samples(&u)?;
        if let Some(&bad) = u.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveInitial { min: bad });
        }
        Ok(Self { grid, u, t })
    }

    pub fn mass(&self) -> f64 {
        self.grid.trapezoid(&self.u)
    }

    pub fn max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation at `x`.
    pub fn at(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.u, x)
    }

    /// First moment `∫ x u dx` (trapezoid).
    pub fn first_moment(&self) -> f64 {
        let xu: Vec<f64> = self
            .u
            .iter()
            .enumerate()
            .map(|(j, v)| self.grid.x(j) * v)
            .collect();
        self.grid.trapezoid(&xu)
    }
}

/// Samples `u0 + epsilon` on the grid.
pub fn make_initial(u0: impl Fn(f64) -> f64, epsilon: f64, grid: UniformGrid) -> Result<PdeState> {
    if !(epsilon >= 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "epsilon",
            value: epsilon,
            allowed: "[0, inf)",
        });
    }
    let base: Vec<f64> = grid.nodes().into_iter().map(&u0).collect();
    if let Some(&neg) = base.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "initial datum must be finite and nonnegative, found {neg}"
        )));
    }
    let min = base.iter().copied().fold(f64::INFINITY, f64::min);
    if epsilon == 0.0 && min <= 0.0 {
        return Err(Error::NonPositiveInitial { min });
    }
    let u = base.into_iter().map(|v| v + epsilon).collect();
    PdeState::new(grid, u, 0.0)
}

/// Newton and time-stepping controls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Controls {
    /// Absolute tolerance on the max-norm of the residual (units of `u`).
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    /// Step-length halvings allowed per Newton iteration.
    pub max_halvings: u32,
    /// Lower bound for Newton iterates; `None` means `1e-12 * max u0`.
    pub positivity_floor: Option<f64>,
    /// First step; `None` means `dt = h`.
    pub dt_initial: Option<f64>,
    pub dt_max: f64,
    pub dt_min: f64,
    /// Growth factor after an easy step.
    pub growth: f64,
    /// A step with at most this many Newton iterations counts as easy.
    pub easy_iters: usize,
    /// Keep `dt` fixed (apart from failure halving and landing on requested times).
    pub fixed_dt: bool,
    /// Stop once the mass drops below this fraction of the initial mass.
    pub extinction_fraction: f64,
    /// Times the march must land on exactly, in addition to data breakpoints.
    pub landing_times: Vec<f64>,
    /// Record every k-th step (the final state is always recorded).
    pub record_every: usize,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton_iter: 50,
            max_halvings: 8,
            positivity_floor: None,
            dt_initial: None,
            dt_max: f64::INFINITY,
            dt_min: 1e-14,
            growth: 1.2,
            easy_iters: 4,
            fixed_dt: false,
            extinction_fraction: 0.02,
            landing_times: Vec::new(),
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

/// Boundary rows are imposed with data at these times: Dirichlet values at the
/// left limit of `t^{n+1}`, fluxes at the step midpoint.
fn boundary_rows(bc: &BoundarySpec, t_old: f64, dt: f64) -> (f64, f64) {
    let t_new = t_old + dt;
    match bc.kind {
        BoundaryKind::Dirichlet => (bc.left.eval_left(t_new), bc.right.eval_left(t_new)),
        BoundaryKind::NeumannFlux => {
            let mid = t_old + 0.5 * dt;
            (bc.left.eval(mid), bc.right.eval(mid))
        }
    }
}

struct System<'a> {
    prev: &'a [f64],
    kind: BoundaryKind,
    left: f64,
    right: f64,
    m: f64,
    c: f64,
    flux_scale: f64,
}

impl System<'_> {
    fn residual(&self, w: &[f64], u: &[f64], out: &mut [f64]) -> f64 {
        let n = w.len() - 1;
        let c = self.c;
        for j in 1..n {
            out[j] = u[j] - self.prev[j] - c * (w[j + 1] - 2.0 * w[j] + w[j - 1]);
        }
        match self.kind {
            BoundaryKind::Dirichlet => {
                out[0] = u[0] - self.left;
                out[n] = u[n] - self.right;
            }
            BoundaryKind::NeumannFlux => {
                out[0] =
                    u[0] - self.prev[0] - 2.0 * c * (w[1] - w[0]) + self.flux_scale * self.left;
                out[n] = u[n] - self.prev[n] - 2.0 * c * (w[n - 1] - w[n])
                    + self.flux_scale * self.right;
            }
        }
        out.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    fn jacobian(&self, u: &[f64], sub: &mut [f64], diag: &mut [f64], sup: &mut [f64]) {
        let n = u.len() - 1;
        let c = self.c;
        for j in 1..n {
            sub[j] = -c;
            sup[j] = -c;
            diag[j] = u[j].powf(1.0 - self.m) + 2.0 * c;
        }
        match self.kind {
            BoundaryKind::Dirichlet => {
                diag[0] = u[0].powf(1.0 - self.m);
                sup[0] = 0.0;
                diag[n] = u[n].powf(1.0 - self.m);
                sub[n] = 0.0;
            }
            BoundaryKind::NeumannFlux => {
                diag[0] = u[0].powf(1.0 - self.m) + 2.0 * c;
                sup[0] = -2.0 * c;
                diag[n] = u[n].powf(1.0 - self.m) + 2.0 * c;
                sub[n] = -2.0 * c;
            }
        }
    }
}

/// One backward-Euler step of size `dt`.
pub fn step(
    state: &PdeState,
    dt: f64,
    bc: &BoundarySpec,
    m: f64,
    controls: &Controls,
) -> Result<(PdeState, StepReport)> {
    check_exponent(m)?;
    if !(dt > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "dt",
            value: dt,
            allowed: "(0, inf)",
        });
    }
    let grid = state.grid;
    let n = grid.cells();
    let h = grid.h();
    let (left, right) = boundary_rows(bc, state.t, dt);
    if bc.kind == BoundaryKind::Dirichlet && !(left > 0.0 && right > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Dirichlet data must be positive, got ({left}, {right}) at t = {}",
            state.t + dt
        )));
    }
    let floor = controls.positivity_floor.unwrap_or(1e-12 * state.max());
    let mut cap = state.max();
    if bc.kind == BoundaryKind::Dirichlet {
        cap = cap.max(left).max(right);
    }
    let (w_lo, w_hi) = (phi_m(floor, m), phi_m(10.0 * cap, m));

    let sys = System {
        prev: &state.u,
        kind: bc.kind,
        left,
        right,
        m,
        c: dt / (h * h),
        flux_scale: 2.0 * dt / h,
    };

    let mut u = state.u.clone();
    if bc.kind == BoundaryKind::Dirichlet {
        u[0] = left;
        u[n] = right;
    }
    let mut w: Vec<f64> = u.iter().map(|&v| phi_m(v, m)).collect();
    let mut res = vec![0.0; n + 1];
    let mut norm = sys.residual(&w, &u, &mut res);

    let (mut sub, mut diag, mut sup) = (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]);
    let mut trial_w = vec![0.0; n + 1];
    let mut trial_u = vec![0.0; n + 1];
    let mut trial_res = vec![0.0; n + 1];
    let mut iters = 0;
    while norm >= controls.newton_tol {
        if iters == controls.max_newton_iter {
            return Err(Error::NewtonDiverged {
                t: state.t,
                dt,
                residual: norm,
            });
        }
        iters += 1;
        sys.jacobian(&u, &mut sub, &mut diag, &mut sup);
        let mut delta: Vec<f64> = res.iter().map(|r| -r).collect();
        tridiag::solve_in_place(&sub, &diag, &sup, &mut delta);

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=controls.max_halvings {
            for j in 0..=n {
                trial_w[j] = (w[j] + lambda * delta[j]).clamp(w_lo, w_hi);
                trial_u[j] = phi_m_inv(trial_w[j], m);
            }
            let trial_norm = sys.residual(&trial_w, &trial_u, &mut trial_res);
            if trial_norm < norm || trial_norm < controls.newton_tol {
                std::mem::swap(&mut w, &mut trial_w);
                std::mem::swap(&mut u, &mut trial_u);
                std::mem::swap(&mut res, &mut trial_res);
                norm = trial_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted || !norm.is_finite() {
            return Err(Error::NewtonDiverged {
                t: state.t,
                dt,
                residual: norm,
            });
        }
    }
    if u.iter().any(|&v| v <= floor * (1.0 + 1e-9)) {
        return Err(Error::PositivityLost { t: state.t, dt });
    }
    let next = PdeState {
        grid,
        u,
        t: state.t + dt,
    };
    Ok((
        next,
        StepReport {
            dt,
            newton_iters: iters,
            residual: norm,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Completed,
    /// Mass fell below `extinction_fraction` of the initial mass; the trajectory is partial.
    ExtinctionReached,
}

/// Recorded states with an aligned mass ledger.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub m: f64,
    pub states: Vec<PdeState>,
    pub ledger: MassLedger,
    pub status: RunStatus,
}

impl Trajectory {
    pub fn grid(&self) -> UniformGrid {
        self.states[0].grid
    }

    pub fn final_state(&self) -> &PdeState {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Recorded state whose time is nearest to `t`.
    pub fn nearest_state(&self, t: f64) -> &PdeState {
        let k = self.states.partition_point(|s| s.t < t);
        match k {
            0 => &self.states[0],
            k if k == self.states.len() => &self.states[k - 1],
            k => {
                if (self.states[k].t - t).abs() < (t - self.states[k - 1].t).abs() {
                    &self.states[k]
                } else {
                    &self.states[k - 1]
                }
            }
        }
    }

    /// Writes the long-format table `t,x,u`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,x,u")?;
        for s in &self.states {
            for (j, v) in s.u.iter().enumerate() {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", s.t, s.grid.x(j), v)?;
            }
        }
        Ok(())
    }
}

fn ledger_row(state: &PdeState, m: f64) -> LedgerRow {
    let (fl, fr) = one_sided_fluxes(&state.grid, &state.u, m);
    LedgerRow {
        t: state.t,
        mass: state.mass(),
        flux_left: fl,
        flux_right: fr,
        ab_residual: 0.0,
        newton_iters: 0,
        scheme_flux_integral: 0.0,
        conservation_residual: 0.0,
    }
}

/// Adaptive backward-Euler march from `initial` to `t_end`.
///
/// `dt` halves on Newton failure and grows by `controls.growth` after easy steps,
/// up to `controls.dt_max`. The march lands exactly on `t_end`, on every
/// `controls.landing_times` entry and on every jump of step boundary data. When
/// the mass drops below `extinction_fraction` of its initial value the partial
/// trajectory is returned with [`RunStatus::ExtinctionReached`].
pub fn solve(
    initial: PdeState,
    bc: &BoundarySpec,
    m: f64,
    t_end: f64,
    controls: &Controls,
) -> Result<Trajectory> {
    check_exponent(m)?;
    if !(t_end > initial.t) {
        return Err(Error::InvalidInput(format!(
            "t_end = {t_end} must exceed the initial time {}",
            initial.t
        )));
    }
    let mut controls = controls.clone();
    if controls.positivity_floor.is_none() {
        controls.positivity_floor = Some(1e-12 * initial.max());
    }
    let mut stops: Vec<f64> = controls
        .landing_times
        .iter()
        .copied()
        .chain(bc.breakpoints())
        .filter(|&s| s > initial.t && s < t_end)
        .collect();
    stops.push(t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let h = initial.grid.h();
    let mut dt = controls.dt_initial.unwrap_or(h).min(controls.dt_max);
    let dt_nominal = dt;
    let record_every = controls.record_every.max(1);
    let mass0 = initial.mass();

    let mut ledger = MassLedger::default();
    ledger.rows.push(ledger_row(&initial, m));
    let mut states = vec![initial.clone()];
    let mut current = initial;
    let mut status = RunStatus::Completed;

    let mut pending_flux = 0.0;
    let mut pending_iters = 0;
    let mut pending_ab: f64 = 0.0;
    let mut steps_since_record = 0;
    let mut last_recorded_mass = mass0;
    let mut stop_idx = 0;

    while stop_idx < stops.len() {
        let target = stops[stop_idx];
        let remaining = target - current.t;
        // Avoid leaving a sliver shorter than 1% of dt before the target.
        let dt_try = if remaining <= dt * 1.01 {
            remaining
        } else {
            dt
        };
        let (next, report) = match step(&current, dt_try, bc, m, &controls) {
            Ok(ok) => ok,
            Err(Error::NewtonDiverged { .. }) | Err(Error::PositivityLost { .. }) => {
                dt = 0.5 * dt_try;
                if dt < controls.dt_min {
                    return Err(Error::StepTooSmall {
                        t: current.t,
                        dt_min: controls.dt_min,
                    });
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let landed = dt_try == remaining;
        let next = if landed {
            PdeState { t: target, ..next }
        } else {
            next
        };
        if controls.fixed_dt {
            // Recover the nominal step after a failure halving.
            if dt_try == dt && dt < dt_nominal {
                dt = (2.0 * dt).min(dt_nominal);
            }
        } else if report.newton_iters <= controls.easy_iters && dt_try == dt {
            dt = (dt * controls.growth).min(controls.dt_max);
        }
        let (ql, qr) = scheme_fluxes(&current, &next, m);
        pending_flux += report.dt * (qr - ql);
        pending_iters += report.newton_iters;
        pending_ab = pending_ab.max(ab_residual(&current, &next, m));
        steps_since_record += 1;
        if landed {
            stop_idx += 1;
        }

        let mass = next.mass();
        let extinct = mass < controls.extinction_fraction * mass0;
        if steps_since_record >= record_every || landed || extinct {
            let mut row = ledger_row(&next, m);
            row.ab_residual = pending_ab;
            row.newton_iters = pending_iters;
            row.scheme_flux_integral = pending_flux;
            row.conservation_residual = (mass - last_recorded_mass) - pending_flux;
            ledger.rows.push(row);
            states.push(next.clone());
            last_recorded_mass = mass;
            pending_flux = 0.0;
            pending_iters = 0;
            pending_ab = 0.0;
            steps_since_record = 0;
        }
        current = next;
        if extinct {
            status = RunStatus::ExtinctionReached;
            break;
        }
    }
    Ok(Trajectory {
        m,
        states,
        ledger,
        status,
    })
}

/// Largest excess `u - (mu0 |m| (|x| - R0))^{1/m}` over recorded states and
/// nodes with `R0 < |x| <= R`. Nonpositive means the barrier holds.
pub fn barrier_check(traj: &Trajectory, mu0: f64, r0: f64) -> f64 {
    let m = traj.m;
    let grid = traj.grid();
    let barrier: Vec<Option<f64>> = (0..grid.len())
        .map(|j| {
            let ax = grid.x(j).abs();
            (ax > r0).then(|| (mu0 * m.abs() * (ax - r0)).powf(1.0 / m))
        })
        .collect();
    traj.states
        .iter()
        .flat_map(|s| {
            s.u.iter()
                .zip(&barrier)
                .filter_map(|(u, b)| b.map(|b| u - b))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(r: f64, cells: usize) -> UniformGrid {
        UniformGrid::new(r, cells).unwrap()
    }

    #[test]
    fn make_initial_shifts_and_rejects_zeros() {
        let g = grid(2.0, 20);
        let s = make_initial(|_| 1.0, 0.0, g).unwrap();
        assert!(s.u.iter().all(|&v| v == 1.0));
        let bump = |x: f64| if x.abs() < 1.0 { 1.0 } else { 0.0 };
        let s = make_initial(bump, 1e-3, g).unwrap();
        assert_eq!(s.min(), 1e-3);
        assert!(matches!(
            make_initial(bump, 0.0, g),
            Err(Error::NonPositiveInitial { .. })
        ));
        assert!(make_initial(|_| -1.0, 1.0, g).is_err());
    }

    #[test]
    fn constant_state_with_zero_flux_is_steady() {
        let g = grid(3.0, 30);
        let s = make_initial(|_| 0.7, 0.0, g).unwrap();
        let bc = BoundarySpec::neumann(TimeFn::Constant(0.0), TimeFn::Constant(0.0));
        let (next, rep) = step(&s, 0.1, &bc, -0.5, &Controls::default()).unwrap();
        assert_eq!(rep.newton_iters, 0);
        assert!(next.u.iter().all(|&v| (v - 0.7).abs() < 1e-14));
        assert!((next.mass() - s.mass()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = grid(1.0, 10);
        let s = make_initial(|_| 1.0, 0.0, g).unwrap();
        let bc = BoundarySpec::neumann(TimeFn::Constant(0.0), TimeFn::Constant(0.0));
        let c = Controls::default();
        assert!(step(&s, 0.1, &bc, 0.5, &c).is_err());
        assert!(step(&s, 0.0, &bc, -0.5, &c).is_err());
        assert!(solve(s, &bc, -0.5, 0.0, &c).is_err());
    }

    #[test]
    fn dirichlet_rows_pin_boundary_values() {
        let g = grid(10.0, 100);
        let s = make_initial(|x| (-x * x).exp(), 1e-3, g).unwrap();
        let bc = BoundarySpec::dirichlet_constant_mu(1.0, -0.5, 10.0);
        let (next, _) = step(&s, 0.05, &bc, -0.5, &Controls::default()).unwrap();
        assert!((next.u[0] - 0.04).abs() < 1e-15);
        assert!((next.u[100] - 0.04).abs() < 1e-15);
        assert!(next.min() > 0.0);
    }

    #[test]
    fn neumann_step_drains_exactly() {
        let g = grid(5.0, 50);
        let s = make_initial(|x| (-x * x).exp(), 1e-2, g).unwrap();
        let bc = BoundarySpec::neumann(TimeFn::Constant(0.3), TimeFn::Constant(0.2));
        let (next, _) = step(&s, 0.01, &bc, -0.5, &Controls::default()).unwrap();
        let dm = next.mass() - s.mass();
        assert!((dm + 0.01 * 0.5).abs() < 1e-10, "dm = {dm}");
        let (ql, qr) = scheme_fluxes(&s, &next, -0.5);
        assert!((qr + 0.3).abs() < 1e-7 && (ql - 0.2).abs() < 1e-7);
    }

    #[test]
    fn solve_lands_on_requested_times() {
        let g = grid(5.0, 50);
        let s = make_initial(|x| (-x * x).exp(), 1e-2, g).unwrap();
        let bc = BoundarySpec::dirichlet_constant_mu(1.0, -0.5, 5.0);
        let controls = Controls {
            landing_times: vec![0.123, 0.2],
            ..Controls::default()
        };
        let traj = solve(s, &bc, -0.5, 0.3, &controls).unwrap();
        let times = traj.times();
        assert!(times.contains(&0.123) && times.contains(&0.2));
        assert_eq!(*times.last().unwrap(), 0.3);
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(traj.states.len(), traj.ledger.len());
    }

    #[test]
    fn barrier_check_sign() {
        let g = grid(10.0, 100);
        let m = -0.5;
        let s = make_initial(|x| if x.abs() < 1.0 { 1.0 } else { 0.0 }, 1e-3, g).unwrap();
        let traj = Trajectory {
            m,
            states: vec![s],
            ledger: MassLedger::default(),
            status: RunStatus::Completed,
        };
        assert!(barrier_check(&traj, 1.0, 2.0) < 0.0);
        // A barrier anchored at R0 = 9.5 is tiny at |x| = 10 only if mu0 is huge.
        assert!(barrier_check(&traj, 1e8, 1.0) > 0.0);
    }
}
