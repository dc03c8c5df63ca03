use std::io::{self, Write};

use serde::Serialize;

use crate::grid::UniformGrid;
use crate::phi_m;

use super::PdeState;

/// One ledger row, aligned with a recorded state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    /// Trapezoid mass on `[-R, R]`.
    pub mass: f64,
    /// `u^{m-1} u_x` at `-R`, second-order one-sided difference of `u^m/m`.
    pub flux_left: f64,
    /// `u^{m-1} u_x` at `+R`, second-order one-sided difference of `u^m/m`.
    pub flux_right: f64,
    /// `max(u_t - u/((1-m)t), 0)` over nodes, maximised over the steps since the previous row.
    pub ab_residual: f64,
    /// Newton iterations summed over the steps since the previous row.
    pub newton_iters: usize,
    /// `∫ (q_R - q_L) dt` since the previous row, with `q` the scheme's own half-cell
    /// boundary fluxes.
    pub scheme_flux_integral: f64,
    /// `(mass - previous mass) - scheme_flux_integral`.
    pub conservation_residual: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct MassLedger {
    pub rows: Vec<LedgerRow>,
}

impl MassLedger {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn initial_mass(&self) -> f64 {
        self.rows.first().map_or(0.0, |r| r.mass)
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mass).collect()
    }

    /// Largest `|conservation_residual| / initial mass`.
    pub fn max_relative_conservation_residual(&self) -> f64 {
        let m0 = self.initial_mass();
        self.rows
            .iter()
            .map(|r| r.conservation_residual.abs() / m0)
            .fold(0.0, f64::max)
    }

    /// Largest Aronson–Bénilan excess over rows with `t >= t_min`.
    pub fn max_ab_residual(&self, t_min: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.t >= t_min)
            .map(|r| r.ab_residual)
            .fold(0.0, f64::max)
    }

    /// Writes `t,mass,flux_left,flux_right,ab_residual,newton_iters`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,mass,flux_left,flux_right,ab_residual,newton_iters")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.t, r.mass, r.flux_left, r.flux_right, r.ab_residual, r.newton_iters
            )?;
        }
        Ok(())
    }
}

/// Second-order one-sided differences of `u^m/m` at `x = -R` and `x = +R`.
pub fn one_sided_fluxes(grid: &UniformGrid, u: &[f64], m: f64) -> (f64, f64) {
    let n = grid.cells();
    let h = grid.h();
    let w = |j: usize| phi_m(u[j], m);
    let left = (-3.0 * w(0) + 4.0 * w(1) - w(2)) / (2.0 * h);
    let right = (3.0 * w(n) - 4.0 * w(n - 1) + w(n - 2)) / (2.0 * h);
    (left, right)
}

/// Half-cell boundary fluxes `(q_L, q_R)` of the backward-Euler step `prev -> next`.
///
/// With these, `mass(next) - mass(prev) = dt (q_R - q_L)` holds exactly whenever the
/// interior equations are satisfied.
pub fn scheme_fluxes(prev: &PdeState, next: &PdeState, m: f64) -> (f64, f64) {
    let n = next.grid.cells();
    let h = next.grid.h();
    let dt = next.t - prev.t;
    let w = |j: usize| phi_m(next.u[j], m);
    let ql = (w(1) - w(0)) / h - 0.5 * h * (next.u[0] - prev.u[0]) / dt;
    let qr = (w(n) - w(n - 1)) / h + 0.5 * h * (next.u[n] - prev.u[n]) / dt;
    (ql, qr)
}

/// `max_j max(u_t - u/((1-m)t), 0)` with the backward difference quotient for `u_t`.
pub fn ab_residual(prev: &PdeState, next: &PdeState, m: f64) -> f64 {
    let dt = next.t - prev.t;
    let t = next.t;
    next.u
        .iter()
        .zip(&prev.u)
        .map(|(&un, &up)| ((un - up) / dt - un / ((1.0 - m) * t)).max(0.0))
        .fold(0.0, f64::max)
}
