use std::io::{self, Write};

use serde::Serialize;

/// One named check. Only `asserted` checks decide [`ConvergenceReport::all_passed`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub asserted: bool,
}

impl Check {
    /// Passes when `value < tolerance`.
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value.is_finite() && value < tolerance,
            asserted: true,
        }
    }

    /// Passes when `value >= minimum`.
    pub fn at_least(name: impl Into<String>, value: f64, minimum: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance: minimum,
            passed: value >= minimum,
            asserted: true,
        }
    }

    /// Passes when `flag` holds; `value` is recorded for context.
    pub fn flag(name: impl Into<String>, flag: bool, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance: 0.0,
            passed: flag,
            asserted: true,
        }
    }

    /// Reported but not asserted.
    pub fn informational(mut self) -> Self {
        self.asserted = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassRow {
    pub t: f64,
    /// Domain mass plus the estimated tail beyond `±R`.
    pub mass: f64,
    pub predicted_mass: f64,
    /// `|mass - predicted| / predicted`.
    pub deviation: f64,
    /// Tail estimate included in `mass` (zero for flux problems).
    pub tail: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeRow {
    pub x: f64,
    pub t: f64,
    /// `u^m / (m x)`.
    pub slope: f64,
    /// `-f(t)` for `x > 0`, `g(t)` for `x < 0`.
    pub expected: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtinctionEstimate {
    pub estimated: f64,
    pub predicted: f64,
    pub relative_error: f64,
    /// Mass fraction left at the last recorded time.
    pub final_fraction: f64,
    pub fit_points: usize,
}

/// Time-integrated fluxes at the stations `±0.75 R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxCheck {
    pub station: f64,
    pub t1: f64,
    pub t2: f64,
    /// `∫ (u^m/m)_x(+station, s) ds`, expected `-∫ f`.
    pub right_integral: f64,
    pub right_expected: f64,
    /// `∫ (u^m/m)_x(-station, s) ds`, expected `+∫ g`.
    pub left_integral: f64,
    pub left_expected: f64,
    /// Relative deviations (absolute when the expected value vanishes).
    pub right_deviation: f64,
    pub left_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub kind: String,
    pub r_list: Vec<f64>,
    /// Sup-window differences, one per consecutive pair (or per `R` for comparisons).
    pub d_k: Vec<f64>,
    /// The same on the doubled probe grid.
    pub d_k_refined: Vec<f64>,
    /// Least-squares exponent `p` in `d_k ~ R_k^{-p}`.
    pub fitted_decay: Option<f64>,
    pub mass_rows: Vec<MassRow>,
    pub slope_rows: Vec<SlopeRow>,
    pub extinction: Option<ExtinctionEstimate>,
    pub flux: Option<FluxCheck>,
    pub checks: Vec<Check>,
}

impl ConvergenceReport {
    pub fn new(kind: impl Into<String>, r_list: Vec<f64>) -> Self {
        Self {
            kind: kind.into(),
            r_list,
            d_k: Vec::new(),
            d_k_refined: Vec::new(),
            fitted_decay: None,
            mass_rows: Vec::new(),
            slope_rows: Vec::new(),
            extinction: None,
            flux: None,
            checks: Vec::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.asserted).all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| c.asserted && !c.passed)
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `k,R,d_k`
    pub fn write_dk_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,R,d_k")?;
        for (k, d) in self.d_k.iter().enumerate() {
            writeln!(out, "{},{:.16e},{:.16e}", k + 1, self.r_list[k], d)?;
        }
        Ok(())
    }

    /// `t,mass,predicted_mass,deviation`
    pub fn write_mass_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,mass,predicted_mass,deviation")?;
        for r in &self.mass_rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.mass, r.predicted_mass, r.deviation
            )?;
        }
        Ok(())
    }

    /// `x,t,slope`
    pub fn write_slope_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,t,slope")?;
        for r in &self.slope_rows {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", r.x, r.t, r.slope)?;
        }
        Ok(())
    }
}

/// Least-squares slope of `ln d` against `ln r`, negated.
pub(crate) fn fitted_decay(r: &[f64], d: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(d)
        .filter(|(r, d)| **r > 0.0 && **d > 0.0)
        .map(|(r, d)| (r.ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

/// Window errors of Dirichlet and flux runs against the self-similar solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfSimilarCheck {
    pub r_list: Vec<f64>,
    pub dirichlet_errors: Vec<f64>,
    pub neumann_errors: Vec<f64>,
    pub discretization_tol: f64,
}
