//! Run configuration: a flat TOML document of `key = value` pairs in a few sections.
//!
//! ```toml
//! m = -0.5
//! mu = 1.0
//!
//! [domain]
//! R_list = [10.0, 20.0, 40.0]
//! h = 0.05
//! dt = 1e-3
//!
//! [window]
//! L = 2.0
//! a = 0.1
//! b = 0.5
//! ```
//!
//! Every key is optional except `m`; unknown keys are rejected.

use std::fmt;

use serde::{Deserialize, Serialize};
use vfd_core::experiments::{
    predicted_extinction, ExperimentConfig, FluxSpec, InitialDatum, Resolution, Tolerances, Window,
};
use vfd_core::solver::BoundaryKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Profile,
    GreenCheck,
    Solve,
    Converge,
    Compare,
    Extinction,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Profile => "profile",
            Command::GreenCheck => "green-check",
            Command::Solve => "solve",
            Command::Converge => "converge",
            Command::Compare => "compare",
            Command::Extinction => "extinction",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    m: Option<f64>,
    mu: Option<f64>,
    verbosity: Option<u8>,
    profile: Option<RawProfile>,
    green: Option<RawGreen>,
    initial: Option<RawInitial>,
    boundary: Option<RawBoundary>,
    domain: Option<RawDomain>,
    window: Option<RawWindow>,
    tolerances: Option<RawTolerances>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    eta: Option<f64>,
    dr: Option<f64>,
    ratio: Option<f64>,
    r_max: Option<f64>,
    fit_from: Option<f64>,
    slope_r: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGreen {
    #[serde(rename = "R")]
    half_width: Option<f64>,
    cells: Option<Vec<usize>>,
    triples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: Option<String>,
    mass: Option<f64>,
    width: Option<f64>,
    t_ext: Option<f64>,
    x: Option<Vec<f64>>,
    u: Option<Vec<f64>>,
    epsilon: Option<f64>,
    mu0: Option<f64>,
    #[serde(rename = "R0")]
    r0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    kind: Option<String>,
    f: Option<f64>,
    f_slope: Option<f64>,
    f_breaks: Option<Vec<f64>>,
    f_values: Option<Vec<f64>>,
    g: Option<f64>,
    g_slope: Option<f64>,
    g_breaks: Option<Vec<f64>>,
    g_values: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    #[serde(rename = "R")]
    half_width: Option<f64>,
    #[serde(rename = "R_list")]
    r_list: Option<Vec<f64>>,
    h: Option<f64>,
    dt: Option<f64>,
    t_end: Option<f64>,
    record_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWindow {
    #[serde(rename = "L")]
    half_width: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    x_probes: Option<usize>,
    t_probes: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    compact: Option<f64>,
    mass: Option<f64>,
    slope: Option<f64>,
    equal: Option<f64>,
    order_factor: Option<f64>,
    extinction: Option<f64>,
    profile_mass: Option<f64>,
    slope_limit: Option<f64>,
    sandwich: Option<f64>,
    green_order: Option<f64>,
    green_star: Option<f64>,
    averaged_kernel: Option<f64>,
    conservation: Option<f64>,
    barrier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileParams {
    /// Center value; when absent the profile is calibrated to `mu`.
    pub eta: Option<f64>,
    /// Step of the final integration; `None` means the natural default for `eta`.
    pub dr: Option<f64>,
    /// Integrate until `f < ratio * eta` (ignored when `r_max` is set).
    pub ratio: f64,
    pub r_max: Option<f64>,
    /// Start of the sandwich fit.
    pub fit_from: f64,
    /// Radius for the slope-limit check, if requested.
    pub slope_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenParams {
    pub half_width: f64,
    pub cells: Vec<usize>,
    pub triples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveParams {
    pub half_width: f64,
    pub kind: BoundaryKind,
    pub t_end: f64,
    pub record_every: usize,
}

/// Thresholds outside the experiment module.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckTolerances {
    pub profile_mass: f64,
    pub slope_limit: f64,
    pub sandwich: f64,
    pub green_order: f64,
    pub green_star: f64,
    pub averaged_kernel: f64,
    pub conservation: f64,
    pub barrier: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self {
            profile_mass: 5e-3,
            slope_limit: 0.02,
            sandwich: 1e-12,
            green_order: 1.8,
            green_star: 1e-6,
            averaged_kernel: 1e-12,
            conservation: 1e-8,
            barrier: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub verbosity: u8,
    pub m: f64,
    pub mu: f64,
    pub profile: ProfileParams,
    pub green: GreenParams,
    pub solve: SolveParams,
    pub experiment: ExperimentConfig,
    pub checks: CheckTolerances,
}

/// Byte offset to 1-based line and column.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |p| before.len() - p - 1)
        + 1;
    (line, column)
}

/// Parses and validates a configuration for `command`, filling defaults.
pub fn parse_config(text: &str, command: Command) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    build(raw, command)
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(
            key,
            format!("{key} must be positive and finite, got {v}"),
        ))
    }
}

fn nonnegative(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(
            key,
            format!("{key} must be nonnegative and finite, got {v}"),
        ))
    }
}

fn flux_spec(
    side: &str,
    value: Option<f64>,
    slope: Option<f64>,
    breaks: Option<Vec<f64>>,
    values: Option<Vec<f64>>,
    mu: f64,
) -> Result<FluxSpec, ConfigError> {
    let key = format!("boundary.{side}");
    let spec = match (breaks, values) {
        (Some(breaks), Some(values)) => {
            if value.is_some() || slope.is_some() {
                return Err(invalid(&key, "step data exclude a constant value or slope"));
            }
            FluxSpec::Step { breaks, values }
        }
        (None, None) => match slope {
            Some(s) => FluxSpec::Affine {
                intercept: value.unwrap_or(mu),
                slope: s,
            },
            None => FluxSpec::Constant {
                value: value.unwrap_or(mu),
            },
        },
        _ => {
            return Err(invalid(
                &format!("boundary.{side}_breaks"),
                format!("{side}_breaks and {side}_values must be given together"),
            ))
        }
    };
    spec.validate(side)
        .map_err(|e| invalid(&format!("boundary.{side}_breaks"), e.to_string()))?;
    let nonneg = match &spec {
        FluxSpec::Constant { value } => *value >= 0.0,
        FluxSpec::Affine { intercept, .. } => *intercept >= 0.0,
        FluxSpec::Step { values, .. } => values.iter().all(|v| *v >= 0.0),
    };
    if !nonneg {
        return Err(invalid(&key, format!("{side} must be nonnegative")));
    }
    Ok(spec)
}

fn build(raw: RawConfig, command: Command) -> Result<RunConfig, ConfigError> {
    let m = raw.m.ok_or_else(|| invalid("m", "m is required"))?;
    if !(m > -1.0 && m < 0.0) {
        return Err(invalid("m", format!("m must lie in (-1, 0), got {m}")));
    }
    let mu = positive("mu", raw.mu.unwrap_or(1.0))?;

    let p = raw.profile.unwrap_or_default();
    let profile = ProfileParams {
        eta: p.eta.map(|v| positive("profile.eta", v)).transpose()?,
        dr: p.dr.map(|v| positive("profile.dr", v)).transpose()?,
        ratio: p.ratio.unwrap_or(1e-4),
        r_max: p.r_max.map(|v| positive("profile.r_max", v)).transpose()?,
        fit_from: nonnegative("profile.fit_from", p.fit_from.unwrap_or(2.0))?,
        slope_r: p
            .slope_r
            .map(|v| positive("profile.slope_r", v))
            .transpose()?,
    };
    if !(profile.ratio > 0.0 && profile.ratio < 1.0) {
        return Err(invalid("profile.ratio", "ratio must lie in (0, 1)"));
    }

    let g = raw.green.unwrap_or_default();
    let green = GreenParams {
        half_width: positive("green.R", g.half_width.unwrap_or(1.0))?,
        cells: g.cells.unwrap_or_else(|| vec![64, 128, 256]),
        triples: g.triples.unwrap_or(100),
    };
    if green.cells.is_empty()
        || green.cells.iter().any(|&c| c < 4 || c % 2 == 1)
        || !green.cells.windows(2).all(|w| w[0] < w[1])
    {
        return Err(invalid(
            "green.cells",
            "cells must be increasing even counts of at least 4",
        ));
    }

    let b = raw.boundary.unwrap_or_default();
    let kind = match b.kind.as_deref().unwrap_or("dirichlet") {
        "dirichlet" => BoundaryKind::Dirichlet,
        "neumann" => BoundaryKind::NeumannFlux,
        other => {
            return Err(invalid(
                "boundary.kind",
                format!("kind must be \"dirichlet\" or \"neumann\", got {other:?}"),
            ))
        }
    };
    let f = flux_spec("f", b.f, b.f_slope, b.f_breaks, b.f_values, mu)?;
    let gs = flux_spec("g", b.g, b.g_slope, b.g_breaks, b.g_values, mu)?;

    let d = raw.domain.unwrap_or_default();
    let r_list = d.r_list.unwrap_or_else(|| vec![10.0, 20.0, 40.0]);
    if r_list.is_empty() || r_list.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("domain.R_list", "R_list must hold positive radii"));
    }
    if !r_list.windows(2).all(|w| w[0] < w[1]) {
        return Err(invalid(
            "domain.R_list",
            "R_list must be strictly increasing",
        ));
    }
    let h = positive("domain.h", d.h.unwrap_or(0.05))?;
    let dt = positive("domain.dt", d.dt.unwrap_or(1e-3))?;
    let solve_r = positive("domain.R", d.half_width.unwrap_or(*r_list.last().unwrap()))?;
    if h >= r_list[0].min(solve_r) {
        return Err(invalid(
            "domain.h",
            "h must be smaller than every domain half-width",
        ));
    }

    let w = raw.window.unwrap_or_default();
    let window = Window {
        half_width: positive("window.L", w.half_width.unwrap_or(2.0))?,
        t_start: positive("window.a", w.a.unwrap_or(0.1))?,
        t_end: positive("window.b", w.b.unwrap_or(0.5))?,
        x_probes: w.x_probes.unwrap_or(41),
        t_probes: w.t_probes.unwrap_or(5),
    };
    if window.half_width >= r_list[0] {
        return Err(invalid("window.L", "L must be smaller than min(R_list)"));
    }
    if window.t_start >= window.t_end {
        return Err(invalid("window.a", "window needs a < b"));
    }
    if window.x_probes < 2 || window.t_probes < 2 {
        return Err(invalid("window.x_probes", "at least two probes per axis"));
    }

    let i = raw.initial.unwrap_or_default();
    let epsilon = nonnegative("initial.epsilon", i.epsilon.unwrap_or(1e-6))?;
    let (initial, default_r0, initial_mass) = match i.kind.as_deref().unwrap_or("bump") {
        "bump" => {
            let mass = positive("initial.mass", i.mass.unwrap_or(2.0))?;
            let width = positive("initial.width", i.width.unwrap_or(2.0))?;
            (InitialDatum::Bump { mass, width }, width, mass)
        }
        "self_similar" => {
            let t_ext = positive("initial.t_ext", i.t_ext.unwrap_or(1.0))?;
            (
                InitialDatum::SelfSimilar { mu, t_ext },
                0.0,
                2.0 * mu * t_ext,
            )
        }
        "samples" => {
            let (x, u) = match (i.x, i.u) {
                (Some(x), Some(u)) => (x, u),
                _ => return Err(invalid("initial.x", "samples need both x and u")),
            };
            if x.len() != u.len() || x.len() < 2 || !x.windows(2).all(|w| w[0] < w[1]) {
                return Err(invalid(
                    "initial.x",
                    "x must be increasing with one u value per point",
                ));
            }
            if u.iter().any(|v| !(*v >= 0.0)) {
                return Err(invalid("initial.u", "u must be nonnegative"));
            }
            let support = x
                .iter()
                .zip(&u)
                .filter(|(_, u)| **u > 0.0)
                .map(|(x, _)| x.abs())
                .fold(0.0, f64::max);
            let mass = vfd_core::grid::trapezoid(&x, &u);
            (InitialDatum::Samples { x, u }, support, mass)
        }
        other => {
            return Err(invalid(
                "initial.kind",
                format!("kind must be \"bump\", \"self_similar\" or \"samples\", got {other:?}"),
            ))
        }
    };
    let default_mu0 = f.min_on(window.t_end).min(gs.min_on(window.t_end));
    let mu0 = positive("initial.mu0", i.mu0.unwrap_or(default_mu0))?;
    let r0 = nonnegative("initial.R0", i.r0.unwrap_or(default_r0))?;

    let extinction = predicted_extinction(&f.to_time_fn(), &gs.to_time_fn(), initial_mass)
        .map_err(|e| invalid("boundary.f", e.to_string()))?;
    if window.t_end >= extinction {
        return Err(invalid(
            "window.b",
            format!("b must lie below the extinction time {extinction:.6}"),
        ));
    }
    if let InitialDatum::SelfSimilar { t_ext, .. } = initial {
        if window.t_end >= t_ext {
            return Err(invalid("window.b", "b must lie below t_ext"));
        }
    }

    let t = raw.tolerances.unwrap_or_default();
    let defaults = Tolerances::default();
    let tolerances = Tolerances {
        compact: positive("tolerances.compact", t.compact.unwrap_or(defaults.compact))?,
        mass: positive("tolerances.mass", t.mass.unwrap_or(defaults.mass))?,
        slope: positive("tolerances.slope", t.slope.unwrap_or(defaults.slope))?,
        equal: positive("tolerances.equal", t.equal.unwrap_or(defaults.equal))?,
        order_factor: positive(
            "tolerances.order_factor",
            t.order_factor.unwrap_or(defaults.order_factor),
        )?,
        extinction: positive(
            "tolerances.extinction",
            t.extinction.unwrap_or(defaults.extinction),
        )?,
    };
    let cd = CheckTolerances::default();
    let checks = CheckTolerances {
        profile_mass: positive(
            "tolerances.profile_mass",
            t.profile_mass.unwrap_or(cd.profile_mass),
        )?,
        slope_limit: positive(
            "tolerances.slope_limit",
            t.slope_limit.unwrap_or(cd.slope_limit),
        )?,
        sandwich: nonnegative("tolerances.sandwich", t.sandwich.unwrap_or(cd.sandwich))?,
        green_order: positive(
            "tolerances.green_order",
            t.green_order.unwrap_or(cd.green_order),
        )?,
        green_star: positive(
            "tolerances.green_star",
            t.green_star.unwrap_or(cd.green_star),
        )?,
        averaged_kernel: positive(
            "tolerances.averaged_kernel",
            t.averaged_kernel.unwrap_or(cd.averaged_kernel),
        )?,
        conservation: positive(
            "tolerances.conservation",
            t.conservation.unwrap_or(cd.conservation),
        )?,
        barrier: nonnegative("tolerances.barrier", t.barrier.unwrap_or(cd.barrier))?,
    };

    let t_end = positive("domain.t_end", d.t_end.unwrap_or(window.t_end))?;
    let experiment = ExperimentConfig {
        m,
        initial,
        epsilon,
        mu0,
        r0,
        f,
        g: gs,
        r_list,
        window,
        resolution: Resolution { h, dt },
        tolerances,
    };
    experiment
        .validate()
        .map_err(|e| invalid("domain", e.to_string()))?;

    Ok(RunConfig {
        command,
        verbosity: raw.verbosity.unwrap_or(0),
        m,
        mu,
        profile,
        green,
        solve: SolveParams {
            half_width: solve_r,
            kind,
            t_end,
            record_every: d.record_every.unwrap_or(10).max(1),
        },
        experiment,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("abc", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }

    #[test]
    fn flux_defaults_to_mu() {
        let c = parse_config("m = -0.5\nmu = 1.5\n", Command::Converge).unwrap();
        assert_eq!(c.experiment.f, FluxSpec::Constant { value: 1.5 });
        assert_eq!(c.experiment.mu0, 1.5);
    }

    #[test]
    fn affine_and_step_flux() {
        let c = parse_config(
            "m = -0.5\n[boundary]\nf = 1.0\nf_slope = 1.0\ng_breaks = [0.0, 0.3]\ng_values = [1.0, 2.0]\n",
            Command::Extinction,
        )
        .unwrap();
        assert_eq!(
            c.experiment.f,
            FluxSpec::Affine {
                intercept: 1.0,
                slope: 1.0
            }
        );
        assert!(matches!(c.experiment.g, FluxSpec::Step { .. }));
    }
}
