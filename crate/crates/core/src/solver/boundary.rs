use std::fmt;
use std::sync::Arc;

use crate::far_field;

/// Scalar function of time used for boundary data.
#[derive(Clone)]
pub enum TimeFn {
    Constant(f64),
    /// `intercept + slope * t`
    Affine {
        intercept: f64,
        slope: f64,
    },
    /// Right-continuous step function: `values[i]` on `[breaks[i], breaks[i+1])`, the
    /// last value extending to infinity. `breaks[0]` must be `0`.
    Step {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
    /// Dirichlet value `(flux(t) |m| r)^{1/m}` matched to a prescribed flux.
    FarField {
        flux: Box<TimeFn>,
        m: f64,
        r: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl TimeFn {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeFn::Custom(Arc::new(f))
    }

    pub fn step(breaks: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(breaks.len(), values.len(), "one value per step interval");
        assert!(!breaks.is_empty() && breaks[0] == 0.0);
        assert!(breaks.windows(2).all(|w| w[0] < w[1]));
        TimeFn::Step { breaks, values }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant(c) => *c,
            TimeFn::Affine { intercept, slope } => intercept + slope * t,
            TimeFn::Step { breaks, values } => {
                let k = breaks.partition_point(|&b| b <= t).max(1) - 1;
                values[k]
            }
            TimeFn::FarField { flux, m, r } => far_field(flux.eval(t), *m, *r),
            TimeFn::Custom(f) => f(t),
        }
    }

    /// Left limit at `t`; differs from [`eval`](Self::eval) only at jumps of step data.
    pub fn eval_left(&self, t: f64) -> f64 {
        match self {
            TimeFn::Step { breaks, values } => {
                let k = breaks.partition_point(|&b| b < t).max(1) - 1;
                values[k]
            }
            TimeFn::FarField { flux, m, r } => far_field(flux.eval_left(t), *m, *r),
            _ => self.eval(t),
        }
    }

    /// Jump times (empty for continuous data).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TimeFn::Step { breaks, .. } => breaks[1..].to_vec(),
            TimeFn::FarField { flux, .. } => flux.breakpoints(),
            _ => Vec::new(),
        }
    }

    /// `∫_0^t` of the function, exact for constant, affine and step data and
    /// by composite Simpson (2000 panels) otherwise.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant(c) => c * t,
            TimeFn::Affine { intercept, slope } => intercept * t + 0.5 * slope * t * t,
            TimeFn::Step { breaks, values } => {
                let mut acc = 0.0;
                for (i, &v) in values.iter().enumerate() {
                    let a = breaks[i];
                    if a >= t {
                        break;
                    }
                    let b = breaks.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
                    acc += v * (b - a);
                }
                acc
            }
            _ => simpson(|s| self.eval(s), 0.0, t, 2000),
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels * 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

impl fmt::Debug for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFn::Constant(c) => write!(f, "Constant({c})"),
            TimeFn::Affine { intercept, slope } => write!(f, "Affine({intercept} + {slope} t)"),
            TimeFn::Step { breaks, values } => write!(f, "Step({breaks:?}, {values:?})"),
            TimeFn::FarField { flux, m, r } => write!(f, "FarField({flux:?}, m={m}, r={r})"),
            TimeFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BoundaryKind {
    Dirichlet,
    NeumannFlux,
}

/// Boundary data on `x = ±R`.
///
/// * `Dirichlet`: `left(t) = u(-R,t) > 0`, `right(t) = u(R,t) > 0`.
/// * `NeumannFlux`: `(u^m/m)_x(-R,t) = left(t) = g(t)` and
///   `(u^m/m)_x(R,t) = -right(t) = -f(t)`, so positive data drain mass on both sides.
#[derive(Debug, Clone)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    pub left: TimeFn,
    pub right: TimeFn,
}

impl BoundarySpec {
    pub fn dirichlet(left: TimeFn, right: TimeFn) -> Self {
        Self {
            kind: BoundaryKind::Dirichlet,
            left,
            right,
        }
    }

    /// `u(R,t) = (f(t)|m|R)^{1/m}`, `u(-R,t) = (g(t)|m|R)^{1/m}`.
    pub fn dirichlet_far_field(f: TimeFn, g: TimeFn, m: f64, half_width: f64) -> Self {
        Self::dirichlet(
            TimeFn::FarField {
                flux: Box::new(g),
                m,
                r: half_width,
            },
            TimeFn::FarField {
                flux: Box::new(f),
                m,
                r: half_width,
            },
        )
    }

    /// `u(±R,t) = (mu|m|R)^{1/m}`.
    pub fn dirichlet_constant_mu(mu: f64, m: f64, half_width: f64) -> Self {
        Self::dirichlet_far_field(TimeFn::Constant(mu), TimeFn::Constant(mu), m, half_width)
    }

    /// Outflux `f` at `+R`, `g` at `-R`.
    pub fn neumann(f: TimeFn, g: TimeFn) -> Self {
        Self {
            kind: BoundaryKind::NeumannFlux,
            left: g,
            right: f,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.left.breakpoints();
        b.extend(self.right.breakpoints());
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Drain rate `f + g` for flux data, `None` for Dirichlet data.
    pub fn total_outflux(&self, t: f64) -> Option<f64> {
        match self.kind {
            BoundaryKind::NeumannFlux => Some(self.left.eval(t) + self.right.eval(t)),
            BoundaryKind::Dirichlet => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_values_and_limits() {
        let s = TimeFn::step(vec![0.0, 0.3], vec![1.0, 2.0]);
        assert_eq!(s.eval(0.0), 1.0);
        assert_eq!(s.eval(0.3), 2.0);
        assert_eq!(s.eval_left(0.3), 1.0);
        assert_eq!(s.eval_left(0.31), 2.0);
        assert_eq!(s.breakpoints(), vec![0.3]);
        assert!((s.integral(0.5) - (0.3 + 0.4)).abs() < 1e-15);
        assert!((s.integral(0.2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn integrals() {
        let a = TimeFn::Affine {
            intercept: 1.0,
            slope: 1.0,
        };
        assert!((a.integral(0.5) - 0.625).abs() < 1e-15);
        let c = TimeFn::custom(|t| 1.0 + t);
        assert!((c.integral(0.5) - 0.625).abs() < 1e-12);
    }

    #[test]
    fn far_field_dirichlet_value() {
        let bc = BoundarySpec::dirichlet_constant_mu(1.0, -0.5, 10.0);
        assert!((bc.right.eval(3.0) - 0.04).abs() < 1e-15);
        assert!((bc.left.eval(0.0) - 0.04).abs() < 1e-15);
    }
}
