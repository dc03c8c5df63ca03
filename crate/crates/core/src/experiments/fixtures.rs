use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::UniformGrid;
use crate::selfsim::SelfSimilarSolution;
use crate::solver::{make_initial, BoundarySpec, Controls, PdeState, TimeFn};
use crate::{check_exponent, Error, Result};

/// Boundary flux data in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluxSpec {
    Constant {
        value: f64,
    },
    /// `intercept + slope t`
    Affine {
        intercept: f64,
        slope: f64,
    },
    /// `values[i]` on `[breaks[i], breaks[i+1])`, `breaks[0] = 0`.
    Step {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
}

impl FluxSpec {
    pub fn constant(value: f64) -> Self {
        FluxSpec::Constant { value }
    }

    pub fn to_time_fn(&self) -> TimeFn {
        match self {
            FluxSpec::Constant { value } => TimeFn::Constant(*value),
            FluxSpec::Affine { intercept, slope } => TimeFn::Affine {
                intercept: *intercept,
                slope: *slope,
            },
            FluxSpec::Step { breaks, values } => TimeFn::step(breaks.clone(), values.clone()),
        }
    }

    /// Smallest value on `[0, t_end]`.
    pub fn min_on(&self, t_end: f64) -> f64 {
        match self {
            FluxSpec::Constant { value } => *value,
            FluxSpec::Affine { intercept, slope } => intercept.min(intercept + slope * t_end),
            FluxSpec::Step { breaks, values } => breaks
                .iter()
                .zip(values)
                .filter(|(b, _)| **b <= t_end)
                .map(|(_, v)| *v)
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        match self {
            FluxSpec::Step { breaks, values } => {
                let ok = !breaks.is_empty()
                    && breaks.len() == values.len()
                    && breaks[0] == 0.0
                    && breaks.windows(2).all(|w| w[0] < w[1]);
                if !ok {
                    return Err(Error::InvalidInput(format!(
                        "{name}: step data need increasing breaks starting at 0, one value each"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Initial datum of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDatum {
    /// `(mass/width) (1 + cos(pi x / width)) / 2` on `|x| < width`, zero outside.
    Bump { mass: f64, width: f64 },
    /// `v(x, 0)` of the self-similar solution with half-mass `mu` and extinction time `t_ext`;
    /// boundary data are then matched to `v`.
    SelfSimilar { mu: f64, t_ext: f64 },
    /// Nodal samples, interpolated linearly (zero outside).
    Samples { x: Vec<f64>, u: Vec<f64> },
}

impl InitialDatum {
    pub fn standard_bump() -> Self {
        InitialDatum::Bump {
            mass: 2.0,
            width: 2.0,
        }
    }
}

/// Compact comparison set `[-L, L] x [a, b]` and its probe grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub half_width: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub x_probes: usize,
    pub t_probes: usize,
}

impl Window {
    pub fn standard() -> Self {
        Self {
            half_width: 2.0,
            t_start: 0.1,
            t_end: 0.5,
            x_probes: 41,
            t_probes: 5,
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(-self.half_width, self.half_width, self.x_probes)
    }

    pub fn ts(&self) -> Vec<f64> {
        linspace(self.t_start, self.t_end, self.t_probes)
    }

    /// Same window with the probe density doubled.
    pub fn refined(&self) -> Self {
        Self {
            x_probes: 2 * self.x_probes - 1,
            t_probes: 2 * self.t_probes - 1,
            ..self.clone()
        }
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Grid spacing, the same for every domain size.
    pub h: f64,
    /// Fixed time step.
    pub dt: f64,
}

impl Resolution {
    /// Scale of the scheme's truncation error, `h² + dt`.
    pub fn discretization_tol(&self) -> f64 {
        self.h * self.h + self.dt
    }
}

/// Every threshold an experiment asserts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `d_last` bound for expanding-domain convergence.
    pub compact: f64,
    /// Relative mass-law deviation on `[a, b]`.
    pub mass: f64,
    /// Far-field slope deviation.
    pub slope: f64,
    /// Dirichlet/Neumann and composed/direct agreement.
    pub equal: f64,
    /// Ordering excess, as a multiple of `Resolution::discretization_tol`.
    pub order_factor: f64,
    /// Relative extinction-time error.
    pub extinction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            compact: 1e-2,
            mass: 1e-2,
            slope: 0.05,
            equal: 1e-2,
            order_factor: 10.0,
            extinction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: f64,
    pub initial: InitialDatum,
    /// Regularisation added to the initial datum.
    pub epsilon: f64,
    /// Growth-condition constants: `u0 <= (mu0 |m| |x|)^{1/m}` for `|x| >= r0`.
    pub mu0: f64,
    pub r0: f64,
    /// Outflux at `+R`.
    pub f: FluxSpec,
    /// Outflux at `-R`.
    pub g: FluxSpec,
    pub r_list: Vec<f64>,
    pub window: Window,
    pub resolution: Resolution,
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    /// Bump with `∫u0 = 2`, `mu = 1`, `m = -1/2`, `R in {10, 20, 40}`,
    /// window `[-2, 2] x [0.1, 0.5]`.
    pub fn standard() -> Self {
        Self {
            m: -0.5,
            initial: InitialDatum::standard_bump(),
            epsilon: 1e-6,
            mu0: 1.0,
            r0: 2.0,
            f: FluxSpec::constant(1.0),
            g: FluxSpec::constant(1.0),
            r_list: vec![10.0, 20.0, 40.0],
            window: Window::standard(),
            resolution: Resolution { h: 0.05, dt: 1e-3 },
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.f = FluxSpec::constant(mu);
        self.g = FluxSpec::constant(mu);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.m)?;
        self.f.validate("f")?;
        self.g.validate("g")?;
        if self.r_list.is_empty() || !self.r_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "R_list must be nonempty and strictly increasing".into(),
            ));
        }
        let r_min = self.r_list[0];
        if !(self.window.half_width < r_min) {
            return Err(Error::WindowOutsideDomain {
                window: self.window.half_width,
                half_width: r_min,
            });
        }
        if !(0.0 < self.window.t_start && self.window.t_start < self.window.t_end) {
            return Err(Error::InvalidInput(format!(
                "window times need 0 < a < b, got [{}, {}]",
                self.window.t_start, self.window.t_end
            )));
        }
        if !(self.mu0 > 0.0 && self.r0 >= 0.0 && self.epsilon >= 0.0) {
            return Err(Error::InvalidInput(
                "mu0 must be positive, r0 and epsilon nonnegative".into(),
            ));
        }
        if !(self.resolution.h > 0.0 && self.resolution.dt > 0.0) {
            return Err(Error::InvalidInput("h and dt must be positive".into()));
        }
        Ok(())
    }

    /// The self-similar solution of a self-similar datum, `None` otherwise.
    pub fn self_similar(&self) -> Result<Option<Arc<SelfSimilarSolution>>> {
        match self.initial {
            InitialDatum::SelfSimilar { mu, t_ext } => Ok(Some(Arc::new(
                SelfSimilarSolution::calibrated(self.m, mu, t_ext)?,
            ))),
            _ => Ok(None),
        }
    }

    pub fn grid(&self, half_width: f64) -> Result<UniformGrid> {
        UniformGrid::with_spacing(half_width, self.resolution.h)
    }

    pub fn initial_state(
        &self,
        half_width: f64,
        exact: Option<&SelfSimilarSolution>,
    ) -> Result<PdeState> {
        let grid = self.grid(half_width)?;
        match (&self.initial, exact) {
            (InitialDatum::Bump { mass, width }, _) => {
                let (mass, width) = (*mass, *width);
                make_initial(
                    move |x| {
                        if x.abs() < width {
                            mass / width * 0.5 * (1.0 + (PI * x / width).cos())
                        } else {
                            0.0
                        }
                    },
                    self.epsilon,
                    grid,
                )
            }
            (InitialDatum::SelfSimilar { .. }, Some(v)) => {
                make_initial(|x| v.value(x, 0.0).unwrap_or(0.0), self.epsilon, grid)
            }
            (InitialDatum::SelfSimilar { .. }, None) => Err(Error::InvalidInput(
                "self-similar datum needs its exact solution".into(),
            )),
            (InitialDatum::Samples { x, u }, _) => {
                if x.len() != u.len() || x.len() < 2 {
                    return Err(Error::InvalidInput(
                        "sample datum needs matching x and u arrays".into(),
                    ));
                }
                let (x0, x1) = (x[0], x[x.len() - 1]);
                make_initial(
                    |p| {
                        if p < x0 || p > x1 {
                            0.0
                        } else {
                            crate::grid::interp_linear(x, u, p)
                        }
                    },
                    self.epsilon,
                    grid,
                )
            }
        }
    }

    /// Dirichlet data `(f|m|R)^{1/m}`, `(g|m|R)^{1/m}`, or `v(±R, t)` for a
    /// self-similar datum.
    pub fn dirichlet_bc(
        &self,
        half_width: f64,
        exact: Option<&Arc<SelfSimilarSolution>>,
    ) -> BoundarySpec {
        match exact {
            Some(v) => {
                let (vl, vr) = (Arc::clone(v), Arc::clone(v));
                BoundarySpec::dirichlet(
                    TimeFn::custom(move |t| vl.value(-half_width, t).unwrap_or(f64::NAN)),
                    TimeFn::custom(move |t| vr.value(half_width, t).unwrap_or(f64::NAN)),
                )
            }
            None => BoundarySpec::dirichlet_far_field(
                self.f.to_time_fn(),
                self.g.to_time_fn(),
                self.m,
                half_width,
            ),
        }
    }

    /// Flux data `f`, `g`, or the exact fluxes of `v` at `±R` for a self-similar datum.
    pub fn neumann_bc(
        &self,
        half_width: f64,
        exact: Option<&Arc<SelfSimilarSolution>>,
    ) -> BoundarySpec {
        match exact {
            Some(v) => {
                let (vl, vr) = (Arc::clone(v), Arc::clone(v));
                BoundarySpec::neumann(
                    TimeFn::custom(move |t| -vr.potential_slope(half_width, t).unwrap_or(f64::NAN)),
                    TimeFn::custom(move |t| vl.potential_slope(-half_width, t).unwrap_or(f64::NAN)),
                )
            }
            None => BoundarySpec::neumann(self.f.to_time_fn(), self.g.to_time_fn()),
        }
    }

    /// Fixed-step controls landing on the window probe times (and any extra times).
    pub fn controls(&self, extra_landing: &[f64]) -> Controls {
        let mut landing = self.window.refined().ts();
        landing.extend_from_slice(extra_landing);
        Controls {
            dt_initial: Some(self.resolution.dt),
            dt_max: self.resolution.dt,
            fixed_dt: true,
            landing_times: landing,
            ..Controls::default()
        }
    }

    /// `∫u0` including the regularisation on `[-R, R]`.
    pub fn initial_mass(&self, half_width: f64) -> Result<f64> {
        let exact = self.self_similar()?;
        Ok(self.initial_state(half_width, exact.as_deref())?.mass())
    }
}
