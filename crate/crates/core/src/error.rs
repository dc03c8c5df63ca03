use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("{name} = {value} is outside the allowed range {allowed}")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        allowed: &'static str,
    },

    #[error("profile became non-positive at r = {r} (step too large?)")]
    NonPositiveProfile { r: f64 },

    #[error(
        "tail correction {tail:.3e} exceeds 5% of the grid quadrature {grid:.3e}; increase r_max"
    )]
    TailNotResolved { tail: f64, grid: f64 },

    #[error("t = {t} is at or beyond the extinction time {extinction}")]
    TimeBeyondExtinction { t: f64, extinction: f64 },

    #[error("point {x} lies outside [-{half_width}, {half_width}]")]
    OutOfInterval { x: f64, half_width: f64 },

    #[error("sample length {got} does not match grid with {expected} nodes")]
    GridMismatch { expected: usize, got: usize },

    #[error(
        "initial datum has min {min:e} with epsilon = 0; positive data or epsilon > 0 required"
    )]
    NonPositiveInitial { min: f64 },

    #[error("Newton iteration diverged at t = {t} with dt = {dt:e} (residual {residual:e})")]
    NewtonDiverged { t: f64, dt: f64, residual: f64 },

    #[error("positivity floor active at convergence, t = {t}, dt = {dt:e}")]
    PositivityLost { t: f64, dt: f64 },

    #[error("time step fell below {dt_min:e} at t = {t}")]
    StepTooSmall { t: f64, dt_min: f64 },

    #[error("window [-{window}, {window}] does not fit inside domain half-width {half_width}")]
    WindowOutsideDomain { window: f64, half_width: f64 },

    #[error("probe |x| = {probe} lies inside the comparison window {window}")]
    ProbeInsideWindow { probe: f64, window: f64 },

    #[error("mass fell only to {fraction:.3} of its initial value; run is not near extinction")]
    NotNearExtinction { fraction: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
