//! Numerical laboratory for the very fast diffusion equation
//!
//! ```text
//!     u_t = (u^m / m)_xx,     -1 < m < 0,
//! ```
//!
//! in one space dimension. The crate provides
//!
//! * [`selfsim`]: the even self-similar solutions `v(x,t)` and their radial profile,
//! * [`green`]: the Dirichlet Green kernel of `d²/dx²` on `[-R, R]` and derived operators,
//! * [`solver`]: an implicit, positivity-preserving finite-difference solver with
//!   Dirichlet or flux boundary data and a mass/flux ledger,
//! * [`experiments`]: expanding-domain, mass-law, extinction, far-field and ordering
//!   checks built on top of the solver.

// `!(x > 0.0)` guards are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod green;
pub mod grid;
pub mod selfsim;
pub mod solver;
pub mod tridiag;

pub use error::{Error, Result};

/// Checks `-1 < m < 0`.
pub fn check_exponent(m: f64) -> Result<()> {
    if m > -1.0 && m < 0.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name: "m",
            value: m,
            allowed: "(-1, 0)",
        })
    }
}

/// `phi_m(u) = u^m / m`.
#[inline]
pub fn phi_m(u: f64, m: f64) -> f64 {
    u.powf(m) / m
}

/// Inverse of [`phi_m`] on `w < 0`.
#[inline]
pub fn phi_m_inv(w: f64, m: f64) -> f64 {
    (m * w).powf(1.0 / m)
}

/// Far-field profile `(mu |m| r)^{1/m}`, which is also the Dirichlet value at `|x| = r`.
#[inline]
pub fn far_field(mu: f64, m: f64, r: f64) -> f64 {
    (mu * m.abs() * r).powf(1.0 / m)
}

/// `∫_r^∞ (mu |m| s)^{1/m} ds`, finite because `1/m < -1`.
pub fn far_field_tail_mass(mu: f64, m: f64, r: f64) -> f64 {
    let p = 1.0 / m;
    (mu * m.abs()).powf(p) * r.powf(1.0 + p) / (-1.0 - p)
}
