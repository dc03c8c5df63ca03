//! Uniform node sets on a symmetric interval and the quadrature/interpolation
//! helpers shared by the solver and the Green operators.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform nodes `x_j = -R + j h`, `j = 0..=cells`, `h = 2R / cells`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    half_width: f64,
    cells: usize,
}

impl UniformGrid {
    pub fn new(half_width: f64, cells: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::ParameterOutOfRange {
                name: "R",
                value: half_width,
                allowed: "(0, inf)",
            });
        }
        if cells < 4 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 4 cells, got {cells}"
            )));
        }
        Ok(Self { half_width, cells })
    }

    /// Grid on `[-R, R]` whose spacing is as close as possible to `h` (never larger).
    pub fn with_spacing(half_width: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::ParameterOutOfRange {
                name: "h",
                value: h,
                allowed: "(0, inf)",
            });
        }
        let cells = (2.0 * half_width / h - 1e-9).ceil().max(4.0) as usize;
        Self::new(half_width, cells)
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.cells
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cells + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        // Symmetric evaluation keeps x(j) == -x(cells - j) bit for bit.
        let n = self.cells as f64;
        self.half_width * (2.0 * j as f64 - n) / n
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    pub fn check_samples(&self, samples: &[f64]) -> Result<()> {
        if samples.len() == self.len() {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.len(),
                got: samples.len(),
            })
        }
    }

    /// Trapezoid weights `h/2, h, ..., h, h/2`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.len()];
        w[0] = 0.5 * h;
        w[self.cells] = 0.5 * h;
        w
    }

    pub fn trapezoid(&self, samples: &[f64]) -> f64 {
        trapezoid_uniform(samples, self.h())
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        let s = (x + self.half_width) / self.h();
        (s.round().max(0.0) as usize).min(self.cells)
    }

    /// Piecewise-linear interpolation of nodal samples at `x` (clamped to `[-R, R]`).
    pub fn interpolate(&self, samples: &[f64], x: f64) -> f64 {
        let s = ((x + self.half_width) / self.h()).clamp(0.0, self.cells as f64);
        let j = (s.floor() as usize).min(self.cells - 1);
        let theta = s - j as f64;
        (1.0 - theta) * samples[j] + theta * samples[j + 1]
    }
}

/// Composite trapezoid rule on equally spaced samples.
pub fn trapezoid_uniform(samples: &[f64], h: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = samples[1..n - 1].iter().sum();
            h * (inner + 0.5 * (samples[0] + samples[n - 1]))
        }
    }
}

/// Composite trapezoid rule on arbitrary increasing abscissae.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Linear interpolation on increasing abscissae; clamps outside the range.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x).max(1) - 1;
    let theta = (x - xs[k]) / (xs[k + 1] - xs[k]);
    (1.0 - theta) * ys[k] + theta * ys[k + 1]
}
