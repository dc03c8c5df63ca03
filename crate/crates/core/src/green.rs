//! Dirichlet Green function of `d²/dx²` on `[-R, R]`
//!
//! ```text
//!     G_R(x,y) = -(R+y)(R-x)/(2R)   for y <= x,
//!                -(R-y)(R+x)/(2R)   for x <= y,
//! ```
//!
//! and the operators `G_R(f)(x) = ∫ G_R(x,y) f(y) dy` and
//! `G_R*(f)(x) = ∫ [G_R(x,y) - G_R(0,y)] f(y) dy`. Quadrature is the trapezoid rule
//! on the operator's nodes; since every evaluation point is itself a node, the kink
//! of the kernel at `y = x` always falls on a node boundary.

use std::io::{self, Write};

use serde::Serialize;

use crate::grid::UniformGrid;
use crate::{Error, Result};

/// `G_R(x, y)`.
pub fn kernel(half_width: f64, x: f64, y: f64) -> Result<f64> {
    let r = half_width;
    for p in [x, y] {
        if !(p.abs() <= r) {
            return Err(Error::OutOfInterval {
                x: p,
                half_width: r,
            });
        }
    }
    Ok(kernel_unchecked(r, x, y))
}

#[inline]
fn kernel_unchecked(r: f64, x: f64, y: f64) -> f64 {
    if y <= x {
        -(r + y) * (r - x) / (2.0 * r)
    } else {
        -(r - y) * (r + x) / (2.0 * r)
    }
}

/// `H(r, y) = (r - |y|)/2` for `|y| < r`, `0` otherwise: the average of
/// `G_R(±r, y) - G_R(0, y)`, independent of `R >= r`.
pub fn averaged_kernel(r: f64, y: f64) -> f64 {
    if y.abs() < r {
        0.5 * (r - y.abs())
    } else {
        0.0
    }
}

/// Green operator on a uniform node set.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    grid: UniformGrid,
    weights: Vec<f64>,
}

impl GreenOperator {
    /// `cells` must be even so that `x = 0` is a node.
    pub fn new(half_width: f64, cells: usize) -> Result<Self> {
        if !cells.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "Green operator needs an even cell count so x = 0 is a node, got {cells}"
            )));
        }
        let grid = UniformGrid::new(half_width, cells)?;
        Ok(Self {
            weights: grid.trapezoid_weights(),
            grid,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn half_width(&self) -> f64 {
        self.grid.half_width()
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.grid.nodes()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.grid.nodes().into_iter().map(f).collect()
    }

    fn center(&self) -> usize {
        self.grid.cells() / 2
    }

    /// `G_R(f)` at every node.
    pub fn apply_green(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_samples(f)?;
        let r = self.half_width();
        let xs = self.grid.nodes();
        let wf: Vec<f64> = self.weights.iter().zip(f).map(|(w, v)| w * v).collect();
        Ok(xs
            .iter()
            .map(|&x| {
                xs.iter()
                    .zip(&wf)
                    .map(|(&y, &v)| kernel_unchecked(r, x, y) * v)
                    .sum()
            })
            .collect())
    }

    /// `G_R*(f) = G_R(f)(x) - G_R(f)(0)` at every node.
    pub fn apply_green_star(&self, f: &[f64]) -> Result<Vec<f64>> {
        let g = self.apply_green(f)?;
        let g0 = g[self.center()];
        Ok(g.into_iter().map(|v| v - g0).collect())
    }

    /// Splits `G_R*(f)` into
    ///
    /// ```text
    ///     I1 = -∫_0^x y f,   I2 = -(x/2)(∫_x^R f - ∫_{-R}^x f),   I3 = (x/(2R)) ∫ y f,
    /// ```
    ///
    /// and records how far `f` exceeds `C |x|^{1/m}` for `|x| >= R0`, if at all.
    pub fn asymptotic_decomposition(
        &self,
        f: &[f64],
        hypothesis: &DecayHypothesis,
    ) -> Result<Decomposition> {
        self.grid.check_samples(f)?;
        let n = self.grid.cells();
        let h = self.grid.h();
        let r = self.half_width();
        let xs = self.grid.nodes();
        let yf: Vec<f64> = xs.iter().zip(f).map(|(x, v)| x * v).collect();

        // cumulative trapezoid integrals from -R
        let cumulative = |g: &[f64]| {
            let mut c = vec![0.0; n + 1];
            for j in 1..=n {
                c[j] = c[j - 1] + 0.5 * h * (g[j - 1] + g[j]);
            }
            c
        };
        let cf = cumulative(f);
        let cyf = cumulative(&yf);
        let c0 = self.center();
        let total_f = cf[n];
        // Pair mirror nodes so that odd integrands cancel exactly.
        let total_yf: f64 = (0..c0)
            .map(|j| self.weights[j] * (yf[j] + yf[n - j]))
            .sum::<f64>()
            + self.weights[c0] * yf[c0];

        let mut i1 = Vec::with_capacity(n + 1);
        let mut i2 = Vec::with_capacity(n + 1);
        let mut i3 = Vec::with_capacity(n + 1);
        for (j, &x) in xs.iter().enumerate() {
            i1.push(-(cyf[j] - cyf[c0]));
            let right = total_f - cf[j];
            let left = cf[j];
            i2.push(-0.5 * x * (right - left));
            i3.push(x / (2.0 * r) * total_yf);
        }

        let decay_violation = xs
            .iter()
            .zip(f)
            .filter(|(x, _)| x.abs() >= hypothesis.r0)
            .map(|(x, v)| v.abs() - hypothesis.c * x.abs().powf(1.0 / hypothesis.m))
            .fold(f64::NEG_INFINITY, f64::max);

        Ok(Decomposition {
            x: xs,
            i1,
            i2,
            i3,
            mass: total_f,
            decay_violation: (decay_violation > 0.0).then_some(decay_violation),
        })
    }

    /// Writes `x,y,G` for every node pair.
    pub fn write_kernel_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,G")?;
        let r = self.half_width();
        let xs = self.grid.nodes();
        for &x in &xs {
            for &y in &xs {
                writeln!(out, "{x:.16e},{y:.16e},{:.16e}", kernel_unchecked(r, x, y))?;
            }
        }
        Ok(())
    }
}

/// `|f(x)| <= C |x|^{1/m}` for `|x| >= R0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayHypothesis {
    pub m: f64,
    pub c: f64,
    pub r0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub x: Vec<f64>,
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
    pub i3: Vec<f64>,
    /// `∫_{-R}^R f` on the operator grid.
    pub mass: f64,
    /// Largest excess over the decay bound; `None` when the hypothesis holds.
    pub decay_violation: Option<f64>,
}

impl Decomposition {
    pub fn sum(&self) -> Vec<f64> {
        self.i1
            .iter()
            .zip(&self.i2)
            .zip(&self.i3)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }
}

/// Second centered difference at interior nodes (ends set to NaN).
pub fn second_difference(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![f64::NAN; n];
    for j in 1..n - 1 {
        out[j] = (values[j + 1] - 2.0 * values[j] + values[j - 1]) / (h * h);
    }
    out
}

/// Identity checks of the Green operators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub half_width: f64,
    pub ladder: Vec<usize>,
    /// `max |D²[G_R(f)] - f|` over interior nodes, one per ladder level, for
    /// `f(x) = cos(3x) + x³`. The trapezoid-sampled kernel inverts the three-point
    /// Laplacian exactly, so these sit at roundoff.
    pub reproduction_errors: Vec<f64>,
    /// `max |G_R(f) - u|` against the closed form `u'' = f`, `u(±R) = 0`.
    pub operator_errors: Vec<f64>,
    /// `log2` of consecutive `operator_errors` ratios.
    pub observed_orders: Vec<f64>,
    /// `max |G_R*(2) - x²|` on the finest level.
    pub star_error: f64,
    /// `max |mean(G_R(±r,y)) - G_R(0,y) - H(r,y)|` over the sampled triples.
    pub averaged_kernel_error: f64,
    pub triples: usize,
}

/// Refinement study of `D²[G_R(f)] = f`, the `x²` test of `G_R*`, and the
/// averaged-kernel identity on `triples` points `(R', r, y)` drawn from a Weyl
/// sequence with `0 < r <= R' <= half_width`, `|y| <= R'`.
pub fn identity_report(
    half_width: f64,
    ladder: &[usize],
    triples: usize,
) -> Result<IdentityReport> {
    if ladder.is_empty() {
        return Err(Error::InvalidInput("empty refinement ladder".into()));
    }
    let test_fn = |x: f64| (3.0 * x).cos() + x * x * x;
    let r = half_width;
    let exact = |x: f64| {
        -(3.0 * x).cos() / 9.0 + x.powi(5) / 20.0 - r.powi(4) / 20.0 * x + (3.0 * r).cos() / 9.0
    };
    let mut reproduction_errors = Vec::with_capacity(ladder.len());
    let mut operator_errors = Vec::with_capacity(ladder.len());
    let mut star_error = 0.0;
    for &cells in ladder {
        let op = GreenOperator::new(half_width, cells)?;
        let f = op.sample(test_fn);
        let g = op.apply_green(&f)?;
        operator_errors.push(
            op.nodes()
                .iter()
                .zip(&g)
                .map(|(&x, v)| (v - exact(x)).abs())
                .fold(0.0, f64::max),
        );
        let d2 = second_difference(&g, op.grid().h());
        let err = d2[1..cells]
            .iter()
            .zip(&f[1..cells])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        reproduction_errors.push(err);
        let star = op.apply_green_star(&op.sample(|_| 2.0))?;
        star_error = op
            .nodes()
            .iter()
            .zip(&star)
            .map(|(x, v)| (v - x * x).abs())
            .fold(0.0, f64::max);
    }
    let observed_orders = operator_errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect();

    // Fractional parts of k * (1/phi, 1/phi², 1/phi³).
    let phi = 1.324_717_957_244_746; // plastic number, a standard 3-d Weyl base
    let alpha = [1.0 / phi, 1.0 / (phi * phi), 1.0 / (phi * phi * phi)];
    let mut averaged_kernel_error: f64 = 0.0;
    for k in 1..=triples {
        let u: Vec<f64> = alpha.iter().map(|a| (0.5 + a * k as f64).fract()).collect();
        let big_r = half_width * (0.05 + 0.95 * u[0]);
        let r = big_r * (0.01 + 0.99 * u[1]);
        let y = big_r * (2.0 * u[2] - 1.0);
        let lhs = 0.5 * (kernel(big_r, r, y)? + kernel(big_r, -r, y)?) - kernel(big_r, 0.0, y)?;
        averaged_kernel_error = averaged_kernel_error.max((lhs - averaged_kernel(r, y)).abs());
    }
    Ok(IdentityReport {
        half_width,
        ladder: ladder.to_vec(),
        reproduction_errors,
        operator_errors,
        observed_orders,
        star_error,
        averaged_kernel_error,
        triples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kernel_values() {
        assert_eq!(kernel(2.0, 0.0, 0.0).unwrap(), -1.0);
        for y in [-3.0, -1.0, 0.0, 2.5, 3.0] {
            assert_eq!(kernel(3.0, 3.0, y).unwrap(), 0.0);
            assert_eq!(kernel(3.0, -3.0, y).unwrap(), 0.0);
        }
        assert!(matches!(
            kernel(1.0, 1.5, 0.0),
            Err(Error::OutOfInterval { .. })
        ));
    }

    #[test]
    fn kernel_symmetric_and_nonpositive_on_node_grid() {
        let r = 2.5;
        let nodes: Vec<f64> = (0..50).map(|i| -r + 2.0 * r * i as f64 / 49.0).collect();
        for &x in &nodes {
            for &y in &nodes {
                let a = kernel(r, x, y).unwrap();
                assert_eq!(a, kernel(r, y, x).unwrap());
                assert!(a <= 0.0);
            }
        }
    }

    #[test]
    fn kernel_continuous_across_diagonal() {
        let r = 1.7;
        for x in [-1.2, 0.0, 0.4, 1.69] {
            let below = kernel(r, x, x - 1e-12).unwrap();
            let above = kernel(r, x, x + 1e-12).unwrap();
            assert!((below - above).abs() < 1e-11);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let op = GreenOperator::new(3.0, 40).unwrap();
        let z = vec![0.0; 41];
        assert!(op.apply_green(&z).unwrap().iter().all(|&v| v == 0.0));
        assert!(op.apply_green_star(&z).unwrap().iter().all(|&v| v == 0.0));
        let hyp = DecayHypothesis {
            m: -0.5,
            c: 1.0,
            r0: 1.0,
        };
        let d = op.asymptotic_decomposition(&z, &hyp).unwrap();
        assert!(d.sum().iter().all(|&v| v == 0.0));
        assert!(d.decay_violation.is_none());
    }

    #[test]
    fn green_of_constant_is_parabola() {
        let r = 3.0;
        let op = GreenOperator::new(r, 60).unwrap();
        let g = op.apply_green(&op.sample(|_| 1.0)).unwrap();
        for (x, v) in op.nodes().into_iter().zip(g) {
            assert!((v - 0.5 * (x * x - r * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn green_star_vanishes_at_origin_and_needs_even_cells() {
        let op = GreenOperator::new(2.0, 40).unwrap();
        let f = op.sample(|x| (3.0 * x).sin() + x * x);
        let g = op.apply_green_star(&f).unwrap();
        assert_eq!(g[20], 0.0);
        assert!(GreenOperator::new(2.0, 41).is_err());
        assert!(matches!(
            op.apply_green(&[1.0; 7]),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn sine_eigenfunction() {
        let r = 2.0;
        let op = GreenOperator::new(r, 400).unwrap();
        let g = op.apply_green(&op.sample(|x| (PI * x / r).sin())).unwrap();
        let scale = (r / PI).powi(2);
        for (x, v) in op.nodes().into_iter().zip(g) {
            assert!((v + scale * (PI * x / r).sin()).abs() < 1e-4);
        }
    }

    #[test]
    fn averaged_kernel_cases() {
        assert_eq!(averaged_kernel(1.0, 0.0), 0.5);
        assert_eq!(averaged_kernel(1.0, 1.0), 0.0);
        assert_eq!(averaged_kernel(1.0, -3.0), 0.0);
        assert_eq!(averaged_kernel(2.0, -0.5), 0.75);
    }

    #[test]
    fn even_input_has_zero_i3_and_flags_decay() {
        let op = GreenOperator::new(10.0, 200).unwrap();
        let f = op.sample(|x| (-x * x).exp());
        let hyp = DecayHypothesis {
            m: -0.5,
            c: 1.0,
            r0: 2.0,
        };
        let d = op.asymptotic_decomposition(&f, &hyp).unwrap();
        assert!(d.i3.iter().all(|&v| v == 0.0));
        assert!(d.decay_violation.is_none());
        let flat = op.sample(|_| 1.0);
        let d = op.asymptotic_decomposition(&flat, &hyp).unwrap();
        assert!(d.decay_violation.unwrap() > 0.0);
    }
}
