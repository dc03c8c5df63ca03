//! Even self-similar solutions
//!
//! ```text
//!     v(x,t) = (T-t)^{1/(1+m)} f(|x| (T-t)^{-m/(1+m)})
//! ```
//!
//! The radial profile `f` solves `(f'/f^{1-m})' + f/(1+m) - m r f'/(1+m) = 0`,
//! `f(0) = eta`, `f'(0) = 0`. Integrating once gives the first-order form
//!
//! ```text
//!     f'/f^{1-m} = m/(1+m) r f - F,     F(r) = ∫_0^r f,
//! ```
//!
//! which is what [`integrate_profile`] steps with classical RK4 on the pair `(f, F)`.
//! Profiles for different `eta` are related by `f(r) = eta phi(eta^{(1-m)/2} r)`
//! where `phi` is the profile with `eta = 1`, and the half-mass scales as
//! `∫ f = A_1 eta^{(1+m)/2}`.

use std::io::{self, Write};

use serde::Serialize;

use crate::grid::trapezoid;
use crate::{check_exponent, far_field, far_field_tail_mass, Error, Result};

/// Sampled radial profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub m: f64,
    pub eta: f64,
    pub dr: f64,
    pub r_grid: Vec<f64>,
    pub f_values: Vec<f64>,
    /// `f'` from the ODE right-hand side (not differenced).
    pub df_values: Vec<f64>,
    /// Running integral `F(r) = ∫_0^r f` carried by the integrator.
    pub running_mass: Vec<f64>,
    /// `∫_0^∞ phi` of the unit profile, once known.
    pub a1: Option<f64>,
    /// Half-mass `∫_0^∞ f`, once known.
    pub mu: Option<f64>,
}

/// Calibration record exported next to the profile CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileMetadata {
    pub m: f64,
    pub eta: f64,
    pub mu: Option<f64>,
    pub a1: Option<f64>,
    pub dr: f64,
    pub r_max: f64,
}

fn profile_rhs(m: f64, r: f64, f: f64, big_f: f64) -> (f64, f64) {
    let k = m / (1.0 + m);
    (f.powf(1.0 - m) * (k * r * f - big_f), f)
}

fn validate(m: f64, eta: f64, dr: f64) -> Result<()> {
    check_exponent(m)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::ParameterOutOfRange {
            name: "eta",
            value: eta,
            allowed: "(0, inf)",
        });
    }
    if !(dr > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "dr",
            value: dr,
            allowed: "(0, inf)",
        });
    }
    Ok(())
}

struct Integrator {
    m: f64,
    r: f64,
    f: f64,
    big_f: f64,
}

impl Integrator {
    fn rk4(&mut self, dr: f64) -> Result<()> {
        let m = self.m;
        let (r, f, g) = (self.r, self.f, self.big_f);
        let positive = |v: f64, at: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonPositiveProfile { r: at })
            }
        };
        let (k1f, k1g) = profile_rhs(m, r, f, g);
        let f2 = positive(f + 0.5 * dr * k1f, r + 0.5 * dr)?;
        let (k2f, k2g) = profile_rhs(m, r + 0.5 * dr, f2, g + 0.5 * dr * k1g);
        let f3 = positive(f + 0.5 * dr * k2f, r + 0.5 * dr)?;
        let (k3f, k3g) = profile_rhs(m, r + 0.5 * dr, f3, g + 0.5 * dr * k2g);
        let f4 = positive(f + dr * k3f, r + dr)?;
        let (k4f, k4g) = profile_rhs(m, r + dr, f4, g + dr * k3g);
        self.f = positive(f + dr / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f), r + dr)?;
        self.big_f = g + dr / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        self.r = r + dr;
        Ok(())
    }
}

struct Samples {
    r: Vec<f64>,
    f: Vec<f64>,
    df: Vec<f64>,
    big_f: Vec<f64>,
}

impl Samples {
    fn push(&mut self, it: &Integrator) {
        self.r.push(it.r);
        self.f.push(it.f);
        self.df.push(profile_rhs(it.m, it.r, it.f, it.big_f).0);
        self.big_f.push(it.big_f);
    }
}

fn march(
    m: f64,
    eta: f64,
    dr: f64,
    mut done: impl FnMut(usize, &Integrator) -> bool,
) -> Result<ProfileCurve> {
    let mut it = Integrator {
        m,
        r: 0.0,
        f: eta,
        big_f: 0.0,
    };
    let mut s = Samples {
        r: Vec::new(),
        f: Vec::new(),
        df: Vec::new(),
        big_f: Vec::new(),
    };
    s.push(&it);
    let mut i = 0;
    while !done(i, &it) {
        it.rk4(dr)?;
        i += 1;
        // Re-anchor r to avoid accumulating rounding in r += dr.
        it.r = i as f64 * dr;
        s.push(&it);
    }
    Ok(ProfileCurve {
        m,
        eta,
        dr,
        r_grid: s.r,
        f_values: s.f,
        df_values: s.df,
        running_mass: s.big_f,
        a1: None,
        mu: None,
    })
}

/// RK4 integration of the first-order profile system on `[0, r_max]`.
///
/// The step is adjusted down so that `r_max` is a grid point.
pub fn integrate_profile(m: f64, eta: f64, r_max: f64, dr: f64) -> Result<ProfileCurve> {
    validate(m, eta, dr)?;
    if !(r_max >= 10.0 * dr) {
        return Err(Error::ParameterOutOfRange {
            name: "r_max",
            value: r_max,
            allowed: "[10 dr, inf)",
        });
    }
    let steps = (r_max / dr).ceil() as usize;
    let dr = r_max / steps as f64;
    march(m, eta, dr, |i, _| i == steps)
}

/// Default step `1e-3 max(1, eta^{(m-1)/2})`, the natural length scale of the profile.
pub fn default_dr(m: f64, eta: f64) -> f64 {
    1e-3 * eta.powf(0.5 * (m - 1.0)).max(1.0)
}

/// Integrates with step `dr` until `f(r) < ratio * eta` (and at least ten steps).
pub fn integrate_profile_until(m: f64, eta: f64, dr: f64, ratio: f64) -> Result<ProfileCurve> {
    validate(m, eta, dr)?;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::ParameterOutOfRange {
            name: "ratio",
            value: ratio,
            allowed: "(0, 1)",
        });
    }
    // The profile decays like r^{1/m}; cap the march far beyond any sensible cutoff.
    let max_steps = 200_000_000usize;
    march(m, eta, dr, |i, it| {
        (i >= 10 && it.f < ratio * eta) || i >= max_steps
    })
}

/// Profile on the default grid: `dr` from [`default_dr`], `r_max` where `f < 1e-3 eta`.
pub fn default_profile(m: f64, eta: f64) -> Result<ProfileCurve> {
    integrate_profile_until(m, eta, default_dr(m, eta), 1e-3)
}

impl ProfileCurve {
    pub fn r_max(&self) -> f64 {
        *self.r_grid.last().expect("profile has samples")
    }

    pub fn len(&self) -> usize {
        self.r_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_grid.is_empty()
    }

    /// Cubic Hermite interpolation using the ODE derivative; `None` beyond `r_max`.
    pub fn value(&self, r: f64) -> Option<f64> {
        let r = r.abs();
        let n = self.r_grid.len();
        if r > self.r_max() {
            return None;
        }
        let k = ((r / self.dr).floor() as usize).min(n - 2);
        let h = self.r_grid[k + 1] - self.r_grid[k];
        let s = (r - self.r_grid[k]) / h;
        let (f0, f1) = (self.f_values[k], self.f_values[k + 1]);
        let (d0, d1) = (self.df_values[k] * h, self.df_values[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        Some(
            (2.0 * s3 - 3.0 * s2 + 1.0) * f0
                + (s3 - 2.0 * s2 + s) * d0
                + (-2.0 * s3 + 3.0 * s2) * f1
                + (s3 - s2) * d1,
        )
    }

    /// Continuation beyond `r_max` by `(mu |m| r + a_end)^{1/m}`, matched to `f(r_max)`.
    ///
    /// `mu` is the calibrated half-mass when known, else fitted at `r_max`.
    pub fn far_value(&self, r: f64) -> f64 {
        let m = self.m;
        let r_end = self.r_max();
        let f_end = *self.f_values.last().unwrap();
        let mu = self.mu.unwrap_or_else(|| f_end.powf(m) / (m.abs() * r_end));
        let offset = f_end.powf(m) - mu * m.abs() * r_end;
        (mu * m.abs() * r.abs() + offset).powf(1.0 / m)
    }

    /// `f(r)` on the grid, the far-field continuation beyond it. The flag is `true`
    /// when the continuation was used.
    pub fn value_or_far(&self, r: f64) -> (f64, bool) {
        match self.value(r) {
            Some(v) => (v, false),
            None => (self.far_value(r), true),
        }
    }

    /// `f - m r f'` at every grid point, `f'` by central differences (one-sided at the ends).
    pub fn h_values(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let d = if i == 0 {
                    (self.f_values[1] - self.f_values[0]) / self.dr
                } else if i == n - 1 {
                    (self.f_values[n - 1] - self.f_values[n - 2]) / self.dr
                } else {
                    (self.f_values[i + 1] - self.f_values[i - 1]) / (2.0 * self.dr)
                };
                self.f_values[i] - self.m * self.r_grid[i] * d
            })
            .collect()
    }

    /// `r^{-1/m} f(r)` at every grid point.
    pub fn w_values(&self) -> Vec<f64> {
        let p = -1.0 / self.m;
        self.r_grid
            .iter()
            .zip(&self.f_values)
            .map(|(r, f)| r.powf(p) * f)
            .collect()
    }

    /// Largest `r^{2/(1-m)} f(r)` over `r > 0` on the grid.
    pub fn max_scaled_decay(&self) -> f64 {
        let p = 2.0 / (1.0 - self.m);
        self.r_grid
            .iter()
            .zip(&self.f_values)
            .skip(1)
            .map(|(r, f)| r.powf(p) * f)
            .fold(0.0, f64::max)
    }

    pub fn metadata(&self) -> ProfileMetadata {
        ProfileMetadata {
            m: self.m,
            eta: self.eta,
            mu: self.mu,
            a1: self.a1,
            dr: self.dr,
            r_max: self.r_max(),
        }
    }

    /// Writes `r,f,w`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "r,f,w")?;
        for ((r, f), w) in self.r_grid.iter().zip(&self.f_values).zip(self.w_values()) {
            writeln!(out, "{r:.16e},{f:.16e},{w:.16e}")?;
        }
        Ok(())
    }
}

/// `(2(1+m)/(1-m))^{1/(1-m)}`, the strict upper bound of `r^{2/(1-m)} f(r)`.
pub fn decay_bound(m: f64) -> f64 {
    (2.0 * (1.0 + m) / (1.0 - m)).powf(1.0 / (1.0 - m))
}

/// Outcome of checking the profile invariants on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileChecks {
    pub positive: bool,
    pub strictly_decreasing: bool,
    /// `|f'(0)|` estimated by the first forward difference.
    pub slope_at_origin: f64,
    /// `max r^{2/(1-m)} f / decay_bound(m)`; must stay below 1.
    pub decay_ratio: f64,
    pub min_h: f64,
}

impl ProfileChecks {
    pub fn all_hold(&self, slope_tol: f64) -> bool {
        self.positive
            && self.strictly_decreasing
            && self.slope_at_origin <= slope_tol
            && self.decay_ratio < 1.0
            && self.min_h > 0.0
    }
}

pub fn check_profile(curve: &ProfileCurve) -> ProfileChecks {
    let f = &curve.f_values;
    ProfileChecks {
        positive: f.iter().all(|&v| v > 0.0),
        strictly_decreasing: f[1..].windows(2).all(|w| w[1] < w[0]) && f[1] < f[0],
        slope_at_origin: ((f[1] - f[0]) / curve.dr).abs(),
        decay_ratio: curve.max_scaled_decay() / decay_bound(curve.m),
        min_h: curve.h_values().into_iter().fold(f64::INFINITY, f64::min),
    }
}

/// Half-mass split into the grid part and the analytic tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileMass {
    pub grid: f64,
    pub tail: f64,
    /// Far-field slope `mu_hat = f(r_max)^m / (|m| r_max)` used for the tail.
    pub fitted_mu: f64,
}

impl ProfileMass {
    pub fn total(&self) -> f64 {
        self.grid + self.tail
    }
}

/// Trapezoid mass of `(r, f)` samples plus `∫_{r_max}^∞ (mu_hat |m| r)^{1/m} dr`,
/// `mu_hat` fitted so the asymptote passes through the last sample. A zero last
/// sample gives a zero tail.
pub fn tail_completed_mass(r: &[f64], f: &[f64], m: f64) -> Result<ProfileMass> {
    check_exponent(m)?;
    let grid = trapezoid(r, f);
    let r_end = *r.last().unwrap();
    let f_end = *f.last().unwrap();
    let (tail, fitted_mu) = if f_end > 0.0 {
        let mu_hat = f_end.powf(m) / (m.abs() * r_end);
        (far_field_tail_mass(mu_hat, m, r_end), mu_hat)
    } else {
        (0.0, f64::INFINITY)
    };
    if tail > 0.05 * grid {
        return Err(Error::TailNotResolved { tail, grid });
    }
    Ok(ProfileMass {
        grid,
        tail,
        fitted_mu,
    })
}

/// Half-mass `∫_0^∞ f` of any profile curve.
pub fn profile_mass(curve: &ProfileCurve) -> Result<ProfileMass> {
    tail_completed_mass(&curve.r_grid, &curve.f_values, curve.m)
}

/// `A_1 = ∫_0^∞ phi` for a profile computed with `eta = 1`.
pub fn unit_profile_mass(curve: &ProfileCurve) -> Result<ProfileMass> {
    if curve.eta != 1.0 {
        return Err(Error::InvalidInput(format!(
            "unit profile mass needs eta = 1, got {}",
            curve.eta
        )));
    }
    let f_end = *curve.f_values.last().unwrap();
    if f_end >= 1e-3 {
        return Err(Error::InvalidInput(format!(
            "f(r_max) = {f_end:e} is not below 1e-3 f(0); extend r_max"
        )));
    }
    profile_mass(curve)
}

/// `eta = (mu / A_1)^{2/(1+m)}`.
pub fn calibrate_eta(m: f64, mu: f64, a1: f64) -> Result<f64> {
    check_exponent(m)?;
    if !(mu > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "mu",
            value: mu,
            allowed: "(0, inf)",
        });
    }
    if !(a1 > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "a1",
            value: a1,
            allowed: "(0, inf)",
        });
    }
    Ok((mu / a1).powf(2.0 / (1.0 + m)))
}

/// Unit profile integrated to `f < unit_ratio`, with its mass `A_1`.
pub fn unit_profile(m: f64, dr: f64, unit_ratio: f64) -> Result<(ProfileCurve, ProfileMass)> {
    let mut unit = integrate_profile_until(m, 1.0, dr, unit_ratio)?;
    let mass = unit_profile_mass(&unit)?;
    unit.a1 = Some(mass.total());
    unit.mu = Some(mass.total());
    Ok((unit, mass))
}

/// Profile with half-mass `mu`: `A_1` from the unit profile, `eta` from the scaling
/// relation, then a fresh integration with center value `eta` on its natural grid.
pub fn calibrated_profile(m: f64, mu: f64) -> Result<ProfileCurve> {
    let (_, unit_mass) = unit_profile(m, 1e-3, 1e-4)?;
    let a1 = unit_mass.total();
    let eta = calibrate_eta(m, mu, a1)?;
    let mut curve = integrate_profile_until(m, eta, default_dr(m, eta), 1e-4)?;
    curve.a1 = Some(a1);
    curve.mu = Some(mu);
    Ok(curve)
}

/// `eta phi(eta^{(1-m)/2} r)` evaluated from a unit profile.
pub fn rescaled_value(unit: &ProfileCurve, eta: f64, r: f64) -> Option<f64> {
    let s = eta.powf(0.5 * (1.0 - unit.m));
    unit.value(s * r).map(|v| eta * v)
}

/// `w(r) = r^{-1/m} f(r)` at an arbitrary radius inside the grid.
pub fn asymptotic_slope(curve: &ProfileCurve, r: f64) -> Result<f64> {
    let f = curve.value(r).ok_or(Error::OutOfInterval {
        x: r,
        half_width: curve.r_max(),
    })?;
    Ok(r.abs().powf(-1.0 / curve.m) * f)
}

/// Sandwich `(mu|m|r + a)^{1/m} <= f(r) <= (mu|m|r)^{1/m}` for `r >= r0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichFit {
    pub mu: f64,
    /// `max r |w(r)^m - mu|m||` over grid points `r >= fit_from`.
    pub a: f64,
    pub fit_from: f64,
    /// `max(fit_from, a / (mu |m|))`, nudged up by one grid step.
    pub r0: f64,
    /// `(mu|m|)^{1/m}`, the limit of `w`.
    pub w_limit: f64,
    /// Largest `w(r_i) - w(r_j)` over grid pairs `r_j > r_i > first cell` (<= 0 when monotone).
    pub max_w_decrease: f64,
    /// Largest `f - (mu|m|r)^{1/m}` for `r >= r0` (<= 0 when the upper bound holds).
    pub upper_violation: f64,
    /// Largest `(mu|m|r + a)^{1/m} - f` for `r >= r0` (<= 0 when the lower bound holds).
    pub lower_violation: f64,
}

impl SandwichFit {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_w_decrease <= tol && self.upper_violation <= tol && self.lower_violation <= tol
    }
}

pub fn fit_sandwich(curve: &ProfileCurve, mu: f64, fit_from: f64) -> Result<SandwichFit> {
    let m = curve.m;
    if !(mu > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "mu",
            value: mu,
            allowed: "(0, inf)",
        });
    }
    let c = mu * m.abs();
    let w = curve.w_values();
    let a = curve
        .r_grid
        .iter()
        .zip(&w)
        .filter(|(r, _)| **r >= fit_from)
        .map(|(r, w)| r * (w.powf(m) - c).abs())
        .fold(0.0, f64::max);
    let r0 = fit_from.max(a / c) + curve.dr;

    // Running max from the left: a decrease shows up as running_max - w > 0.
    let mut running = f64::NEG_INFINITY;
    let mut max_w_decrease = f64::NEG_INFINITY;
    for (r, &wv) in curve.r_grid.iter().zip(&w) {
        if *r <= curve.dr {
            continue;
        }
        if running.is_finite() {
            max_w_decrease = max_w_decrease.max(running - wv);
        }
        running = running.max(wv);
    }

    let mut upper_violation = f64::NEG_INFINITY;
    let mut lower_violation = f64::NEG_INFINITY;
    for (r, &f) in curve.r_grid.iter().zip(&curve.f_values) {
        if *r < r0 {
            continue;
        }
        upper_violation = upper_violation.max(f - far_field(mu, m, *r));
        lower_violation = lower_violation.max((c * r + a).powf(1.0 / m) - f);
    }
    Ok(SandwichFit {
        mu,
        a,
        fit_from,
        r0,
        w_limit: c.powf(1.0 / m),
        max_w_decrease,
        upper_violation,
        lower_violation,
    })
}

/// `v(x,t)` built from a calibrated profile.
#[derive(Debug, Clone)]
pub struct SelfSimilarSolution {
    pub profile: ProfileCurve,
    pub extinction_time: f64,
}

impl SelfSimilarSolution {
    pub fn new(profile: ProfileCurve, extinction_time: f64) -> Result<Self> {
        if !(extinction_time > 0.0) {
            return Err(Error::ParameterOutOfRange {
                name: "T",
                value: extinction_time,
                allowed: "(0, inf)",
            });
        }
        Ok(Self {
            profile,
            extinction_time,
        })
    }

    /// Solution with half-mass `mu` and extinction time `t_ext`.
    pub fn calibrated(m: f64, mu: f64, t_ext: f64) -> Result<Self> {
        Self::new(calibrated_profile(m, mu)?, t_ext)
    }

    pub fn m(&self) -> f64 {
        self.profile.m
    }

    pub fn mu(&self) -> Option<f64> {
        self.profile.mu
    }

    fn scales(&self, t: f64) -> Result<(f64, f64)> {
        let tt = self.extinction_time;
        if !(t < tt) {
            return Err(Error::TimeBeyondExtinction { t, extinction: tt });
        }
        let m = self.m();
        let tau = tt - t;
        Ok((tau.powf(1.0 / (1.0 + m)), tau.powf(-m / (1.0 + m))))
    }

    /// `v(x,t)` and whether the far-field continuation of the profile was used.
    pub fn value_flagged(&self, x: f64, t: f64) -> Result<(f64, bool)> {
        let (amp, stretch) = self.scales(t)?;
        let (f, far) = self.profile.value_or_far(x.abs() * stretch);
        Ok((amp * f, far))
    }

    pub fn value(&self, x: f64, t: f64) -> Result<f64> {
        self.value_flagged(x, t).map(|(v, _)| v)
    }

    /// `(v^m/m)_x(x,t)`, which equals `sign(x) (f'/f^{1-m})(|x| (T-t)^{-m/(1+m)})`.
    /// Beyond the profile grid the continuation slope `-mu` is used.
    pub fn potential_slope(&self, x: f64, t: f64) -> Result<f64> {
        let (_, stretch) = self.scales(t)?;
        let c = &self.profile;
        let rho = x.abs() * stretch;
        let slope = if rho > c.r_max() {
            -c.mu.unwrap_or_else(|| {
                let f_end = *c.f_values.last().unwrap();
                f_end.powf(c.m) / (c.m.abs() * c.r_max())
            })
        } else {
            let n = c.len();
            let k = ((rho / c.dr).floor() as usize).min(n - 2);
            let s = (rho - c.r_grid[k]) / (c.r_grid[k + 1] - c.r_grid[k]);
            let q = |j: usize| c.df_values[j] / c.f_values[j].powf(1.0 - c.m);
            (1.0 - s) * q(k) + s * q(k + 1)
        };
        Ok(x.signum() * slope)
    }

    /// `∫_ℝ v(x,t) dx` by trapezoid quadrature in `x` over the image of the profile
    /// grid plus the analytic far-field tail.
    pub fn spatial_mass(&self, t: f64, samples: usize) -> Result<f64> {
        let (_, stretch) = self.scales(t)?;
        let x_max = self.profile.r_max() / stretch;
        let xs: Vec<f64> = (0..=samples)
            .map(|i| x_max * i as f64 / samples as f64)
            .collect();
        let vs: Vec<f64> = xs
            .iter()
            .map(|&x| self.value(x, t))
            .collect::<Result<_>>()?;
        let half = tail_completed_mass(&xs, &vs, self.m())?;
        Ok(2.0 * half.total())
    }

    /// `2 mu (T - t)`.
    pub fn predicted_mass(&self, t: f64) -> Option<f64> {
        self.mu().map(|mu| 2.0 * mu * (self.extinction_time - t))
    }
}
