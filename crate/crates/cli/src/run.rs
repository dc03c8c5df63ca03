//! Dispatch of a validated [`RunConfig`] and emission of its artifacts.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use vfd_core::experiments::{self, Check};
use vfd_core::solver::{self, BoundaryKind, Controls};
use vfd_core::{green, selfsim};

use crate::config::{Command, ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] vfd_core::Error),
}

impl RunError {
    /// 2 for I/O, 3 for configuration, 4 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Io { .. } => 2,
            RunError::Config(_) => 3,
            RunError::Numerical(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub dump_kernels: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub failures: Vec<String>,
    pub files: Vec<String>,
}

impl Manifest {
    /// Process exit status: 0 when every asserted check passed, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

pub fn config_hash(source: &str) -> String {
    let digest = Sha256::digest(source.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

struct Emitter {
    dir: PathBuf,
    files: Vec<String>,
}

impl Emitter {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let io_err = |source| RunError::Io {
            path: path.clone(),
            source,
        };
        let mut out = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut out).map_err(io_err)?;
        out.flush().map_err(io_err)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        self.write(name, |out| {
            serde_json::to_writer_pretty(&mut *out, value).map_err(io::Error::other)?;
            writeln!(out)
        })
    }
}

struct Outcome {
    checks: Vec<Check>,
    tolerances: BTreeMap<String, f64>,
}

impl Outcome {
    fn new(checks: Vec<Check>) -> Self {
        let tolerances = checks
            .iter()
            .map(|c| (c.name.clone(), c.tolerance))
            .collect();
        Self { checks, tolerances }
    }

    fn with(mut self, name: &str, value: f64) -> Self {
        self.tolerances.insert(name.to_string(), value);
        self
    }

    fn with_solver(self, cfg: &RunConfig) -> Self {
        let c = Controls::default();
        self.with("newton_tol", c.newton_tol)
            .with("extinction_fraction", c.extinction_fraction)
            .with("h", cfg.experiment.resolution.h)
            .with("dt", cfg.experiment.resolution.dt)
            .with(
                "discretization_tol",
                cfg.experiment.resolution.discretization_tol(),
            )
    }
}

/// Runs the configured command, writing its artifacts and `manifest.json` into
/// `options.out_dir`. `source` is the raw configuration text, hashed into the manifest.
pub fn run(cfg: &RunConfig, source: &str, options: &RunOptions) -> Result<Manifest, RunError> {
    let mut out = Emitter::new(&options.out_dir)?;
    let outcome = match cfg.command {
        Command::Profile => profile(cfg, &mut out)?,
        Command::GreenCheck => green_check(cfg, options, &mut out)?,
        Command::Solve => solve(cfg, &mut out)?.with_solver(cfg),
        Command::Converge => {
            let report = experiments::expanding_domain(&cfg.experiment)?;
            out.json("report.json", &report)?;
            out.write("dk.csv", |w| report.write_dk_csv(w))?;
            out.write("mass.csv", |w| report.write_mass_csv(w))?;
            out.write("slope.csv", |w| report.write_slope_csv(w))?;
            Outcome::new(report.checks).with_solver(cfg)
        }
        Command::Compare => {
            let report = experiments::compare_dirichlet_neumann(&cfg.experiment)?;
            out.json("report.json", &report)?;
            out.write("dk.csv", |w| report.write_dk_csv(w))?;
            out.write("mass.csv", |w| report.write_mass_csv(w))?;
            Outcome::new(report.checks).with_solver(cfg)
        }
        Command::Extinction => {
            let report = experiments::extinction(&cfg.experiment)?;
            out.json("report.json", &report)?;
            out.write("mass.csv", |w| report.write_mass_csv(w))?;
            Outcome::new(report.checks).with_solver(cfg)
        }
    };
    let failures: Vec<String> = outcome
        .checks
        .iter()
        .filter(|c| c.asserted && !c.passed)
        .map(|c| c.name.clone())
        .collect();
    let mut files = out.files.clone();
    files.push("manifest.json".into());
    let manifest = Manifest {
        command: cfg.command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(source),
        config: cfg.clone(),
        tolerances: outcome.tolerances,
        passed: failures.is_empty(),
        failures,
        checks: outcome.checks,
        files,
    };
    out.json("manifest.json", &manifest)?;
    Ok(manifest)
}

#[derive(Serialize)]
struct ProfileReport {
    metadata: selfsim::ProfileMetadata,
    invariants: selfsim::ProfileChecks,
    mass: selfsim::ProfileMass,
    sandwich: selfsim::SandwichFit,
    slope: Option<SlopeLimit>,
    checks: Vec<Check>,
}

#[derive(Serialize)]
struct SlopeLimit {
    r: f64,
    w: f64,
    limit: f64,
    relative_error: f64,
}

fn profile(cfg: &RunConfig, out: &mut Emitter) -> Result<Outcome, RunError> {
    let (m, p) = (cfg.m, &cfg.profile);
    let integrate = |eta: f64| match p.r_max {
        Some(r) => {
            selfsim::integrate_profile(m, eta, r, p.dr.unwrap_or(selfsim::default_dr(m, eta)))
        }
        None => selfsim::integrate_profile_until(
            m,
            eta,
            p.dr.unwrap_or(selfsim::default_dr(m, eta)),
            p.ratio,
        ),
    };
    let (mut curve, calibrated) = match p.eta {
        Some(eta) => (integrate(eta)?, false),
        None => {
            let (_, unit_mass) = selfsim::unit_profile(m, 1e-3, 1e-4)?;
            let a1 = unit_mass.total();
            let eta = selfsim::calibrate_eta(m, cfg.mu, a1)?;
            let mut c = integrate(eta)?;
            c.a1 = Some(a1);
            c.mu = Some(cfg.mu);
            (c, true)
        }
    };
    let mass = selfsim::profile_mass(&curve)?;
    if !calibrated {
        curve.mu = Some(mass.total());
    }
    let mu = curve.mu.unwrap();
    let invariants = selfsim::check_profile(&curve);
    let sandwich = selfsim::fit_sandwich(&curve, mu, p.fit_from)?;
    let mut checks = vec![
        Check::below("decay_bound_ratio", invariants.decay_ratio, 1.0),
        Check::flag(
            "profile_positive_decreasing",
            invariants.positive && invariants.strictly_decreasing,
            invariants.min_h,
        ),
        Check::below(
            "sandwich_violation",
            sandwich
                .max_w_decrease
                .max(sandwich.upper_violation)
                .max(sandwich.lower_violation),
            cfg.checks.sandwich.max(f64::MIN_POSITIVE),
        ),
    ];
    if calibrated {
        checks.push(Check::below(
            "calibrated_mass_error",
            (mass.total() - cfg.mu).abs() / cfg.mu,
            cfg.checks.profile_mass,
        ));
    }
    let slope = match p.slope_r {
        Some(r) => {
            let w = selfsim::asymptotic_slope(&curve, r)?;
            let limit = sandwich.w_limit;
            let relative_error = (w - limit).abs() / limit;
            checks.push(Check::below(
                "slope_limit_error",
                relative_error,
                cfg.checks.slope_limit,
            ));
            Some(SlopeLimit {
                r,
                w,
                limit,
                relative_error,
            })
        }
        None => None,
    };
    out.write("profile.csv", |w| curve.write_csv(w))?;
    let report = ProfileReport {
        metadata: curve.metadata(),
        invariants,
        mass,
        sandwich,
        slope,
        checks: checks.clone(),
    };
    out.json("report.json", &report)?;
    Ok(Outcome::new(checks))
}

fn green_check(
    cfg: &RunConfig,
    options: &RunOptions,
    out: &mut Emitter,
) -> Result<Outcome, RunError> {
    let g = &cfg.green;
    let report = green::identity_report(g.half_width, &g.cells, g.triples)?;
    let hs: Vec<f64> = g
        .cells
        .iter()
        .map(|&c| 2.0 * g.half_width / c as f64)
        .collect();
    let scaled = report
        .reproduction_errors
        .iter()
        .zip(&hs)
        .map(|(e, h)| e / (h * h))
        .fold(0.0, f64::max);
    let min_order = report
        .observed_orders
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::below("reproduction_error_over_h2", scaled, 1.0),
        Check::at_least("min_observed_order", min_order, cfg.checks.green_order),
        Check::below("star_error", report.star_error, cfg.checks.green_star),
        Check::below(
            "averaged_kernel_error",
            report.averaged_kernel_error,
            cfg.checks.averaged_kernel,
        ),
    ];
    out.json("report.json", &report)?;
    out.write("green.csv", |w| {
        writeln!(w, "cells,h,reproduction_error,operator_error")?;
        for (k, &c) in g.cells.iter().enumerate() {
            writeln!(
                w,
                "{c},{:.16e},{:.16e},{:.16e}",
                hs[k], report.reproduction_errors[k], report.operator_errors[k]
            )?;
        }
        Ok(())
    })?;
    if options.dump_kernels {
        let op = green::GreenOperator::new(g.half_width, g.cells[0])?;
        out.write("kernels.csv", |w| op.write_kernel_csv(w))?;
    }
    Ok(Outcome::new(checks))
}

#[derive(Serialize)]
struct SolveReport {
    half_width: f64,
    kind: BoundaryKind,
    status: solver::RunStatus,
    final_time: f64,
    final_mass: f64,
    max_conservation_residual: f64,
    barrier_violation: f64,
    max_ab_residual: f64,
    max_error_vs_exact: Option<f64>,
    checks: Vec<Check>,
}

fn solve(cfg: &RunConfig, out: &mut Emitter) -> Result<Outcome, RunError> {
    let exp = &cfg.experiment;
    let s = &cfg.solve;
    let exact = exp.self_similar()?;
    let initial = exp.initial_state(s.half_width, exact.as_deref())?;
    let bc = match s.kind {
        BoundaryKind::Dirichlet => exp.dirichlet_bc(s.half_width, exact.as_ref()),
        BoundaryKind::NeumannFlux => exp.neumann_bc(s.half_width, exact.as_ref()),
    };
    let mut controls = exp.controls(&[]);
    controls.record_every = s.record_every;
    let traj = solver::solve(initial, &bc, cfg.m, s.t_end, &controls)?;

    let conservation = traj.ledger.max_relative_conservation_residual();
    let barrier = solver::barrier_check(&traj, exp.mu0, exp.r0);
    let ab = traj.ledger.max_ab_residual(exp.window.t_start);
    let max_error_vs_exact = match &exact {
        Some(v) => {
            let grid = traj.grid();
            let mut worst: f64 = 0.0;
            for st in &traj.states {
                for (j, u) in st.u.iter().enumerate() {
                    worst = worst.max((u - v.value(grid.x(j), st.t)?).abs());
                }
            }
            Some(worst)
        }
        None => None,
    };
    let mut checks = vec![
        Check::below(
            "conservation_residual",
            conservation,
            cfg.checks.conservation,
        ),
        Check::below("barrier_violation", barrier, cfg.checks.barrier),
        Check::below(
            "aronson_benilan_excess",
            ab,
            exp.resolution.discretization_tol(),
        )
        .informational(),
    ];
    if let Some(e) = max_error_vs_exact {
        checks.push(
            Check::below("max_error_vs_exact", e, exp.resolution.discretization_tol())
                .informational(),
        );
    }
    let report = SolveReport {
        half_width: s.half_width,
        kind: s.kind,
        status: traj.status,
        final_time: traj.final_state().t,
        final_mass: traj.final_state().mass(),
        max_conservation_residual: conservation,
        barrier_violation: barrier,
        max_ab_residual: ab,
        max_error_vs_exact,
        checks: checks.clone(),
    };
    out.write("trajectory.csv", |w| traj.write_csv(w))?;
    out.write("ledger.csv", |w| traj.ledger.write_csv(w))?;
    out.json("report.json", &report)?;
    Ok(Outcome::new(checks))
}
