//! Runs the standard expanding-domain, comparison and extinction studies and
//! prints their checks.
//!
//! ```text
//! cargo run --release -p vfd-core --example standard_study
//! ```

use vfd_core::experiments::{self, ConvergenceReport, ExperimentConfig};

fn print(report: &ConvergenceReport) {
    println!("{} (R = {:?})", report.kind, report.r_list);
    if !report.d_k.is_empty() {
        println!("  d_k = {:?}", report.d_k);
    }
    for c in &report.checks {
        let status = match (c.asserted, c.passed) {
            (false, _) => "info",
            (true, true) => "pass",
            (true, false) => "FAIL",
        };
        println!(
            "  {status} {:<28} {:.4e} (tolerance {:.1e})",
            c.name, c.value, c.tolerance
        );
    }
}

fn main() -> vfd_core::Result<()> {
    let cfg = ExperimentConfig::standard();
    print(&experiments::expanding_domain(&cfg)?);
    print(&experiments::compare_dirichlet_neumann(&cfg)?);
    print(&experiments::far_field_slope(&cfg)?);
    print(&experiments::extinction(&cfg)?);
    Ok(())
}
