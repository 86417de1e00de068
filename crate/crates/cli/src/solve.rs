//! `beqal solve`: one run, one JSON report, one CSV trace.

use std::io::Write;
use std::path::Path;

use beqal_core::gd_solver::{self, SolveReport, TraceRow};

use crate::spec::{build_solver_config, materialize_problem, RunSpec};
use crate::CliError;

pub fn cmd_solve(spec: &RunSpec) -> Result<(), CliError> {
    let out_dir = spec.output_dir.clone().unwrap_or_else(|| "out".into());
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;

    let (a, b) = materialize_problem(&spec.problem)?;
    let cfg = build_solver_config(&spec.solver)?;
    match gd_solver::run(&a, &b, &cfg) {
        Ok((_, report)) => {
            write_report(&report, &out_dir.join("report.json"))?;
            write_trace(&report.convergence_trace, &out_dir.join("trace.csv"))?;
            println!(
                "solve: fidelity_vs_minimizer={:.9} success_prob={:.6e} -> {}",
                report.fidelity_vs_minimizer,
                report.success_prob_meas,
                out_dir.display()
            );
            Ok(())
        }
        Err(failure) => {
            let dump = serde_json::json!({
                "error": failure.error.to_string(),
                "ledger": failure.ledger.as_ref().map(|l| l.debug_dump()),
            });
            let path = out_dir.join("failure_ledger.json");
            std::fs::write(&path, serde_json::to_string_pretty(&dump).unwrap())
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            Err(CliError::Solver(format!(
                "{failure} (ledger serialized to {})",
                path.display()
            )))
        }
    }
}

pub fn write_report(report: &SolveReport, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Io(format!("cannot serialize report: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_trace(trace: &[TraceRow], path: &Path) -> Result<(), CliError> {
    let mut out = Vec::new();
    writeln!(out, "t,f,grad_norm,error_pred,error_meas,cost_pred,ip_t").unwrap();
    for row in trace {
        let ip = row.inner_product.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.t, row.f_value, row.grad_norm, row.error_pred, row.error_meas, row.cost_pred, ip
        )
        .unwrap();
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
