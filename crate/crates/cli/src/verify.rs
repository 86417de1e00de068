//! `beqal verify`: the invariant battery, one pass/fail line per check.

use std::path::Path;

use beqal_core::classical_oracle as oracle;
use beqal_core::gd_solver::{self, choose_hyperparameters, predicted_error};
use beqal_core::matrix_core::random_test_system;
use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::spec::{self, EtaModeSpec, ProblemSource, RunSpec};
use crate::{CliError, Overrides};

struct CheckResult {
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Battery {
    n: usize,
    s: usize,
    kappa: f64,
    seeds: Vec<u64>,
    /// Step size for the descent check; deliberately mis-set values (above
    /// 1/L) must flag the property.
    eta_override: Option<f64>,
}

impl Default for Battery {
    fn default() -> Self {
        Self {
            n: 8,
            s: 2,
            kappa: 5.0,
            seeds: (0..10).collect(),
            eta_override: None,
        }
    }
}

pub fn cmd_verify(config: Option<&Path>, overrides: &Overrides) -> Result<(), CliError> {
    let mut battery = Battery::default();
    if let Some(path) = config {
        let mut run_spec: RunSpec = spec::load_spec(path)?;
        crate::apply_overrides(&mut run_spec, overrides);
        if let ProblemSource::Generator { n, s, kappa, .. } = run_spec.problem {
            battery.n = n;
            battery.s = s;
            battery.kappa = kappa;
        }
        if let Some(sweep) = &run_spec.sweep {
            if let Some(seeds) = &sweep.seeds {
                battery.seeds = seeds.clone();
            }
        }
        if run_spec.solver.eta_mode == EtaModeSpec::Free {
            battery.eta_override = run_spec.solver.eta;
        }
    }

    if battery.seeds.is_empty() {
        log::warn!("verify battery has no seeds; nothing to check");
        println!("verify: empty seed list, trivially passing");
        return Ok(());
    }

    let checks = [
        oracle_equivalence,
        error_recurrence,
        success_probability_bound,
        convexity_certificates,
        gradient_check,
        monotone_descent,
        regime_guarantees,
    ];
    let mut all_pass = true;
    println!("{:<28} {:<6} detail", "check", "status");
    for check in checks {
        let result = check(&battery);
        all_pass &= result.pass;
        println!(
            "{:<28} {:<6} {}",
            result.name,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Solver("verification battery failed".into()))
    }
}

fn systems(battery: &Battery) -> Vec<(beqal_core::SparseHermitianMatrix, DVector<f64>)> {
    battery
        .seeds
        .iter()
        .map(|&seed| {
            random_test_system(battery.n, battery.s, battery.kappa, seed)
                .expect("battery system generates")
        })
        .collect()
}

fn oracle_equivalence(battery: &Battery) -> CheckResult {
    let mut worst: f64 = 0.0;
    for (a, b) in systems(battery) {
        let cfg = choose_hyperparameters(4, 0.1);
        match gd_solver::run(&a, &b, &cfg) {
            Ok((_, report)) => {
                for row in &report.convergence_trace {
                    worst = worst.max(row.error_meas);
                }
            }
            Err(e) => {
                return CheckResult {
                    name: "oracle_equivalence",
                    pass: false,
                    detail: format!("run failed: {e}"),
                }
            }
        }
    }
    CheckResult {
        name: "oracle_equivalence",
        pass: worst <= 1e-8,
        detail: format!("max block deviation {worst:.3e} (tol 1e-8)"),
    }
}

fn error_recurrence(battery: &Battery) -> CheckResult {
    let eps = 1e-4;
    let mut worst_margin = f64::INFINITY;
    for (idx, (a, b)) in systems(battery).into_iter().enumerate() {
        let mut cfg = choose_hyperparameters(5, 0.1);
        cfg.epsilon = eps;
        cfg.inject_perturbation = true;
        cfg.seed = idx as u64;
        match gd_solver::run(&a, &b, &cfg) {
            Ok((_, report)) => {
                for row in report.convergence_trace.iter().skip(1) {
                    worst_margin = worst_margin.min(predicted_error(row.t, eps) - row.error_meas);
                }
            }
            Err(e) => {
                return CheckResult {
                    name: "error_recurrence",
                    pass: false,
                    detail: format!("run failed: {e}"),
                }
            }
        }
    }
    CheckResult {
        name: "error_recurrence",
        pass: worst_margin >= -1e-12,
        detail: format!("min (predicted - measured) = {worst_margin:.3e}"),
    }
}

fn success_probability_bound(battery: &Battery) -> CheckResult {
    let mut worst_gap = f64::INFINITY;
    for (a, b) in systems(battery) {
        for iterations in 1..=3usize {
            let cfg = choose_hyperparameters(iterations, 0.1);
            match gd_solver::run(&a, &b, &cfg) {
                Ok((_, report)) => {
                    let bound = report.success_prob_bound.unwrap_or(0.0);
                    worst_gap = worst_gap.min(report.success_prob_meas - bound);
                }
                Err(e) => {
                    return CheckResult {
                        name: "success_probability_bound",
                        pass: false,
                        detail: format!("run failed: {e}"),
                    }
                }
            }
        }
    }
    CheckResult {
        name: "success_probability_bound",
        pass: worst_gap >= -1e-9,
        detail: format!("min (measured - bound) = {worst_gap:.3e}"),
    }
}

fn convexity_certificates(battery: &Battery) -> CheckResult {
    let mut violations = 0usize;
    for (idx, (a, b)) in systems(battery).into_iter().enumerate() {
        let dense = a.to_dense();
        let consts = oracle::convexity_constants(&dense);
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + idx as u64);
        for _ in 0..1000 {
            let x = DVector::from_fn(a.dim(), |_, _| rng.random_range(-1.0..1.0));
            let y = DVector::from_fn(a.dim(), |_, _| rng.random_range(-1.0..1.0));
            let lhs = oracle::f_exact(&x, &dense, &b);
            let rhs = oracle::f_exact(&y, &dense, &b)
                + oracle::gradient_exact(&y, &dense, &b).dot(&(&x - &y))
                + 0.5 * consts.mu * (&x - &y).norm_squared();
            let grad_gap = (oracle::gradient_exact(&x, &dense, &b)
                - oracle::gradient_exact(&y, &dense, &b))
            .norm();
            if lhs < rhs - 1e-9 || grad_gap > consts.l * (&x - &y).norm() + 1e-9 {
                violations += 1;
            }
        }
    }
    CheckResult {
        name: "convexity_certificates",
        pass: violations == 0,
        detail: format!("{violations} violations over 1000 pairs/system"),
    }
}

fn gradient_check(battery: &Battery) -> CheckResult {
    let mut worst: f64 = 0.0;
    for (idx, (a, b)) in systems(battery).into_iter().enumerate() {
        let dense = a.to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(8000 + idx as u64);
        for _ in 0..100 {
            let x = DVector::from_fn(a.dim(), |_, _| rng.random_range(-1.0..1.0));
            let fd = oracle::finite_diff_gradient(&x, &dense, &b, 1e-6);
            worst = worst.max((fd - oracle::gradient_exact(&x, &dense, &b)).amax());
        }
    }
    CheckResult {
        name: "gradient_check",
        pass: worst <= 1e-5,
        detail: format!("max |fd - analytic| = {worst:.3e} at h = 1e-6"),
    }
}

fn monotone_descent(battery: &Battery) -> CheckResult {
    let mut worst_rise: f64 = 0.0;
    let mut eta_used = 0.0;
    for (a, b) in systems(battery) {
        let dense = a.to_dense();
        let consts = oracle::convexity_constants(&dense);
        let eta = battery.eta_override.unwrap_or(0.9 / consts.l);
        eta_used = eta;
        let iterates = oracle::classical_gd(&dense, &b, &(&b * 0.5), eta, 15);
        let mut last = oracle::f_exact(&iterates[0], &dense, &b);
        for x in &iterates[1..] {
            let f = oracle::f_exact(x, &dense, &b);
            worst_rise = worst_rise.max(f - last);
            last = f;
        }
    }
    CheckResult {
        name: "monotone_descent",
        pass: worst_rise <= 1e-12,
        detail: format!("max per-step objective rise = {worst_rise:.3e} at eta = {eta_used}"),
    }
}

fn regime_guarantees(battery: &Battery) -> CheckResult {
    let mut max_norm: f64 = 0.0;
    let mut max_grad: f64 = 0.0;
    for (a, b) in systems(battery) {
        let dense = a.to_dense();
        let cfg = choose_hyperparameters(4, 0.1);
        let margin = 1.0 - 3.0 * 4.0 * cfg.alpha / 8.0;
        for x in oracle::classical_gd(&dense, &b, &(&b * margin), cfg.eta, 4) {
            max_norm = max_norm.max(x.norm());
            max_grad = max_grad.max(oracle::gradient_exact(&x, &dense, &b).norm());
        }
    }
    CheckResult {
        name: "regime_guarantees",
        pass: max_norm <= 1.0 + 1e-12 && max_grad <= 3.0,
        detail: format!("max ||x_t|| = {max_norm:.4}, max ||grad f|| = {max_grad:.4}"),
    }
}
