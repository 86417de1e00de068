//! RunSpec: the JSON configuration consumed by every subcommand.

use std::path::{Path, PathBuf};

use beqal_core::estimation::{EstimationConfig, EstimationMode};
use beqal_core::gd_solver::{choose_hyperparameters, InitialIterate, SolverConfig};
use beqal_core::matrix_core::{self, SparseHermitianMatrix};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub problem: ProblemSource,
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Exactly one problem source: a seeded generator or a MatrixMarket file
/// plus a right-hand side (a plain-text vector file or inline values).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSource {
    Generator {
        n: usize,
        s: usize,
        kappa: f64,
        seed: u64,
    },
    Files {
        matrix: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vector: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vector_inline: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub iterations: usize,
    #[serde(default = "default_eta_mode")]
    pub eta_mode: EtaModeSpec,
    #[serde(default = "default_delta")]
    pub delta_target: f64,
    /// Step size; required in free mode, derived from alpha in paper mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Overrides the paper-mode alpha (eta follows as alpha/8).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub inject_perturbation: bool,
    #[serde(default)]
    pub amplification_noise: f64,
    #[serde(default = "default_estimation")]
    pub estimation: EstimationSpec,
    #[serde(default)]
    pub seed: u64,
    /// Optional explicit start vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaModeSpec {
    Paper,
    Free,
}

fn default_eta_mode() -> EtaModeSpec {
    EtaModeSpec::Paper
}

fn default_delta() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSpec {
    pub mode: EstimationMode,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_shots() -> u64 {
    1
}

fn default_estimation() -> EstimationSpec {
    EstimationSpec {
        mode: EstimationMode::Exact,
        shots: 1,
        seed: 0,
    }
}

/// Sweep axes; missing axes stay at the base configuration value. The
/// cartesian product is walked iterations -> alpha -> epsilon -> shots ->
/// seeds, in list order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let empty = self.iterations.as_deref() == Some(&[])
            || self.alpha.as_deref() == Some(&[])
            || self.epsilon.as_deref() == Some(&[])
            || self.shots.as_deref() == Some(&[])
            || self.seeds.as_deref() == Some(&[]);
        if empty {
            return Err(CliError::Config(
                "sweep lists must be non-empty when present".into(),
            ));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_none()
            && self.alpha.is_none()
            && self.epsilon.is_none()
            && self.shots.is_none()
            && self.seeds.is_none()
    }
}

pub fn load_spec(path: &Path) -> Result<RunSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let spec: RunSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
    Ok(spec)
}

/// Materialize the problem: generate or load, normalizing the right-hand
/// side (the solver contract takes a unit vector).
pub fn materialize_problem(
    source: &ProblemSource,
) -> Result<(SparseHermitianMatrix, DVector<f64>), CliError> {
    match source {
        ProblemSource::Generator { n, s, kappa, seed } => {
            matrix_core::random_test_system(*n, *s, *kappa, *seed)
                .map_err(|e| CliError::Config(format!("generator failed: {e}")))
        }
        ProblemSource::Files {
            matrix,
            vector,
            vector_inline,
        } => {
            let a = matrix_core::io::read_matrix_market(matrix)
                .map_err(|e| CliError::Io(format!("{}: {e}", matrix.display())))?;
            let raw = match (vector, vector_inline) {
                (Some(path), None) => matrix_core::io::read_vector(path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                (None, Some(values)) => DVector::from_vec(values.clone()),
                _ => {
                    return Err(CliError::Config(
                        "provide exactly one of `vector` and `vector_inline`".into(),
                    ))
                }
            };
            if raw.len() != a.dim() {
                return Err(CliError::Config(format!(
                    "vector length {} does not match matrix dimension {}",
                    raw.len(),
                    a.dim()
                )));
            }
            let norm = raw.norm();
            if norm == 0.0 {
                return Err(CliError::Config(
                    "right-hand side is the zero vector".into(),
                ));
            }
            if (norm - 1.0).abs() > 1e-9 {
                log::warn!("normalizing right-hand side (norm was {norm})");
            }
            Ok((a, raw / norm))
        }
    }
}

/// Turn the declarative solver section into a concrete configuration.
pub fn build_solver_config(spec: &SolverSpec) -> Result<SolverConfig, CliError> {
    let estimation = match spec.estimation.mode {
        EstimationMode::Exact => EstimationConfig::exact(),
        EstimationMode::Sampled => {
            if spec.estimation.shots == 0 {
                return Err(CliError::Config("sampled mode needs shots >= 1".into()));
            }
            EstimationConfig::sampled(spec.estimation.shots, spec.estimation.seed)
        }
    };
    let mut cfg = match spec.eta_mode {
        EtaModeSpec::Paper => {
            if spec.iterations == 0 {
                return Err(CliError::Config("paper mode needs iterations >= 1".into()));
            }
            if !(spec.delta_target > 0.0 && spec.delta_target < 0.5) {
                return Err(CliError::Config("delta_target must lie in (0, 1/2)".into()));
            }
            let mut cfg = choose_hyperparameters(spec.iterations, spec.delta_target);
            if let Some(alpha) = spec.alpha {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(CliError::Config("alpha must lie in (0, 1)".into()));
                }
                cfg.alpha = alpha;
                cfg.eta = alpha / 8.0;
            }
            cfg
        }
        EtaModeSpec::Free => {
            let eta = spec
                .eta
                .or(spec.alpha.map(|a| a / 8.0))
                .ok_or_else(|| CliError::Config("free mode needs eta (or alpha)".into()))?;
            let mut cfg = SolverConfig::free_eta(eta, spec.iterations);
            cfg.delta_target = spec.delta_target;
            cfg
        }
    };
    cfg.epsilon = spec.epsilon;
    cfg.inject_perturbation = spec.inject_perturbation;
    cfg.amplification_noise = spec.amplification_noise;
    cfg.estimation = estimation;
    cfg.seed = spec.seed;
    if let Some(x0) = &spec.x0 {
        cfg.x0 = InitialIterate::Custom(x0.clone());
    }
    Ok(cfg)
}
