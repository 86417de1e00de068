//! The iterated gradient-descent update on the density-operator
//! representation of the solution.
//!
//! One iteration assembles, in the block-encoding calculus, the four
//! operators
//!
//! ```text
//! ip_t X_t,
//! eta ip_t c_t x_t (grad f)^T,
//! eta ip_t c_t (grad f) x_t^T,
//! eta^2 ip_t c_t (grad f)(grad f)^T
//! ```
//!
//! and combines them with equal weights and signs (+,-,-,+), which telescopes
//! to `(ip_t/4) c_t x_{t+1} x_{t+1}^T` with `x_{t+1} = x_t - eta grad f(x_t)`.
//! The inner product `ip_t = x_t^T b` is never read off the classical shadow:
//! it is recovered through [`crate::estimation::signed_inner_product`] from
//! the encoding itself, so the information flow matches what the hardware
//! protocol would see. Alongside the encoding, the ledger carries the
//! classical iterate, the accumulated scalar factor, and predicted/measured
//! error and predicted cost.

use nalgebra::{DMatrix, DVector};
use serde_json::json;
use thiserror::Error;

use crate::block_encoding::{self as be, BlockEncoding, BlockEncodingError, Sign};
use crate::classical_oracle as oracle;
use crate::estimation::{self, EstimationConfig, EstimationError, EstimationMode};
use crate::matrix_core::{SparseHermitianMatrix, SpectralProfile};
use crate::seeding::derive_seed;

/// Amplification threshold parameter used throughout the pipeline.
/// Preconditions are checked against `gamma * sigma_max <= 1 - DELTA_AMP`.
pub const DELTA_AMP: f64 = 0.25;

/// Tolerance of the exact-mode cross-check between the estimated and the
/// classically shadowed inner product.
const CROSS_CHECK_TOL: f64 = 1e-9;

/// Post-selection probabilities below this are a zero-amplitude failure.
const ZERO_AMPLITUDE: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("inner product {value} outside (0, 1) at iteration {iteration}")]
    InnerProductOutOfRange { value: f64, iteration: usize },
    #[error("paper regime violated: 1 - 3 T alpha / 8 = {margin} is not positive")]
    RegimeViolation { margin: f64 },
    #[error("custom x0 norm {norm} exceeds the allowed bound {bound}")]
    InitialNormTooLarge { norm: f64, bound: f64 },
    #[error("right-hand side norm {norm} is not 1")]
    RhsNotNormalized { norm: f64 },
    #[error("post-selection amplitude vanished (success probability < {ZERO_AMPLITUDE})")]
    ZeroAmplitude,
    #[error(
        "estimated inner product {estimated} disagrees with the classical value \
         {classical} at iteration {iteration}"
    )]
    CrossCheckFailed {
        estimated: f64,
        classical: f64,
        iteration: usize,
    },
    #[error(transparent)]
    BlockAlgebra(#[from] BlockEncodingError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// A solver error together with the ledger at the point of failure (absent
/// only when the failure precedes the first ledger).
#[derive(Debug)]
pub struct RunFailure {
    pub error: SolverError,
    pub ledger: Option<Box<IterateLedger>>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.ledger {
            Some(l) => write!(f, "{} (at iteration {})", self.error, l.t),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for RunFailure {}

impl From<SolverError> for RunFailure {
    fn from(error: SolverError) -> Self {
        Self {
            error,
            ledger: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaMode {
    /// `alpha < 4/(6T)`, `eta = alpha/8`, `x0 = (1 - 3 T alpha / 8) b`:
    /// the regime in which the success-probability bound holds.
    Paper,
    /// User-chosen `eta` (sensible up to `1/L`), for genuine convergence
    /// studies. The step factors are folded into single net rescalings.
    Free,
}

/// Choice of the initial iterate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum InitialIterate {
    /// `(1 - 3 T alpha / 8) b` in paper mode; `b / 2` in free mode.
    Default,
    /// Explicit start vector. Paper mode requires `||x0|| <= 1 - 3 T alpha / 8`,
    /// free mode `||x0|| <= 1`.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Iteration count T.
    pub iterations: usize,
    /// Step-size factor; `eta = alpha / 8` always.
    pub alpha: f64,
    pub eta: f64,
    /// Error budget of each primitive sparse-oracle encoding.
    pub epsilon: f64,
    /// When set, the primitive encoding is actually perturbed by a random
    /// symmetric matrix of operator norm exactly `epsilon`.
    pub inject_perturbation: bool,
    /// Target final accuracy delta (reported, drives hyperparameter choice).
    pub delta_target: f64,
    pub estimation: EstimationConfig,
    /// Multiplicative singular-value noise bound injected by amplifications.
    pub amplification_noise: f64,
    pub eta_mode: EtaMode,
    pub x0: InitialIterate,
    /// Master seed for perturbation draws and amplification noise.
    pub seed: u64,
}

impl SolverConfig {
    /// Free-eta configuration with exact estimation and no injected error.
    pub fn free_eta(eta: f64, iterations: usize) -> Self {
        Self {
            iterations,
            alpha: 8.0 * eta,
            eta,
            epsilon: 0.0,
            inject_perturbation: false,
            delta_target: 1e-3,
            estimation: EstimationConfig::exact(),
            amplification_noise: 0.0,
            eta_mode: EtaMode::Free,
            x0: InitialIterate::Default,
            seed: 0,
        }
    }
}

/// Paper-regime hyperparameters for `T` iterations and target accuracy
/// `delta`: `alpha = 0.9 * 4/(6T)` (strictly inside `alpha < 4/(6T)`),
/// `eta = alpha/8`, and a per-primitive budget `epsilon = delta (4/9)^(T-1)`
/// so the error recurrence lands at `delta`.
pub fn choose_hyperparameters(iterations: usize, delta: f64) -> SolverConfig {
    assert!(iterations >= 1, "need at least one iteration");
    assert!(delta > 0.0 && delta < 0.5, "delta must lie in (0, 1/2)");
    let alpha = 0.9 * 4.0 / (6.0 * iterations as f64);
    SolverConfig {
        iterations,
        alpha,
        eta: alpha / 8.0,
        epsilon: delta * (4.0_f64 / 9.0).powi(iterations as i32 - 1),
        inject_perturbation: false,
        delta_target: delta,
        estimation: EstimationConfig::exact(),
        amplification_noise: 0.0,
        eta_mode: EtaMode::Paper,
        x0: InitialIterate::Default,
        seed: 0,
    }
}

/// The solver state after `t` iterations.
#[derive(Debug, Clone)]
pub struct IterateLedger {
    pub t: usize,
    /// Encoding of `c_t x_t x_t^T` with the accumulated factor folded in.
    pub x_encoding: BlockEncoding,
    /// The known accumulated scalar `prod_{j<t} ip_j / 4^t`, from estimated
    /// inner products.
    pub factor_c: f64,
    /// Estimated signed inner products `x_j^T b`, j < t.
    pub inner_products: Vec<f64>,
    /// Classically shadowed inner products, same indexing.
    pub classical_inner_products: Vec<f64>,
    /// Error-recurrence prediction at this t.
    pub error_pred: f64,
    /// Measured `||block - c_t x_t x_t^T||` against the classical shadow.
    pub error_meas: f64,
    /// Cost-recurrence value at this t (abstract oracle-use units).
    pub cost_pred: f64,
    /// The classical gradient-descent iterate.
    pub classical_x: DVector<f64>,
}

impl IterateLedger {
    /// Accumulated factor recomputed from the classical shadow.
    pub fn classical_factor(&self) -> f64 {
        self.classical_inner_products.iter().product::<f64>() / 4.0_f64.powi(self.t as i32)
    }

    /// JSON dump for failure reports.
    pub fn debug_dump(&self) -> serde_json::Value {
        json!({
            "t": self.t,
            "factor_c": self.factor_c,
            "inner_products": self.inner_products,
            "classical_inner_products": self.classical_inner_products,
            "error_pred": self.error_pred,
            "error_meas": self.error_meas,
            "cost_pred": self.cost_pred,
            "classical_x": self.classical_x.as_slice(),
            "x_encoding": self.x_encoding.debug_dump(),
        })
    }
}

/// Everything the per-iteration steps need besides the ledger itself.
pub struct PipelineInputs<'a> {
    pub a_encoding: &'a BlockEncoding,
    pub b_density: &'a BlockEncoding,
    pub a_dense: &'a DMatrix<f64>,
    pub b: &'a DVector<f64>,
    pub sparsity: usize,
    pub config: &'a SolverConfig,
}

/// One row of the convergence trace.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub f_value: f64,
    pub grad_norm: f64,
    pub error_pred: f64,
    pub error_meas: f64,
    pub cost_pred: f64,
    /// Estimated inner product consumed by iteration t (absent on the final
    /// row).
    pub inner_product: Option<f64>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct HyperparameterEcho {
    pub iterations: usize,
    pub alpha: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub delta_target: f64,
    pub eta_mode: EtaMode,
    pub estimation_mode: EstimationMode,
    pub shots: u64,
    pub estimation_seed: u64,
    pub solver_seed: u64,
    pub amplification_noise: f64,
    pub inject_perturbation: bool,
    pub x0_norm: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolveReport {
    pub schema_version: String,
    /// Wall-clock stamp; the single field exempt from byte-determinism.
    pub generated_at_unix: u64,
    pub final_state: Vec<f64>,
    pub success_prob_meas: f64,
    /// Lower bound on the success probability; only meaningful (and only
    /// emitted) in the paper regime.
    pub success_prob_bound: Option<f64>,
    pub fidelity_vs_minimizer: f64,
    /// Fidelity against `A^{-1} b`; absent for singular `A`.
    pub fidelity_vs_inverse: Option<f64>,
    /// `|| x*_f - A^{-1}b (normalized) ||`: how far the objective's stationary
    /// point is from the linear-system solution direction.
    pub minimizer_inverse_gap: Option<f64>,
    pub conditioning: SpectralProfile,
    pub convergence_trace: Vec<TraceRow>,
    pub hyperparameters: HyperparameterEcho,
    /// Cost figures are recurrence units, not measured gate counts.
    pub cost_model: String,
    pub predicted_cost_recurrence: f64,
    pub predicted_cost_closed_form: f64,
    pub predicted_error_final: f64,
    pub measured_error_final: f64,
}

/// Error-recurrence prediction: `e_1 = epsilon`,
/// `e_{t+1} = (9 e_t + 19 epsilon) / 4`; returns `e_T` (0 for `T = 0`).
pub fn predicted_error(iterations: usize, epsilon: f64) -> f64 {
    if iterations == 0 {
        return 0.0;
    }
    let mut e = epsilon;
    for _ in 1..iterations {
        e = (9.0 * e + 19.0 * epsilon) / 4.0;
    }
    e
}

/// Recurrence and closed-form values of the modeled oracle-use cost.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CostPrediction {
    /// `C(x_T)` iterated as `C(x_{t+1}) = 9 s^2 C(x_t) + 17 s^2 C(A)` from
    /// `C(x_0) = 1`.
    pub recurrence: f64,
    /// `(9 s^2)^(T+1) C(A)`, the headline bound shape.
    pub closed_form: f64,
}

/// Modeled primitive-encoding cost `C(A) = log2 n + log2^2.5(s / epsilon)`.
/// `epsilon` is floored at 1e-15 so exact-mode reports stay finite.
pub fn oracle_cost(n: usize, s: usize, epsilon: f64) -> f64 {
    let eps = epsilon.max(1e-15);
    let log_n = (n.max(2) as f64).log2();
    let log_ratio = (s as f64 / eps).log2().max(0.0);
    log_n + log_ratio.powf(2.5)
}

pub fn predicted_cost(iterations: usize, s: usize, n: usize, epsilon: f64) -> CostPrediction {
    let ca = oracle_cost(n, s, epsilon);
    let s2 = (s * s) as f64;
    let mut c = 1.0;
    for _ in 0..iterations {
        c = 9.0 * s2 * c + 17.0 * s2 * ca;
    }
    CostPrediction {
        recurrence: c,
        closed_form: (9.0 * s2).powi(iterations as i32 + 1) * ca,
    }
}

/// Success-probability lower bound
/// `4^{-2T} |ip0|^2 |ip0 - 3 alpha T / 8|^{2T} | ||x0|| - 3 alpha T / 8 |^2`,
/// valid in the regime `1 - 3 T alpha / 8 > 0`.
pub fn success_prob_lower_bound(
    iterations: usize,
    alpha: f64,
    ip0: f64,
    x0_norm: f64,
) -> Result<f64, SolverError> {
    let margin = 1.0 - 3.0 * iterations as f64 * alpha / 8.0;
    if margin <= 0.0 {
        return Err(SolverError::RegimeViolation { margin });
    }
    let t = iterations as f64;
    let drift = 3.0 * alpha * t / 8.0;
    Ok(4.0_f64.powi(-2 * iterations as i32)
        * ip0.powi(2)
        * (ip0 - drift).abs().powi(2 * iterations as i32)
        * (x0_norm - drift).powi(2))
}

/// Block encoding of `(I + A^T A) / (2 s^2)` from an encoding of `A/s`: the
/// product of the encoding with its transpose gives `A^T A / s^2`, the
/// identity is scaled down to `I / s^2`, and an equal-weight combination
/// halves their sum. (For `s = 1` the identity needs no scaling.)
pub fn gradient_operator(
    a_encoding: &BlockEncoding,
    sparsity: usize,
) -> Result<BlockEncoding, BlockEncodingError> {
    let n = a_encoding.dim();
    let ata = be::product(&be::transpose(a_encoding), a_encoding)?;
    let identity = encode_scaled_identity(n, sparsity)?;
    be::linear_combination(&[(&identity, 1.0), (&ata, 1.0)], &[Sign::Plus, Sign::Plus])
}

fn encode_scaled_identity(n: usize, sparsity: usize) -> Result<BlockEncoding, BlockEncodingError> {
    let identity = be::encode_identity(n);
    if sparsity > 1 {
        be::scale_down(&identity, (sparsity * sparsity) as f64)
    } else {
        Ok(identity)
    }
}

/// Apply a net multiplicative factor within the calculus: factors above 1 go
/// through amplification (with the configured noise), factors below 1 through
/// scaling.
fn rescale_net(
    b: &BlockEncoding,
    factor: f64,
    cfg: &SolverConfig,
    noise_index: u64,
) -> Result<BlockEncoding, BlockEncodingError> {
    if factor > 1.0 {
        if cfg.amplification_noise > 0.0 {
            be::amplify_noisy(
                b,
                factor,
                DELTA_AMP,
                cfg.amplification_noise,
                derive_seed(cfg.seed, noise_index),
            )
        } else {
            be::amplify(b, factor, DELTA_AMP, cfg.amplification_noise)
        }
    } else if factor < 1.0 {
        be::scale_down(b, 1.0 / factor)
    } else {
        Ok(b.clone())
    }
}

fn check_inner_product(value: f64, iteration: usize) -> Result<(), SolverError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(SolverError::InnerProductOutOfRange { value, iteration })
    }
}

/// Step 1: block encoding of `eta ip_t c_t x_t (grad f(x_t))^T`, assembled in
/// the prescribed order: cross term `X b b^T A/s` scaled to `1/(2s^2)`, the
/// gradient operator applied to `X` and rescaled by the estimated inner
/// product, their signed half-sum, and the final removal of the `4 s^2`
/// subnormalization (via `1/alpha` scaling plus `s^2/2` amplification in
/// paper mode, a single folded `4 eta s^2` rescaling in free mode).
pub fn step1(
    x: &IterateLedger,
    ip_t: f64,
    inputs: &PipelineInputs,
) -> Result<BlockEncoding, SolverError> {
    check_inner_product(ip_t, x.t)?;
    let cfg = inputs.config;
    let n = x.x_encoding.dim();
    if cfg.eta == 0.0 {
        return Ok(be::encode_zero(n));
    }
    let s = inputs.sparsity as f64;

    let xbb = be::product(&x.x_encoding, inputs.b_density)?;
    let cross = be::product(&xbb, inputs.a_encoding)?;
    let cross = be::scale_down(&cross, 2.0 * s)?; // X b b^T A / (2 s^2)

    let grad_op = gradient_operator(inputs.a_encoding, inputs.sparsity)?;
    let curv = be::product(&x.x_encoding, &grad_op)?; // X (I + A^T A) / (2 s^2)
    let curv = be::scale_down(&curv, 1.0 / ip_t)?;

    let diff = be::linear_combination(&[(&curv, 1.0), (&cross, 1.0)], &[Sign::Plus, Sign::Minus])?;
    // diff = ip_t c_t x (grad f)^T / (4 s^2); remove the subnormalization.
    let noise_index = 10 * x.t as u64 + 1;
    let out = match cfg.eta_mode {
        EtaMode::Paper => {
            let scaled = be::scale_down(&diff, 1.0 / cfg.alpha)?;
            rescale_net(&scaled, s * s / 2.0, cfg, noise_index)?
        }
        EtaMode::Free => rescale_net(&diff, 4.0 * cfg.eta * s * s, cfg, noise_index)?,
    };
    Ok(out)
}

/// Step 2: the transpose of step 1's output encodes
/// `eta ip_t c_t (grad f(x_t)) x_t^T`.
pub fn step2(step1_out: &BlockEncoding) -> BlockEncoding {
    be::transpose(step1_out)
}

/// Step 3: block encoding of `eta^2 ip_t c_t (grad f)(grad f)^T` via the
/// four-term combination of curvature-cross, its transpose, the two-sided
/// curvature term, and the `A^T b b^T A` term, then removal of the `16 s^4`
/// subnormalization.
pub fn step3(
    x: &IterateLedger,
    ip_t: f64,
    inputs: &PipelineInputs,
) -> Result<BlockEncoding, SolverError> {
    check_inner_product(ip_t, x.t)?;
    let cfg = inputs.config;
    let n = x.x_encoding.dim();
    if cfg.eta == 0.0 {
        return Ok(be::encode_zero(n));
    }
    let s = inputs.sparsity as f64;
    let grad_op = gradient_operator(inputs.a_encoding, inputs.sparsity)?;

    let xbb = be::product(&x.x_encoding, inputs.b_density)?;
    let cross = be::product(&xbb, inputs.a_encoding)?; // X b b^T A / s
    let q1 = be::scale_down(&be::product(&grad_op, &cross)?, 2.0 * s)?;
    let q2 = be::transpose(&q1);

    let sandwich = be::product(&be::product(&grad_op, &x.x_encoding)?, &grad_op)?;
    let q3 = be::scale_down(&sandwich, 1.0 / ip_t)?;

    let bb_a = be::product(inputs.b_density, inputs.a_encoding)?;
    let aba = be::product(&be::transpose(inputs.a_encoding), &bb_a)?; // A^T bb^T A / s^2
                                                                      // This operand is the only one not built through X_t, so the known
                                                                      // accumulated factor c_t must be folded in classically, and the shared
                                                                      // scale of the four operands is 1/(4 s^4): p = 4 s^2 / (ip c_t).
                                                                      // Otherwise the signed sum does not telescope to the gradient outer
                                                                      // product.
    let q4 = be::scale_down(&aba, 4.0 * s * s / (ip_t * x.factor_c))?;

    let sum = be::linear_combination(
        &[(&q3, 1.0), (&q1, 1.0), (&q2, 1.0), (&q4, 1.0)],
        &[Sign::Plus, Sign::Minus, Sign::Minus, Sign::Plus],
    )?;
    // sum = ip_t c_t (grad f)(grad f)^T / (16 s^4).
    let noise_index = 10 * x.t as u64 + 3;
    let out = match cfg.eta_mode {
        EtaMode::Paper => {
            let scaled = be::scale_down(&sum, 1.0 / (cfg.alpha * cfg.alpha))?;
            rescale_net(&scaled, s.powi(4) / 4.0, cfg, noise_index)?
        }
        EtaMode::Free => rescale_net(&sum, 16.0 * cfg.eta * cfg.eta * s.powi(4), cfg, noise_index)?,
    };
    Ok(out)
}

/// Step 4: rescale the current encoding by the estimated inner product,
/// combine with the three step outputs under signs (+,-,-,+) and the 1/4
/// prefactor, and advance every ledger: accumulated factor, classical shadow,
/// error recurrence, cost recurrence, and the measured block error.
#[allow(clippy::too_many_arguments)]
pub fn step4_combine(
    x: &IterateLedger,
    s1: &BlockEncoding,
    s2: &BlockEncoding,
    s3: &BlockEncoding,
    ip_t: f64,
    classical_ip: f64,
    inputs: &PipelineInputs,
) -> Result<IterateLedger, SolverError> {
    check_inner_product(ip_t, x.t)?;
    let cfg = inputs.config;
    let rescaled = be::scale_down(&x.x_encoding, 1.0 / ip_t)?;
    let combined = be::linear_combination(
        &[(&rescaled, 1.0), (s1, 1.0), (s2, 1.0), (s3, 1.0)],
        &[Sign::Plus, Sign::Minus, Sign::Minus, Sign::Plus],
    )?;

    let grad = oracle::gradient_exact(&x.classical_x, inputs.a_dense, inputs.b);
    let classical_next = &x.classical_x - grad * cfg.eta;

    let mut inner_products = x.inner_products.clone();
    inner_products.push(ip_t);
    let mut classical_inner_products = x.classical_inner_products.clone();
    classical_inner_products.push(classical_ip);

    let error_pred = if x.t == 0 {
        cfg.epsilon
    } else {
        (9.0 * x.error_pred + 19.0 * cfg.epsilon) / 4.0
    };
    let s2u = (inputs.sparsity * inputs.sparsity) as f64;
    let cost_pred = 9.0 * s2u * x.cost_pred
        + 17.0 * s2u * oracle_cost(inputs.b.len(), inputs.sparsity, cfg.epsilon);

    let t_next = x.t + 1;
    let classical_factor =
        classical_inner_products.iter().product::<f64>() / 4.0_f64.powi(t_next as i32);
    let ideal = (&classical_next * classical_next.transpose()) * classical_factor;
    let error_meas = be::operator_norm(&(combined.extract_block() - ideal));

    Ok(IterateLedger {
        t: t_next,
        x_encoding: combined,
        factor_c: x.factor_c * ip_t / 4.0,
        inner_products,
        classical_inner_products,
        error_pred,
        error_meas,
        cost_pred,
        classical_x: classical_next,
    })
}

fn initial_iterate(cfg: &SolverConfig, b: &DVector<f64>) -> Result<DVector<f64>, SolverError> {
    let margin = 1.0 - 3.0 * cfg.iterations as f64 * cfg.alpha / 8.0;
    match (&cfg.x0, cfg.eta_mode) {
        (InitialIterate::Default, EtaMode::Paper) => {
            if margin <= 0.0 {
                return Err(SolverError::RegimeViolation { margin });
            }
            Ok(b * margin)
        }
        (InitialIterate::Default, EtaMode::Free) => Ok(b * 0.5),
        (InitialIterate::Custom(raw), mode) => {
            let x0 = DVector::from_vec(raw.clone());
            if x0.len() != b.len() {
                return Err(SolverError::BlockAlgebra(
                    BlockEncodingError::DimensionMismatch {
                        left: x0.len(),
                        right: b.len(),
                    },
                ));
            }
            let bound = match mode {
                EtaMode::Paper => {
                    if margin <= 0.0 {
                        return Err(SolverError::RegimeViolation { margin });
                    }
                    margin
                }
                EtaMode::Free => 1.0,
            };
            let norm = x0.norm();
            if norm > bound + 1e-12 {
                return Err(SolverError::InitialNormTooLarge { norm, bound });
            }
            Ok(x0)
        }
    }
}

fn trace_row(ledger: &IterateLedger, inputs: &PipelineInputs) -> TraceRow {
    let grad = oracle::gradient_exact(&ledger.classical_x, inputs.a_dense, inputs.b);
    TraceRow {
        t: ledger.t,
        f_value: oracle::f_exact(&ledger.classical_x, inputs.a_dense, inputs.b),
        grad_norm: grad.norm(),
        error_pred: ledger.error_pred,
        error_meas: ledger.error_meas,
        cost_pred: ledger.cost_pred,
        inner_product: None,
    }
}

/// Whether the run is noiseless end to end, making the estimated inner
/// product directly comparable to the classical shadow.
fn is_exact_run(cfg: &SolverConfig) -> bool {
    cfg.estimation.mode == EstimationMode::Exact
        && !(cfg.inject_perturbation && cfg.epsilon > 0.0)
        && cfg.amplification_noise == 0.0
}

/// Execute T iterations and extract the final state.
pub fn run(
    a: &SparseHermitianMatrix,
    b: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(IterateLedger, SolveReport), RunFailure> {
    let norm = b.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(SolverError::RhsNotNormalized { norm }.into());
    }

    let a_encoding = if cfg.inject_perturbation && cfg.epsilon > 0.0 {
        be::encode_sparse_perturbed(a, cfg.epsilon, derive_seed(cfg.seed, u64::MAX))
    } else {
        be::encode_sparse(a, cfg.epsilon)
    };
    let b_density = be::encode_pure_density(b).map_err(SolverError::from)?;
    let a_dense = a.to_dense();
    let inputs = PipelineInputs {
        a_encoding: &a_encoding,
        b_density: &b_density,
        a_dense: &a_dense,
        b,
        sparsity: a.sparsity(),
        config: cfg,
    };

    let x0 = initial_iterate(cfg, b)?;
    let x_encoding = be::encode_padded_density(&x0).map_err(SolverError::from)?;
    let mut ledger = IterateLedger {
        t: 0,
        x_encoding,
        factor_c: 1.0,
        inner_products: Vec::new(),
        classical_inner_products: Vec::new(),
        error_pred: 0.0,
        error_meas: 0.0,
        cost_pred: 1.0,
        classical_x: x0.clone(),
    };
    let mut trace = vec![trace_row(&ledger, &inputs)];

    let abort = |error: SolverError, ledger: &IterateLedger| RunFailure {
        error,
        ledger: Some(Box::new(ledger.clone())),
    };

    for t in 0..cfg.iterations {
        let est_cfg = cfg.estimation.with_derived_seed(t as u64);
        let estimate =
            estimation::signed_inner_product(&ledger.x_encoding, ledger.factor_c, b, &est_cfg)
                .map_err(|e| abort(e.into(), &ledger))?;
        let ip = estimate.value;
        let classical_ip = ledger.classical_x.dot(b);
        if is_exact_run(cfg) && (ip - classical_ip).abs() > CROSS_CHECK_TOL {
            return Err(abort(
                SolverError::CrossCheckFailed {
                    estimated: ip,
                    classical: classical_ip,
                    iteration: t,
                },
                &ledger,
            ));
        }
        check_inner_product(ip, t).map_err(|e| abort(e, &ledger))?;
        trace.last_mut().expect("trace non-empty").inner_product = Some(ip);

        let s1 = step1(&ledger, ip, &inputs).map_err(|e| abort(e, &ledger))?;
        let s2 = step2(&s1);
        let s3 = step3(&ledger, ip, &inputs).map_err(|e| abort(e, &ledger))?;
        ledger = step4_combine(&ledger, &s1, &s2, &s3, ip, classical_ip, &inputs)
            .map_err(|e| abort(e, &ledger))?;
        trace.push(trace_row(&ledger, &inputs));
    }

    let (final_state, success_prob) =
        extract_solution(&ledger, b).map_err(|e| abort(e, &ledger))?;
    let report = build_report(a, b, cfg, &ledger, trace, &final_state, success_prob);
    Ok((ledger, report))
}

/// Post-select the final encoding on `b`: success probability
/// `||c_T x_T (x_T^T b)||^2`, state `x_T / ||x_T||` up to sign.
pub fn extract_solution(
    ledger: &IterateLedger,
    b: &DVector<f64>,
) -> Result<(DVector<f64>, f64), SolverError> {
    let outcome = be::apply(&ledger.x_encoding, b)?;
    if outcome.success_prob < ZERO_AMPLITUDE {
        return Err(SolverError::ZeroAmplitude);
    }
    let state = outcome.state.ok_or(SolverError::ZeroAmplitude)?;
    Ok((state, outcome.success_prob))
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    a: &SparseHermitianMatrix,
    b: &DVector<f64>,
    cfg: &SolverConfig,
    ledger: &IterateLedger,
    trace: Vec<TraceRow>,
    final_state: &DVector<f64>,
    success_prob: f64,
) -> SolveReport {
    let a_dense = a.to_dense();
    let minimizer = oracle::minimizer_exact(&a_dense, b);
    let minimizer_unit = &minimizer / minimizer.norm();
    let fidelity_vs_minimizer = final_state.dot(&minimizer_unit).abs();

    let inverse = oracle::direct_solve(&a_dense, b)
        .filter(|x| x.norm() > 0.0 && x.iter().all(|v| v.is_finite()));
    let inverse_unit = inverse.map(|x| {
        let n = x.norm();
        x / n
    });
    let fidelity_vs_inverse = inverse_unit.as_ref().map(|x| final_state.dot(x).abs());
    let minimizer_inverse_gap = inverse_unit.as_ref().map(|x| {
        (&minimizer_unit - x)
            .norm()
            .min((&minimizer_unit + x).norm())
    });

    let initial = initial_iterate(cfg, b).expect("run() already validated x0");
    let success_prob_bound = match cfg.eta_mode {
        EtaMode::Paper => {
            success_prob_lower_bound(cfg.iterations, cfg.alpha, initial.dot(b), initial.norm()).ok()
        }
        EtaMode::Free => None,
    };

    let cost = predicted_cost(cfg.iterations, a.sparsity(), a.dim(), cfg.epsilon);
    SolveReport {
        schema_version: "1".into(),
        generated_at_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        final_state: final_state.iter().copied().collect(),
        success_prob_meas: success_prob,
        success_prob_bound,
        fidelity_vs_minimizer,
        fidelity_vs_inverse,
        minimizer_inverse_gap,
        conditioning: a.spectral_profile(),
        convergence_trace: trace,
        hyperparameters: HyperparameterEcho {
            iterations: cfg.iterations,
            alpha: cfg.alpha,
            eta: cfg.eta,
            epsilon: cfg.epsilon,
            delta_target: cfg.delta_target,
            eta_mode: cfg.eta_mode,
            estimation_mode: cfg.estimation.mode,
            shots: cfg.estimation.shots,
            estimation_seed: cfg.estimation.seed,
            solver_seed: cfg.seed,
            amplification_noise: cfg.amplification_noise,
            inject_perturbation: cfg.inject_perturbation,
            x0_norm: initial.norm(),
        },
        cost_model: "modeled (oracle-use recurrence units), not measured gate counts".into(),
        predicted_cost_recurrence: cost.recurrence,
        predicted_cost_closed_form: cost.closed_form,
        predicted_error_final: predicted_error(cfg.iterations, cfg.epsilon),
        measured_error_final: ledger.error_meas,
    }
}
