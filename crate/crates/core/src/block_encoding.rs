//! A closed algebra over block-encoding records.
//!
//! A [`BlockEncoding`] carries the encoded top-left block itself
//! (subnormalization already folded in), a ledger of the subnormalization
//! factors applied along the way, an accumulated error bound, a logical
//! ancilla count, and a count of primitive sparse-oracle uses.
//!
//! Composite unitaries are never materialized: every operation computes the
//! resulting block directly and [`dilate`] produces a fresh one-ancilla
//! orthogonal completion on demand. Post-selection observables (success
//! probability, post-selected state) depend only on the block, so this
//! canonical form is exact while keeping dimensions flat across arbitrarily
//! deep compositions.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::matrix_core::SparseHermitianMatrix;

/// Norm slack tolerated on a block before it stops being a contraction.
/// Blocks with norm in (1, 1 + CONTRACTION_SLACK] are treated as float drift
/// and clipped where a strict contraction is needed; beyond that, hard error.
pub const CONTRACTION_SLACK: f64 = 1e-9;

/// Success probabilities below this are reported as the zero-outcome sentinel.
pub const ZERO_OUTCOME_THRESHOLD: f64 = 1e-300;

/// Floor applied to the amplification accuracy inside the query-count
/// formula so the recorded cost stays finite in exact mode.
const AMPLIFY_COST_EPS_FLOOR: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum BlockEncodingError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("block norm {norm} exceeds the contraction slack")]
    NotAContraction { norm: f64 },
    #[error("vector norm {norm} is not 1")]
    NotNormalized { norm: f64 },
    #[error("vector norm {norm} exceeds 1, cannot embed as a pure-state corner")]
    NormAboveOne { norm: f64 },
    #[error("linear combination over an empty term list")]
    EmptyTermList,
    #[error("scaling factor p = {p} must exceed 1")]
    InvalidScale { p: f64 },
    #[error("amplification factor gamma = {gamma} must exceed 1")]
    InvalidGamma { gamma: f64 },
    #[error("amplification parameter {name} = {value} must lie in (0, 1/2)")]
    InvalidAmplifyParameter { name: &'static str, value: f64 },
    #[error("combination weight gamma_{index} = {value} must be positive")]
    InvalidWeight { index: usize, value: f64 },
    #[error(
        "amplification overflow: gamma {gamma} * sigma_max {sigma_max} \
         exceeds 1 - {delta}"
    )]
    AmplificationOverflow {
        gamma: f64,
        sigma_max: f64,
        delta: f64,
    },
    #[error("sign list length {signs} does not match term count {terms}")]
    SignCountMismatch { signs: usize, terms: usize },
}

/// Sign attached to a term of a linear combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// A block-encoded operator in canonical (block-only) form.
#[derive(Debug, Clone)]
pub struct BlockEncoding {
    block: DMatrix<f64>,
    /// Every subnormalization factor applied, as (label, factor). For purely
    /// multiplicative chains (encode, scale, amplify, product, transpose,
    /// tensor) the product of factors relates the block to the target
    /// operator; a linear combination starts a fresh ledger with its own
    /// 1/gamma entry.
    subnorm_ledger: Vec<(String, f64)>,
    /// Accumulated first-order error bound (the epsilon of an
    /// epsilon-approximate encoding).
    error_bound: f64,
    /// Logical ancilla count, kept for the cost ledger only.
    ancilla_count: u32,
    /// Accumulated uses of the primitive sparse-oracle encoding, with
    /// amplification multiplying by its query count.
    cost_units: u128,
}

/// Orthogonal one-ancilla completion of a contraction block.
#[derive(Debug, Clone)]
pub struct DilatedUnitary {
    matrix: DMatrix<f64>,
    source_block: BlockEncoding,
}

impl DilatedUnitary {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn source_block(&self) -> &BlockEncoding {
        &self.source_block
    }
}

/// Result of applying a block encoding to a state and post-selecting the
/// ancilla on zero.
#[derive(Debug, Clone)]
pub struct ApplyOutcome {
    pub success_prob: f64,
    /// `None` is the designated zero-outcome sentinel: the block annihilated
    /// the input, post-selection can never succeed.
    pub state: Option<DVector<f64>>,
}

impl BlockEncoding {
    fn new(
        block: DMatrix<f64>,
        subnorm_ledger: Vec<(String, f64)>,
        error_bound: f64,
        ancilla_count: u32,
        cost_units: u128,
    ) -> Result<Self, BlockEncodingError> {
        let norm = operator_norm(&block);
        if norm > 1.0 + error_bound + CONTRACTION_SLACK {
            return Err(BlockEncodingError::NotAContraction { norm });
        }
        Ok(Self {
            block,
            subnorm_ledger,
            error_bound,
            ancilla_count,
            cost_units,
        })
    }

    pub fn dim(&self) -> usize {
        self.block.nrows()
    }

    /// The stored block. Test accessor; identity function on the record.
    pub fn extract_block(&self) -> &DMatrix<f64> {
        &self.block
    }

    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }

    /// Same record with the error bound replaced. The bound never decreases
    /// through the algebra; this explicit reset exists for tests.
    pub fn with_error_bound(mut self, error_bound: f64) -> Self {
        self.error_bound = error_bound;
        self
    }

    pub fn ancilla_count(&self) -> u32 {
        self.ancilla_count
    }

    pub fn cost_units(&self) -> u128 {
        self.cost_units
    }

    pub fn subnorm_ledger(&self) -> &[(String, f64)] {
        &self.subnorm_ledger
    }

    /// JSON debug dump of the full record.
    pub fn debug_dump(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = (0..self.block.nrows())
            .map(|i| {
                (0..self.block.ncols())
                    .map(|j| self.block[(i, j)])
                    .collect()
            })
            .collect();
        json!({
            "dim": self.dim(),
            "block": rows,
            "subnorm_ledger": self.subnorm_ledger,
            "error_bound": self.error_bound,
            "ancilla_count": self.ancilla_count,
            "cost_units": self.cost_units.to_string(),
        })
    }
}

fn ancilla_for_dim(dim: usize) -> u32 {
    (dim.max(2) as f64).log2().ceil() as u32
}

/// Operator (spectral) norm via singular values.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Trivial exact encoding of the identity (one ancilla, e.g. a sigma_z
/// conjugation slot).
pub fn encode_identity(dim: usize) -> BlockEncoding {
    BlockEncoding::new(DMatrix::identity(dim, dim), Vec::new(), 0.0, 1, 0)
        .expect("identity is a contraction")
}

/// Trivial exact encoding of the zero operator (top-left corner of a swap).
pub fn encode_zero(dim: usize) -> BlockEncoding {
    BlockEncoding::new(DMatrix::zeros(dim, dim), Vec::new(), 0.0, 1, 0)
        .expect("zero is a contraction")
}

/// Wrap a raw dense contraction as an exact encoding. Entry point for tests
/// and tooling that already hold the block.
pub fn encode_dense_contraction(block: DMatrix<f64>) -> Result<BlockEncoding, BlockEncodingError> {
    let ancilla = ancilla_for_dim(block.nrows().max(1));
    BlockEncoding::new(block, Vec::new(), 0.0, ancilla, 0)
}

/// Exact encoding of the rank-one density `b b^T` of a unit vector.
pub fn encode_pure_density(b: &DVector<f64>) -> Result<BlockEncoding, BlockEncodingError> {
    let norm = b.norm();
    if (norm - 1.0).abs() > CONTRACTION_SLACK {
        return Err(BlockEncodingError::NotNormalized { norm });
    }
    let block = b * b.transpose();
    BlockEncoding::new(block, Vec::new(), 0.0, ancilla_for_dim(b.len()) + 1, 0)
}

/// Exact encoding of `x x^T` for a sub-normalized vector (`||x|| <= 1`),
/// realized as the top-left corner of the density of a padded pure state.
pub fn encode_padded_density(x: &DVector<f64>) -> Result<BlockEncoding, BlockEncodingError> {
    let norm = x.norm();
    if norm > 1.0 + CONTRACTION_SLACK {
        return Err(BlockEncodingError::NormAboveOne { norm });
    }
    let block = x * x.transpose();
    BlockEncoding::new(block, Vec::new(), 0.0, ancilla_for_dim(x.len()) + 1, 0)
}

/// Encoding of `A/s` from oracle access to an `s`-sparse matrix, with error
/// budget `epsilon` declared but no perturbation injected (the block is
/// exact). One primitive oracle use.
pub fn encode_sparse(a: &SparseHermitianMatrix, epsilon: f64) -> BlockEncoding {
    let s = a.sparsity() as f64;
    let block = a.to_dense() / s;
    sparse_record(a, block, epsilon)
}

/// Like [`encode_sparse`], but actually perturbs the block by a random
/// symmetric matrix rescaled to operator norm exactly `epsilon`, drawn
/// deterministically from `seed`.
pub fn encode_sparse_perturbed(
    a: &SparseHermitianMatrix,
    epsilon: f64,
    seed: u64,
) -> BlockEncoding {
    let s = a.sparsity() as f64;
    let mut block = a.to_dense() / s;
    if epsilon > 0.0 {
        let n = a.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        noise = (&noise + noise.transpose()) * 0.5;
        let norm = operator_norm(&noise);
        if norm > 0.0 {
            block += noise * (epsilon / norm);
        }
    }
    sparse_record(a, block, epsilon)
}

fn sparse_record(a: &SparseHermitianMatrix, block: DMatrix<f64>, epsilon: f64) -> BlockEncoding {
    let s = a.sparsity() as f64;
    BlockEncoding::new(
        block,
        vec![("sparse_oracle".into(), 1.0 / s)],
        epsilon,
        ancilla_for_dim(a.dim()) + 3,
        1,
    )
    .expect("A/s is a contraction up to the declared error")
}

/// Block encoding of the product `B1.block * B2.block`. Errors compose to
/// first order; ancillas and primitive costs add.
pub fn product(
    b1: &BlockEncoding,
    b2: &BlockEncoding,
) -> Result<BlockEncoding, BlockEncodingError> {
    if b1.dim() != b2.dim() {
        return Err(BlockEncodingError::DimensionMismatch {
            left: b1.dim(),
            right: b2.dim(),
        });
    }
    let mut ledger = b1.subnorm_ledger.clone();
    ledger.extend(b2.subnorm_ledger.iter().cloned());
    BlockEncoding::new(
        &b1.block * &b2.block,
        ledger,
        b1.error_bound + b2.error_bound,
        b1.ancilla_count + b2.ancilla_count,
        b1.cost_units.saturating_add(b2.cost_units),
    )
}

/// Signed convex combination `sum_i sign_i (gamma_i / gamma) block_i` with
/// `gamma = sum_i gamma_i`. The error bound composes with the same weights;
/// the ancilla count is the max over terms plus `ceil(log2 m)`.
pub fn linear_combination(
    terms: &[(&BlockEncoding, f64)],
    signs: &[Sign],
) -> Result<BlockEncoding, BlockEncodingError> {
    if terms.is_empty() {
        return Err(BlockEncodingError::EmptyTermList);
    }
    if signs.len() != terms.len() {
        return Err(BlockEncodingError::SignCountMismatch {
            signs: signs.len(),
            terms: terms.len(),
        });
    }
    let dim = terms[0].0.dim();
    let mut gamma = 0.0;
    for (index, &(term, weight)) in terms.iter().enumerate() {
        if term.dim() != dim {
            return Err(BlockEncodingError::DimensionMismatch {
                left: dim,
                right: term.dim(),
            });
        }
        if weight.is_nan() || weight <= 0.0 {
            return Err(BlockEncodingError::InvalidWeight {
                index,
                value: weight,
            });
        }
        gamma += weight;
    }
    let mut block = DMatrix::zeros(dim, dim);
    let mut error = 0.0;
    let mut ancilla_max = 0;
    let mut cost: u128 = 0;
    for (&(term, weight), &sign) in terms.iter().zip(signs) {
        let w = weight / gamma;
        block += &term.block * (sign.as_f64() * w);
        error += w * term.error_bound;
        ancilla_max = ancilla_max.max(term.ancilla_count);
        cost = cost.saturating_add(term.cost_units);
    }
    let extra = (terms.len().max(2) as f64).log2().ceil() as u32;
    BlockEncoding::new(
        block,
        vec![("sum".into(), 1.0 / gamma)],
        error,
        ancilla_max + extra,
        cost,
    )
}

/// Block encoding of `block / p` for `p > 1`.
pub fn scale_down(b: &BlockEncoding, p: f64) -> Result<BlockEncoding, BlockEncodingError> {
    if p.is_nan() || p <= 1.0 {
        return Err(BlockEncodingError::InvalidScale { p });
    }
    let mut ledger = b.subnorm_ledger.clone();
    ledger.push(("scale".into(), 1.0 / p));
    BlockEncoding::new(
        &b.block / p,
        ledger,
        b.error_bound / p,
        b.ancilla_count + 1,
        b.cost_units,
    )
}

/// Ideal singular-value amplification: `block -> gamma * block`, allowed only
/// when every singular value stays at or below `(1 - delta_amp) / gamma`.
/// The error bound becomes `gamma * error + eps_amp` and the primitive cost
/// multiplies by the query count `m = ceil((gamma/delta_amp) ln(gamma/eps))`.
pub fn amplify(
    b: &BlockEncoding,
    gamma: f64,
    delta_amp: f64,
    eps_amp: f64,
) -> Result<BlockEncoding, BlockEncodingError> {
    amplify_impl(b, gamma, delta_amp, eps_amp, None)
}

/// [`amplify`] with multiplicative singular-value noise: each singular value
/// `v` becomes `gamma * v * (1 + eta)` with `|eta| <= eps_amp`, drawn
/// deterministically from `seed`.
pub fn amplify_noisy(
    b: &BlockEncoding,
    gamma: f64,
    delta_amp: f64,
    eps_amp: f64,
    seed: u64,
) -> Result<BlockEncoding, BlockEncodingError> {
    amplify_impl(b, gamma, delta_amp, eps_amp, Some(seed))
}

fn amplify_impl(
    b: &BlockEncoding,
    gamma: f64,
    delta_amp: f64,
    eps_amp: f64,
    noise_seed: Option<u64>,
) -> Result<BlockEncoding, BlockEncodingError> {
    if gamma.is_nan() || gamma <= 1.0 {
        return Err(BlockEncodingError::InvalidGamma { gamma });
    }
    if !(delta_amp > 0.0 && delta_amp < 0.5) {
        return Err(BlockEncodingError::InvalidAmplifyParameter {
            name: "delta_amp",
            value: delta_amp,
        });
    }
    if !(0.0..0.5).contains(&eps_amp) {
        return Err(BlockEncodingError::InvalidAmplifyParameter {
            name: "eps_amp",
            value: eps_amp,
        });
    }
    let sigma_max = operator_norm(&b.block);
    if gamma * sigma_max > 1.0 - delta_amp + CONTRACTION_SLACK {
        return Err(BlockEncodingError::AmplificationOverflow {
            gamma,
            sigma_max,
            delta: delta_amp,
        });
    }
    let block = match noise_seed {
        None => &b.block * gamma,
        Some(seed) => {
            let svd = b.block.clone().svd(true, true);
            let u = svd.u.as_ref().expect("svd with u");
            let v_t = svd.v_t.as_ref().expect("svd with v_t");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sv = svd.singular_values.clone();
            for v in sv.iter_mut() {
                let eta = rng.random_range(-eps_amp..=eps_amp);
                *v *= gamma * (1.0 + eta);
            }
            u * DMatrix::from_diagonal(&sv) * v_t
        }
    };
    let eps_eff = eps_amp.max(AMPLIFY_COST_EPS_FLOOR);
    let queries = ((gamma / delta_amp) * (gamma / eps_eff).ln()).ceil() as u128;
    let mut ledger = b.subnorm_ledger.clone();
    ledger.push(("amplify".into(), gamma));
    BlockEncoding::new(
        block,
        ledger,
        gamma * b.error_bound + eps_amp,
        b.ancilla_count + 1,
        b.cost_units.saturating_mul(queries.max(1)),
    )
}

/// Kronecker product of the blocks; errors add to first order.
pub fn tensor(blocks: &[&BlockEncoding]) -> Result<BlockEncoding, BlockEncodingError> {
    if blocks.is_empty() {
        return Err(BlockEncodingError::EmptyTermList);
    }
    let mut block = blocks[0].block.clone();
    let mut error = blocks[0].error_bound;
    let mut ancilla = blocks[0].ancilla_count;
    let mut cost = blocks[0].cost_units;
    let mut ledger = blocks[0].subnorm_ledger.clone();
    for b in &blocks[1..] {
        block = block.kronecker(&b.block);
        error += b.error_bound;
        ancilla += b.ancilla_count;
        cost = cost.saturating_add(b.cost_units);
        ledger.extend(b.subnorm_ledger.iter().cloned());
    }
    BlockEncoding::new(block, ledger, error, ancilla, cost)
}

/// Block encoding of the transposed block; ledgers and error preserved.
pub fn transpose(b: &BlockEncoding) -> BlockEncoding {
    BlockEncoding {
        block: b.block.transpose(),
        subnorm_ledger: b.subnorm_ledger.clone(),
        error_bound: b.error_bound,
        ancilla_count: b.ancilla_count,
        cost_units: b.cost_units,
    }
}

/// One-ancilla orthogonal completion `[[B, S], [S', -B^T]]` with
/// `S = sqrt(I - B B^T)`, `S' = sqrt(I - B^T B)`, computed through the SVD of
/// the block. Singular values within [`CONTRACTION_SLACK`] above 1 are
/// clipped to 1; larger ones are a hard error.
pub fn dilate(b: &BlockEncoding) -> Result<DilatedUnitary, BlockEncodingError> {
    let n = b.dim();
    let svd = b.block.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max > 1.0 + CONTRACTION_SLACK {
        return Err(BlockEncodingError::NotAContraction { norm: sigma_max });
    }
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let complement = DVector::from_iterator(
        n,
        svd.singular_values
            .iter()
            .map(|&s| (1.0 - s.min(1.0).powi(2)).max(0.0).sqrt()),
    );
    let c = DMatrix::from_diagonal(&complement);
    let s_left = u * &c * u.transpose();
    let s_right = v_t.transpose() * &c * v_t;

    let mut matrix = DMatrix::zeros(2 * n, 2 * n);
    matrix.view_mut((0, 0), (n, n)).copy_from(&b.block);
    matrix.view_mut((0, n), (n, n)).copy_from(&s_left);
    matrix.view_mut((n, 0), (n, n)).copy_from(&s_right);
    matrix
        .view_mut((n, n), (n, n))
        .copy_from(&(-b.block.transpose()));
    Ok(DilatedUnitary {
        matrix,
        source_block: b.clone(),
    })
}

/// Apply the encoded operator to a unit state and post-select the ancilla on
/// zero: `success_prob = ||block psi||^2`, state renormalized.
pub fn apply(b: &BlockEncoding, psi: &DVector<f64>) -> Result<ApplyOutcome, BlockEncodingError> {
    if psi.len() != b.dim() {
        return Err(BlockEncodingError::DimensionMismatch {
            left: b.dim(),
            right: psi.len(),
        });
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > CONTRACTION_SLACK {
        return Err(BlockEncodingError::NotNormalized { norm });
    }
    let v = &b.block * psi;
    let success_prob = v.norm_squared();
    if success_prob < ZERO_OUTCOME_THRESHOLD {
        return Ok(ApplyOutcome {
            success_prob: 0.0,
            state: None,
        });
    }
    Ok(ApplyOutcome {
        success_prob,
        state: Some(v / success_prob.sqrt()),
    })
}
