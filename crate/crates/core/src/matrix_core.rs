//! Sparse Hermitian matrices with oracle-style row access.
//!
//! Matrices are real symmetric ("Hermitian in the real regime"), stored as
//! per-row sorted adjacency lists so that [`SparseHermitianMatrix::oracle_query`]
//! can answer "the `slot`-th nonzero of row `r`" in O(1). The operator norm is
//! certified at construction by a dense eigendecomposition — everything here is
//! desk scale by design.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::seeding::derive_seed;

/// Entries with magnitude at or below this threshold are treated as structural
/// zeros when counting sparsity and pruning generator output.
const ZERO_THRESHOLD: f64 = 1e-13;

/// Largest eigenvalue magnitude placed by the test-problem generator. Kept
/// strictly below 1 so pruning drift cannot push the norm to 1.
const GENERATOR_LAMBDA_MAX: f64 = 0.95;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("entry ({row}, {col}) = {value} has no matching symmetric partner")]
    NonHermitianInput { row: usize, col: usize, value: f64 },
    #[error("index ({row}, {col}) out of range for dimension {dim}")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },
    #[error("operator norm {norm} exceeds 1 and auto-rescaling is disabled")]
    NormExceedsOne { norm: f64 },
    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFiniteValue { row: usize, col: usize },
    #[error("matrix dimension must be at least 1")]
    EmptyDimension,
    #[error("rescale target {target} must lie in (0, 1)")]
    InvalidTarget { target: f64 },
    #[error(
        "could not realize eigenvalues in [1/{kappa}, 1) at sparsity {sparsity} \
         after {attempts} attempts"
    )]
    InfeasibleSparsity {
        sparsity: usize,
        kappa: f64,
        attempts: usize,
    },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("matrix market parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Real symmetric sparse matrix with a certified operator-norm bound.
///
/// Invariants established at construction:
/// - entry `(i, j, v)` present iff `(j, i, v)` present;
/// - no row (equivalently, column) carries more than `sparsity` nonzeros;
/// - the operator norm is at most `spectral_bound <= 1`, certified by a dense
///   eigendecomposition.
#[derive(Debug, Clone)]
pub struct SparseHermitianMatrix {
    dim: usize,
    sparsity: usize,
    /// Per-row nonzeros in ascending column order.
    rows: Vec<Vec<(usize, f64)>>,
    spectral_bound: f64,
}

/// Extremal singular values and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectralProfile {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub kappa: f64,
}

impl SparseHermitianMatrix {
    /// Build a validated matrix from a coordinate list.
    ///
    /// Rejects non-finite values, out-of-range or duplicate indices, a missing
    /// symmetric partner, and an operator norm above 1. Structural zeros in
    /// the input are dropped.
    pub fn from_coordinates(
        dim: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, MatrixError> {
        let (mut matrix, norm) = Self::assemble(dim, entries)?;
        // Eigensolver dust above 1 is clamped; a real excess is an error.
        if norm > 1.0 + 1e-12 {
            return Err(MatrixError::NormExceedsOne { norm });
        }
        matrix.spectral_bound = norm.min(1.0);
        Ok(matrix)
    }

    /// Like [`Self::from_coordinates`], but a matrix with operator norm above 1
    /// is scaled down to norm exactly 1. Returns the applied scale (1 when no
    /// rescaling was needed).
    pub fn from_coordinates_auto_rescaled(
        dim: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<(Self, f64), MatrixError> {
        let (matrix, norm) = Self::assemble(dim, entries)?;
        if norm <= 1.0 {
            return Ok((matrix, 1.0));
        }
        let scale = 1.0 / norm;
        let scaled: Vec<(usize, usize, f64)> = matrix
            .coordinate_entries()
            .into_iter()
            .map(|(i, j, v)| (i, j, v * scale))
            .collect();
        let (mut rescaled, norm_after) = Self::assemble(dim, &scaled)?;
        // scale = 1/norm exactly, so any excess over 1 is eigensolver dust.
        rescaled.spectral_bound = norm_after.min(1.0);
        Ok((rescaled, scale))
    }

    fn assemble(dim: usize, entries: &[(usize, usize, f64)]) -> Result<(Self, f64), MatrixError> {
        if dim == 0 {
            return Err(MatrixError::EmptyDimension);
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(i, j, v) in entries {
            if i >= dim || j >= dim {
                return Err(MatrixError::IndexOutOfRange {
                    row: i,
                    col: j,
                    dim,
                });
            }
            if !v.is_finite() {
                return Err(MatrixError::NonFiniteValue { row: i, col: j });
            }
            if v.abs() <= ZERO_THRESHOLD {
                continue;
            }
            if rows[i].iter().any(|&(c, _)| c == j) {
                return Err(MatrixError::DuplicateEntry { row: i, col: j });
            }
            rows[i].push((j, v));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
        }
        // Symmetry: every off-diagonal entry needs an equal transposed partner.
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                if i == j {
                    continue;
                }
                let partner = rows[j].iter().find(|&&(c, _)| c == i).map(|&(_, w)| w);
                if partner != Some(v) {
                    return Err(MatrixError::NonHermitianInput {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        let sparsity = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let mut matrix = Self {
            dim,
            sparsity,
            rows,
            spectral_bound: 0.0,
        };
        let norm = operator_norm_symmetric(&matrix.to_dense());
        matrix.spectral_bound = norm;
        Ok((matrix, norm))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Maximum number of nonzeros in any row (= any column).
    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    /// Certified upper bound on the operator norm (equals the norm itself at
    /// construction time, up to eigensolver accuracy).
    pub fn spectral_bound(&self) -> f64 {
        self.spectral_bound
    }

    /// Oracle access: the `slot`-th nonzero of `row` in ascending column
    /// order. Rows with fewer than `slot + 1` nonzeros answer with the padding
    /// sentinel `(row, 0.0)`, keeping the oracle total and deterministic.
    pub fn oracle_query(&self, row: usize, slot: usize) -> Result<(usize, f64), MatrixError> {
        if row >= self.dim || slot >= self.sparsity {
            return Err(MatrixError::IndexOutOfRange {
                row,
                col: slot,
                dim: self.dim,
            });
        }
        Ok(self.rows[row].get(slot).copied().unwrap_or((row, 0.0)))
    }

    /// Full coordinate list, both triangles, row-major order.
    pub fn coordinate_entries(&self) -> Vec<(usize, usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, v)| (i, j, v)))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.coordinate_entries() {
            dense[(i, j)] = v;
        }
        dense
    }

    /// Extremal singular values from a dense eigendecomposition. For a
    /// singular matrix `kappa` is `f64::INFINITY`.
    pub fn spectral_profile(&self) -> SpectralProfile {
        let eigs = self.to_dense().symmetric_eigen().eigenvalues;
        let sigma_max = eigs.iter().fold(0.0_f64, |m, &l| m.max(l.abs()));
        let sigma_min = eigs.iter().fold(f64::INFINITY, |m, &l| m.min(l.abs()));
        let kappa = if sigma_min > 0.0 {
            sigma_max / sigma_min
        } else {
            f64::INFINITY
        };
        SpectralProfile {
            sigma_min,
            sigma_max,
            kappa,
        }
    }

    /// Rescale so the certified norm bound becomes exactly `target`.
    /// Returns the rescaled matrix and the applied scale `target / bound`.
    pub fn rescale_to_bound(&self, target: f64) -> Result<(Self, f64), MatrixError> {
        if !(target > 0.0 && target < 1.0) || self.spectral_bound == 0.0 {
            return Err(MatrixError::InvalidTarget { target });
        }
        let scale = target / self.spectral_bound;
        if scale == 1.0 {
            return Ok((self.clone(), 1.0));
        }
        let entries: Vec<(usize, usize, f64)> = self
            .coordinate_entries()
            .into_iter()
            .map(|(i, j, v)| (i, j, v * scale))
            .collect();
        let (mut rescaled, _) = Self::assemble(self.dim, &entries)?;
        rescaled.spectral_bound = target;
        Ok((rescaled, scale))
    }
}

/// Operator norm of a symmetric matrix via eigendecomposition.
fn operator_norm_symmetric(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.abs()))
}

/// Embed an arbitrary real square matrix `M` into the Hermitian
/// `[[0, M], [M^T, 0]]` of twice the dimension. Solving the embedded system
/// with right-hand side `(b; 0)` recovers `x` with `M x = b` in the lower
/// block; the embedding's operator norm equals `sigma_max(M)`.
pub fn hermitian_embed(m: &DMatrix<f64>) -> Result<SparseHermitianMatrix, MatrixError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(MatrixError::NotSquare {
            rows: n,
            cols: m.ncols(),
        });
    }
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(MatrixError::NonFiniteValue { row: i, col: j });
            }
            if v.abs() > ZERO_THRESHOLD {
                entries.push((i, n + j, v));
                entries.push((n + j, i, v));
            }
        }
    }
    SparseHermitianMatrix::from_coordinates(2 * n, &entries)
}

/// Deterministically generate an `n x n` test system: a sparse symmetric
/// matrix with eigenvalues in `[1/kappa, 1)` (positive spectrum, so the
/// solver's inner-product regime holds) and a random unit right-hand side.
///
/// The matrix is built as `Q D Q^T` with `D` a fixed spectrum and `Q` a
/// product of Givens rotations, each accepted only if the resulting nonzero
/// pattern keeps every row within `s` entries. The spectrum is therefore
/// exact by construction and re-certified numerically before returning.
pub fn random_test_system(
    n: usize,
    s: usize,
    kappa: f64,
    seed: u64,
) -> Result<(SparseHermitianMatrix, DVector<f64>), MatrixError> {
    assert!(n >= 1, "dimension must be positive");
    assert!(s >= 1, "sparsity must be positive");
    assert!(kappa > 1.0, "kappa must exceed 1");

    const BUILD_ATTEMPTS: u64 = 8;
    for attempt in 0..BUILD_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt));
        let dense = build_rotated_spectrum(n, s, kappa, &mut rng);
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                let v = 0.5 * (dense[(i, j)] + dense[(j, i)]);
                if v.abs() > ZERO_THRESHOLD {
                    entries.push((i, j, v));
                    if i != j {
                        entries.push((j, i, v));
                    }
                }
            }
        }
        let matrix = SparseHermitianMatrix::from_coordinates(n, &entries)?;
        if matrix.sparsity() > s {
            continue;
        }
        let eigs = matrix.to_dense().symmetric_eigen().eigenvalues;
        let min_mag = eigs.iter().fold(f64::INFINITY, |m, &l| m.min(l.abs()));
        let max_mag = eigs.iter().fold(0.0_f64, |m, &l| m.max(l.abs()));
        if min_mag >= 1.0 / kappa - 1e-9 && max_mag < 1.0 {
            let b = random_unit_vector(n, &mut rng);
            return Ok((matrix, b));
        }
    }
    Err(MatrixError::InfeasibleSparsity {
        sparsity: s,
        kappa,
        attempts: BUILD_ATTEMPTS as usize,
    })
}

fn build_rotated_spectrum(n: usize, s: usize, kappa: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let lambda_min = 1.0 / kappa;
    let mut eigs: Vec<f64> = (0..n)
        .map(|_| rng.random_range(lambda_min..GENERATOR_LAMBDA_MAX))
        .collect();
    eigs[0] = lambda_min;
    if n >= 2 {
        eigs[1] = GENERATOR_LAMBDA_MAX;
    }
    eigs.shuffle(rng);
    let mut a = DMatrix::from_diagonal(&DVector::from_vec(eigs));
    if s < 2 || n < 2 {
        return a;
    }

    let max_attempts = 40 * n;
    let target_rotations = 4 * n;
    let mut accepted = 0;
    for _ in 0..max_attempts {
        if accepted >= target_rotations {
            break;
        }
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        if !rotation_keeps_pattern(&a, i, j, s) {
            continue;
        }
        let theta: f64 = rng.random_range(0.3..1.2);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        apply_symmetric_givens(&mut a, i, j, sign * theta);
        accepted += 1;
    }
    a
}

/// Pattern-level check that rotating rows/columns (i, j) keeps every row at
/// most `s`-sparse. Conservative: treats any mixed entry as a fill-in.
fn rotation_keeps_pattern(a: &DMatrix<f64>, i: usize, j: usize, s: usize) -> bool {
    let n = a.nrows();
    let nz = |v: f64| v.abs() > ZERO_THRESHOLD;
    for k in 0..n {
        if k == i || k == j {
            continue;
        }
        let mut count = (0..n).filter(|&l| nz(a[(k, l)])).count();
        if nz(a[(k, i)]) != nz(a[(k, j)]) {
            count += 1; // the zero slot among columns i, j fills in
        }
        if count > s {
            return false;
        }
    }
    // Rows i and j both take the union pattern, plus full fill of the 2x2 pivot.
    let mut union = 0;
    for l in 0..n {
        if l == i || l == j {
            continue;
        }
        if nz(a[(i, l)]) || nz(a[(j, l)]) {
            union += 1;
        }
    }
    union + 2 <= s
}

/// In-place `A <- G A G^T` for the Givens rotation `G` acting on plane (i, j).
fn apply_symmetric_givens(a: &mut DMatrix<f64>, i: usize, j: usize, theta: f64) {
    let (c, s) = (theta.cos(), theta.sin());
    let n = a.nrows();
    for l in 0..n {
        let (ai, aj) = (a[(i, l)], a[(j, l)]);
        a[(i, l)] = c * ai - s * aj;
        a[(j, l)] = s * ai + c * aj;
    }
    for k in 0..n {
        let (ai, aj) = (a[(k, i)], a[(k, j)]);
        a[(k, i)] = c * ai - s * aj;
        a[(k, j)] = s * ai + c * aj;
    }
    // Rotations preserve symmetry exactly in exact arithmetic; resymmetrize to
    // keep float drift out of the coordinate list.
    for k in 0..n {
        for l in 0..k {
            let v = 0.5 * (a[(k, l)] + a[(l, k)]);
            a[(k, l)] = v;
            a[(l, k)] = v;
        }
    }
}

fn random_unit_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

pub mod io {
    //! MatrixMarket coordinate I/O (symmetric real) and plain-text vectors.

    use std::io::{BufRead, BufReader, Write};
    use std::path::Path;

    use nalgebra::DVector;

    use super::{MatrixError, SparseHermitianMatrix};

    const HEADER: &str = "%%MatrixMarket matrix coordinate real symmetric";

    /// Read a symmetric real coordinate MatrixMarket file. The lower (or
    /// upper) triangle in the file is mirrored to the full symmetric entry
    /// set expected by [`SparseHermitianMatrix::from_coordinates`].
    pub fn read_matrix_market(path: &Path) -> Result<SparseHermitianMatrix, MatrixError> {
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut lines = reader.lines().enumerate();

        let (idx, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
        let line_no = idx + 1;
        let header = first?;
        let header_fields: Vec<&str> = header.split_whitespace().collect();
        let expected: Vec<&str> = HEADER.split_whitespace().collect();
        if header_fields != expected {
            return Err(parse_err(
                line_no,
                "header must be exactly the symmetric real coordinate form",
            ));
        }

        let mut dims: Option<(usize, usize)> = None;
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            match dims {
                None => {
                    if fields.len() != 3 {
                        return Err(parse_err(line_no, "size line must be `rows cols nnz`"));
                    }
                    let rows: usize = parse_field(fields[0], line_no, "rows")?;
                    let cols: usize = parse_field(fields[1], line_no, "cols")?;
                    if rows != cols {
                        return Err(parse_err(line_no, "matrix must be square"));
                    }
                    dims = Some((rows, parse_field(fields[2], line_no, "nnz")?));
                }
                Some((dim, _)) => {
                    if fields.len() != 3 {
                        return Err(parse_err(line_no, "entry line must be `i j value`"));
                    }
                    let i: usize = parse_field(fields[0], line_no, "i")?;
                    let j: usize = parse_field(fields[1], line_no, "j")?;
                    let v: f64 = parse_field(fields[2], line_no, "value")?;
                    if i < 1 || j < 1 || i > dim || j > dim {
                        return Err(parse_err(line_no, "index out of range"));
                    }
                    entries.push((i - 1, j - 1, v));
                    if i != j {
                        entries.push((j - 1, i - 1, v));
                    }
                }
            }
        }
        let (dim, nnz) = dims.ok_or_else(|| parse_err(0, "missing size line"))?;
        let stored = entries.iter().filter(|(i, j, _)| i <= j).count();
        if stored != nnz {
            return Err(parse_err(
                0,
                format!("expected {nnz} entries, found {stored}"),
            ));
        }
        SparseHermitianMatrix::from_coordinates(dim, &entries)
    }

    /// Write the lower triangle in MatrixMarket symmetric coordinate format.
    pub fn write_matrix_market(
        matrix: &SparseHermitianMatrix,
        path: &Path,
    ) -> Result<(), MatrixError> {
        let mut lower: Vec<(usize, usize, f64)> = matrix
            .coordinate_entries()
            .into_iter()
            .filter(|&(i, j, _)| j <= i)
            .collect();
        lower.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut out = std::fs::File::create(path)?;
        writeln!(out, "{HEADER}")?;
        writeln!(out, "{} {} {}", matrix.dim(), matrix.dim(), lower.len())?;
        for (i, j, v) in lower {
            writeln!(out, "{} {} {}", i + 1, j + 1, v)?;
        }
        Ok(())
    }

    /// Read a vector stored one value per line (blank lines and `%` comments
    /// ignored).
    pub fn read_vector(path: &Path) -> Result<DVector<f64>, MatrixError> {
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut values = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            values.push(parse_field::<f64>(trimmed, idx + 1, "value")?);
        }
        if values.is_empty() {
            return Err(parse_err(0, "vector file holds no values"));
        }
        Ok(DVector::from_vec(values))
    }

    /// Write a vector one value per line.
    pub fn write_vector(v: &DVector<f64>, path: &Path) -> Result<(), MatrixError> {
        let mut out = std::fs::File::create(path)?;
        for x in v.iter() {
            writeln!(out, "{x}")?;
        }
        Ok(())
    }

    fn parse_field<T: std::str::FromStr>(
        field: &str,
        line: usize,
        what: &str,
    ) -> Result<T, MatrixError> {
        field
            .parse::<T>()
            .map_err(|_| parse_err(line, format!("cannot parse {what} from `{field}`")))
    }

    fn parse_err(line: usize, message: impl Into<String>) -> MatrixError {
        MatrixError::Parse {
            line,
            message: message.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn half_identity(n: usize) -> SparseHermitianMatrix {
        let entries: Vec<_> = (0..n).map(|i| (i, i, 0.5)).collect();
        SparseHermitianMatrix::from_coordinates(n, &entries).unwrap()
    }

    #[test]
    fn diagonal_construction() {
        let m = half_identity(2);
        assert_eq!(m.sparsity(), 1);
        assert_abs_diff_eq!(m.spectral_bound(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn missing_symmetric_partner_rejected() {
        let err = SparseHermitianMatrix::from_coordinates(2, &[(0, 1, 0.3)]).unwrap_err();
        assert!(matches!(
            err,
            MatrixError::NonHermitianInput { row: 0, col: 1, .. }
        ));
    }

    #[test]
    fn asymmetric_value_rejected() {
        let err =
            SparseHermitianMatrix::from_coordinates(2, &[(0, 1, 0.3), (1, 0, 0.2)]).unwrap_err();
        assert!(matches!(err, MatrixError::NonHermitianInput { .. }));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let err = SparseHermitianMatrix::from_coordinates(2, &[(0, 5, 0.3)]).unwrap_err();
        assert!(matches!(err, MatrixError::IndexOutOfRange { .. }));
    }

    #[test]
    fn norm_above_one_rejected_without_rescale() {
        let err =
            SparseHermitianMatrix::from_coordinates(2, &[(0, 0, 2.0), (1, 1, 2.0)]).unwrap_err();
        assert!(matches!(err, MatrixError::NormExceedsOne { .. }));
    }

    #[test]
    fn auto_rescale_then_target_gives_composed_scale() {
        // 2*I entered with rescaling enabled, then rescaled to bound 0.5:
        // total applied scale is 0.25.
        let (m, s1) =
            SparseHermitianMatrix::from_coordinates_auto_rescaled(2, &[(0, 0, 2.0), (1, 1, 2.0)])
                .unwrap();
        assert_abs_diff_eq!(s1, 0.5, epsilon = 1e-12);
        let (m2, s2) = m.rescale_to_bound(0.5).unwrap();
        assert_abs_diff_eq!(s1 * s2, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(m2.to_dense()[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rescale_fixed_point() {
        let (m, _) = random_test_system(4, 2, 2.0, 1).unwrap();
        let bound = m.spectral_bound();
        let (same, scale) = m.rescale_to_bound(bound).unwrap();
        assert_eq!(scale, 1.0);
        assert_eq!(same.to_dense(), m.to_dense());
    }

    #[test]
    fn rescale_certified_by_eigensolver() {
        let (m, _) = random_test_system(8, 3, 5.0, 7).unwrap();
        let (scaled, _) = m.rescale_to_bound(0.7).unwrap();
        let max_eig = operator_norm_symmetric(&scaled.to_dense());
        assert_abs_diff_eq!(max_eig, 0.7, epsilon = 1e-10);
    }

    #[test]
    fn spectral_bound_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // Random symmetric 2-sparse pattern: diagonal plus one coupled pair.
        let entries = vec![
            (0, 0, rng.random_range(-0.4..0.4)),
            (1, 1, rng.random_range(-0.4..0.4)),
            (2, 2, rng.random_range(-0.4..0.4)),
            (3, 3, rng.random_range(-0.4..0.4)),
            (2, 3, 0.3),
            (3, 2, 0.3),
        ];
        let m = SparseHermitianMatrix::from_coordinates(4, &entries).unwrap();
        assert_eq!(m.sparsity(), 2);
        let dense_norm = operator_norm_symmetric(&m.to_dense());
        assert_abs_diff_eq!(m.spectral_bound(), dense_norm, epsilon = 1e-10);
    }

    #[test]
    fn oracle_query_diagonal_and_padding() {
        let m = half_identity(2);
        assert_eq!(m.oracle_query(1, 0).unwrap(), (1, 0.5));
        // Row with a single nonzero queried past its end: padding sentinel.
        let entries = vec![(0, 0, 0.5), (1, 2, 0.3), (2, 1, 0.3)];
        let m = SparseHermitianMatrix::from_coordinates(3, &entries).unwrap();
        assert_eq!(m.sparsity(), 1);
        assert!(m.oracle_query(0, 1).is_err()); // slot >= sparsity
        let entries = vec![(0, 0, 0.5), (0, 1, 0.2), (1, 0, 0.2), (2, 2, 0.1)];
        let m = SparseHermitianMatrix::from_coordinates(3, &entries).unwrap();
        assert_eq!(m.oracle_query(2, 1).unwrap(), (2, 0.0));
    }

    #[test]
    fn oracle_round_trip_rebuilds_matrix() {
        let (m, _) = random_test_system(8, 2, 4.0, 3).unwrap();
        let mut rebuilt = Vec::new();
        for row in 0..m.dim() {
            for slot in 0..m.sparsity() {
                let (col, v) = m.oracle_query(row, slot).unwrap();
                if v != 0.0 {
                    rebuilt.push((row, col, v));
                }
            }
        }
        let m2 = SparseHermitianMatrix::from_coordinates(m.dim(), &rebuilt).unwrap();
        assert_eq!(m.to_dense(), m2.to_dense());
    }

    #[test]
    fn hermitian_embed_scalar() {
        let m = DMatrix::from_element(1, 1, 0.5);
        let e = hermitian_embed(&m).unwrap();
        let dense = e.to_dense();
        assert_eq!(dense, DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
    }

    #[test]
    fn hermitian_embed_spectrum_is_plus_minus_sigma() {
        let m = DMatrix::from_diagonal_element(2, 2, 0.5);
        let e = hermitian_embed(&m).unwrap();
        let mut eigs: Vec<f64> = e
            .to_dense()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in eigs.iter().zip([-0.5, -0.5, 0.5, 0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn hermitian_embed_solves_nonsymmetric_system() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.1, 0.0]);
        let e = hermitian_embed(&m).unwrap();
        let b = DVector::from_vec(vec![0.2, -0.1]);
        // Solve the embedded system with rhs (b; 0); lower block must be M^{-1} b.
        let mut rhs = DVector::zeros(4);
        rhs.rows_mut(0, 2).copy_from(&b);
        // A' (0; x) = (b; 0), so the solve of A' y = (b; 0) puts x = M^{-1} b
        // in the lower block and zeros in the upper block.
        let solved = e.to_dense().lu().solve(&rhs).unwrap();
        let x_direct = m.clone().lu().solve(&b).unwrap();
        assert!(solved.rows(0, 2).norm() < 1e-10);
        assert_abs_diff_eq!((solved.rows(2, 2) - &x_direct).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn embed_norm_equals_sigma_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [4usize, 32] {
            let scale = 0.8 / n as f64;
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale));
            let e = hermitian_embed(&m).unwrap();
            let sigma_max = m.clone().singular_values().max();
            assert_abs_diff_eq!(e.spectral_bound(), sigma_max, epsilon = 1e-10);
        }
    }

    #[test]
    fn generator_diagonal_case() {
        let (m, b) = random_test_system(2, 1, 2.0, 9).unwrap();
        assert_eq!(m.sparsity(), 1);
        let eigs = m.to_dense().symmetric_eigen().eigenvalues;
        for l in eigs.iter() {
            assert!(
                l.abs() >= 0.5 - 1e-9 && l.abs() < 1.0,
                "eigenvalue {l} out of range"
            );
        }
        assert_abs_diff_eq!(b.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn generator_is_deterministic() {
        let (m1, b1) = random_test_system(16, 3, 10.0, 123).unwrap();
        let (m2, b2) = random_test_system(16, 3, 10.0, 123).unwrap();
        assert_eq!(m1.to_dense(), m2.to_dense());
        assert_eq!(b1, b2);
    }

    #[test]
    fn generator_respects_kappa_and_sparsity() {
        let (m, _) = random_test_system(16, 3, 10.0, 42).unwrap();
        assert!(m.sparsity() <= 3);
        let eigs = m.to_dense().symmetric_eigen().eigenvalues;
        for l in eigs.iter() {
            assert!(l.abs() >= 0.1 - 1e-9, "eigenvalue {l} below 1/kappa");
            assert!(l.abs() < 1.0);
        }
    }

    #[test]
    fn generator_reaches_off_diagonal_sparsity() {
        let (m, _) = random_test_system(16, 4, 5.0, 4).unwrap();
        assert!(
            m.sparsity() >= 2,
            "rotations should create off-diagonal structure"
        );
    }

    #[test]
    fn matrix_market_round_trip() {
        let dir = std::env::temp_dir().join("beqal_mm_round_trip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("a.mtx");
        let (m, b) = random_test_system(8, 2, 4.0, 17).unwrap();
        io::write_matrix_market(&m, &path).unwrap();
        let back = io::read_matrix_market(&path).unwrap();
        assert_eq!(m.to_dense(), back.to_dense());

        let vpath = dir.join("b.txt");
        io::write_vector(&b, &vpath).unwrap();
        let b_back = io::read_vector(&vpath).unwrap();
        assert_eq!(b, b_back);
    }

    #[test]
    fn matrix_market_rejects_malformed_input() {
        let dir = std::env::temp_dir().join("beqal_mm_malformed");
        std::fs::create_dir_all(&dir).unwrap();
        let case = |name: &str, content: &str| {
            let path = dir.join(name);
            std::fs::write(&path, content).unwrap();
            io::read_matrix_market(&path)
        };
        // Wrong header kind.
        let err = case(
            "h.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 0.5\n",
        );
        assert!(matches!(err, Err(MatrixError::Parse { .. })), "{err:?}");
        // Declared nnz disagrees with the entry count.
        let err = case(
            "n.mtx",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 0.5\n",
        );
        assert!(matches!(err, Err(MatrixError::Parse { .. })), "{err:?}");
        // One-based index out of range.
        let err = case(
            "i.mtx",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 0.5\n",
        );
        assert!(matches!(err, Err(MatrixError::Parse { .. })), "{err:?}");
        // Unparseable value.
        let err = case(
            "v.mtx",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 abc\n",
        );
        assert!(matches!(err, Err(MatrixError::Parse { .. })), "{err:?}");
        // Vector file with no values.
        let vpath = dir.join("empty.txt");
        std::fs::write(&vpath, "% only a comment\n").unwrap();
        assert!(matches!(
            io::read_vector(&vpath),
            Err(MatrixError::Parse { .. })
        ));
    }
}
