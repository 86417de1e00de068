//! Property tests for the block-encoding algebra and the sparse-matrix
//! oracle: every composite must agree with plain dense arithmetic, dilations
//! must be orthogonal completions, and post-selection must see only the
//! block.

use beqal_core::block_encoding as be;
use beqal_core::block_encoding::{BlockEncoding, Sign};
use beqal_core::matrix_core::{self, SparseHermitianMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}

/// Strategy: an n x n contraction with operator norm at most `cap`.
fn contraction(n: usize, cap: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |data| {
        let raw = DMatrix::from_vec(n, n, data);
        let norm = be::operator_norm(&raw);
        if norm > 0.0 {
            raw * (cap / norm)
        } else {
            raw
        }
    })
}

fn encode(m: DMatrix<f64>) -> BlockEncoding {
    be::encode_dense_contraction(m).expect("strategy yields contractions")
}

fn unit_vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0..1.0f64, n).prop_filter_map("non-degenerate direction", |data| {
        let v = DVector::from_vec(data);
        let norm = v.norm();
        (norm > 1e-3).then(|| v / norm)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Composites built from the calculus equal the same dense arithmetic.
    #[test]
    fn algebra_homomorphism(
        m1 in contraction(4, 0.9),
        m2 in contraction(4, 0.8),
        m3 in contraction(4, 0.7),
        p in 1.1..8.0f64,
    ) {
        let b1 = encode(m1.clone());
        let b2 = encode(m2.clone());
        let b3 = encode(m3.clone());

        // (m1 m2^T / p + m3 / p) / 2, then amplified back up by p.
        let prod = be::product(&b1, &be::transpose(&b2)).unwrap();
        let prod = be::scale_down(&prod, p).unwrap();
        let third = be::scale_down(&b3, p).unwrap();
        let sum = be::linear_combination(
            &[(&prod, 1.0), (&third, 1.0)],
            &[Sign::Plus, Sign::Plus],
        )
        .unwrap();
        let dense_sum = (&m1 * m2.transpose() / p + &m3 / p) / 2.0;
        prop_assert!(max_abs(&(sum.extract_block() - &dense_sum)) <= 1e-9);

        // Amplification is only valid while gamma * sigma <= 1 - delta.
        let gamma = (p / 2.0).max(1.5);
        let sigma = be::operator_norm(sum.extract_block());
        if gamma * sigma <= 0.7 {
            let amped = be::amplify(&sum, gamma, 0.25, 0.0).unwrap();
            prop_assert!(
                max_abs(&(amped.extract_block() - dense_sum * gamma)) <= 1e-9
            );
        }

        // Tensor against the dense Kronecker product.
        let t = be::tensor(&[&b1, &b2]).unwrap();
        prop_assert!(max_abs(&(t.extract_block() - m1.kronecker(&m2))) <= 1e-9);
    }

    /// Dilation is orthogonal and reproduces the block in its corner.
    #[test]
    fn dilation_soundness(m in contraction(5, 1.0)) {
        let b = encode(m);
        let d = be::dilate(&b).unwrap();
        let n = 2 * b.dim();
        let gram = d.matrix().transpose() * d.matrix();
        prop_assert!(max_abs(&(gram - DMatrix::identity(n, n))) <= 1e-10);
        let corner = d.matrix().view((0, 0), (b.dim(), b.dim())).clone_owned();
        prop_assert!(max_abs(&(corner - b.extract_block())) <= 1e-12);
    }

    /// Post-selection sees exactly the block: the garbage half never leaks.
    #[test]
    fn post_selection_law(m in contraction(4, 0.95), psi in unit_vector(4)) {
        let b = encode(m.clone());
        let outcome = be::apply(&b, &psi).unwrap();
        let direct = (&m * &psi).norm_squared();
        prop_assert!((outcome.success_prob - direct).abs() <= 1e-12);
    }

    /// Error bounds never shrink through composition (beyond explicit
    /// down-scaling, which divides target and error alike).
    #[test]
    fn error_monotonicity(
        m1 in contraction(3, 0.6),
        m2 in contraction(3, 0.6),
        e1 in 0.0..1e-2f64,
        e2 in 0.0..1e-2f64,
        p in 1.5..4.0f64,
    ) {
        let b1 = encode(m1).with_error_bound(e1);
        let b2 = encode(m2).with_error_bound(e2);
        let prod = be::product(&b1, &b2).unwrap();
        prop_assert!(prod.error_bound() >= e1.max(e2) - 1e-15);
        prop_assert!((prod.error_bound() - (e1 + e2)).abs() <= 1e-15);

        let sum = be::linear_combination(
            &[(&b1, 1.0), (&b2, 3.0)],
            &[Sign::Plus, Sign::Minus],
        )
        .unwrap();
        let expected = 0.25 * e1 + 0.75 * e2;
        prop_assert!((sum.error_bound() - expected).abs() <= 1e-15);

        let scaled = be::scale_down(&b1, p).unwrap();
        prop_assert!((scaled.error_bound() - e1 / p).abs() <= 1e-15);

        if be::operator_norm(b1.extract_block()) * 1.2 <= 0.74 {
            let amped = be::amplify(&b1, 1.2, 0.25, 1e-4).unwrap();
            prop_assert!(amped.error_bound() >= 1.2 * e1 + 1e-4 - 1e-15);
        }
    }
}

/// Strategy for a valid sparse symmetric matrix built from a random
/// generator call (spectrum and sparsity both certified by construction).
fn sparse_matrix() -> impl Strategy<Value = SparseHermitianMatrix> {
    (2usize..12, 1usize..4, any::<u64>()).prop_map(|(n, s, seed)| {
        let kappa = 2.0 + (seed % 20) as f64;
        matrix_core::random_test_system(n, s.min(n), kappa, seed)
            .expect("generator produces a system")
            .0
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Enumerating the oracle and rebuilding reproduces the matrix exactly.
    #[test]
    fn oracle_round_trip(m in sparse_matrix()) {
        let mut entries = Vec::new();
        for row in 0..m.dim() {
            for slot in 0..m.sparsity() {
                let (col, v) = m.oracle_query(row, slot).unwrap();
                if v != 0.0 {
                    entries.push((row, col, v));
                }
            }
        }
        let rebuilt = SparseHermitianMatrix::from_coordinates(m.dim(), &entries).unwrap();
        prop_assert_eq!(m.to_dense(), rebuilt.to_dense());
    }

    /// The Hermitian embedding is symmetric with operator norm sigma_max(M).
    #[test]
    fn embedding_norm_is_sigma_max(data in prop::collection::vec(-0.2..0.2f64, 16)) {
        let m = DMatrix::from_vec(4, 4, data);
        let embedded = matrix_core::hermitian_embed(&m).unwrap();
        let dense = embedded.to_dense();
        prop_assert_eq!(&dense, &dense.transpose());
        let sigma_max = m.singular_values().max();
        prop_assert!((embedded.spectral_bound() - sigma_max).abs() <= 1e-9);
    }

    /// Generated systems respect the declared condition number.
    #[test]
    fn generator_respects_kappa(seed in any::<u64>()) {
        let kappa = 8.0;
        let (m, b) = matrix_core::random_test_system(8, 2, kappa, seed).unwrap();
        let eigs = m.to_dense().symmetric_eigen().eigenvalues;
        for l in eigs.iter() {
            prop_assert!(l.abs() >= 1.0 / kappa - 1e-9);
            prop_assert!(l.abs() < 1.0);
        }
        prop_assert!((b.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(m.sparsity() <= 2);
    }
}
