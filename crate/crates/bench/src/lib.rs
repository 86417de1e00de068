//! Shared fixtures for the criterion benches.

use beqal_core::matrix_core::{random_test_system, SparseHermitianMatrix};
use nalgebra::DVector;

/// A mid-size benchmark system, fixed seed.
pub fn bench_system(n: usize, s: usize) -> (SparseHermitianMatrix, DVector<f64>) {
    random_test_system(n, s, 10.0, 0xBE9A).expect("bench system generates")
}
