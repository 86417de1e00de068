//! Independent dense-linear-algebra references.
//!
//! Everything here works on plain dense matrices and vectors, with no
//! dependence on the block-encoding pipeline, so these functions can serve as
//! ground truth for it. The objective throughout is
//! `f(x) = ||x||^2 / 2 + ||A x||^2 / 2 - <b, A x> + 1/2`,
//! whose gradient is `(I + A^T A) x - A^T b` and whose Hessian is the
//! constant `I + A^T A`.

use nalgebra::{DMatrix, DVector};

/// Strong-convexity and smoothness constants of the objective:
/// `mu = 1 + sigma_min(A)^2`, `L = 1 + sigma_max(A)^2`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConvexityConstants {
    pub mu: f64,
    pub l: f64,
}

pub fn convexity_constants(a: &DMatrix<f64>) -> ConvexityConstants {
    let sv = a.clone().singular_values();
    let sigma_max = sv.max();
    let sigma_min = sv.min();
    ConvexityConstants {
        mu: 1.0 + sigma_min * sigma_min,
        l: 1.0 + sigma_max * sigma_max,
    }
}

/// Objective value at `x`.
pub fn f_exact(x: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let ax = a * x;
    0.5 * x.norm_squared() + 0.5 * ax.norm_squared() - b.dot(&ax) + 0.5
}

/// Analytic gradient `(I + A^T A) x - A^T b`.
pub fn gradient_exact(x: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    x + a.transpose() * (a * x) - a.transpose() * b
}

/// Forward-difference gradient with step `h`, one coordinate at a time.
pub fn finite_diff_gradient(
    x: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let f0 = f_exact(x, a, b);
    let mut grad = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        grad[i] = (f_exact(&probe, a, b) - f0) / h;
        probe[i] = x[i];
    }
    grad
}

/// Central-difference variant for tightening gradient checks: O(h^2)
/// truncation instead of O(h).
pub fn central_diff_gradient(
    x: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let mut grad = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f_exact(&probe, a, b);
        probe[i] = x[i] - h;
        let fm = f_exact(&probe, a, b);
        probe[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Plain gradient descent `x_{t+1} = x_t - eta grad f(x_t)`. Returns the
/// whole iterate sequence, `x0` first (`iterations + 1` entries).
pub fn classical_gd(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    eta: f64,
    iterations: usize,
) -> Vec<DVector<f64>> {
    let mut iterates = Vec::with_capacity(iterations + 1);
    iterates.push(x0.clone());
    let mut x = x0.clone();
    for _ in 0..iterations {
        x = &x - gradient_exact(&x, a, b) * eta;
        iterates.push(x.clone());
    }
    iterates
}

/// Stationary point of the objective: the dense solve of
/// `(I + A^T A) x = A^T b`.
pub fn minimizer_exact(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let hessian = DMatrix::identity(n, n) + a.transpose() * a;
    let rhs = a.transpose() * b;
    hessian
        .lu()
        .solve(&rhs)
        .expect("I + A^T A is positive definite")
}

/// Dense solve of `A x = b`. `None` when `A` is singular to working
/// precision.
pub fn direct_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}
