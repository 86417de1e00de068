//! Desk-scale classical simulator of a gradient-descent linear-system solver
//! built on block-encoding arithmetic.
//!
//! The crate is organized around five subsystems:
//!
//! - [`matrix_core`] — sparse Hermitian matrices with oracle-style row access,
//!   spectral certification, Hermitian embedding, and seeded test-problem
//!   generation (plus MatrixMarket I/O).
//! - [`block_encoding`] — a closed algebra over (block, subnormalization,
//!   error bound, ancilla count) records: products, sums, scaling,
//!   amplification, tensor products, and unitary dilation for statevector
//!   post-selection.
//! - [`estimation`] — simulated Hadamard/SWAP-test overlap estimation, signed
//!   inner-product recovery, and cost-function evaluation, in exact and
//!   shot-sampled modes.
//! - [`gd_solver`] — the iterated four-step gradient-descent update on the
//!   density-operator representation, with accumulated-factor, error, and
//!   cost ledgers, hyperparameter selection, and final-state extraction.
//! - [`classical_oracle`] — independent dense-linear-algebra references used
//!   as ground truth by every check in the test batteries.

pub mod block_encoding;
pub mod classical_oracle;
pub mod estimation;
pub mod gd_solver;
pub mod matrix_core;
pub mod seeding;

pub use block_encoding::{ApplyOutcome, BlockEncoding, BlockEncodingError, DilatedUnitary, Sign};
pub use classical_oracle::ConvexityConstants;
pub use estimation::{EstimationConfig, EstimationError, EstimationMode, SignedScalarEstimate};
pub use gd_solver::{
    CostPrediction, EtaMode, InitialIterate, IterateLedger, RunFailure, SolveReport, SolverConfig,
    SolverError, TraceRow,
};
pub use matrix_core::{MatrixError, SparseHermitianMatrix, SpectralProfile};
