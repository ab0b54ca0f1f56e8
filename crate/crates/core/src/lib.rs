//! Low-tubal-rank tensor recovery.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`], [`fourier`], [`algebra`], [`tsvd`]: third-order tensors, the
//!   mode-3 DFT, the t-product and the t-SVD with its ranks and norms.
//! * [`measurement`]: Gaussian measurement maps, noise and the SNR metric.
//! * [`solver`]: ADMM for `min ||X||_* + 1/(2 lambda) ||y - M vec(X)||^2`.
//! * [`analysis`]: t-RIC thresholds, error-bound constants, empirical
//!   restricted isometry estimates and bound verification.
//! * [`experiment`]: seeded synthetic sweeps and their CSV/JSON output.
//! * [`io`]: binary container format for tensors, vectors and maps.

pub mod algebra;
pub mod analysis;
pub mod error;
pub mod experiment;
pub mod fourier;
pub mod io;
pub mod measurement;
pub mod rng;
pub mod solver;
pub mod tensor;
pub mod tsvd;

pub use algebra::{bcirc, conj_transpose, fold, identity_tensor, is_fdiagonal, is_orthogonal, tprod, unfold};
pub use error::{Result, TubalError};
pub use fourier::{dft_mode3, idft_mode3, FourierTensor3};
pub use tensor::{fro_norm, DenseTensor3, Dims};
pub use tsvd::{
    average_rank, restrict, tnn, truncate, tsvd, tubal_rank, AverageRank, IndexSet, TsvdFactors,
    DEFAULT_RANK_TOL,
};
pub use analysis::{
    corollary_constants, estimate_ric, eta_constants, ric_threshold, theorem1_constants, verify_bounds,
    BoundReport, RipEstimate,
};
pub use experiment::{generate_lowrank, run_experiment, ExperimentResult, ExperimentSpec};
pub use measurement::{add_noise, gaussian_map, snr_db, GaussianLinearMap, VarianceMode};
pub use solver::{admm_solve, prox_optimality_check, tsvt, z_update, SolveResult, SolverConfig};
