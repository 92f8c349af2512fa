//! Total-variation image restoration with ADMM and primal-dual splitting
//! (PDS), including variants that simulate the additive noise of optical
//! amplifiers in an analog optical implementation of the iterations.
//!
//! The crate is organised by layer:
//!
//! * [`optics`]: beam-splitter arithmetic and the ASE amplifier noise model.
//! * [`operators`]: the circulant difference operator `D`, TV, and the
//!   prefactorized ADMM linear solve.
//! * [`prox`]: group soft-thresholding, the conjugate prox identity and a
//!   brute-force prox used in tests.
//! * [`solvers`]: ADMM and PDS, with and without circuit noise.
//! * [`imaging`]: image I/O, degradation and the patch pipeline.
//! * [`metrics`]: PSNR, SSIM and per-patch reports.

pub mod error;
pub mod imaging;
pub mod metrics;
pub mod operators;
pub mod optics;
pub mod prox;
pub mod solvers;

pub use error::{Error, Result};
pub use imaging::{
    degrade, depatchify, derive_seed, load_image, patchify, restore_image, save_image, ImageTensor, PatchSet,
    Restoration,
};
pub use metrics::{aggregate_report, psnr, ssim, Psnr, RestorationReport, SsimMode, SsimParams};
pub use operators::{build_admm_solver, AdmmLinearSolver, DenseMatrix, DifferenceOperator, GridShape, Observation};
pub use optics::{beam_splitter_combine, gain_for_scalar_multiply, signal_splitter, AmplifierNoiseModel, ComplexAmplitude};
pub use prox::{prox_conjugate, prox_group_l12, prox_numeric_oracle, GroupedVector};
pub use solvers::{
    admm_tv, admm_tv_noisy, objective, pds_tv, pds_tv_noisy, solve, Algorithm, Method, SolverConfig, SolverOutput,
    SolverState, SolverTrace, TraceReference, TvProblem,
};
