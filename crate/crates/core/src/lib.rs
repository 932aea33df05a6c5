//! Proper complex-valued Gaussian-process regression.
//!
//! * [`linalg`]: Hermitian Cholesky factorization, solves and incremental growth.
//! * [`kernels`]: complex covariance functions and their hyperparameter derivatives.
//! * [`gpr`]: posterior predictive, marginal likelihood and proper sampling.
//! * [`hyperlearn`]: marginal-likelihood maximization with the Wirtinger gradient.
//! * [`mol`]: the equivalent stacked-real multiple-output formulation.
//! * [`kaf`]: complex kernel LMS baselines with novelty-criterion sparsification.
//! * [`experiments`]: the sampled-GP experiment and the channel-equalization benchmark.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod gpr;
pub mod hyperlearn;
pub mod kaf;
pub mod kernels;
pub mod linalg;
pub mod mol;

pub use error::{Error, Result};
pub use gpr::{ComplexDataset, GprModel, PosteriorPredictive, SequentialGpr};
pub use kernels::{HyperId, Kernel, KernelKind, KernelParams};
pub use linalg::{ComplexMatrix, HermitianFactor, C64};
