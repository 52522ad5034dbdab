//! Mixed Poisson-Gaussian image denoising with the TV-regularized
//! infimal-convolution model
//!
//! ```text
//! min_{u, v} (l1/2) sum (f - v)^2 + l2 sum (u - v ln(u/v) - v) + TV(u),  v >= eps
//! ```
//!
//! solved by ADMM on the bilinear reformulation `u = v w` ([`solvers::bca_solve`])
//! or its fully split variant ([`solvers::bcaf_solve`]), plus the supporting
//! machinery: finite-difference operators, a Chambolle TV-L2 solver, a
//! screened-Poisson conjugate gradient, noise synthesis and quality metrics.

pub mod error;
pub mod grid;
pub mod linsolve;
pub mod metrics;
pub mod noise;
pub mod solvers;
pub mod tv_inner;

pub use error::{Error, Result};
pub use grid::{divergence, gradient, laplacian, ImageGrid, VectorField};
pub use linsolve::{solve_screened_poisson, CgConfig, CgSolution};
pub use metrics::{objective_h, snr, ssim, ModelWeights, SsimConfig};
pub use noise::{corrupt, make_phantom, NoiseSpec, PhantomKind};
pub use solvers::{
    bca_solve, bcaf_solve, tv_kl_solve, tv_l2_solve, Solution, SolverConfig, SolverKind, SolverState, TraceRecord,
};
pub use tv_inner::{soft_threshold, tv_l2_denoise, ChambolleConfig};
