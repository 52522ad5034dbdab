//! ADMM solvers for the TV-IC model and two single-noise baselines.
//!
//! * [`bca_solve`]: bilinear-constraint ADMM with an inner Chambolle TV-L2 solve
//!   for the `u` step.
//! * [`bcaf_solve`]: the fully split variant with the extra constraint
//!   `p = grad u`; every step is closed-form or a screened Poisson solve.
//! * [`tv_l2_solve`], [`tv_kl_solve`]: TV with Gaussian (L2) or Poisson (KL)
//!   fidelity.
//!
//! Every solver records one [`TraceRecord`] per outer iteration and stops when
//! the successive error `||u_{k+1} - u_k|| / ||u_k||` drops to `xi` or after
//! `max_iters` iterations.

mod baselines;
mod bca;
mod bcaf;
pub mod closed_form;

use std::fmt;
use std::str::FromStr;

pub use baselines::{tv_kl_objective, tv_kl_solve, tv_l2_solve};
pub use bca::{
    bca_lagrangian, bca_multiplier_step, bca_solve, bca_u_step, bca_v_step, bca_w_step,
};
pub use bcaf::{bcaf_lagrangian, bcaf_multiplier_step, bcaf_p_step, bcaf_solve, bcaf_u_step};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, VectorField};
use crate::linsolve::CgConfig;
use crate::metrics::ModelWeights;
use crate::tv_inner::ChambolleConfig;

/// Parameters shared by all solvers. BCA uses `alpha`; BCA_f uses `alpha_w`
/// and `alpha_p`; TV+KL uses `alpha` as its penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub alpha_w: f64,
    pub alpha_p: f64,
    pub epsilon: f64,
    pub xi: f64,
    pub max_iters: usize,
    pub chambolle: ChambolleConfig,
    pub cg: CgConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda1: 3.5,
            lambda2: 2.5,
            alpha: 63.0,
            alpha_w: 63.0,
            alpha_p: 5.0,
            epsilon: 1e-6,
            xi: 5e-4,
            max_iters: 1000,
            chambolle: ChambolleConfig::default(),
            cg: CgConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("alpha", self.alpha),
            ("alpha_w", self.alpha_w),
            ("alpha_p", self.alpha_p),
            ("epsilon", self.epsilon),
            ("xi", self.xi),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if self.epsilon >= 1.0 {
            return Err(Error::InvalidConfig(format!("epsilon must be below 1, got {}", self.epsilon)));
        }
        if self.xi >= 1.0 {
            return Err(Error::InvalidConfig(format!("xi must lie in (0, 1), got {}", self.xi)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        self.chambolle.validate()?;
        self.cg.validate()
    }

    pub fn model(&self) -> ModelWeights {
        ModelWeights {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            epsilon: self.epsilon,
        }
    }
}

/// Iterates and multipliers of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: ImageGrid,
    pub v: ImageGrid,
    pub w: ImageGrid,
    /// Multiplier of the bilinear constraint `v w = u`.
    pub lambda_mult: ImageGrid,
    /// Splitting variable `p ~ grad u` (BCA_f only).
    pub p: Option<VectorField>,
    /// Multiplier of `p = grad u` (BCA_f only).
    pub lambda_p: Option<VectorField>,
    /// Warm-start dual field of the inner TV-L2 solve (BCA only).
    pub chambolle_dual: Option<VectorField>,
    /// Completed outer iterations.
    pub iter: usize,
}

impl SolverState {
    /// `u = v = f`, `w = 1`, multiplier 0.
    pub fn init_bca(f: &ImageGrid) -> Self {
        Self {
            u: f.clone(),
            v: f.clone(),
            w: ImageGrid::ones(f.width(), f.height()),
            lambda_mult: f.zeros_like(),
            p: None,
            lambda_p: None,
            chambolle_dual: None,
            iter: 0,
        }
    }

    /// BCA initialization plus `p = 0`, `lambda_p = 0`.
    pub fn init_bcaf(f: &ImageGrid) -> Self {
        Self {
            p: Some(VectorField::zeros_like(f)),
            lambda_p: Some(VectorField::zeros_like(f)),
            ..Self::init_bca(f)
        }
    }

    /// `max_i |lambda_i w_i - lambda2|`.
    pub fn identity_residual(&self, lambda2: f64) -> f64 {
        self.lambda_mult
            .data()
            .iter()
            .zip(self.w.data())
            .fold(0.0, |m, (l, w)| m.max((l * w - lambda2).abs()))
    }

    /// `||v w - u|| / ||u||`.
    pub fn constraint_residual(&self) -> f64 {
        let r: f64 = self
            .v
            .data()
            .iter()
            .zip(self.w.data())
            .zip(self.u.data())
            .map(|((v, w), u)| (v * w - u).powi(2))
            .sum();
        relative(r.sqrt(), self.u.norm())
    }
}

/// One row of per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    /// Successive error `||u_k - u_{k-1}|| / ||u_{k-1}||`.
    pub se: f64,
    /// Model objective at the current iterate (TV-IC for BCA/BCA_f, the
    /// baseline's own energy otherwise).
    pub objective: f64,
    /// Augmented Lagrangian (BCA/BCA_f only).
    pub lagrangian: Option<f64>,
    /// `min_i w_i` (BCA/BCA_f only).
    pub min_w: Option<f64>,
    /// `max_i |lambda_i w_i - lambda2|` (BCA/BCA_f only).
    pub identity_residual: Option<f64>,
    pub constraint_residual: f64,
    pub snr: Option<f64>,
    pub elapsed_seconds: f64,
}

/// Output of a solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub image: ImageGrid,
    pub trace: Vec<TraceRecord>,
    /// True when the successive-error test stopped the iteration.
    pub converged: bool,
    /// Advisory diagnostics (e.g. penalty below the sufficient-decrease bound).
    pub warnings: Vec<String>,
    /// Final iterates for BCA/BCA_f.
    pub state: Option<SolverState>,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn final_se(&self) -> Option<f64> {
        self.trace.last().map(|r| r.se)
    }

    /// Smallest `min_w` over all recorded iterations.
    pub fn observed_min_w(&self) -> Option<f64> {
        self.trace
            .iter()
            .filter_map(|r| r.min_w)
            .reduce(f64::min)
    }
}

/// Penalty bound under which the BCA augmented Lagrangian is guaranteed to
/// decrease: `max( sqrt(2) l2 / (c^2 eps), l2 (1/c - 1)^2 )`, where `c` is a
/// lower bound on every `w` iterate.
pub fn sufficient_decrease_alpha(lambda2: f64, epsilon: f64, c: f64) -> f64 {
    let a = std::f64::consts::SQRT_2 * lambda2 / (c * c * epsilon);
    let b = lambda2 * (1.0 / c - 1.0).powi(2);
    a.max(b)
}

/// Iterations (1-based, after the first) at which the Lagrangian increased by
/// more than `rel_tol * |previous|`.
pub fn lagrangian_increases(trace: &[TraceRecord], rel_tol: f64) -> Vec<usize> {
    trace
        .windows(2)
        .filter_map(|pair| match (pair[0].lagrangian, pair[1].lagrangian) {
            (Some(prev), Some(next)) if next > prev + rel_tol * prev.abs() => Some(pair[1].iter),
            _ => None,
        })
        .collect()
}

/// Algorithms selectable at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Bca,
    Bcaf,
    TvL2,
    TvKl,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [Self::Bca, Self::Bcaf, Self::TvL2, Self::TvKl];

    /// Runs the solver. `baseline_lambda` is the fidelity weight of TV+L2 and
    /// TV+KL; it defaults to `lambda1` and `lambda2` respectively and is
    /// ignored by BCA and BCA_f.
    pub fn solve(
        self,
        f: &ImageGrid,
        cfg: &SolverConfig,
        baseline_lambda: Option<f64>,
        truth: Option<&ImageGrid>,
    ) -> Result<Solution> {
        match self {
            Self::Bca => bca_solve(f, cfg, truth),
            Self::Bcaf => bcaf_solve(f, cfg, truth),
            Self::TvL2 => tv_l2_solve(f, baseline_lambda.unwrap_or(cfg.lambda1), cfg, truth),
            Self::TvKl => tv_kl_solve(f, baseline_lambda.unwrap_or(cfg.lambda2), cfg, truth),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bca => "bca",
            Self::Bcaf => "bcaf",
            Self::TvL2 => "tvl2",
            Self::TvKl => "tvkl",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bca" => Ok(Self::Bca),
            "bcaf" | "bca_f" => Ok(Self::Bcaf),
            "tvl2" | "tv+l2" => Ok(Self::TvL2),
            "tvkl" | "tv+kl" => Ok(Self::TvKl),
            other => Err(Error::InvalidConfig(format!(
                "unknown solver `{other}` (expected bca, bcaf, tvl2 or tvkl)"
            ))),
        }
    }
}

pub(crate) fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// `||a - b|| / ||b||`.
pub(crate) fn successive_error(next: &ImageGrid, prev: &ImageGrid) -> f64 {
    let diff: f64 = next
        .data()
        .iter()
        .zip(prev.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    relative(diff.sqrt(), prev.norm())
}

pub(crate) fn snr_of(u: &ImageGrid, truth: Option<&ImageGrid>) -> Result<Option<f64>> {
    match truth {
        Some(t) => match crate::metrics::snr(u, t) {
            Ok(v) => Ok(Some(v)),
            Err(Error::Metric(_)) => Ok(Some(f64::NEG_INFINITY)),
            Err(e) => Err(e),
        },
        None => Ok(None),
    }
}

pub(crate) fn with_iteration<T>(iteration: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Solver {
        iteration,
        source: Box::new(e),
    })
}
