//! Solver parameter overrides shared by command-line flags and bench spec
//! files. Resolution order is flags, then spec file, then built-in defaults.

use clap::Args;
use mpg_core::{SolverConfig, SolverKind};
use serde::Deserialize;

#[derive(Args, Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    /// Gaussian fidelity weight.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Poisson fidelity weight.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// BCA penalty (also the TV+KL penalty).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// BCA_f penalty of the bilinear constraint.
    #[arg(long)]
    pub alpha_w: Option<f64>,
    /// BCA_f penalty of the gradient constraint.
    #[arg(long)]
    pub alpha_p: Option<f64>,
    /// Positivity floor for v.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Successive-error stopping tolerance.
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Chambolle iterations per TV-L2 step.
    #[arg(long)]
    pub inner_iters: Option<usize>,
    /// Fidelity weight of the TV+L2 / TV+KL baselines.
    #[arg(long)]
    pub lambda: Option<f64>,
}

impl SolverOverrides {
    /// Applies the set fields onto `cfg`.
    pub fn apply(&self, cfg: &mut SolverConfig) {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.lambda1, self.lambda1);
        set(&mut cfg.lambda2, self.lambda2);
        set(&mut cfg.alpha, self.alpha);
        set(&mut cfg.alpha_w, self.alpha_w);
        set(&mut cfg.alpha_p, self.alpha_p);
        set(&mut cfg.epsilon, self.epsilon);
        set(&mut cfg.xi, self.xi);
        if let Some(n) = self.max_iters {
            cfg.max_iters = n;
        }
        if let Some(n) = self.inner_iters {
            cfg.chambolle.inner_iters = n;
        }
    }

    /// `self` with every unset field taken from `lower`.
    pub fn over(&self, lower: &SolverOverrides) -> SolverOverrides {
        SolverOverrides {
            lambda1: self.lambda1.or(lower.lambda1),
            lambda2: self.lambda2.or(lower.lambda2),
            alpha: self.alpha.or(lower.alpha),
            alpha_w: self.alpha_w.or(lower.alpha_w),
            alpha_p: self.alpha_p.or(lower.alpha_p),
            epsilon: self.epsilon.or(lower.epsilon),
            xi: self.xi.or(lower.xi),
            max_iters: self.max_iters.or(lower.max_iters),
            inner_iters: self.inner_iters.or(lower.inner_iters),
            lambda: self.lambda.or(lower.lambda),
        }
    }

    pub fn resolve(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        self.apply(&mut cfg);
        cfg
    }
}

/// The baseline fidelity weight a solver will actually use, if any.
pub fn baseline_lambda(kind: SolverKind, cfg: &SolverConfig, lambda: Option<f64>) -> Option<f64> {
    match kind {
        SolverKind::TvL2 => Some(lambda.unwrap_or(cfg.lambda1)),
        SolverKind::TvKl => Some(lambda.unwrap_or(cfg.lambda2)),
        SolverKind::Bca | SolverKind::Bcaf => None,
    }
}

/// `key = value` lines describing every resolved parameter.
pub fn describe(kind: SolverKind, cfg: &SolverConfig, lambda: Option<f64>) -> Vec<String> {
    let mut lines = vec![
        format!("solver = {kind}"),
        format!("lambda1 = {}", cfg.lambda1),
        format!("lambda2 = {}", cfg.lambda2),
        format!("alpha = {}", cfg.alpha),
        format!("alpha_w = {}", cfg.alpha_w),
        format!("alpha_p = {}", cfg.alpha_p),
        format!("epsilon = {}", cfg.epsilon),
        format!("xi = {}", cfg.xi),
        format!("max_iters = {}", cfg.max_iters),
        format!("inner_iters = {}", cfg.chambolle.inner_iters),
        format!("tau = {}", cfg.chambolle.tau),
        format!("cg_tol = {}", cfg.cg.tol),
        format!("cg_max_iters = {}", cfg.cg.max_iters),
    ];
    if let Some(l) = baseline_lambda(kind, cfg, lambda) {
        lines.push(format!("lambda = {l}"));
    }
    lines
}
