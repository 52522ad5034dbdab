//! Scalar closed-form minimizers used by the per-pixel update steps.
//!
//! These are exposed so the per-pixel optimality of each update can be checked
//! against brute-force minimization of the corresponding scalar objective.

/// `(b + sqrt(b^2 + c)) / 2` for `c >= 0`, evaluated without cancellation when
/// `b < 0`.
#[inline]
pub fn positive_root(b: f64, c: f64) -> f64 {
    let s = (b * b + c).sqrt();
    if b >= 0.0 {
        0.5 * (b + s)
    } else if s - b > 0.0 {
        0.5 * c / (s - b)
    } else {
        0.0
    }
}

/// Minimizer over `w > 0` of
/// `-lambda2 * v * ln(w) + (alpha/2) (v w + mult/alpha - u)^2`.
#[inline]
pub fn w_update(u: f64, v: f64, mult: f64, lambda2: f64, alpha: f64) -> f64 {
    let b = u - mult / alpha;
    positive_root(b, 4.0 * lambda2 * v / alpha) / v
}

/// Parameters of the per-pixel `v` subproblem
/// `min_{v >= eps} (l1/2)(f - v)^2 - l2 (v ln w + v) + (alpha/2)(v w + mult/alpha - u)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub epsilon: f64,
}

/// Exact projected minimizer of the `v` subproblem.
#[inline]
pub fn v_update_full(f: f64, u: f64, w: f64, mult: f64, p: &VParams) -> f64 {
    let num = p.lambda1 * f + p.lambda2 * w.ln() + p.lambda2 - w * mult + p.alpha * w * u;
    (num / (p.lambda1 + p.alpha * w * w)).max(p.epsilon)
}

/// Minimizer of the `v` subproblem when the multiplier satisfies
/// `mult * w = lambda2`, in which case the multiplier drops out.
#[inline]
pub fn v_update_reduced(f: f64, u: f64, w: f64, p: &VParams) -> f64 {
    let num = p.lambda1 * f + p.lambda2 * w.ln() + p.alpha * w * u;
    (num / (p.lambda1 + p.alpha * w * w)).max(p.epsilon)
}

/// Minimizer over `z > 0` of `lambda (z - f ln z) + mu z + (rho/2)(z - u)^2`,
/// the KL-fidelity splitting step. Requires `f >= 0`.
#[inline]
pub fn kl_z_update(u: f64, mu: f64, f: f64, lambda: f64, rho: f64) -> f64 {
    let b = u - mu / rho - lambda / rho;
    positive_root(b, 4.0 * lambda * f / rho)
}

/// Proximal map of `|p|` with weight `1/alpha_p` applied to the 2-vector `z`.
#[inline]
pub fn p_update(z: (f64, f64), alpha_p: f64) -> (f64, f64) {
    crate::tv_inner::shrink_pair(z.0, z.1, 1.0 / alpha_p)
}
