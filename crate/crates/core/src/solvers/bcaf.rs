//! Fully split BCA (BCA_f).
//!
//! Adds the constraint `p = grad u` to BCA so the `u` step becomes the screened
//! Poisson system
//!
//! ```text
//! (alpha_w I - alpha_p Laplacian) u = -l2 + L_w - div(L_p) + alpha_w v w - alpha_p div(p)
//! ```
//!
//! and the TV term is handled by vector soft-thresholding of `p`. The `v` and
//! `w` steps are those of BCA with `alpha_w` in place of `alpha`.

use std::time::Instant;

use super::bca::{bilinear_terms, multiplier, record, v_step, w_step};
use super::closed_form::p_update;
use super::{successive_error, with_iteration, Solution, SolverConfig, SolverState};
use crate::error::{Error, Result};
use crate::grid::{divergence, gradient, ImageGrid, VectorField};
use crate::linsolve::solve_screened_poisson;

fn split_fields(state: &SolverState) -> Result<(&VectorField, &VectorField)> {
    match (state.p.as_ref(), state.lambda_p.as_ref()) {
        (Some(p), Some(lp)) => Ok((p, lp)),
        _ => Err(Error::InvalidConfig(
            "BCA_f state is missing the p / lambda_p fields".into(),
        )),
    }
}

/// `u` step: conjugate-gradient solve of the screened Poisson system,
/// warm-started from the current `u`.
pub fn bcaf_u_step(state: &SolverState, cfg: &SolverConfig) -> Result<ImageGrid> {
    let (p, lambda_p) = split_fields(state)?;
    let shifted = p.scale(cfg.alpha_p).axpy(1.0, lambda_p)?;
    let div = divergence(&shifted);
    let rhs_data: Vec<f64> = state
        .v
        .data()
        .iter()
        .zip(state.w.data())
        .zip(state.lambda_mult.data())
        .zip(div.data())
        .map(|(((&v, &w), &l), &d)| -cfg.lambda2 + l + cfg.alpha_w * v * w - d)
        .collect();
    let rhs = ImageGrid::new(state.u.width(), state.u.height(), rhs_data)?;
    let sol = solve_screened_poisson(&rhs, cfg.alpha_w, cfg.alpha_p, &cfg.cg, Some(&state.u))?;
    Ok(sol.solution)
}

/// `p` step: soft-thresholding of `grad u - L_p / alpha_p` at `1/alpha_p`.
pub fn bcaf_p_step(state: &SolverState, cfg: &SolverConfig) -> Result<VectorField> {
    if !(cfg.alpha_p > 0.0 && cfg.alpha_p.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha_p must be positive, got {}", cfg.alpha_p)));
    }
    let (_, lambda_p) = split_fields(state)?;
    let mut out = gradient(&state.u).axpy(-1.0 / cfg.alpha_p, lambda_p)?;
    let (ox, oy) = out.components_mut();
    for (x, y) in ox.iter_mut().zip(oy.iter_mut()) {
        let (a, b) = p_update((*x, *y), cfg.alpha_p);
        *x = a;
        *y = b;
    }
    Ok(out)
}

/// Multiplier updates `L_w + alpha_w (v w - u)` and `L_p + alpha_p (p - grad u)`.
pub fn bcaf_multiplier_step(state: &SolverState, cfg: &SolverConfig) -> Result<(ImageGrid, VectorField)> {
    let (p, lambda_p) = split_fields(state)?;
    let lw = multiplier(state, cfg.alpha_w)?;
    let residual = p.sub(&gradient(&state.u))?;
    let lp = lambda_p.axpy(cfg.alpha_p, &residual)?;
    Ok((lw, lp))
}

/// Augmented Lagrangian of BCA_f at the state's iterate.
pub fn bcaf_lagrangian(state: &SolverState, f: &ImageGrid, cfg: &SolverConfig) -> Result<f64> {
    let (p, lambda_p) = split_fields(state)?;
    let residual = p.sub(&gradient(&state.u))?;
    let rn = residual.norm();
    Ok(bilinear_terms(state, f, cfg, cfg.alpha_w)
        + p.l1_magnitude()
        + lambda_p.inner(&residual)?
        + 0.5 * cfg.alpha_p * rn * rn)
}

/// Runs BCA_f from `u = v = f`, `w = 1`, `p = 0` and zero multipliers.
pub fn bcaf_solve(f: &ImageGrid, cfg: &SolverConfig, truth: Option<&ImageGrid>) -> Result<Solution> {
    cfg.validate()?;
    if let Some(t) = truth {
        f.check_shape(t)?;
    }
    let start = Instant::now();
    let mut state = SolverState::init_bcaf(f);
    let mut trace = Vec::new();
    let mut converged = false;

    while state.iter < cfg.max_iters {
        let k = state.iter + 1;
        let u_prev = state.u.clone();
        state.u = with_iteration(k, bcaf_u_step(&state, cfg))?;
        state.v = with_iteration(k, v_step(&state, f, cfg, cfg.alpha_w))?;
        state.w = with_iteration(k, w_step(&state, cfg, cfg.alpha_w))?;
        state.p = Some(with_iteration(k, bcaf_p_step(&state, cfg))?);
        let (lw, lp) = with_iteration(k, bcaf_multiplier_step(&state, cfg))?;
        state.lambda_mult = lw;
        state.lambda_p = Some(lp);
        state.iter = k;

        let se = successive_error(&state.u, &u_prev);
        let lagrangian = with_iteration(k, bcaf_lagrangian(&state, f, cfg))?;
        trace.push(with_iteration(k, record(&state, f, cfg, se, lagrangian, truth, &start))?);
        if !state.u.is_finite() {
            return Err(Error::Solver {
                iteration: k,
                source: Box::new(Error::Metric("non-finite iterate".into())),
            });
        }
        if se <= cfg.xi {
            converged = true;
            break;
        }
    }
    Ok(Solution {
        image: state.u.clone(),
        trace,
        converged,
        warnings: Vec::new(),
        state: Some(state),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_grid(w: usize, h: usize, seed: u64, lo: f64, hi: f64) -> ImageGrid {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        ImageGrid::from_fn(w, h, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            lo + (hi - lo) * ((s >> 11) as f64 / (1u64 << 53) as f64)
        })
    }

    fn cfg() -> SolverConfig {
        SolverConfig {
            lambda1: 5.0,
            lambda2: 3.0,
            alpha_w: 40.0,
            alpha_p: 10.0,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn u_step_diagonal_limit() {
        // alpha_p -> 0 with p = 0, L_p = 0 gives (-l2 + L_w + alpha_w v w) / alpha_w
        let c = SolverConfig { alpha_p: 1e-300, ..cfg() };
        let f = random_grid(6, 5, 1, 0.1, 1.0);
        let mut state = SolverState::init_bcaf(&f);
        state.w = random_grid(6, 5, 2, 0.5, 1.5);
        state.lambda_mult = random_grid(6, 5, 3, -1.0, 1.0);
        let u = bcaf_u_step(&state, &c).unwrap();
        for i in 0..u.len() {
            let expect = (-c.lambda2 + state.lambda_mult.data()[i] + c.alpha_w * f.data()[i] * state.w.data()[i]) / c.alpha_w;
            assert!((u.data()[i] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn u_step_constant_state_gives_constant() {
        let c = cfg();
        let f = ImageGrid::filled(7, 7, 0.4);
        let mut state = SolverState::init_bcaf(&f);
        state.lambda_mult = ImageGrid::filled(7, 7, c.lambda2);
        let u = bcaf_u_step(&state, &c).unwrap();
        assert!(u.data().iter().all(|&x| (x - 0.4).abs() < 1e-9));
    }

    #[test]
    fn p_step_constant_u_is_zero() {
        let f = ImageGrid::filled(5, 5, 0.3);
        let state = SolverState::init_bcaf(&f);
        let p = bcaf_p_step(&state, &cfg()).unwrap();
        assert_eq!(p.norm(), 0.0);
    }

    #[test]
    fn p_step_rejects_bad_penalty() {
        let f = ImageGrid::filled(5, 5, 0.3);
        let state = SolverState::init_bcaf(&f);
        assert!(bcaf_p_step(&state, &SolverConfig { alpha_p: 0.0, ..cfg() }).is_err());
        assert!(bcaf_u_step(&SolverState::init_bca(&f), &cfg()).is_err());
    }

    #[test]
    fn identity_holds_each_iteration() {
        let c = SolverConfig { max_iters: 60, xi: 1e-12, ..cfg() };
        let f = random_grid(16, 16, 31, 0.0, 1.0);
        let sol = bcaf_solve(&f, &c, None).unwrap();
        assert_eq!(sol.trace.len(), 60);
        for r in &sol.trace {
            assert!(r.identity_residual.unwrap() <= 1e-10 * c.lambda2, "iter {}", r.iter);
        }
    }

    #[test]
    fn constant_image_is_near_fixed_point() {
        let f = ImageGrid::filled(12, 12, 0.6);
        let sol = bcaf_solve(&f, &cfg(), None).unwrap();
        assert!(sol.converged);
        assert!(sol.image.sub(&f).unwrap().norm_inf() < 1e-3);
    }
}
