//! Bilinear-constraint ADMM (BCA).
//!
//! With the constraint `u = v w`, the augmented Lagrangian is
//!
//! ```text
//! L(u, v, w, L) = (l1/2)||f - v||^2 + TV(u) + indicator(v >= eps)
//!               + l2 sum(u - v ln w - v) + <L, v w - u> + (alpha/2)||v w - u||^2
//! ```
//!
//! and one iteration updates `u` (TV-L2), `v` (projected closed form), `w`
//! (positive quadratic root) and then the multiplier, in that order. After each
//! multiplier update `L w = l2` holds exactly, which lets the `v` step drop the
//! multiplier from the second iteration on.

use std::time::Instant;

use super::closed_form::{v_update_full, v_update_reduced, w_update, VParams};
use super::{
    lagrangian_increases, snr_of, successive_error, sufficient_decrease_alpha, with_iteration,
    Solution, SolverConfig, SolverState, TraceRecord,
};
use crate::error::{Error, Result};
use crate::grid::{total_variation, ImageGrid};
use crate::metrics::objective_h;
use crate::tv_inner::tv_l2_denoise;

/// `u` step: TV-L2 denoising of `v w + L/alpha - l2/alpha` with weight
/// `alpha`, warm-started from (and storing back) the state's dual field.
pub fn bca_u_step(state: &mut SolverState, cfg: &SolverConfig) -> Result<ImageGrid> {
    let alpha = cfg.alpha;
    let shift = cfg.lambda2 / alpha;
    let target_data: Vec<f64> = state
        .v
        .data()
        .iter()
        .zip(state.w.data())
        .zip(state.lambda_mult.data())
        .map(|((v, w), l)| v * w + l / alpha - shift)
        .collect();
    let target = ImageGrid::new(state.u.width(), state.u.height(), target_data)?;
    let (u, dual) = tv_l2_denoise(&target, alpha, &cfg.chambolle, state.chambolle_dual.as_ref())?;
    state.chambolle_dual = Some(dual);
    Ok(u)
}

/// `v` step with the current `u` (already updated), `w` and multiplier.
///
/// The first iteration uses the full closed form, because the initial
/// multiplier does not satisfy `L w = l2`; later iterations use the reduced
/// form.
pub fn bca_v_step(state: &SolverState, f: &ImageGrid, cfg: &SolverConfig) -> Result<ImageGrid> {
    v_step(state, f, cfg, cfg.alpha)
}

pub(super) fn v_step(state: &SolverState, f: &ImageGrid, cfg: &SolverConfig, alpha: f64) -> Result<ImageGrid> {
    f.check_shape(&state.u)?;
    if let Some((index, &value)) = state.w.data().iter().enumerate().find(|(_, &w)| !(w > 0.0)) {
        return Err(Error::Domain { op: "ln", index, value });
    }
    let params = VParams {
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        alpha,
        epsilon: cfg.epsilon,
    };
    let first = state.iter == 0;
    let data = f
        .data()
        .iter()
        .zip(state.u.data())
        .zip(state.w.data())
        .zip(state.lambda_mult.data())
        .map(|(((&fi, &ui), &wi), &li)| {
            if first {
                v_update_full(fi, ui, wi, li, &params)
            } else {
                v_update_reduced(fi, ui, wi, &params)
            }
        })
        .collect();
    ImageGrid::new(f.width(), f.height(), data)
}

/// `w` step with the current `u`, `v` and the previous multiplier.
pub fn bca_w_step(state: &SolverState, cfg: &SolverConfig) -> Result<ImageGrid> {
    w_step(state, cfg, cfg.alpha)
}

pub(super) fn w_step(state: &SolverState, cfg: &SolverConfig, alpha: f64) -> Result<ImageGrid> {
    if let Some((index, &value)) = state.v.data().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::Domain { op: "w-step", index, value });
    }
    let data = state
        .u
        .data()
        .iter()
        .zip(state.v.data())
        .zip(state.lambda_mult.data())
        .map(|((&u, &v), &l)| w_update(u, v, l, cfg.lambda2, alpha))
        .collect();
    ImageGrid::new(state.u.width(), state.u.height(), data)
}

/// Dual ascent `L + alpha (v w - u)`.
pub fn bca_multiplier_step(state: &SolverState, cfg: &SolverConfig) -> Result<ImageGrid> {
    multiplier(state, cfg.alpha)
}

pub(super) fn multiplier(state: &SolverState, alpha: f64) -> Result<ImageGrid> {
    let data = state
        .lambda_mult
        .data()
        .iter()
        .zip(state.v.data())
        .zip(state.w.data())
        .zip(state.u.data())
        .map(|(((&l, &v), &w), &u)| l + alpha * (v * w - u))
        .collect();
    ImageGrid::new(state.u.width(), state.u.height(), data)
}

/// Terms of the augmented Lagrangian shared by BCA and BCA_f: Gaussian
/// fidelity, Poisson term in `(u, v, w)` and the bilinear penalty.
pub(super) fn bilinear_terms(state: &SolverState, f: &ImageGrid, cfg: &SolverConfig, alpha: f64) -> f64 {
    if state.v.data().iter().any(|&v| !(v >= cfg.epsilon)) {
        return f64::INFINITY;
    }
    let mut gauss = 0.0;
    let mut poisson = 0.0;
    let mut coupling = 0.0;
    for ((((&fi, &u), &v), &w), &l) in f
        .data()
        .iter()
        .zip(state.u.data())
        .zip(state.v.data())
        .zip(state.w.data())
        .zip(state.lambda_mult.data())
    {
        gauss += (fi - v) * (fi - v);
        poisson += u - v * w.ln() - v;
        let r = v * w - u;
        coupling += l * r + 0.5 * alpha * r * r;
    }
    0.5 * cfg.lambda1 * gauss + cfg.lambda2 * poisson + coupling
}

/// Augmented Lagrangian of BCA at the state's iterate.
pub fn bca_lagrangian(state: &SolverState, f: &ImageGrid, cfg: &SolverConfig) -> f64 {
    bilinear_terms(state, f, cfg, cfg.alpha) + total_variation(&state.u)
}

pub(super) fn record(
    state: &SolverState,
    f: &ImageGrid,
    cfg: &SolverConfig,
    se: f64,
    lagrangian: f64,
    truth: Option<&ImageGrid>,
    start: &Instant,
) -> Result<TraceRecord> {
    let v_rep = state.v.max_scalar(cfg.epsilon);
    Ok(TraceRecord {
        iter: state.iter,
        se,
        objective: objective_h(&state.u, &v_rep, f, &cfg.model())?,
        lagrangian: Some(lagrangian),
        min_w: Some(state.w.min_entry()),
        identity_residual: Some(state.identity_residual(cfg.lambda2)),
        constraint_residual: state.constraint_residual(),
        snr: snr_of(&state.u, truth)?,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs BCA from `u = v = f`, `w = 1`, zero multiplier.
pub fn bca_solve(f: &ImageGrid, cfg: &SolverConfig, truth: Option<&ImageGrid>) -> Result<Solution> {
    cfg.validate()?;
    if let Some(t) = truth {
        f.check_shape(t)?;
    }
    let start = Instant::now();
    let mut state = SolverState::init_bca(f);
    let mut trace = Vec::new();
    let mut converged = false;

    while state.iter < cfg.max_iters {
        let k = state.iter + 1;
        let u_prev = state.u.clone();
        state.u = with_iteration(k, bca_u_step(&mut state, cfg))?;
        state.v = with_iteration(k, bca_v_step(&state, f, cfg))?;
        state.w = with_iteration(k, bca_w_step(&state, cfg))?;
        state.lambda_mult = with_iteration(k, bca_multiplier_step(&state, cfg))?;
        state.iter = k;

        let se = successive_error(&state.u, &u_prev);
        let lagrangian = bca_lagrangian(&state, f, cfg);
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

    let warnings = descent_warnings(&trace, cfg);
    Ok(Solution {
        image: state.u.clone(),
        trace,
        converged,
        warnings,
        state: Some(state),
    })
}

fn descent_warnings(trace: &[TraceRecord], cfg: &SolverConfig) -> Vec<String> {
    let mut warnings = Vec::new();
    let observed_c = trace.iter().filter_map(|r| r.min_w).fold(f64::INFINITY, f64::min);
    if !observed_c.is_finite() {
        return warnings;
    }
    let bound = sufficient_decrease_alpha(cfg.lambda2, cfg.epsilon, observed_c);
    if cfg.alpha <= bound {
        warnings.push(format!(
            "alpha = {} does not exceed the sufficient-decrease bound {:.6e} (observed min w = {:.6e}); Lagrangian descent is not guaranteed",
            cfg.alpha, bound, observed_c
        ));
    }
    let ups = lagrangian_increases(trace, 1e-8);
    if !ups.is_empty() {
        warnings.push(format!(
            "augmented Lagrangian increased at {} iteration(s), first at {}",
            ups.len(),
            ups[0]
        ));
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tv_inner::ChambolleConfig;

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
            alpha: 40.0,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn u_step_constant_target() {
        let c = cfg();
        let f = ImageGrid::filled(6, 6, 0.8);
        let mut state = SolverState::init_bca(&f);
        // target = 0.8 * 1 + 0 - l2/alpha
        let u = bca_u_step(&mut state, &c).unwrap();
        let expect = 0.8 - c.lambda2 / c.alpha;
        assert!(u.data().iter().all(|&x| (x - expect).abs() < 1e-15));
        assert!(state.chambolle_dual.is_some());
    }

    #[test]
    fn u_step_reduces_to_plain_tv_l2() {
        // lambda2 -> 0 limit: with w = 1 and zero multiplier the step is TV-L2 of v
        let c = SolverConfig { lambda2: 1e-300, ..cfg() };
        let f = random_grid(8, 8, 4, 0.0, 1.0);
        let mut state = SolverState::init_bca(&f);
        let u = bca_u_step(&mut state, &c).unwrap();
        let (plain, _) = tv_l2_denoise(&f, c.alpha, &c.chambolle, None).unwrap();
        assert!(u.sub(&plain).unwrap().norm_inf() < 1e-14);
    }

    #[test]
    fn u_step_warm_start_close_to_exact() {
        let c = cfg();
        let f = random_grid(16, 16, 9, 0.1, 1.0);
        let mut state = SolverState::init_bca(&f);
        state.v = random_grid(16, 16, 10, 0.2, 1.0);
        state.w = random_grid(16, 16, 11, 0.5, 1.5);
        state.lambda_mult = state.w.map(|w| c.lambda2 / w);
        // prime the warm start with a previous outer iteration's dual
        bca_u_step(&mut state, &c).unwrap();
        let u = bca_u_step(&mut state, &c).unwrap();
        let target = state
            .v
            .mul(&state.w)
            .unwrap()
            .add(&state.lambda_mult.scale(1.0 / c.alpha))
            .unwrap()
            .map(|x| x - c.lambda2 / c.alpha);
        let (exact, _) = tv_l2_denoise(&target, c.alpha, &ChambolleConfig::with_iters(5000), None).unwrap();
        assert!(u.sub(&exact).unwrap().norm_inf() < 2e-2);
    }

    #[test]
    fn v_step_collapses_when_identity_holds() {
        let c = cfg();
        let f = random_grid(4, 4, 1, 0.1, 1.0);
        let mut state = SolverState::init_bca(&f);
        state.iter = 3;
        state.lambda_mult = ImageGrid::filled(4, 4, c.lambda2);
        let v = bca_v_step(&state, &f, &c).unwrap();
        for (a, b) in v.data().iter().zip(f.data()) {
            assert!((a - b.max(c.epsilon)).abs() < 1e-14);
        }
    }

    #[test]
    fn v_step_floor_active() {
        let c = cfg();
        let f = ImageGrid::filled(3, 3, -2.0);
        let mut state = SolverState::init_bca(&f);
        state.iter = 1;
        let v = bca_v_step(&state, &f, &c).unwrap();
        assert!(v.data().iter().all(|&x| x == c.epsilon));
    }

    #[test]
    fn v_step_first_iteration_uses_full_form() {
        let c = cfg();
        let f = ImageGrid::filled(2, 2, 0.5);
        let state = SolverState::init_bca(&f);
        let v = bca_v_step(&state, &f, &c).unwrap();
        // w = 1, zero multiplier: (l1 f + l2 + alpha u) / (l1 + alpha)
        let expect = (c.lambda1 * 0.5 + c.lambda2 + c.alpha * 0.5) / (c.lambda1 + c.alpha);
        assert!(v.data().iter().all(|&x| (x - expect).abs() < 1e-15));
    }

    #[test]
    fn v_step_rejects_nonpositive_w() {
        let c = cfg();
        let f = ImageGrid::ones(2, 2);
        let mut state = SolverState::init_bca(&f);
        state.w.data_mut()[2] = 0.0;
        assert!(matches!(bca_v_step(&state, &f, &c), Err(Error::Domain { index: 2, .. })));
    }

    #[test]
    fn w_step_examples() {
        let c = SolverConfig { lambda2: 2.0, alpha: 8.0, ..cfg() };
        let f = ImageGrid::ones(2, 2);
        let mut state = SolverState::init_bca(&f);
        state.u = ImageGrid::filled(2, 2, 0.25);
        state.lambda_mult = ImageGrid::filled(2, 2, 0.25 * 8.0);
        let w = bca_w_step(&state, &c).unwrap();
        assert!(w.data().iter().all(|&x| (x - 0.5).abs() < 1e-15));

        let c = SolverConfig { lambda2: 8.0, alpha: 8.0, ..cfg() };
        state.lambda_mult = ImageGrid::filled(2, 2, 2.0);
        let w = bca_w_step(&state, &c).unwrap();
        assert!(w.data().iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn multiplier_unchanged_at_zero_residual() {
        let c = cfg();
        let f = random_grid(5, 5, 2, 0.2, 1.0);
        let mut state = SolverState::init_bca(&f);
        state.w = random_grid(5, 5, 3, 0.5, 2.0);
        state.u = state.v.mul(&state.w).unwrap();
        state.lambda_mult = random_grid(5, 5, 4, -1.0, 1.0);
        assert_eq!(bca_multiplier_step(&state, &c).unwrap(), state.lambda_mult);
    }

    #[test]
    fn identity_holds_each_iteration() {
        let c = SolverConfig { max_iters: 60, xi: 1e-12, ..cfg() };
        let f = random_grid(16, 16, 21, 0.0, 1.0);
        let sol = bca_solve(&f, &c, None).unwrap();
        assert_eq!(sol.trace.len(), 60);
        for r in &sol.trace {
            assert!(r.identity_residual.unwrap() <= 1e-10 * c.lambda2, "iter {}", r.iter);
            assert!(r.min_w.unwrap() > 0.0);
        }
        let st = sol.state.unwrap();
        assert!(st.v.min_entry() >= c.epsilon);
    }

    #[test]
    fn constant_image_is_near_fixed_point() {
        let c = cfg();
        let f = ImageGrid::filled(12, 12, 0.6);
        let sol = bca_solve(&f, &c, Some(&f)).unwrap();
        assert!(sol.converged);
        assert!(sol.image.sub(&f).unwrap().norm_inf() < 1e-3);
    }

    #[test]
    fn deterministic() {
        let c = SolverConfig { max_iters: 30, ..cfg() };
        let f = random_grid(10, 10, 5, 0.0, 1.0);
        let a = bca_solve(&f, &c, None).unwrap();
        let b = bca_solve(&f, &c, None).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.state, b.state);
    }

    #[test]
    fn warns_when_penalty_small() {
        let c = SolverConfig { max_iters: 5, ..cfg() };
        let f = random_grid(8, 8, 6, 0.0, 1.0);
        let sol = bca_solve(&f, &c, None).unwrap();
        assert!(sol.warnings.iter().any(|w| w.contains("sufficient-decrease bound")));
    }
}
