//! Single-noise comparison methods: TV with L2 fidelity and TV with KL
//! (Poisson) fidelity.

use std::time::Instant;

use super::closed_form::kl_z_update;
use super::{relative, snr_of, successive_error, with_iteration, Solution, SolverConfig, TraceRecord};
use crate::error::{Error, Result};
use crate::grid::{total_variation, ImageGrid, VectorField};
use crate::metrics::LOG_FLOOR;
use crate::tv_inner::{chambolle_iterate, tv_l2_denoise, tv_l2_energy};

/// TV+L2: `argmin_u (lambda/2)||f - u||^2 + TV(u)` by Chambolle's iteration.
///
/// One trace row covers `cfg.chambolle.inner_iters` dual steps; the dual is
/// carried across rows, so the whole run is a single uninterrupted Chambolle
/// iteration stopped by the usual successive-error rule.
pub fn tv_l2_solve(f: &ImageGrid, lambda: f64, cfg: &SolverConfig, truth: Option<&ImageGrid>) -> Result<Solution> {
    cfg.validate()?;
    check_lambda(lambda)?;
    if let Some(t) = truth {
        f.check_shape(t)?;
    }
    let start = Instant::now();
    let mut dual = VectorField::zeros_like(f);
    let mut u = f.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    for k in 1..=cfg.max_iters {
        let next = with_iteration(k, chambolle_iterate(f, lambda, &cfg.chambolle, &mut dual, |_, _| {}))?;
        let se = successive_error(&next, &u);
        u = next;
        trace.push(TraceRecord {
            iter: k,
            se,
            objective: tv_l2_energy(&u, f, lambda)?,
            lagrangian: None,
            min_w: None,
            identity_residual: None,
            constraint_residual: 0.0,
            snr: snr_of(&u, truth)?,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        if se <= cfg.xi {
            converged = true;
            break;
        }
    }
    Ok(Solution {
        image: u,
        trace,
        converged,
        warnings: Vec::new(),
        state: None,
    })
}

/// `lambda sum(u - f ln u) + TV(u)`, with `f ln u := 0` where `f = 0`.
pub fn tv_kl_objective(u: &ImageGrid, f: &ImageGrid, lambda: f64) -> Result<f64> {
    u.check_shape(f)?;
    let kl: f64 = u
        .data()
        .iter()
        .zip(f.data())
        .map(|(&ui, &fi)| if fi > 0.0 { ui - fi * ui.max(LOG_FLOOR).ln() } else { ui })
        .sum();
    Ok(lambda * kl + total_variation(u))
}

/// TV+KL: ADMM on `lambda sum(z - f ln z) + TV(u)` subject to `z = u` with
/// penalty `cfg.alpha`.
///
/// Each iteration runs a warm-started TV-L2 step for `u`, the closed-form
/// positive root for `z`, then the multiplier update. Requires `f >= 0`.
pub fn tv_kl_solve(f: &ImageGrid, lambda: f64, cfg: &SolverConfig, truth: Option<&ImageGrid>) -> Result<Solution> {
    cfg.validate()?;
    check_lambda(lambda)?;
    if let Some(t) = truth {
        f.check_shape(t)?;
    }
    if let Some((index, &value)) = f.data().iter().enumerate().find(|(_, &v)| !(v >= 0.0)) {
        return Err(Error::NegativeIntensity { index, value });
    }
    let rho = cfg.alpha;
    let start = Instant::now();
    let mut u = f.clone();
    let mut z = f.clone();
    let mut mu = f.zeros_like();
    let mut dual: Option<VectorField> = None;
    let mut trace = Vec::new();
    let mut converged = false;

    for k in 1..=cfg.max_iters {
        let target = z.zip_map(&mu, |zi, mi| zi + mi / rho)?;
        let (next, q) = with_iteration(k, tv_l2_denoise(&target, rho, &cfg.chambolle, dual.as_ref()))?;
        dual = Some(q);
        let se = successive_error(&next, &u);
        u = next;

        let zd: Vec<f64> = u
            .data()
            .iter()
            .zip(mu.data())
            .zip(f.data())
            .map(|((&ui, &mi), &fi)| kl_z_update(ui, mi, fi, lambda, rho))
            .collect();
        z = ImageGrid::new(f.width(), f.height(), zd)?;
        let gap = z.sub(&u)?;
        mu = mu.add(&gap.scale(rho))?;

        trace.push(TraceRecord {
            iter: k,
            se,
            objective: tv_kl_objective(&u, f, lambda)?,
            lagrangian: None,
            min_w: None,
            identity_residual: None,
            constraint_residual: relative(gap.norm(), u.norm()),
            snr: snr_of(&u, truth)?,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        if !u.is_finite() {
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
        image: u,
        trace,
        converged,
        warnings: Vec::new(),
        state: None,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("fidelity weight must be positive, got {lambda}")))
    }
}
