//! TV-L2 denoising by Chambolle's dual projection iteration, and the vector
//! soft-thresholding map.
//!
//! For `min_u (weight/2)||g - u||^2 + sum_i |grad u_i|` the dual field `q`
//! (with `|q_i| <= 1`) is iterated as
//!
//! ```text
//! d      = div q - weight * g
//! q_next = (q + tau * grad d) / (1 + tau * |grad d|)
//! ```
//!
//! and the primal estimate is `u = g - div q / weight`. The final dual field is
//! returned so callers can warm-start the next solve.

use crate::error::{Error, Result};
use crate::grid::{divergence_into, gradient_into, ImageGrid, VectorField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChambolleConfig {
    pub inner_iters: usize,
    /// Dual step size, at most 1/4.
    pub tau: f64,
}

impl Default for ChambolleConfig {
    fn default() -> Self {
        Self {
            inner_iters: 10,
            tau: 0.25,
        }
    }
}

impl ChambolleConfig {
    pub fn with_iters(inner_iters: usize) -> Self {
        Self {
            inner_iters,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inner_iters == 0 {
            return Err(Error::InvalidConfig("inner_iters must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 0.25) {
            return Err(Error::InvalidConfig(format!(
                "Chambolle step tau must lie in (0, 0.25], got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Approximately solves `argmin_u (weight/2)||g - u||^2 + TV(u)`.
///
/// Returns the primal estimate and the final dual field.
pub fn tv_l2_denoise(
    g: &ImageGrid,
    weight: f64,
    cfg: &ChambolleConfig,
    warm_dual: Option<&VectorField>,
) -> Result<(ImageGrid, VectorField)> {
    let mut dual = match warm_dual {
        Some(q) if q.matches(g) => q.clone(),
        Some(q) => {
            return Err(Error::ShapeMismatch {
                left_w: g.width(),
                left_h: g.height(),
                right_w: q.width(),
                right_h: q.height(),
            })
        }
        None => VectorField::zeros_like(g),
    };
    let u = chambolle_iterate(g, weight, cfg, &mut dual, |_, _| {})?;
    Ok((u, dual))
}

/// Runs the dual iteration in place, calling `observe(iteration, dual)` after
/// every step. Returns the primal estimate for the final dual.
pub fn chambolle_iterate(
    g: &ImageGrid,
    weight: f64,
    cfg: &ChambolleConfig,
    dual: &mut VectorField,
    mut observe: impl FnMut(usize, &VectorField),
) -> Result<ImageGrid> {
    cfg.validate()?;
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "TV-L2 fidelity weight must be positive and finite, got {weight}"
        )));
    }
    if !dual.matches(g) {
        return Err(Error::ShapeMismatch {
            left_w: g.width(),
            left_h: g.height(),
            right_w: dual.width(),
            right_h: dual.height(),
        });
    }
    let (w, h) = (g.width(), g.height());
    let n = w * h;
    let gd = g.data();
    let mut div = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let tau = cfg.tau;
    for it in 0..cfg.inner_iters {
        {
            let (qx, qy) = dual.components_mut();
            divergence_into(qx, qy, w, h, &mut div);
            for (d, &gi) in div.iter_mut().zip(gd) {
                *d -= weight * gi;
            }
            gradient_into(&div, w, h, &mut gx, &mut gy);
            for i in 0..n {
                let denom = 1.0 + tau * gx[i].hypot(gy[i]);
                qx[i] = (qx[i] + tau * gx[i]) / denom;
                qy[i] = (qy[i] + tau * gy[i]) / denom;
            }
        }
        observe(it, dual);
    }
    Ok(primal_from_dual(g, weight, dual))
}

/// `g - div(q) / weight`.
pub fn primal_from_dual(g: &ImageGrid, weight: f64, dual: &VectorField) -> ImageGrid {
    let mut u = g.clone();
    let mut div = vec![0.0; g.len()];
    divergence_into(dual.dx(), dual.dy(), g.width(), g.height(), &mut div);
    for (ui, d) in u.data_mut().iter_mut().zip(div) {
        *ui -= d / weight;
    }
    u
}

/// `(weight/2)||g - u||^2 + TV(u)`.
pub fn tv_l2_energy(u: &ImageGrid, g: &ImageGrid, weight: f64) -> Result<f64> {
    let r = u.sub(g)?.norm();
    Ok(0.5 * weight * r * r + crate::grid::total_variation(u))
}

/// Per-pixel shrinkage `max(0, |p| - eta) * p / |p|`, with zero output where
/// `p = 0`.
pub fn soft_threshold(q: &VectorField, eta: f64) -> Result<VectorField> {
    if !(eta > 0.0) {
        return Err(Error::InvalidConfig(format!("threshold must be positive, got {eta}")));
    }
    let mut out = q.clone();
    let (ox, oy) = out.components_mut();
    for (x, y) in ox.iter_mut().zip(oy.iter_mut()) {
        let (a, b) = shrink_pair(*x, *y, eta);
        *x = a;
        *y = b;
    }
    Ok(out)
}

#[inline]
pub(crate) fn shrink_pair(x: f64, y: f64, eta: f64) -> (f64, f64) {
    let mag = x.hypot(y);
    if mag <= eta {
        (0.0, 0.0)
    } else {
        let s = (mag - eta) / mag;
        (x * s, y * s)
    }
}
