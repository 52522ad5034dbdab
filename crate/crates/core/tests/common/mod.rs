//! Shared helpers for the integration tests: seeded random inputs and
//! brute-force scalar minimizers that know nothing about the closed forms.

#![allow(dead_code)]

use mpg_core::ImageGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_grid(w: usize, h: usize, lo: f64, hi: f64, seed: u64) -> ImageGrid {
    let mut r = rng(seed);
    ImageGrid::from_fn(w, h, |_, _| r.random_range(lo..hi))
}

/// Dense-grid minimizer of a unimodal function on `[lo, hi]`: evaluate 2001
/// equispaced points, then shrink the bracket around the best point and repeat.
pub fn grid_argmin(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const N: usize = 2000;
    let mut best = lo;
    for _ in 0..40 {
        let step = (hi - lo) / N as f64;
        let mut best_val = f64::INFINITY;
        for i in 0..=N {
            let x = lo + step * i as f64;
            let v = f(x);
            if v < best_val {
                best_val = v;
                best = x;
            }
        }
        let (nlo, nhi) = ((best - 2.0 * step).max(lo), (best + 2.0 * step).min(hi));
        if nhi - nlo < 1e-13 * (1.0 + best.abs()) {
            break;
        }
        lo = nlo;
        hi = nhi;
    }
    best
}

/// Same as [`grid_argmin`] but searches `ln x` over `[ln lo, ln hi]`, for
/// positive variables whose minimizer may sit anywhere across several decades.
pub fn grid_argmin_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    grid_argmin(|t| f(t.exp()), lo.ln(), hi.ln()).exp()
}

/// Dense 2D grid minimizer on the square `[-r, r]^2` centred at `c`, with
/// successive zooms.
pub fn grid_argmin_2d(f: impl Fn(f64, f64) -> f64, c: (f64, f64), r: f64) -> (f64, f64) {
    const N: usize = 200;
    let (mut cx, mut cy, mut half) = (c.0, c.1, r);
    for _ in 0..30 {
        let step = 2.0 * half / N as f64;
        let mut best = (cx, cy);
        let mut best_val = f64::INFINITY;
        for i in 0..=N {
            let x = cx - half + step * i as f64;
            for j in 0..=N {
                let y = cy - half + step * j as f64;
                let v = f(x, y);
                if v < best_val {
                    best_val = v;
                    best = (x, y);
                }
            }
        }
        cx = best.0;
        cy = best.1;
        half = 3.0 * step;
        if half < 1e-13 {
            break;
        }
    }
    (cx, cy)
}

/// Relative distance used by the scalar oracle comparisons.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Draws a scalar instance from `rng`: `(f, u, w, lambda1, lambda2, alpha, eps)`.
pub fn v_instance(r: &mut ChaCha8Rng) -> (f64, f64, f64, f64, f64, f64, f64) {
    (
        r.random_range(-0.2..1.2),
        r.random_range(0.0..1.5),
        r.random_range(0.2..3.0),
        r.random_range(0.5..20.0),
        r.random_range(0.5..20.0),
        10f64.powf(r.random_range(0.0..3.0)),
        10f64.powf(r.random_range(-6.0..-1.0)),
    )
}

/// Objective of the per-pixel `v` subproblem of the augmented Lagrangian.
pub fn v_objective(v: f64, f: f64, u: f64, w: f64, mult: f64, l1: f64, l2: f64, alpha: f64) -> f64 {
    0.5 * l1 * (f - v).powi(2) - l2 * (v * w.ln() + v) + mult * v * w + 0.5 * alpha * (v * w - u).powi(2)
}

/// Objective of the per-pixel `w` subproblem.
pub fn w_objective(w: f64, u: f64, v: f64, mult: f64, l2: f64, alpha: f64) -> f64 {
    -l2 * v * w.ln() + mult * v * w + 0.5 * alpha * (v * w - u).powi(2)
}

/// Objective of the per-pixel `p` subproblem given `g = grad u` at the pixel.
pub fn p_objective(p: (f64, f64), g: (f64, f64), mult: (f64, f64), alpha_p: f64) -> f64 {
    let (dx, dy) = (p.0 - g.0, p.1 - g.1);
    p.0.hypot(p.1) + mult.0 * dx + mult.1 * dy + 0.5 * alpha_p * (dx * dx + dy * dy)
}

/// Objective of the TV+KL `z` subproblem.
pub fn z_objective(z: f64, u: f64, mu: f64, f: f64, lambda: f64, rho: f64) -> f64 {
    let kl = if f > 0.0 { z - f * z.ln() } else { z };
    lambda * kl + mu * z + 0.5 * rho * (z - u).powi(2)
}

/// Worst relative gap between the `v` closed form and its oracle over `n`
/// instances. The multiplier is set to `lambda2 / w`, the relation every
/// iterate after the first satisfies.
pub fn worst_v_gap(n: usize, seed: u64) -> f64 {
    use mpg_core::solvers::closed_form::{v_update_reduced, VParams};
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (f, u, w, l1, l2, alpha, eps) = v_instance(&mut r);
        let mult = l2 / w;
        let got = v_update_reduced(f, u, w, &VParams { lambda1: l1, lambda2: l2, alpha, epsilon: eps });
        let oracle = grid_argmin(|v| v_objective(v, f, u, w, mult, l1, l2, alpha), eps, 100.0);
        worst = worst.max((got - oracle).abs() / (1.0 + oracle.abs()));
    }
    worst
}

/// Same for the first-iteration `v` formula with an arbitrary multiplier.
pub fn worst_v_full_gap(n: usize, seed: u64) -> f64 {
    use mpg_core::solvers::closed_form::{v_update_full, VParams};
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (f, u, w, l1, l2, alpha, eps) = v_instance(&mut r);
        let mult = r.random_range(-10.0..10.0);
        let got = v_update_full(f, u, w, mult, &VParams { lambda1: l1, lambda2: l2, alpha, epsilon: eps });
        let oracle = grid_argmin(|v| v_objective(v, f, u, w, mult, l1, l2, alpha), eps, 100.0);
        worst = worst.max((got - oracle).abs() / (1.0 + oracle.abs()));
    }
    worst
}

pub fn worst_w_gap(n: usize, seed: u64) -> f64 {
    use mpg_core::solvers::closed_form::w_update;
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let u = r.random_range(-0.5..1.5);
        let v = 10f64.powf(r.random_range(-3.0..0.3));
        let mult = r.random_range(-20.0..20.0);
        let l2 = r.random_range(0.5..20.0);
        let alpha = 10f64.powf(r.random_range(0.0..3.0));
        let got = w_update(u, v, mult, l2, alpha);
        let oracle = grid_argmin_log(|w| w_objective(w, u, v, mult, l2, alpha), 1e-8, 1e6);
        worst = worst.max((got - oracle).abs() / (1.0 + oracle.abs()));
    }
    worst
}

pub fn worst_p_gap(n: usize, seed: u64) -> f64 {
    use mpg_core::solvers::closed_form::p_update;
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let g = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let mult = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        let alpha_p = 10f64.powf(r.random_range(-0.5..2.0));
        let got = p_update((g.0 - mult.0 / alpha_p, g.1 - mult.1 / alpha_p), alpha_p);
        let radius = 2.0 + g.0.hypot(g.1) + mult.0.hypot(mult.1) / alpha_p;
        let oracle = grid_argmin_2d(|x, y| p_objective((x, y), g, mult, alpha_p), (0.0, 0.0), radius);
        let gap = (got.0 - oracle.0).hypot(got.1 - oracle.1);
        worst = worst.max(gap / (1.0 + oracle.0.hypot(oracle.1)));
    }
    worst
}

pub fn worst_z_gap(n: usize, seed: u64) -> f64 {
    use mpg_core::solvers::closed_form::kl_z_update;
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let u = r.random_range(-0.5..1.5);
        let mu = r.random_range(-5.0..5.0);
        // every tenth instance has zero data, where the minimizer can sit at 0
        let f = if i % 10 == 0 { 0.0 } else { r.random_range(0.0..2.0) };
        let lambda = r.random_range(0.5..20.0);
        let rho = 10f64.powf(r.random_range(0.0..3.0));
        let got = kl_z_update(u, mu, f, lambda, rho);
        let oracle = grid_argmin(|z| z_objective(z, u, mu, f, lambda, rho), 0.0, 50.0);
        worst = worst.max((got - oracle).abs() / (1.0 + oracle.abs()));
    }
    worst
}
