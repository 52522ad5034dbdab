//! Image-quality metrics and the TV-IC model objective.

use crate::error::{Error, Result};
use crate::grid::{total_variation, ImageGrid};

/// Value reported by [`snr`] for an exact reconstruction.
pub const SNR_CAP_DB: f64 = 300.0;

/// Floor applied to `u` inside the logarithm of the objective (reporting only).
pub const LOG_FLOOR: f64 = 1e-12;

/// Signal-to-noise ratio in dB:
/// `-10 log10( sum |u - truth|^2 / sum |u|^2 )`.
///
/// The denominator is the energy of the reconstruction `u`, not of the
/// ground truth.
pub fn snr(u: &ImageGrid, truth: &ImageGrid) -> Result<f64> {
    u.check_shape(truth)?;
    let energy: f64 = u.data().iter().map(|a| a * a).sum();
    if energy == 0.0 {
        return Err(Error::Metric("SNR undefined for an all-zero reconstruction".into()));
    }
    let err: f64 = u
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((-10.0 * (err / energy).log10()).min(SNR_CAP_DB))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "SSIM window must be odd and at least 3, got {}",
                self.window
            )));
        }
        if !(self.k1 > 0.0 && self.k1 < 1.0 && self.k2 > 0.0 && self.k2 < 1.0) {
            return Err(Error::InvalidConfig("SSIM k1 and k2 must lie in (0, 1)".into()));
        }
        if !(self.sigma > 0.0 && self.dynamic_range > 0.0) {
            return Err(Error::InvalidConfig("SSIM sigma and dynamic range must be positive".into()));
        }
        Ok(())
    }

    fn kernel(&self) -> Vec<f64> {
        let r = (self.window / 2) as isize;
        let one_d: Vec<f64> = (-r..=r)
            .map(|d| (-(d * d) as f64 / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let mut k = Vec::with_capacity(self.window * self.window);
        for a in &one_d {
            for b in &one_d {
                k.push(a * b);
            }
        }
        let total: f64 = k.iter().sum();
        k.iter().map(|v| v / total).collect()
    }
}

/// Mean structural similarity over all fully-contained Gaussian windows.
pub fn ssim(u: &ImageGrid, truth: &ImageGrid, cfg: &SsimConfig) -> Result<f64> {
    cfg.validate()?;
    u.check_shape(truth)?;
    let win = cfg.window;
    let (w, h) = (u.width(), u.height());
    if w < win || h < win {
        return Err(Error::Metric(format!(
            "image {w}x{h} is smaller than the {win}x{win} SSIM window"
        )));
    }
    let kernel = cfg.kernel();
    let c1 = (cfg.k1 * cfg.dynamic_range).powi(2);
    let c2 = (cfg.k2 * cfg.dynamic_range).powi(2);
    let (a, b) = (u.data(), truth.data());
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - win {
        for x0 in 0..=w - win {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for ky in 0..win {
                let row = (y0 + ky) * w + x0;
                for kx in 0..win {
                    let g = kernel[ky * win + kx];
                    let (pa, pb) = (a[row + kx], b[row + kx]);
                    ma += g * pa;
                    mb += g * pb;
                    saa += g * pa * pa;
                    sbb += g * pb * pb;
                    sab += g * pa * pb;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Weights of the TV-IC model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelWeights {
    /// Gaussian fidelity weight.
    pub lambda1: f64,
    /// Poisson fidelity weight.
    pub lambda2: f64,
    /// Positivity floor on `v`.
    pub epsilon: f64,
}

/// TV-IC objective
/// `(l1/2) sum (f - v)^2 + l2 sum (u - v ln(u/v) - v) + TV(u) + indicator(v >= eps)`.
///
/// Returns `+inf` when `v` violates the floor. `u` is floored at
/// [`LOG_FLOOR`] inside the logarithm only.
pub fn objective_h(u: &ImageGrid, v: &ImageGrid, f: &ImageGrid, model: &ModelWeights) -> Result<f64> {
    u.check_shape(v)?;
    u.check_shape(f)?;
    if v.data().iter().any(|&vi| !(vi >= model.epsilon)) {
        return Ok(f64::INFINITY);
    }
    let mut gauss = 0.0;
    let mut poisson = 0.0;
    for ((&ui, &vi), &fi) in u.data().iter().zip(v.data()).zip(f.data()) {
        gauss += (fi - vi) * (fi - vi);
        poisson += ui - vi * (ui.max(LOG_FLOOR) / vi).ln() - vi;
    }
    Ok(0.5 * model.lambda1 * gauss + model.lambda2 * poisson + total_variation(u))
}
