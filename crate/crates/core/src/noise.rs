//! Mixed Poisson-Gaussian corruption and synthetic test phantoms.
//!
//! A corrupted pixel is `Poisson(eta * u) / eta + N(0, sigma^2)`. The result is
//! not clamped, so it may contain negative values when `sigma > 0`.
//!
//! Sampling is reproducible across platforms: every pixel draws from its own
//! ChaCha8 stream (key derived from the seed, stream id = pixel index), so the
//! output is a pure function of the clean image and the [`NoiseSpec`] no matter
//! how pixels are scheduled. Poisson variates use sequential inversion for
//! means below 10 and Hörmann's PTRS transformed rejection above.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Noise parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Photons per unit intensity.
    pub eta: f64,
    /// Standard deviation of the additive Gaussian term.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(eta: f64, sigma: f64, seed: u64) -> Result<Self> {
        let spec = Self { eta, sigma, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be nonnegative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Corrupts a clean image with mixed Poisson-Gaussian noise.
pub fn corrupt(clean: &ImageGrid, spec: &NoiseSpec) -> Result<ImageGrid> {
    spec.validate()?;
    if let Some((index, &value)) = clean
        .data()
        .iter()
        .enumerate()
        .find(|(_, &v)| v < 0.0 || !v.is_finite())
    {
        return Err(Error::NegativeIntensity { index, value });
    }
    let base = ChaCha8Rng::seed_from_u64(spec.seed);
    let data = clean
        .data()
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let mut rng = base.clone();
            rng.set_stream(i as u64);
            let counts = sample_poisson(&mut rng, spec.eta * u);
            let gauss: f64 = if spec.sigma > 0.0 {
                rng.sample(StandardNormal)
            } else {
                0.0
            };
            counts as f64 / spec.eta + spec.sigma * gauss
        })
        .collect();
    ImageGrid::new(clean.width(), clean.height(), data)
}

/// Draws one Poisson variate with the given mean.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        0
    } else if mean < 10.0 {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    // the tail beyond 200 has probability far below f64 resolution for mean < 10
    while u > cdf && k < 200 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -mean + k * loglam - ln_factorial(k as u64) {
            return k as u64;
        }
    }
}

/// `ln(k!)`, exact summation for small `k`, Stirling series otherwise.
pub(crate) fn ln_factorial(k: u64) -> f64 {
    if k < 16 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    let n = k as f64 + 1.0;
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    (n - 0.5) * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// Synthetic clean images used in place of external test data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    /// Piecewise-constant disks of distinct intensity on a dark background.
    Circles,
    /// Constant 0.5.
    Flat,
    /// Horizontal linear ramp from 0 to 1.
    Ramp,
    /// Two-valued checkerboard with square blocks of the given side.
    Checker { block: usize },
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "circles" => Ok(Self::Circles),
            "flat" => Ok(Self::Flat),
            "ramp" => Ok(Self::Ramp),
            "checker" => Ok(Self::Checker { block: 4 }),
            other => match other.strip_prefix("checker:").map(str::parse::<usize>) {
                Some(Ok(block)) if block > 0 => Ok(Self::Checker { block }),
                _ => Err(Error::UnknownPhantom(s.to_string())),
            },
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Circles => f.write_str("circles"),
            Self::Flat => f.write_str("flat"),
            Self::Ramp => f.write_str("ramp"),
            Self::Checker { block: 4 } => f.write_str("checker"),
            Self::Checker { block } => write!(f, "checker:{block}"),
        }
    }
}

pub const CIRCLES_BACKGROUND: f64 = 0.1;

// (center x, center y, radius) as fractions of the image size, and intensity
const DISKS: [(f64, f64, f64, f64); 5] = [
    (0.30, 0.30, 0.18, 0.9),
    (0.72, 0.28, 0.14, 0.6),
    (0.28, 0.74, 0.15, 0.4),
    (0.70, 0.70, 0.20, 0.75),
    (0.52, 0.50, 0.07, 1.0),
];

/// Builds a deterministic phantom with entries in `[0, 1]`.
pub fn make_phantom(kind: PhantomKind, width: usize, height: usize) -> Result<ImageGrid> {
    if width < 8 || height < 8 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "phantoms need at least 8x8 pixels",
        });
    }
    let img = match kind {
        PhantomKind::Flat => ImageGrid::filled(width, height, 0.5),
        PhantomKind::Ramp => ImageGrid::from_fn(width, height, |x, _| x as f64 / (width - 1) as f64),
        PhantomKind::Checker { block } => {
            if block == 0 {
                return Err(Error::InvalidConfig("checker block must be positive".into()));
            }
            ImageGrid::from_fn(width, height, |x, y| {
                if (x / block + y / block) % 2 == 0 {
                    0.25
                } else {
                    0.75
                }
            })
        }
        PhantomKind::Circles => {
            let scale = width.min(height) as f64;
            ImageGrid::from_fn(width, height, |x, y| {
                let px = x as f64 + 0.5;
                let py = y as f64 + 0.5;
                let mut value = CIRCLES_BACKGROUND;
                // later disks overwrite earlier ones
                for &(cx, cy, r, level) in &DISKS {
                    let dx = px - cx * width as f64;
                    let dy = py - cy * height as f64;
                    if dx * dx + dy * dy <= (r * scale) * (r * scale) {
                        value = level;
                    }
                }
                value
            })
        }
    };
    Ok(img)
}
