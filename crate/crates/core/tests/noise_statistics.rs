mod common;

use mpg_core::{corrupt, make_phantom, snr, ImageGrid, NoiseSpec, PhantomKind};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn circles() -> ImageGrid {
    make_phantom(PhantomKind::Circles, 64, 64).unwrap()
}

/// Per-pixel sample means of `n` independent corruptions.
fn seed_average(clean: &ImageGrid, eta: f64, sigma: f64, n: u64) -> Vec<f64> {
    let mut acc = vec![0.0; clean.len()];
    for seed in 0..n {
        let f = corrupt(clean, &NoiseSpec::new(eta, sigma, 1000 + seed).unwrap()).unwrap();
        for (a, x) in acc.iter_mut().zip(f.data()) {
            *a += x;
        }
    }
    acc.iter().map(|a| a / n as f64).collect()
}

#[test]
fn sample_mean_within_three_standard_errors() {
    let clean = circles();
    let (eta, sigma, n) = (16.0, 1e-4, 100);
    let mean = seed_average(&clean, eta, sigma, n);
    let mut outside = 0;
    for (m, &u) in mean.iter().zip(clean.data()) {
        let se = ((u / eta + sigma * sigma) / n as f64).sqrt();
        if (m - u).abs() > 3.0 * se {
            outside += 1;
        }
    }
    // 3-sigma exceedance is ~0.27% per pixel for a normal mean; allow slack for
    // the Poisson skew at small counts
    assert!(outside as f64 <= 0.01 * clean.len() as f64, "{outside} pixels outside 3 SE");
}

#[test]
fn chi_square_of_standardized_means() {
    let clean = circles();
    let (eta, sigma, n) = (16.0, 0.05, 200);
    let mean = seed_average(&clean, eta, sigma, n);
    let stat: f64 = mean
        .iter()
        .zip(clean.data())
        .map(|(m, &u)| (m - u).powi(2) / ((u / eta + sigma * sigma) / n as f64))
        .sum();
    let chi = ChiSquared::new(clean.len() as f64).unwrap();
    let (lo, hi) = (chi.inverse_cdf(0.0005), chi.inverse_cdf(0.9995));
    assert!(stat > lo && stat < hi, "chi-square {stat} outside [{lo}, {hi}]");
}

#[test]
fn snr_increases_with_eta() {
    let clean = circles();
    let mut prev = f64::NEG_INFINITY;
    for eta in [1.0, 4.0, 16.0, 64.0] {
        let avg: f64 = (0..20)
            .map(|s| snr(&corrupt(&clean, &NoiseSpec::new(eta, 1e-4, s).unwrap()).unwrap(), &clean).unwrap())
            .sum::<f64>()
            / 20.0;
        assert!(avg > prev, "eta {eta}: {avg} <= {prev}");
        prev = avg;
    }
}

#[test]
fn gaussian_only_variance() {
    // huge eta leaves only the additive term, whose variance is sigma^2
    let clean = ImageGrid::filled(64, 64, 0.5);
    let f = corrupt(&clean, &NoiseSpec::new(1e12, 0.2, 9).unwrap()).unwrap();
    let r = f.sub(&clean).unwrap();
    let var = r.norm().powi(2) / r.len() as f64;
    assert!((var - 0.04).abs() < 0.004, "{var}");
    assert!(r.mean().abs() < 0.02);
}

#[test]
fn output_is_unclamped_and_reproducible() {
    let clean = ImageGrid::filled(32, 32, 0.0);
    let spec = NoiseSpec::new(4.0, 0.1, 3).unwrap();
    let f = corrupt(&clean, &spec).unwrap();
    assert!(f.min_entry() < 0.0);
    assert_eq!(f, corrupt(&clean, &spec).unwrap());
    assert_ne!(f, corrupt(&clean, &NoiseSpec::new(4.0, 0.1, 4).unwrap()).unwrap());
}

#[test]
fn pixel_streams_are_independent_of_image_content() {
    // pixel i's noise depends only on (seed, i), so editing one pixel leaves
    // the others untouched
    let a = common::uniform_grid(16, 16, 0.1, 0.9, 1);
    let mut b = a.clone();
    b.data_mut()[37] = 0.33;
    let spec = NoiseSpec::new(8.0, 0.01, 11).unwrap();
    let (fa, fb) = (corrupt(&a, &spec).unwrap(), corrupt(&b, &spec).unwrap());
    for i in 0..a.len() {
        if i != 37 {
            assert_eq!(fa.data()[i], fb.data()[i]);
        }
    }
}
