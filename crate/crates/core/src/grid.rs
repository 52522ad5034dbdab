//! 2D scalar and vector fields with the finite-difference operators shared by
//! every solver.
//!
//! Gradients use forward differences with a replicate (Neumann) boundary: the
//! difference across the last column (resp. row) is zero. The divergence is
//! defined as the exact negative adjoint of that gradient, so
//! `<grad u, q> = -<u, div q>` holds up to rounding for every pair, and
//! `laplacian = divergence o gradient` is symmetric negative semidefinite.

use crate::error::{Error, Result};

/// Row-major 2D field of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Per-pixel 2-vector field stored as two row-major planes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    width: usize,
    height: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "width and height must be positive",
        });
    }
    Ok(())
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "data length does not equal width * height",
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Grid with every entry equal to `value`.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self::filled(width, height, 1.0)
    }

    /// Builds a grid from `f(x, y)` where `x` is the column and `y` the row.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.width, self.height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Value at column `x`, row `y`.
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_shape(&self, other: &ImageGrid) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageGrid {
        ImageGrid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ImageGrid, f: impl Fn(f64, f64) -> f64) -> Result<ImageGrid> {
        self.check_shape(other)?;
        Ok(ImageGrid {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &ImageGrid) -> Result<ImageGrid> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ImageGrid) -> Result<ImageGrid> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Element-wise (Hadamard) product.
    pub fn mul(&self, other: &ImageGrid) -> Result<ImageGrid> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn div(&self, other: &ImageGrid) -> Result<ImageGrid> {
        self.check_shape(other)?;
        if let Some((index, &value)) = other.data.iter().enumerate().find(|(_, &b)| b == 0.0) {
            return Err(Error::Domain {
                op: "div",
                index,
                value,
            });
        }
        self.zip_map(other, |a, b| a / b)
    }

    pub fn max(&self, other: &ImageGrid) -> Result<ImageGrid> {
        self.zip_map(other, f64::max)
    }

    pub fn max_scalar(&self, floor: f64) -> ImageGrid {
        self.map(|a| a.max(floor))
    }

    pub fn ln(&self) -> Result<ImageGrid> {
        if let Some((index, &value)) = self.data.iter().enumerate().find(|(_, &a)| a <= 0.0 || a.is_nan()) {
            return Err(Error::Domain {
                op: "ln",
                index,
                value,
            });
        }
        Ok(self.map(f64::ln))
    }

    pub fn sqrt(&self) -> Result<ImageGrid> {
        if let Some((index, &value)) = self.data.iter().enumerate().find(|(_, &a)| a < 0.0 || a.is_nan()) {
            return Err(Error::Domain {
                op: "sqrt",
                index,
                value,
            });
        }
        Ok(self.map(f64::sqrt))
    }

    pub fn scale(&self, factor: f64) -> ImageGrid {
        self.map(|a| a * factor)
    }

    pub fn inner(&self, other: &ImageGrid) -> Result<f64> {
        self.check_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    /// Euclidean (L2) norm over all pixels.
    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }
}

impl VectorField {
    pub fn new(width: usize, height: usize, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if dx.len() != width * height || dy.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "component length does not equal width * height",
            });
        }
        Ok(Self {
            width,
            height,
            dx,
            dy,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "field dimensions must be positive");
        Self {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    pub fn zeros_like(image: &ImageGrid) -> Self {
        Self::zeros(image.width, image.height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    pub fn components_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.dx, &mut self.dy)
    }

    pub fn matches(&self, image: &ImageGrid) -> bool {
        self.width == image.width && self.height == image.height
    }

    fn check_field(&self, other: &VectorField) -> Result<()> {
        if self.width == other.width && self.height == other.height {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            })
        }
    }

    /// Per-pixel Euclidean magnitude `sqrt(dx^2 + dy^2)`.
    pub fn magnitude(&self) -> ImageGrid {
        ImageGrid {
            width: self.width,
            height: self.height,
            data: self
                .dx
                .iter()
                .zip(&self.dy)
                .map(|(a, b)| a.hypot(*b))
                .collect(),
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.dx
            .iter()
            .zip(&self.dy)
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Sum of per-pixel magnitudes (the isotropic TV of the field's source).
    pub fn l1_magnitude(&self) -> f64 {
        self.dx.iter().zip(&self.dy).map(|(a, b)| a.hypot(*b)).sum()
    }

    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        self.check_field(other)?;
        Ok(dot(&self.dx, &other.dx) + dot(&self.dy, &other.dy))
    }

    pub fn norm(&self) -> f64 {
        (dot(&self.dx, &self.dx) + dot(&self.dy, &self.dy)).sqrt()
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &VectorField) -> Result<VectorField> {
        self.check_field(other)?;
        Ok(VectorField {
            width: self.width,
            height: self.height,
            dx: self.dx.iter().zip(&other.dx).map(|(a, b)| a + factor * b).collect(),
            dy: self.dy.iter().zip(&other.dy).map(|(a, b)| a + factor * b).collect(),
        })
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, factor: f64) -> VectorField {
        VectorField {
            width: self.width,
            height: self.height,
            dx: self.dx.iter().map(|a| a * factor).collect(),
            dy: self.dy.iter().map(|a| a * factor).collect(),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Forward-difference gradient with replicate boundary.
pub fn gradient(u: &ImageGrid) -> VectorField {
    let (w, h) = (u.width, u.height);
    let mut field = VectorField::zeros(w, h);
    gradient_into(u.data(), w, h, &mut field.dx, &mut field.dy);
    field
}

pub(crate) fn gradient_into(u: &[f64], w: usize, h: usize, dx: &mut [f64], dy: &mut [f64]) {
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let i = row + x;
            dx[i] = if x + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            dy[i] = if y + 1 < h { u[i + w] - u[i] } else { 0.0 };
        }
    }
}

/// Divergence, the negative adjoint of [`gradient`].
pub fn divergence(q: &VectorField) -> ImageGrid {
    let (w, h) = (q.width, q.height);
    let mut out = ImageGrid::zeros(w, h);
    divergence_into(&q.dx, &q.dy, w, h, &mut out.data);
    out
}

pub(crate) fn divergence_into(qx: &[f64], qy: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let i = row + x;
            let mut d = 0.0;
            if x + 1 < w {
                d += qx[i];
            }
            if x > 0 {
                d -= qx[i - 1];
            }
            if y + 1 < h {
                d += qy[i];
            }
            if y > 0 {
                d -= qy[i - w];
            }
            out[i] = d;
        }
    }
}

/// `divergence(gradient(u))`.
pub fn laplacian(u: &ImageGrid) -> ImageGrid {
    divergence(&gradient(u))
}

/// Isotropic total variation `sum_i |grad u_i|`.
pub fn total_variation(u: &ImageGrid) -> f64 {
    gradient(u).l1_magnitude()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lcg_grid(w: usize, h: usize, seed: u64) -> ImageGrid {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ImageGrid::from_fn(w, h, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    fn lcg_field(w: usize, h: usize, seed: u64) -> VectorField {
        let a = lcg_grid(w, h, seed);
        let b = lcg_grid(w, h, seed ^ 0xdead_beef);
        VectorField::new(w, h, a.into_data(), b.into_data()).unwrap()
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = gradient(&ImageGrid::filled(4, 4, 0.7));
        assert!(g.dx().iter().chain(g.dy()).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_single_forward_difference() {
        let u = ImageGrid::new(2, 1, vec![0.0, 1.0]).unwrap();
        let g = gradient(&u);
        assert_eq!(g.dx(), &[1.0, 0.0]);
        assert_eq!(g.dy(), &[0.0, 0.0]);
    }

    #[test]
    fn adjoint_identity_8x8_and_5x7() {
        for &(w, h) in &[(8, 8), (5, 7), (1, 6), (6, 1)] {
            let u = lcg_grid(w, h, 3);
            let q = lcg_field(w, h, 11);
            // brute-force inner products, no helpers from the implementation
            let g = gradient(&u);
            let d = divergence(&q);
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for i in 0..w * h {
                lhs += g.dx()[i] * q.dx()[i] + g.dy()[i] * q.dy()[i];
                rhs += u.data()[i] * d.data()[i];
            }
            assert!((lhs + rhs).abs() < 1e-12, "{w}x{h}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn divergence_of_zero_field() {
        let d = divergence(&VectorField::zeros(3, 5));
        assert!(d.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_of_constant_field_vanishes_in_interior() {
        let q = VectorField::new(5, 5, vec![0.3; 25], vec![-1.2; 25]).unwrap();
        let d = divergence(&q);
        for y in 1..4 {
            for x in 1..4 {
                assert_eq!(d.at(x, y), 0.0);
            }
        }
    }

    #[test]
    fn laplacian_matches_five_point_stencil() {
        let u = lcg_grid(6, 6, 5);
        let lap = laplacian(&u);
        // independent Neumann 5-point stencil: sum over existing neighbours
        for y in 0..6 {
            for x in 0..6 {
                let c = u.at(x, y);
                let mut s = 0.0;
                if x > 0 {
                    s += u.at(x - 1, y) - c;
                }
                if x < 5 {
                    s += u.at(x + 1, y) - c;
                }
                if y > 0 {
                    s += u.at(x, y - 1) - c;
                }
                if y < 5 {
                    s += u.at(x, y + 1) - c;
                }
                assert!((lap.at(x, y) - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn laplacian_constant_is_zero() {
        assert!(laplacian(&ImageGrid::filled(5, 3, 2.5)).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_symmetric_and_nonpositive() {
        let u = lcg_grid(7, 9, 1);
        let v = lcg_grid(7, 9, 2);
        let a = u.inner(&laplacian(&v)).unwrap();
        let b = laplacian(&u).inner(&v).unwrap();
        assert!((a - b).abs() < 1e-12);
        let uu = u.inner(&laplacian(&u)).unwrap();
        let g = gradient(&u).norm();
        assert!(uu <= 0.0);
        assert!((uu + g * g).abs() < 1e-12);
    }

    #[test]
    fn elementwise_family() {
        let a = ImageGrid::new(2, 2, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let b = ImageGrid::new(2, 2, vec![4.0, 1.0, -1.0, 2.0]).unwrap();
        assert_eq!(a.mul(&ImageGrid::ones(2, 2)).unwrap(), a);
        assert_eq!(ImageGrid::zeros(3, 3).norm(), 0.0);
        // 1*4 + (-2)*1 + 3*(-1) + 0.5*2 = 0
        assert_eq!(a.inner(&b).unwrap(), 0.0);
        assert_eq!(a.add(&b).unwrap().data(), &[5.0, -1.0, 2.0, 2.5]);
        assert_eq!(a.sub(&b).unwrap().data(), &[-3.0, -3.0, 4.0, -1.5]);
        assert_eq!(a.max(&b).unwrap().data(), &[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(a.min_entry(), -2.0);
        assert_eq!(a.scale(2.0).data(), &[2.0, -4.0, 6.0, 1.0]);
    }

    #[test]
    fn elementwise_errors() {
        let a = ImageGrid::ones(2, 2);
        let b = ImageGrid::ones(3, 2);
        assert!(matches!(a.add(&b), Err(Error::ShapeMismatch { .. })));
        let z = ImageGrid::new(2, 2, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(a.div(&z), Err(Error::Domain { op: "div", index: 1, .. })));
        assert!(matches!(z.ln(), Err(Error::Domain { op: "ln", .. })));
        assert!(matches!(z.scale(-1.0).sqrt(), Err(Error::Domain { op: "sqrt", .. })));
        assert!(ImageGrid::new(2, 2, vec![0.0; 3]).is_err());
        assert!(ImageGrid::new(0, 2, vec![]).is_err());
    }

    proptest! {
        #[test]
        fn adjointness_random_grids(w in 1usize..=64, h in 1usize..=64, seed in any::<u64>()) {
            let u = lcg_grid(w, h, seed);
            let q = lcg_field(w, h, seed.wrapping_add(1));
            let lhs = gradient(&u).inner(&q).unwrap();
            let rhs = u.inner(&divergence(&q)).unwrap();
            prop_assert!((lhs + rhs).abs() <= 1e-10 * (u.norm() * q.norm() + 1.0));
        }

        #[test]
        fn operators_are_deterministic(w in 1usize..=16, h in 1usize..=16, seed in any::<u64>()) {
            let u = lcg_grid(w, h, seed);
            prop_assert_eq!(laplacian(&u), laplacian(&u.clone()));
        }
    }
}
