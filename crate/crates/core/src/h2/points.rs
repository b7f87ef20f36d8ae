//! Observation points and the covariance kernel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn coord(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.x
        } else {
            self.y
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointSet {
    points: Vec<Point>,
}

impl PointSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::InvalidArgument(
                "point coordinates must be finite".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn as_slice(&self) -> &[Point] {
        &self.points
    }
}

/// `n` points on a `ceil(sqrt n)`-wide regular grid over the unit square,
/// each moved by a uniform offset of at most a quarter spacing per axis.
/// Grid cells are filled row by row.
pub fn perturbed_grid(n: usize, seed: u64) -> PointSet {
    let side = (n as f64).sqrt().ceil().max(1.0) as usize;
    let h = 1.0 / side as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|k| {
            let (i, j) = (k % side, k / side);
            let dx: f64 = rng.gen_range(-0.25..0.25);
            let dy: f64 = rng.gen_range(-0.25..0.25);
            Point::new((i as f64 + 0.5 + dx) * h, (j as f64 + 0.5 + dy) * h)
        })
        .collect();
    PointSet { points }
}

/// Isotropic exponential covariance `exp(-|p - q| / ell)`.
#[inline]
pub fn exp_kernel(p: &Point, q: &Point, ell: f64) -> f64 {
    (-p.dist(q) / ell).exp()
}
