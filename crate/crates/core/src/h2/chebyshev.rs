//! Tensor Chebyshev interpolation on boxes.

use super::cluster::BBox;
use super::points::Point;

/// Chebyshev points `cos(pi (2i + 1) / (2 order))` on `[-1, 1]`, descending.
pub fn chebyshev_grid(order: usize) -> Vec<f64> {
    assert!(order >= 1, "Chebyshev order must be >= 1");
    (0..order)
        .map(|i| {
            let v = (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * order) as f64).cos();
            // cos(pi/2) is 6e-17, not 0
            if v.abs() < 1e-15 {
                0.0
            } else {
                v
            }
        })
        .collect()
}

/// Lagrange basis on Chebyshev nodes mapped to one interval.
#[derive(Debug, Clone)]
pub(crate) struct Interp1d {
    nodes: Vec<f64>,
}

impl Interp1d {
    pub fn new(lo: f64, hi: f64, order: usize) -> Self {
        let mid = 0.5 * (lo + hi);
        // Degenerate intervals are widened so the nodes stay distinct.
        let half = (0.5 * (hi - lo)).max(1e-9 * mid.abs().max(1.0));
        let nodes = chebyshev_grid(order)
            .iter()
            .map(|t| mid + half * t)
            .collect();
        Self { nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `L_j(x)` for every node `j`.
    pub fn weights(&self, x: f64, out: &mut [f64]) {
        for (j, w) in out.iter_mut().enumerate() {
            let xj = self.nodes[j];
            let mut v = 1.0;
            for (m, &xm) in self.nodes.iter().enumerate() {
                if m != j {
                    v *= (x - xm) / (xj - xm);
                }
            }
            *w = v;
        }
    }
}

/// `order x order` tensor grid on a box; index `a * order + b` refers to
/// x-node `a` and y-node `b`.
#[derive(Debug, Clone)]
pub(crate) struct TensorGrid {
    ix: Interp1d,
    iy: Interp1d,
    order: usize,
}

impl TensorGrid {
    pub fn new(bbox: &BBox, order: usize) -> Self {
        Self {
            ix: Interp1d::new(bbox.min[0], bbox.max[0], order),
            iy: Interp1d::new(bbox.min[1], bbox.max[1], order),
            order,
        }
    }

    pub fn rank(&self) -> usize {
        self.order * self.order
    }

    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.rank());
        for &x in self.ix.nodes() {
            for &y in self.iy.nodes() {
                out.push(Point::new(x, y));
            }
        }
        out
    }

    /// Values of all tensor Lagrange polynomials at `p`.
    pub fn eval(&self, p: &Point, out: &mut [f64]) {
        let k = self.order;
        let mut wx = vec![0.0; k];
        let mut wy = vec![0.0; k];
        self.ix.weights(p.x, &mut wx);
        self.iy.weights(p.y, &mut wy);
        for a in 0..k {
            for b in 0..k {
                out[a * k + b] = wx[a] * wy[b];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        assert_eq!(chebyshev_grid(1), vec![0.0]);
        let g = chebyshev_grid(3);
        let h = 3f64.sqrt() / 2.0;
        assert!((g[0] - h).abs() < 1e-15 && g[1] == 0.0 && (g[2] + h).abs() < 1e-15);
        let g = chebyshev_grid(8);
        for i in 0..8 {
            assert!(g[i].abs() < 1.0);
            assert!((g[i] + g[7 - i]).abs() < 1e-15);
            if i > 0 {
                assert!(g[i] < g[i - 1]);
            }
        }
    }

    #[test]
    fn lagrange_is_cardinal() {
        let it = Interp1d::new(0.2, 0.7, 6);
        let mut w = vec![0.0; 6];
        for (j, &x) in it.nodes().to_vec().iter().enumerate() {
            it.weights(x, &mut w);
            for (m, &v) in w.iter().enumerate() {
                assert!((v - if m == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reproduces_polynomials() {
        let b = BBox {
            min: [0.1, 0.3],
            max: [0.4, 0.5],
        };
        let grid = TensorGrid::new(&b, 4);
        let f = |p: &Point| p.x.powi(3) - 2.0 * p.x * p.y.powi(2) + p.y;
        let vals: Vec<f64> = grid.points().iter().map(f).collect();
        let mut w = vec![0.0; 16];
        let p = Point::new(0.27, 0.41);
        grid.eval(&p, &mut w);
        let interp: f64 = w.iter().zip(&vals).map(|(a, b)| a * b).sum();
        assert!((interp - f(&p)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_box() {
        let b = BBox {
            min: [0.5, 0.5],
            max: [0.5, 0.9],
        };
        let grid = TensorGrid::new(&b, 3);
        let mut w = vec![0.0; 9];
        grid.eval(&Point::new(0.5, 0.7), &mut w);
        assert!(w.iter().all(|v| v.is_finite()));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
