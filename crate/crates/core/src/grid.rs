//! Uniform tensor-product grids and the difference stencils shared by every module.
//!
//! Periodic axes carry `n` nodes on `[lo, hi)` with spacing `(hi - lo) / n`; closed
//! axes carry `n` nodes on `[lo, hi]` including both ends. Flat indices are row-major
//! with axis 0 slowest.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_DIM: usize = 2;
pub const MIN_NODES: usize = 8;

pub type Point = [f64; MAX_DIM];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimension {0} unsupported (1 or 2)")]
    BadDimension(usize),
    #[error("axis {axis} has {nodes} nodes, need at least {MIN_NODES}")]
    TooFewNodes { axis: usize, nodes: usize },
    #[error("axis {axis} has non-positive extent [{lo}, {hi}]")]
    NonPositiveSpacing { axis: usize, lo: f64, hi: f64 },
}

/// Centered difference order used by [`Grid::diff`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum StencilOrder {
    Second,
    Fourth,
    #[default]
    Sixth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
    pub periodic: bool,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, nodes: usize, periodic: bool) -> Self {
        Self { lo, hi, nodes, periodic }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn spacing(&self) -> f64 {
        if self.periodic {
            self.length() / self.nodes as f64
        } else {
            self.length() / (self.nodes - 1) as f64
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }

    /// Composite trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if !self.periodic && (i == 0 || i + 1 == self.nodes) {
            0.5 * h
        } else {
            h
        }
    }

    /// Fold a coordinate into `[lo, hi)` on periodic axes; identity otherwise.
    pub fn wrap(&self, x: f64) -> f64 {
        if self.periodic {
            self.lo + (x - self.lo).rem_euclid(self.length())
        } else {
            x
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
    order: StencilOrder,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self, GridError> {
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(GridError::BadDimension(axes.len()));
        }
        for (axis, ax) in axes.iter().enumerate() {
            if ax.nodes < MIN_NODES {
                return Err(GridError::TooFewNodes { axis, nodes: ax.nodes });
            }
            if !(ax.hi > ax.lo) || !ax.lo.is_finite() || !ax.hi.is_finite() {
                return Err(GridError::NonPositiveSpacing { axis, lo: ax.lo, hi: ax.hi });
            }
        }
        Ok(Self { axes, order: StencilOrder::default() })
    }

    pub fn with_order(mut self, order: StencilOrder) -> Self {
        self.order = order;
        self
    }

    pub fn order(&self) -> StencilOrder {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> [usize; MAX_DIM] {
        let mut s = [1; MAX_DIM];
        for (k, a) in self.axes.iter().enumerate() {
            s[k] = a.nodes;
        }
        s
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(|a| a.nodes).product()
    }

    pub fn min_spacing(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).fold(f64::INFINITY, f64::min)
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rem = flat;
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].nodes;
            idx[k] = rem % n;
            rem /= n;
        }
        idx
    }

    pub fn flat(&self, idx: [usize; MAX_DIM]) -> usize {
        let mut f = 0;
        for k in 0..self.dim() {
            f = f * self.axes[k].nodes + idx[k];
        }
        f
    }

    pub fn point(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let mut p = [0.0; MAX_DIM];
        for k in 0..self.dim() {
            p[k] = self.axes[k].coord(idx[k]);
        }
        p
    }

    pub fn sample(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.point(i))).collect()
    }

    /// Product trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let idx = self.multi_index(i);
                (0..self.dim()).map(|k| self.axes[k].weight(idx[k])).product()
            })
            .collect()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.axes
            .iter()
            .enumerate()
            .all(|(k, a)| a.periodic || (p[k] >= a.lo && p[k] <= a.hi))
    }

    pub fn wrap(&self, p: Point) -> Point {
        let mut q = p;
        for (k, a) in self.axes.iter().enumerate() {
            q[k] = a.wrap(p[k]);
        }
        q
    }

    /// First flat index of every grid line running along `axis`.
    pub fn line_starts(&self, axis: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.multi_index(i)[axis] == 0)
            .collect()
    }

    /// Centered first derivative along `axis`, one-sided of matching order at closed ends.
    pub fn diff(&self, f: &[f64], axis: usize) -> Vec<f64> {
        assert_eq!(f.len(), self.len(), "field length does not match grid");
        let ax = &self.axes[axis];
        let n = ax.nodes;
        let s = self.stride(axis);
        let h = ax.spacing();
        let mut out = vec![0.0; f.len()];
        let mut line = vec![0.0; n];
        let mut dline = vec![0.0; n];
        for start in self.line_starts(axis) {
            for i in 0..n {
                line[i] = f[start + i * s];
            }
            match self.order {
                StencilOrder::Second => diff_line_2(&line, &mut dline, h, ax.periodic),
                StencilOrder::Fourth => diff_line_4(&line, &mut dline, h, ax.periodic),
                StencilOrder::Sixth => diff_line_6(&line, &mut dline, h, ax.periodic),
            }
            for i in 0..n {
                out[start + i * s] = dline[i];
            }
        }
        out
    }

    /// `∂_a ∂_b f` as a composition of first-derivative stencils.
    pub fn diff2(&self, f: &[f64], a: usize, b: usize) -> Vec<f64> {
        self.diff(&self.diff(f, b), a)
    }

    /// Tensor-product four-point Lagrange interpolation; `None` outside a closed axis.
    pub fn interpolate(&self, f: &[f64], p: Point) -> Option<f64> {
        let mut idx = [[0usize; 4]; MAX_DIM];
        let mut wts = [[0.0; 4]; MAX_DIM];
        for (k, ax) in self.axes.iter().enumerate() {
            let n = ax.nodes as isize;
            let s = (p[k] - ax.lo) / ax.spacing();
            let tol = 1e-9;
            if !ax.periodic && (s < -tol || s > (n - 1) as f64 + tol) {
                return None;
            }
            let mut base = s.floor() as isize - 1;
            if !ax.periodic {
                base = base.clamp(0, n - 4);
            }
            for m in 0..4 {
                let node = base + m as isize;
                idx[k][m] = node.rem_euclid(n) as usize;
                let mut w = 1.0;
                for q in 0..4 {
                    if q != m {
                        w *= (s - (base + q as isize) as f64) / (m as f64 - q as f64);
                    }
                }
                wts[k][m] = w;
            }
        }
        let mut acc = 0.0;
        if self.dim() == 1 {
            for m in 0..4 {
                acc += wts[0][m] * f[idx[0][m]];
            }
        } else {
            let n1 = self.axes[1].nodes;
            for a in 0..4 {
                for b in 0..4 {
                    acc += wts[0][a] * wts[1][b] * f[idx[0][a] * n1 + idx[1][b]];
                }
            }
        }
        Some(acc)
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights().iter().zip(f).map(|(w, v)| w * v).sum()
    }
}

fn diff_line_2(f: &[f64], out: &mut [f64], h: f64, periodic: bool) {
    let n = f.len();
    let inv = 1.0 / (2.0 * h);
    if periodic {
        for i in 0..n {
            out[i] = (f[(i + 1) % n] - f[(i + n - 1) % n]) * inv;
        }
    } else {
        for i in 1..n - 1 {
            out[i] = (f[i + 1] - f[i - 1]) * inv;
        }
        out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv;
        out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv;
    }
}

fn diff_line_4(f: &[f64], out: &mut [f64], h: f64, periodic: bool) {
    let n = f.len();
    let inv = 1.0 / (12.0 * h);
    if periodic {
        for i in 0..n {
            let m2 = f[(i + n - 2) % n];
            let m1 = f[(i + n - 1) % n];
            let p1 = f[(i + 1) % n];
            let p2 = f[(i + 2) % n];
            out[i] = (m2 - 8.0 * m1 + 8.0 * p1 - p2) * inv;
        }
    } else {
        for i in 2..n - 2 {
            out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * inv;
        }
        out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * inv;
        out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * inv;
        out[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
            + 3.0 * f[n - 5])
            * inv;
        out[n - 2] =
            (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) * inv;
    }
}

const CENTRAL_6: [f64; 7] = [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0];
/// One-sided seven-point rows for the first three nodes of a closed line.
const EDGE_6: [[f64; 7]; 3] = [
    [-147.0, 360.0, -450.0, 400.0, -225.0, 72.0, -10.0],
    [-10.0, -77.0, 150.0, -100.0, 50.0, -15.0, 2.0],
    [2.0, -24.0, -35.0, 80.0, -30.0, 8.0, -1.0],
];

fn diff_line_6(f: &[f64], out: &mut [f64], h: f64, periodic: bool) {
    let n = f.len();
    let inv = 1.0 / (60.0 * h);
    let central = |i: usize| -> f64 {
        (0..7).map(|k| CENTRAL_6[k] * f[(i + n + k - 3) % n]).sum::<f64>() * inv
    };
    if periodic {
        for (i, o) in out.iter_mut().enumerate() {
            *o = central(i);
        }
        return;
    }
    for i in 3..n - 3 {
        out[i] = central(i);
    }
    for (i, row) in EDGE_6.iter().enumerate() {
        out[i] = (0..7).map(|k| row[k] * f[k]).sum::<f64>() * inv;
        out[n - 1 - i] = -(0..7).map(|k| row[k] * f[n - 1 - k]).sum::<f64>() * inv;
    }
}

/// Weighted L² norm `sqrt(Σ w v²)`.
pub fn l2_norm(weights: &[f64], v: &[f64]) -> f64 {
    weights.iter().zip(v).map(|(w, x)| w * x * x).sum::<f64>().sqrt()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn torus1(n: usize) -> Grid {
        Grid::new(vec![Axis::new(0.0, 1.0, n, true)]).unwrap()
    }

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(
            Grid::new(vec![Axis::new(0.0, 1.0, 4, true)]),
            Err(GridError::TooFewNodes { .. })
        ));
        assert!(Grid::new(vec![Axis::new(1.0, 1.0, 16, true)]).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 9, false), Axis::new(0.0, 2.0, 12, true)])
            .unwrap();
        for i in 0..g.len() {
            assert_eq!(g.flat(g.multi_index(i)), i);
        }
        assert_eq!(g.stride(0), 12);
        assert_eq!(g.stride(1), 1);
    }

    #[test]
    fn sixth_order_periodic_derivative_converges() {
        let err = |n| {
            let g = torus1(n);
            let f = g.sample(|p| (2.0 * PI * p[0]).sin());
            let d = g.diff(&f, 0);
            (0..n)
                .map(|i| (d[i] - 2.0 * PI * (2.0 * PI * g.point(i)[0]).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(16) / err(32);
        assert!(ratio > 56.0, "ratio {ratio}");
    }

    #[test]
    fn closed_axis_stencils_exact_on_polynomials() {
        for (order, deg) in [(StencilOrder::Fourth, 4), (StencilOrder::Sixth, 6)] {
            let g = Grid::new(vec![Axis::new(-1.0, 1.0, 11, false)]).unwrap().with_order(order);
            let f = g.sample(|p| p[0].powi(deg) - p[0]);
            let d = g.diff(&f, 0);
            for i in 0..11 {
                let x = g.point(i)[0];
                assert!((d[i] - (deg as f64 * x.powi(deg - 1) - 1.0)).abs() < 1e-11, "{order:?} node {i}");
            }
        }
    }

#[test]
    fn interpolation_is_exact_on_cubics() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 12, false), Axis::new(0.0, 1.0, 16, true)])
            .unwrap();
        let f = g.sample(|p| p[0].powi(3) - 2.0 * p[0] + 1.0);
        for x in [0.0, 0.013, 0.5, 0.97, 1.0] {
            let v = g.interpolate(&f, [x, 0.3]).unwrap();
            assert!((v - (x.powi(3) - 2.0 * x + 1.0)).abs() < 1e-12);
        }
        assert!(g.interpolate(&f, [1.2, 0.0]).is_none());
        let per = g.sample(|p| (2.0 * PI * p[1]).sin());
        let v = g.interpolate(&per, [0.5, 0.99]).unwrap();
        assert!((v - (2.0 * PI * 0.99).sin()).abs() < 1e-3);
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let g = Grid::new(vec![Axis::new(0.0, 3.0, 10, false), Axis::new(0.0, 1.0, 8, true)])
            .unwrap();
        assert!((g.weights().iter().sum::<f64>() - 3.0).abs() < 1e-14);
    }
}
