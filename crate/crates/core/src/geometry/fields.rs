//! Grid-sampled chart-local fields.
//!
//! Every field records the chart it lives on; operators compare that id and the sample
//! count against the geometry they are evaluated with.

use serde::{Deserialize, Serialize};

use crate::grid::{Grid, MAX_DIM};

/// Number of stored components of a symmetric 2-tensor in dimension `d`.
pub fn pair_count(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Storage slot of the unordered pair `(i, j)`.
pub fn sym(d: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    // row-major upper triangle
    a * d - a * (a + 1) / 2 + b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub chart: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(chart: usize, values: Vec<f64>) -> Self {
        Self { chart, values }
    }

    pub fn zeros(chart: usize, n: usize) -> Self {
        Self { chart, values: vec![0.0; n] }
    }

    pub fn constant(chart: usize, n: usize, c: f64) -> Self {
        Self { chart, values: vec![c; n] }
    }

    pub fn from_fn(chart: usize, grid: &Grid, f: impl Fn([f64; MAX_DIM]) -> f64) -> Self {
        Self { chart, values: grid.sample(f) }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { chart: self.chart, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            chart: self.chart,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn support(&self, grid: &Grid) -> SupportBox {
        SupportBox::of(grid, &self.values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub chart: usize,
    /// Contravariant components `X^i`, one sample vector per axis.
    pub comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(chart: usize, comps: Vec<Vec<f64>>) -> Self {
        Self { chart, comps }
    }

    pub fn zeros(chart: usize, d: usize, n: usize) -> Self {
        Self { chart, comps: vec![vec![0.0; n]; d] }
    }

    pub fn from_fn(
        chart: usize,
        grid: &Grid,
        f: impl Fn([f64; MAX_DIM]) -> [f64; MAX_DIM],
    ) -> Self {
        let d = grid.dim();
        let mut comps = vec![vec![0.0; grid.len()]; d];
        for i in 0..grid.len() {
            let v = f(grid.point(i));
            for k in 0..d {
                comps[k][i] = v[k];
            }
        }
        Self { chart, comps }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn len(&self) -> usize {
        self.comps.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scaled(&self, s: &[f64]) -> Self {
        Self {
            chart: self.chart,
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().zip(s).map(|(a, b)| a * b).collect())
                .collect(),
        }
    }

    /// `X(f) = X^i ∂_i f`.
    pub fn apply(&self, grid: &Grid, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for (k, xk) in self.comps.iter().enumerate() {
            let df = grid.diff(f, k);
            for i in 0..out.len() {
                out[i] += xk[i] * df[i];
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymTensor2Field {
    pub chart: usize,
    pub dim: usize,
    /// Components `S^{ij}` stored once per unordered pair, see [`sym`].
    pub comps: Vec<Vec<f64>>,
}

impl SymTensor2Field {
    pub fn zeros(chart: usize, d: usize, n: usize) -> Self {
        Self { chart, dim: d, comps: vec![vec![0.0; n]; pair_count(d)] }
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[sym(self.dim, i, j)]
    }

    pub fn len(&self) -> usize {
        self.comps.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scaled(&self, s: &[f64]) -> Self {
        Self {
            chart: self.chart,
            dim: self.dim,
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().zip(s).map(|(a, b)| a * b).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChristoffelField {
    pub chart: usize,
    pub dim: usize,
    /// `Γ^k_{ij}` at slot `k * pair_count(dim) + sym(i, j)`.
    pub comps: Vec<Vec<f64>>,
}

impl ChristoffelField {
    pub fn get(&self, k: usize, i: usize, j: usize) -> &[f64] {
        &self.comps[k * pair_count(self.dim) + sym(self.dim, i, j)]
    }

    /// Contracted symbol `Γ^m_{mj}`.
    pub fn trace(&self, j: usize) -> Vec<f64> {
        let n = self.comps[0].len();
        let mut out = vec![0.0; n];
        for m in 0..self.dim {
            let g = self.get(m, m, j);
            for i in 0..n {
                out[i] += g[i];
            }
        }
        out
    }
}

/// Bounding box of the nonzero samples, in node indices per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub empty: bool,
    pub lo: [usize; MAX_DIM],
    pub hi: [usize; MAX_DIM],
}

impl SupportBox {
    pub fn of(grid: &Grid, values: &[f64]) -> Self {
        let mut lo = [usize::MAX; MAX_DIM];
        let mut hi = [0; MAX_DIM];
        let mut empty = true;
        for (i, v) in values.iter().enumerate() {
            if *v != 0.0 {
                empty = false;
                let idx = grid.multi_index(i);
                for k in 0..grid.dim() {
                    lo[k] = lo[k].min(idx[k]);
                    hi[k] = hi[k].max(idx[k]);
                }
            }
        }
        if empty {
            lo = [0; MAX_DIM];
        }
        Self { empty, lo, hi }
    }

    pub fn union(&self, other: &SupportBox) -> SupportBox {
        if self.empty {
            return other.clone();
        }
        if other.empty {
            return self.clone();
        }
        let mut out = self.clone();
        for k in 0..MAX_DIM {
            out.lo[k] = out.lo[k].min(other.lo[k]);
            out.hi[k] = out.hi[k].max(other.hi[k]);
        }
        out
    }

    /// Coordinate distance from the box to the nearest closed-axis boundary;
    /// infinite when every axis is periodic or the box is empty.
    pub fn margin(&self, grid: &Grid) -> f64 {
        if self.empty {
            return f64::INFINITY;
        }
        let mut m = f64::INFINITY;
        for (k, ax) in grid.axes().iter().enumerate() {
            if ax.periodic {
                continue;
            }
            let h = ax.spacing();
            m = m.min(self.lo[k] as f64 * h).min((ax.nodes - 1 - self.hi[k]) as f64 * h);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    #[test]
    fn sym_slots_are_distinct() {
        assert_eq!(sym(1, 0, 0), 0);
        assert_eq!(sym(2, 0, 0), 0);
        assert_eq!(sym(2, 0, 1), 1);
        assert_eq!(sym(2, 1, 0), 1);
        assert_eq!(sym(2, 1, 1), 2);
        assert_eq!(pair_count(2), 3);
    }

    #[test]
    fn support_box_and_margin() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 11, false)]).unwrap();
        let mut v = vec![0.0; 11];
        v[3] = 1.0;
        v[6] = -2.0;
        let b = SupportBox::of(&g, &v);
        assert!(!b.empty);
        assert_eq!((b.lo[0], b.hi[0]), (3, 6));
        assert!((b.margin(&g) - 0.3).abs() < 1e-12);
        assert!(SupportBox::of(&g, &[0.0; 11]).margin(&g).is_infinite());
    }
}
