//! Unit-volume coordinates.
//!
//! A chart box is first rescaled to the unit cube, `u = (x − lo)/L`, so the metric becomes
//! `h_u = S h_x S` with `S = diag(L)`. With `f = |h_u|^{1/2}` the map
//!
//! ```text
//! z¹ = ∫₀^{u¹} f(ζ, u²) dζ,    z² = u²
//! ```
//!
//! has Jacobian `J = [[f, b], [0, 1]]`, `b = ∫₀^{u¹} ∂₂f dζ`, so `det J = f` and the
//! pushed-forward metric `h_z = J⁻ᵀ h_u J⁻¹` has unit determinant. The first coordinate is
//! tabulated by an end-corrected cumulative trapezoid and interpolated by cubic Hermite
//! segments whose slopes are the exact density, which keeps the table monotone.

use super::chart::{Chart, ChartMap, ChartMetric, ModelPoint};
use super::metric::{fd6, sym_det, sym_inverse, MetricPreset, SymVals, FD6_STEP};
use super::GeometryError;
use crate::grid::{Axis, Grid, Point, MAX_DIM};

pub const TAU_VOL: f64 = 1e-6;
pub const TABLE_INTERVALS: usize = 4096;

type Mat = [[f64; 2]; 2];

/// Tabulated first coordinate along one `u²` row.
#[derive(Clone, Debug)]
struct Row {
    z: Vec<f64>,
    f: Vec<f64>,
    b: Vec<f64>,
    db: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PsiMap {
    base: Box<Chart>,
    preset: MetricPreset,
    dim: usize,
    intervals: usize,
    /// Row shared by every `u²` when the density does not depend on `u²`.
    row: Option<Row>,
    total: f64,
}

impl PsiMap {
    pub fn new(base: &Chart, intervals: usize) -> Result<Self, GeometryError> {
        let preset = match (&base.metric, &base.map) {
            (ChartMetric::Preset(p), ChartMap::Euclidean | ChartMap::Sphere { .. }) => *p,
            _ => {
                return Err(GeometryError::Unsupported(format!(
                    "unit-volume map needs a closed-form base chart, got {}",
                    base.name
                )))
            }
        };
        let mut psi = Self {
            base: Box::new(base.clone()),
            preset,
            dim: base.dim(),
            intervals,
            row: None,
            total: 0.0,
        };
        let probes: Vec<f64> = (0..9).map(|k| (k as f64 + 0.5) / 9.0).collect();
        let independent = psi.dim == 1
            || probes.iter().all(|&u2| {
                probes.iter().all(|&u1| {
                    let (f, df) = psi.density([u1, u2]);
                    df[1].abs() <= 1e-12 * f.abs().max(1.0)
                })
            });
        let first = psi.build_row(probes[0])?;
        psi.total = *first.z.last().expect("non-empty table");
        if independent {
            psi.row = Some(first);
        } else {
            for &u2 in &probes[1..] {
                let other = psi.build_row(u2)?;
                let t = *other.z.last().expect("non-empty table");
                if (t - psi.total).abs() > 1e-9 * psi.total.abs() {
                    return Err(GeometryError::NonBoxImage {
                        chart: base.id,
                        spread: (t - psi.total).abs(),
                    });
                }
            }
        }
        Ok(psi)
    }

    pub fn base(&self) -> &Chart {
        &self.base
    }

    /// Length of the first unit-volume axis, `∫₀¹ f du¹`.
    pub fn first_axis_length(&self) -> f64 {
        self.total
    }

    fn scales(&self) -> [f64; MAX_DIM] {
        let mut s = [1.0; MAX_DIM];
        for (k, slot) in s.iter_mut().enumerate().take(self.dim) {
            *slot = self.base.grid.axis(k).length();
        }
        s
    }

    fn to_base(&self, u: Point) -> Point {
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim {
            let ax = self.base.grid.axis(k);
            x[k] = ax.lo + u[k] * ax.length();
        }
        x
    }

    fn from_base(&self, x: Point) -> Point {
        let mut u = [0.0; MAX_DIM];
        for k in 0..self.dim {
            let ax = self.base.grid.axis(k);
            u[k] = (x[k] - ax.lo) / ax.length();
        }
        u
    }

    /// `h_u` and `∂_{u_a} h_u`.
    fn metric_u(&self, u: Point) -> (SymVals, [SymVals; MAX_DIM]) {
        let d = self.dim;
        let s = self.scales();
        let x = self.to_base(u);
        let eval = |p: Point| self.preset.eval(d, p);
        let scale = |v: SymVals| -> SymVals {
            if d == 1 {
                [v[0] * s[0] * s[0], 0.0, 0.0]
            } else {
                [v[0] * s[0] * s[0], v[1] * s[0] * s[1], v[2] * s[1] * s[1]]
            }
        };
        let mut dh = [[0.0; 3]; MAX_DIM];
        for (a, slot) in dh.iter_mut().enumerate().take(d) {
            let dx = scale(fd6(&eval, x, a, FD6_STEP));
            *slot = dx.map(|v| v * s[a]);
        }
        (scale(eval(x)), dh)
    }

    /// `f` and `∂_a f = ½ f tr(h⁻¹ ∂_a h)`.
    fn density(&self, u: Point) -> (f64, [f64; MAX_DIM]) {
        let d = self.dim;
        let (h, dh) = self.metric_u(u);
        let f = sym_det(d, &h).sqrt();
        let inv = sym_inverse(d, &h);
        let mut df = [0.0; MAX_DIM];
        for a in 0..d {
            df[a] = 0.5 * f * sym_trace_product(d, &inv, &dh[a]);
        }
        (f, df)
    }

    fn build_row(&self, u2: f64) -> Result<Row, GeometryError> {
        let k = self.intervals;
        let du = 1.0 / k as f64;
        let mut row = Row {
            z: vec![0.0; k + 1],
            f: vec![0.0; k + 1],
            b: vec![0.0; k + 1],
            db: vec![0.0; k + 1],
        };
        let mut fp = vec![0.0; k + 1];
        let mut d2f = vec![0.0; k + 1];
        let mut d22f = vec![0.0; k + 1];
        for j in 0..=k {
            let u = [j as f64 * du, u2];
            let (f, df) = self.density(u);
            if !(f > 0.0 && f.is_finite()) {
                return Err(GeometryError::NonPositiveDensity { chart: self.base.id, u1: u[0], u2 });
            }
            row.f[j] = f;
            fp[j] = df[0];
            d2f[j] = df[1];
            if self.dim > 1 && df[1] != 0.0 {
                d22f[j] = scalar_fd6(|t| self.density([u[0], t]).1[1], u2, FD6_STEP);
            }
        }
        for j in 0..k {
            // trapezoid plus the Euler–Maclaurin end correction, exact on cubics
            row.z[j + 1] = row.z[j]
                + 0.5 * du * (row.f[j] + row.f[j + 1])
                + du * du / 12.0 * (fp[j] - fp[j + 1]);
            row.b[j + 1] = row.b[j] + 0.5 * du * (d2f[j] + d2f[j + 1]);
            row.db[j + 1] = row.db[j] + 0.5 * du * (d22f[j] + d22f[j + 1]);
        }
        Ok(row)
    }

    fn with_row<T>(&self, u2: f64, f: impl FnOnce(&Row) -> T) -> T {
        match &self.row {
            Some(r) => f(r),
            None => f(&self.build_row(u2).expect("density checked at construction")),
        }
    }

    fn periodic_first(&self) -> bool {
        self.base.grid.axis(0).periodic
    }

    /// `z¹(u¹)` on one row, extended periodically or linearly past the ends.
    fn forward_row(&self, row: &Row, u1: f64) -> f64 {
        if self.periodic_first() {
            let turns = u1.floor();
            return turns * self.total + hermite(row, self.intervals, u1 - turns);
        }
        let last = self.intervals;
        if u1 < 0.0 {
            row.f[0] * u1
        } else if u1 > 1.0 {
            row.z[last] + row.f[last] * (u1 - 1.0)
        } else {
            hermite(row, self.intervals, u1)
        }
    }

    fn inverse_row(&self, row: &Row, z1: f64) -> f64 {
        let last = self.intervals;
        if self.periodic_first() {
            let turns = (z1 / self.total).floor();
            return turns + invert_hermite(row, self.intervals, z1 - turns * self.total);
        }
        if z1 < 0.0 {
            z1 / row.f[0]
        } else if z1 > row.z[last] {
            1.0 + (z1 - row.z[last]) / row.f[last]
        } else {
            invert_hermite(row, self.intervals, z1)
        }
    }

    pub fn forward(&self, u: Point) -> Point {
        let z1 = self.with_row(u[1], |r| self.forward_row(r, u[0]));
        [z1, u[1]]
    }

    pub fn inverse(&self, z: Point) -> Point {
        let u1 = self.with_row(z[1], |r| self.inverse_row(r, z[0]));
        [u1, z[1]]
    }

    pub fn to_model(&self, z: Point) -> ModelPoint {
        self.base.to_model(self.to_base(self.inverse(z)))
    }

    pub fn from_model(&self, m: ModelPoint) -> Option<Point> {
        let x = self.base.from_model(m)?;
        Some(self.forward(self.from_base(x)))
    }

    /// Pushed-forward metric at `z` and its `z`-derivatives.
    pub fn metric_z(&self, z: Point) -> (SymVals, [SymVals; MAX_DIM]) {
        let d = self.dim;
        let u = self.inverse(z);
        let (h, dh) = self.metric_u(u);
        let (f, df) = self.density(u);
        let (b, db) = if self.row.is_some() || d == 1 {
            (0.0, 0.0)
        } else {
            self.with_row(u[1], |r| (lerp(&r.b, self.intervals, u[0]), lerp(&r.db, self.intervals, u[0])))
        };
        let hm = to_mat(d, &h);
        let jac: Mat = [[f, b], [0.0, 1.0]];
        let a = inv2(&jac);
        // ∂_{u1} J and ∂_{u2} J; ∂_{u1} b = ∂₂ f
        let dj: [Mat; 2] = [[[df[0], df[1]], [0.0, 0.0]], [[df[1], db], [0.0, 0.0]]];
        let hz = mul(&mul(&transpose(&a), &hm), &a);
        let mut du_hz = [[[0.0; 2]; 2]; 2];
        for k in 0..d {
            let da = neg(&mul(&mul(&a, &dj[k]), &a));
            let dhm = to_mat(d, &dh[k]);
            let t1 = mul(&mul(&transpose(&da), &hm), &a);
            let t2 = mul(&mul(&transpose(&a), &dhm), &a);
            let t3 = mul(&mul(&transpose(&a), &hm), &da);
            du_hz[k] = add(&add(&t1, &t2), &t3);
        }
        let mut dz = [[0.0; 3]; MAX_DIM];
        for (kz, slot) in dz.iter_mut().enumerate().take(d) {
            let mut m = [[0.0; 2]; 2];
            for ku in 0..d {
                for r in 0..2 {
                    for c in 0..2 {
                        m[r][c] += a[ku][kz] * du_hz[ku][r][c];
                    }
                }
            }
            *slot = from_mat(d, &m);
        }
        (from_mat(d, &hz), dz)
    }
}

fn sym_trace_product(d: usize, a: &SymVals, b: &SymVals) -> f64 {
    if d == 1 {
        a[0] * b[0]
    } else {
        a[0] * b[0] + 2.0 * a[1] * b[1] + a[2] * b[2]
    }
}

fn scalar_fd6(f: impl Fn(f64) -> f64, x: f64, delta: f64) -> f64 {
    let mut acc = 0.0;
    for (step, c) in [(1.0, 45.0), (2.0, -9.0), (3.0, 1.0)] {
        acc += c * (f(x + step * delta) - f(x - step * delta));
    }
    acc / (60.0 * delta)
}

fn segment(intervals: usize, u: f64) -> (usize, f64) {
    let s = (u * intervals as f64).clamp(0.0, intervals as f64);
    let j = (s.floor() as usize).min(intervals - 1);
    (j, s - j as f64)
}

fn hermite(row: &Row, intervals: usize, u: f64) -> f64 {
    let (j, t) = segment(intervals, u);
    let du = 1.0 / intervals as f64;
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * row.z[j]
        + (t3 - 2.0 * t2 + t) * du * row.f[j]
        + (-2.0 * t3 + 3.0 * t2) * row.z[j + 1]
        + (t3 - t2) * du * row.f[j + 1]
}

fn hermite_slope(row: &Row, intervals: usize, u: f64) -> f64 {
    let (j, t) = segment(intervals, u);
    let du = 1.0 / intervals as f64;
    let t2 = t * t;
    ((6.0 * t2 - 6.0 * t) * row.z[j] + (-6.0 * t2 + 6.0 * t) * row.z[j + 1]) / du
        + (3.0 * t2 - 4.0 * t + 1.0) * row.f[j]
        + (3.0 * t2 - 2.0 * t) * row.f[j + 1]
}

/// Safeguarded Newton on the monotone Hermite table.
fn invert_hermite(row: &Row, intervals: usize, z: f64) -> f64 {
    let j = row.z.partition_point(|&v| v <= z).clamp(1, intervals) - 1;
    let du = 1.0 / intervals as f64;
    let (mut lo, mut hi) = (j as f64 * du, (j + 1) as f64 * du);
    let mut u = lo + du * (z - row.z[j]) / (row.z[j + 1] - row.z[j]).max(f64::MIN_POSITIVE);
    for _ in 0..60 {
        let r = hermite(row, intervals, u) - z;
        if r.abs() <= 1e-14 * row.z[intervals].abs().max(1.0) {
            break;
        }
        if r > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let step = u - r / hermite_slope(row, intervals, u);
        u = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    u
}

fn lerp(table: &[f64], intervals: usize, u: f64) -> f64 {
    let (j, t) = segment(intervals, u);
    table[j] * (1.0 - t) + table[j + 1] * t
}

fn to_mat(d: usize, v: &SymVals) -> Mat {
    if d == 1 {
        [[v[0], 0.0], [0.0, 1.0]]
    } else {
        [[v[0], v[1]], [v[1], v[2]]]
    }
}

fn from_mat(d: usize, m: &Mat) -> SymVals {
    if d == 1 {
        [m[0][0], 0.0, 0.0]
    } else {
        [m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]]
    }
}

fn mul(a: &Mat, b: &Mat) -> Mat {
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

fn transpose(a: &Mat) -> Mat {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn add(a: &Mat, b: &Mat) -> Mat {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

fn neg(a: &Mat) -> Mat {
    [[-a[0][0], -a[0][1]], [-a[1][0], -a[1][1]]]
}

fn inv2(a: &Mat) -> Mat {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

/// Replace every chart by its unit-volume counterpart.
///
/// Charts whose rescaled density is already identically one are kept as they are.
pub fn build_unit_volume_atlas(atlas: &super::Atlas) -> Result<super::Atlas, GeometryError> {
    let mut charts = Vec::with_capacity(atlas.charts.len());
    for chart in &atlas.charts {
        if matches!(chart.map, ChartMap::UnitVolume(_)) {
            charts.push(chart.clone());
            continue;
        }
        let psi = PsiMap::new(chart, TABLE_INTERVALS)?;
        let already = (0..=16).all(|i| {
            (0..=16).all(|j| (psi.density([i as f64 / 16.0, j as f64 / 16.0]).0 - 1.0).abs() <= 1e-14)
        });
        let identity_box = chart.grid.axes().iter().all(|a| a.lo == 0.0 && a.hi == 1.0);
        if already && identity_box {
            charts.push(chart.clone());
            continue;
        }
        let axes = chart
            .grid
            .axes()
            .iter()
            .enumerate()
            .map(|(k, ax)| {
                let hi = if k == 0 { psi.first_axis_length() } else { 1.0 };
                Axis::new(0.0, hi, ax.nodes, ax.periodic)
            })
            .collect();
        let grid = Grid::new(axes)?.with_order(chart.grid.order());
        let out = Chart {
            id: chart.id,
            name: format!("{}-unit", chart.name),
            grid,
            map: ChartMap::UnitVolume(Box::new(psi)),
            metric: ChartMetric::Pushforward,
            overlaps: chart.overlaps.clone(),
        };
        let metric = out.metric_field()?;
        let defect = metric.det.iter().fold(0.0_f64, |m, d| m.max((d - 1.0).abs()));
        if defect > TAU_VOL {
            return Err(GeometryError::VolumeDefect { chart: chart.id, defect });
        }
        charts.push(out);
    }
    Ok(super::Atlas {
        name: atlas.name.clone(),
        charts,
        unit_volume: true,
        model: atlas.model.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{christoffel, fixtures};

    #[test]
    fn constant_density_gives_linear_map() {
        // x ∈ [0, 2] closed, flat: rescaled density is 2, so z = 2u
        let g = Grid::new(vec![Axis::new(0.0, 2.0, 16, false)]).unwrap();
        let chart = Chart {
            id: 0,
            name: "seg".into(),
            grid: g,
            map: ChartMap::Euclidean,
            metric: ChartMetric::Preset(MetricPreset::Flat),
            overlaps: vec![],
        };
        let psi = PsiMap::new(&chart, 64).unwrap();
        for k in 0..=10 {
            let u = k as f64 / 10.0;
            assert!((psi.forward([u, 0.0])[0] - 2.0 * u).abs() < 1e-14);
            assert!((psi.inverse([2.0 * u, 0.0])[0] - u).abs() < 1e-13);
        }
        let (h, _) = psi.metric_z([0.7, 0.0]);
        assert_eq!(h[0], 1.0);
    }

    #[test]
    fn sphere_first_coordinate_is_cosine_integral() {
        let atlas = fixtures::sphere(16).unwrap();
        let psi = PsiMap::new(&atlas.charts[0], TABLE_INTERVALS).unwrap();
        let th0 = fixtures::SPHERE_CAP_OFFSET;
        let len = std::f64::consts::PI - 2.0 * th0;
        for k in 0..=8 {
            let u = k as f64 / 8.0;
            let th = th0 + u * len;
            let want = 2.0 * std::f64::consts::PI * (th0.cos() - th.cos());
            assert!((psi.forward([u, 0.3])[0] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_volume_sphere_has_unit_det_and_traceless_symbols() {
        let atlas = build_unit_volume_atlas(&fixtures::sphere(48).unwrap()).unwrap();
        assert!(atlas.unit_volume);
        for chart in &atlas.charts {
            let m = chart.metric_field().unwrap();
            let gamma = christoffel(&m).unwrap();
            assert!(m.det.iter().all(|d| (d - 1.0).abs() < TAU_VOL));
            for j in 0..2 {
                assert!(gamma.trace(j).iter().all(|v| v.abs() < 1e-6));
            }
        }
        assert!(atlas.covers(500, 3));
        assert!(atlas.transition_defect() < 1e-9);
    }

    #[test]
    fn flat_unit_torus_is_left_alone() {
        let atlas = fixtures::flat_torus(2, 16).unwrap();
        let uv = build_unit_volume_atlas(&atlas).unwrap();
        assert!(matches!(uv.charts[0].map, ChartMap::Euclidean));
        assert_eq!(uv.charts[0].grid, atlas.charts[0].grid);
    }
}
