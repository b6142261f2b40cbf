//! Charts, their embeddings into a model of the manifold, and atlases.
//!
//! Transition maps are not stored as separate closures: every chart knows how to send
//! its coordinates to a model point (the torus itself, or a unit vector for the sphere)
//! and back, and a transition is the composition of the two.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::metric::{MetricField, MetricPreset, SymVals, FD6_STEP};
use super::unit_volume::PsiMap;
use super::GeometryError;
use crate::grid::{Axis, Grid, Point, MAX_DIM};

pub type ModelPoint = [f64; 3];
pub type Jacobian = [[f64; MAX_DIM]; MAX_DIM];

#[derive(Clone, Debug)]
pub enum ChartMap {
    /// Coordinates are the model point (wrapped on periodic axes).
    Euclidean,
    /// Colatitude/longitude of `rotation · x` for a unit vector `x`.
    Sphere { rotation: [[f64; 3]; 3] },
    /// Unit-volume coordinates layered over a base chart.
    UnitVolume(Box<PsiMap>),
}

#[derive(Clone, Debug)]
pub enum ChartMetric {
    Preset(MetricPreset),
    /// Per-node samples of the upper-triangle components.
    Sampled(Vec<Vec<f64>>),
    /// Pushed forward through the chart's unit-volume map.
    Pushforward,
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub id: usize,
    pub name: String,
    pub grid: Grid,
    pub map: ChartMap,
    pub metric: ChartMetric,
    pub overlaps: Vec<usize>,
}

pub const TAU_CHART: f64 = 1e-9;

impl Chart {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn is_unit_volume(&self) -> bool {
        matches!(self.map, ChartMap::UnitVolume(_))
            || (matches!(self.metric, ChartMetric::Preset(MetricPreset::Flat)))
    }

    /// Metric value and first derivatives at an arbitrary chart point.
    pub fn metric_at(&self, p: Point) -> Result<(SymVals, [SymVals; MAX_DIM]), GeometryError> {
        let d = self.dim();
        match (&self.metric, &self.map) {
            (ChartMetric::Pushforward, ChartMap::UnitVolume(psi)) => Ok(psi.metric_z(p)),
            (ChartMetric::Preset(preset), _) => {
                let f = |x: Point| preset.eval(d, x);
                let mut dv = [[0.0; 3]; MAX_DIM];
                for (k, slot) in dv.iter_mut().enumerate().take(d) {
                    *slot = super::metric::fd6(&f, p, k, FD6_STEP);
                }
                Ok((f(p), dv))
            }
            _ => Err(GeometryError::Unsupported(format!(
                "chart {} has no closed-form metric",
                self.name
            ))),
        }
    }

    pub fn metric_field(&self) -> Result<MetricField, GeometryError> {
        match &self.metric {
            ChartMetric::Sampled(h) => MetricField::from_samples(self.id, &self.grid, h.clone()),
            _ => {
                // validate closed form once before sampling every node
                self.metric_at(self.grid.point(0))?;
                MetricField::from_point_fn(self.id, &self.grid, |p| {
                    self.metric_at(p).expect("closed-form metric")
                })
            }
        }
    }

    pub fn to_model(&self, p: Point) -> ModelPoint {
        match &self.map {
            ChartMap::Euclidean => {
                let q = self.grid.wrap(p);
                [q[0], if self.dim() > 1 { q[1] } else { 0.0 }, 0.0]
            }
            ChartMap::Sphere { rotation } => {
                let (th, ph) = (p[0], p[1]);
                let v = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
                mat_t_vec(rotation, v)
            }
            ChartMap::UnitVolume(psi) => psi.to_model(p),
        }
    }

    /// Chart coordinates of a model point, `None` outside the chart's box.
    pub fn from_model(&self, m: ModelPoint) -> Option<Point> {
        let p = match &self.map {
            ChartMap::Euclidean => self.grid.wrap([m[0], m[1]]),
            ChartMap::Sphere { rotation } => {
                let v = mat_vec(rotation, m);
                let th = v[2].clamp(-1.0, 1.0).acos();
                let ph = v[1].atan2(v[0]);
                self.grid.wrap([th, ph])
            }
            ChartMap::UnitVolume(psi) => psi.from_model(m)?,
        };
        if self.grid.contains(p) {
            Some(p)
        } else {
            None
        }
    }

    pub fn transition(&self, other: &Chart, p: Point) -> Option<Point> {
        other.from_model(self.to_model(p))
    }

    /// Jacobian `∂(other coords)/∂(own coords)` by central differences of the transition.
    pub fn transition_jacobian(&self, other: &Chart, p: Point) -> Option<Jacobian> {
        let d = self.dim();
        let step = 1e-6;
        let mut jac = [[0.0; MAX_DIM]; MAX_DIM];
        for b in 0..d {
            let mut pp = p;
            let mut pm = p;
            pp[b] += step;
            pm[b] -= step;
            let qp = self.transition(other, pp)?;
            let qm = self.transition(other, pm)?;
            for a in 0..d {
                let mut diff = qp[a] - qm[a];
                if other.grid.axis(a).periodic {
                    let len = other.grid.axis(a).length();
                    diff -= len * (diff / len).round();
                }
                jac[a][b] = diff / (2.0 * step);
            }
        }
        Some(jac)
    }

    /// Same chart on a sub-box; periodic axes that are cut become closed.
    pub fn restrict(&self, lo: Point, hi: Point, nodes: [usize; MAX_DIM]) -> Result<Chart, GeometryError> {
        if matches!(self.metric, ChartMetric::Sampled(_)) {
            return Err(GeometryError::Unsupported("restricting a sampled metric".into()));
        }
        let axes = (0..self.dim())
            .map(|k| {
                let ax = self.grid.axis(k);
                let whole = ax.periodic && lo[k] <= ax.lo && hi[k] >= ax.hi;
                if whole {
                    Axis::new(ax.lo, ax.hi, nodes[k], true)
                } else {
                    Axis::new(lo[k], hi[k], nodes[k], false)
                }
            })
            .collect();
        let grid = Grid::new(axes)?.with_order(self.grid.order());
        Ok(Chart {
            id: self.id,
            name: format!("{}-sub", self.name),
            grid,
            map: self.map.clone(),
            metric: self.metric.clone(),
            overlaps: self.overlaps.clone(),
        })
    }
}

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    }
    out
}

fn mat_t_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = m[0][i] * v[0] + m[1][i] * v[1] + m[2][i] * v[2];
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpace {
    /// Product of circles/intervals matching a single Euclidean chart's box.
    Box { axes: Vec<Axis> },
    UnitSphere,
}

#[derive(Clone, Debug)]
pub struct Atlas {
    pub name: String,
    pub charts: Vec<Chart>,
    pub unit_volume: bool,
    pub model: ModelSpace,
}

impl Atlas {
    pub fn chart(&self, id: usize) -> Result<&Chart, GeometryError> {
        self.charts
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| GeometryError::AtlasMismatch { what: format!("no chart {id}") })
    }

    pub fn dim(&self) -> usize {
        self.charts[0].dim()
    }

    /// Seeded reference points of the model manifold.
    pub fn sample_model_points(&self, n: usize, seed: u64) -> Vec<ModelPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| match &self.model {
                ModelSpace::Box { axes } => {
                    let mut m = [0.0; 3];
                    for (k, ax) in axes.iter().enumerate() {
                        m[k] = ax.lo + rng.random::<f64>() * ax.length();
                    }
                    m
                }
                ModelSpace::UnitSphere => loop {
                    let v: [f64; 3] = [
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                    ];
                    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                    if r > 1e-8 {
                        break [v[0] / r, v[1] / r, v[2] / r];
                    }
                },
            })
            .collect()
    }

    /// Every chart's nodes plus seeded random points, all as model points.
    pub fn reference_points(&self, random: usize, seed: u64) -> Vec<ModelPoint> {
        let mut pts: Vec<ModelPoint> = self
            .charts
            .iter()
            .flat_map(|c| (0..c.grid.len()).map(move |i| c.to_model(c.grid.point(i))))
            .collect();
        pts.extend(self.sample_model_points(random, seed));
        pts
    }

    /// Whether every reference point lies in at least one chart.
    pub fn covers(&self, random: usize, seed: u64) -> bool {
        self.reference_points(random, seed)
            .iter()
            .all(|m| self.charts.iter().any(|c| c.from_model(*m).is_some()))
    }

    /// Largest round-trip defect of the transition maps at the overlap nodes.
    pub fn transition_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.charts {
            for b in self.charts.iter().filter(|b| b.id != a.id) {
                for i in 0..a.grid.len() {
                    let p = a.grid.point(i);
                    if let Some(q) = a.transition(b, p) {
                        if let Some(back) = b.transition(a, q) {
                            for k in 0..a.dim() {
                                let ax = a.grid.axis(k);
                                let mut diff = back[k] - p[k];
                                if ax.periodic {
                                    diff -= ax.length() * (diff / ax.length()).round();
                                }
                                worst = worst.max(diff.abs());
                            }
                        }
                    }
                }
            }
        }
        worst
    }
}
