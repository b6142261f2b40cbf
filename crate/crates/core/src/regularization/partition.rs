//! Partitions of unity subordinate to an atlas.
//!
//! Each chart carries the bump `Π_k S((d_k − m)/w_k)` over its closed axes, where `d_k` is
//! the coordinate distance to the nearer end of axis `k`, `m` the margin, `S` the C^∞ step
//! `e(t)/(e(t) + e(1−t))`, `e(t) = exp(−1/t)`, and `w_k = max(m, L_k/2 − m)` stretches the
//! ramp over the whole half-axis so the weights stay gentle enough to interpolate. The
//! bumps are then normalized pointwise across charts. A bump vanishes within `m` of the chart boundary, so the
//! support margin of every weight is `ε_κ = m` and `ε₀ = m/4`.

use super::RegularizationError;
use crate::geometry::{Atlas, Chart, ModelPoint, ScalarField};
use crate::grid::Point;

/// Denominator below which the bumps are considered not to cover a point.
pub const COVERAGE_FLOOR: f64 = 1e-8;
pub const COVERAGE_SAMPLES: usize = 1000;
pub const COVERAGE_SEED: u64 = 0x5eed;

pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

pub fn chart_bump(chart: &Chart, p: Point, margin: f64) -> f64 {
    let mut w = 1.0;
    for (k, ax) in chart.grid.axes().iter().enumerate() {
        if ax.periodic {
            continue;
        }
        let dist = (p[k] - ax.lo).min(ax.hi - p[k]);
        let ramp = margin.max(0.5 * ax.length() - margin);
        w *= smooth_step((dist - margin) / ramp);
    }
    w
}

#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    pub margin: f64,
    /// Support margin of each weight; infinite for a chart without closed axes.
    pub eps_kappa: Vec<f64>,
    pub eps0: f64,
    /// Weights sampled on each chart's own grid, in atlas order.
    pub weights: Vec<ScalarField>,
    pub charts: Vec<Chart>,
}

impl PartitionOfUnity {
    pub fn new(atlas: &Atlas, margin: f64) -> Result<Self, RegularizationError> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(RegularizationError::InvalidMargin(margin));
        }
        let charts = atlas.charts.clone();
        let eps_kappa: Vec<f64> = charts
            .iter()
            .map(|c| if c.grid.axes().iter().all(|a| a.periodic) { f64::INFINITY } else { margin })
            .collect();
        let eps0 = 0.25 * eps_kappa.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut pou = Self { margin, eps_kappa, eps0, weights: Vec::new(), charts };
        if pou.charts.len() > 1 {
            for m in atlas.reference_points(COVERAGE_SAMPLES, COVERAGE_SEED) {
                let total = pou.bump_sum(m);
                if total < COVERAGE_FLOOR {
                    return Err(RegularizationError::CoverageFailure { total, point: m });
                }
            }
        }
        pou.weights = pou
            .charts
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let values = (0..c.grid.len()).map(|i| pou.weight_at(k, c.to_model(c.grid.point(i)))).collect();
                ScalarField::new(c.id, values)
            })
            .collect();
        Ok(pou)
    }

    fn bump_at(&self, k: usize, m: ModelPoint) -> f64 {
        let chart = &self.charts[k];
        chart.from_model(m).map_or(0.0, |p| chart_bump(chart, p, self.margin))
    }

    fn bump_sum(&self, m: ModelPoint) -> f64 {
        (0..self.charts.len()).map(|k| self.bump_at(k, m)).sum()
    }

    /// `𝒰_k` at a model point.
    pub fn weight_at(&self, k: usize, m: ModelPoint) -> f64 {
        if self.charts.len() == 1 {
            return 1.0;
        }
        let total = self.bump_sum(m);
        if total < COVERAGE_FLOOR {
            return 0.0;
        }
        self.bump_at(k, m) / total
    }

    /// Position of chart `id` in atlas order.
    pub fn index(&self, id: usize) -> Result<usize, RegularizationError> {
        self.charts
            .iter()
            .position(|c| c.id == id)
            .ok_or(RegularizationError::UnknownChart(id))
    }

    /// `max |Σ_κ 𝒰_κ − 1|` over the given model points.
    pub fn sum_defect(&self, points: &[ModelPoint]) -> f64 {
        points
            .iter()
            .map(|&m| ((0..self.charts.len()).map(|k| self.weight_at(k, m)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ_κ ∫ 𝒰_κ f_κ dV_h` for per-chart samples `f_κ` of one global function.
    pub fn integrate(
        &self,
        geoms: &[crate::geometry::ChartGeometry],
        f: &[ScalarField],
    ) -> Result<f64, RegularizationError> {
        if geoms.len() != self.charts.len() || f.len() != self.charts.len() {
            return Err(RegularizationError::Mismatch("one geometry and field per chart".into()));
        }
        let mut total = 0.0;
        for k in 0..self.charts.len() {
            let local: Vec<f64> =
                f[k].values.iter().zip(&self.weights[k].values).map(|(a, b)| a * b).collect();
            total += geoms[k].integrate(&local);
        }
        Ok(total)
    }
}

pub fn make_partition(atlas: &Atlas, margin: f64) -> Result<PartitionOfUnity, RegularizationError> {
    PartitionOfUnity::new(atlas, margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures;

    #[test]
    fn torus_weight_is_one() {
        let atlas = fixtures::flat_torus(2, 16).unwrap();
        let pou = make_partition(&atlas, 0.2).unwrap();
        assert!(pou.weights[0].values.iter().all(|&w| w == 1.0));
        assert!(pou.eps_kappa[0].is_infinite());
    }

    #[test]
    fn sphere_weights_sum_to_one() {
        let atlas = fixtures::sphere(32).unwrap();
        let pou = make_partition(&atlas, 0.2).unwrap();
        let pts = atlas.sample_model_points(1000, 11);
        assert!(pou.sum_defect(&pts) < 1e-12);
        assert!((pou.eps0 - 0.05).abs() < 1e-15);
    }

    #[test]
    fn oversized_margin_fails_coverage() {
        let atlas = fixtures::sphere(32).unwrap();
        assert!(matches!(
            make_partition(&atlas, 0.6),
            Err(RegularizationError::CoverageFailure { .. })
        ));
    }

    #[test]
    fn step_is_smooth_and_monotone() {
        let mut prev = 0.0;
        for k in 0..=100 {
            let s = smooth_step(k as f64 / 100.0);
            assert!(s >= prev);
            prev = s;
        }
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }
}
