//! Log-log rate fits over an ε ladder.
//!
//! The slope is the least-squares fit of `ln ‖·‖` against `ln ε`. A table whose norms
//! reach exactly zero and never increase is reported with slope `+∞`.

use rayon::prelude::*;
use serde::Serialize;

use super::{residual, CommutatorError, CommutatorFixture, CommutatorKind};
use crate::regularization::Mollifier;

pub const MIN_POINTS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub eps: f64,
    pub l2_norm: f64,
    /// Slope over this and all previous rows; `NaN` until `MIN_POINTS` rows exist.
    pub slope_so_far: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateTable {
    pub kind: String,
    pub fixture: String,
    pub rows: Vec<RateRow>,
    pub slope: f64,
    /// Norms are non-increasing as ε decreases.
    pub monotone: bool,
}

fn non_increasing(eps: &[f64], norms: &[f64]) -> bool {
    let mut order: Vec<usize> = (0..eps.len()).collect();
    order.sort_by(|&i, &j| eps[j].total_cmp(&eps[i]));
    order.windows(2).all(|w| norms[w[1]] <= norms[w[0]])
}

pub fn fit_slope(eps: &[f64], norms: &[f64]) -> Result<f64, CommutatorError> {
    if eps.len() < MIN_POINTS || eps.len() != norms.len() {
        return Err(CommutatorError::InsufficientPoints(eps.len().min(norms.len())));
    }
    if norms.iter().any(|&v| v == 0.0) {
        return Ok(if non_increasing(eps, norms) { f64::INFINITY } else { f64::NAN });
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

impl RateTable {
    pub fn from_norms(
        kind: &str,
        fixture: &str,
        eps: &[f64],
        norms: &[f64],
    ) -> Result<Self, CommutatorError> {
        let slope = fit_slope(eps, norms)?;
        let rows = (0..eps.len())
            .map(|k| RateRow {
                eps: eps[k],
                l2_norm: norms[k],
                slope_so_far: if k + 1 >= MIN_POINTS {
                    fit_slope(&eps[..=k], &norms[..=k]).unwrap_or(f64::NAN)
                } else {
                    f64::NAN
                },
            })
            .collect();
        Ok(Self {
            kind: kind.to_string(),
            fixture: fixture.to_string(),
            rows,
            slope,
            monotone: non_increasing(eps, norms),
        })
    }

    pub fn norms(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.l2_norm).collect()
    }

    /// Last norm below `factor` times the first.
    pub fn shrinks_by(&self, factor: f64) -> bool {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.l2_norm < factor * a.l2_norm,
            _ => false,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,eps,l2_norm,slope_so_far\n");
        for r in &self.rows {
            let slope = if r.slope_so_far.is_nan() { String::new() } else { format!("{}", r.slope_so_far) };
            out.push_str(&format!("{},{},{:e},{}\n", self.kind, r.eps, r.l2_norm, slope));
        }
        out
    }
}

/// Residual norms of `kind` on `fx` for every ε, evaluated in parallel and tabulated in
/// ladder order.
pub fn run_study(
    kind: CommutatorKind,
    fx: &CommutatorFixture,
    ladder: &[f64],
) -> Result<RateTable, CommutatorError> {
    if ladder.len() < MIN_POINTS {
        return Err(CommutatorError::InsufficientPoints(ladder.len()));
    }
    for &eps in ladder {
        if eps >= fx.eps_kappa {
            return Err(crate::regularization::RegularizationError::EpsilonTooLarge { eps, limit: fx.eps_kappa }.into());
        }
    }
    let norms = ladder
        .par_iter()
        .map(|&eps| {
            let moll = Mollifier::new(fx.geom.dim(), eps)?;
            let r = residual(kind, fx, &moll)?;
            Ok(fx.geom.norm(&r.values))
        })
        .collect::<Result<Vec<f64>, CommutatorError>>()?;
    RateTable::from_norms(kind.label(), &fx.name, ladder, &norms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_recovered() {
        let eps = [0.16, 0.08, 0.04, 0.02];
        let norms: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.powf(1.5)).collect();
        assert!((fit_slope(&eps, &norms).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zeros_give_infinite_slope() {
        let t = RateTable::from_norms("r", "x", &[0.1, 0.05, 0.02], &[0.0, 0.0, 0.0]).unwrap();
        assert!(t.slope.is_infinite() && t.slope > 0.0);
        assert!(t.monotone);
    }

    #[test]
    fn two_points_rejected() {
        assert!(matches!(fit_slope(&[0.1, 0.05], &[1.0, 0.5]), Err(CommutatorError::InsufficientPoints(2))));
    }

    #[test]
    fn csv_leaves_early_slopes_blank() {
        let t = RateTable::from_norms("c2", "x", &[0.16, 0.08, 0.04], &[4.0, 1.0, 0.25]).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "kind,eps,l2_norm,slope_so_far");
        assert!(lines[1].ends_with(','));
        assert!(lines[3].ends_with(",2"));
    }
}
