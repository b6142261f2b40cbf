//! Natural cubic spline through `(x_k, y_k)`, continued linearly past the end knots.
//! Natural end conditions make `S'' = 0` there, so the continuation is still C².
//!
//! File form: `knots = x0, x1, ...` and `values = y0, y1, ...`.

use super::RenormError;
use crate::kv;

#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, RenormError> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(RenormError::Spline(format!("need >= 3 knots with matching values, got {} and {}", n, y.len())));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RenormError::Spline("knots must be finite and strictly increasing".into()));
        }
        // Thomas sweep for the interior second derivatives.
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
            c[i] = h1 / diag;
            d[i] = (rhs - h0 * d[i - 1]) / diag;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(Self { x, y, m })
    }

    pub fn parse(text: &str) -> Result<Self, RenormError> {
        let map = kv::parse(text).map_err(RenormError::Spline)?;
        let get = |k: &str| -> Result<Vec<f64>, RenormError> {
            let v = map.get(k).ok_or_else(|| RenormError::Spline(format!("missing '{k}'")))?;
            kv::list(v).map_err(RenormError::Spline)
        };
        Self::new(get("knots")?, get("values")?)
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// `S^{(deriv)}(t)` for `deriv ≤ 2`.
    pub fn eval(&self, t: f64, deriv: usize) -> f64 {
        let n = self.x.len();
        let (lo, hi) = self.range();
        if t < lo || t > hi {
            let (k, edge) = if t < lo { (0, lo) } else { (n - 2, hi) };
            let slope = self.segment(k, edge, 1);
            return match deriv {
                0 => self.segment(k, edge, 0) + slope * (t - edge),
                1 => slope,
                _ => 0.0,
            };
        }
        let k = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        self.segment(k, t, deriv)
    }

    fn segment(&self, k: usize, t: f64, deriv: usize) -> f64 {
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (m0, m1) = (self.m[k], self.m[k + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - t, t - x0);
        match deriv {
            0 => (m0 * a * a * a + m1 * b * b * b) / (6.0 * h) + (y0 / h - m0 * h / 6.0) * a + (y1 / h - m1 * h / 6.0) * b,
            1 => (-m0 * a * a + m1 * b * b) / (2.0 * h) - (y0 / h - m0 * h / 6.0) + (y1 / h - m1 * h / 6.0),
            _ => (m0 * a + m1 * b) / h,
        }
    }
}
