//! Rescaled mollifiers and discrete convolution.
//!
//! `φ(z) = c exp(−1/(1 − |z|²))` on the open unit ball, `φ_ε(z) = ε^{−d} φ(z/ε)`.
//! The continuous normalization `c` is computed by quadrature; the discrete kernel on a
//! grid is additionally rescaled to unit sum so that constants and linear ramps are
//! reproduced exactly on the interior.

use rayon::prelude::*;

use super::RegularizationError;
use crate::geometry::SupportBox;
use crate::grid::{Grid, Point, MAX_DIM};

fn profile(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// `∫_{|z|<1} exp(−1/(1−|z|²)) dz` by the trapezoid rule, spectrally accurate since the
/// integrand is flat at the boundary.
fn unit_mass(dim: usize) -> f64 {
    const STEPS: usize = 4096;
    let h = 1.0 / STEPS as f64;
    let radial: f64 = (0..STEPS)
        .map(|k| {
            let r = k as f64 * h;
            let jac = if dim == 1 { 2.0 } else { 2.0 * std::f64::consts::PI * r };
            let w = if k == 0 { 0.5 } else { 1.0 };
            w * jac * profile(r * r)
        })
        .sum();
    radial * h
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mollifier {
    pub eps: f64,
    dim: usize,
    scale: f64,
}

/// Offsets (in nodes) and weights of a mollifier sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub offsets: Vec<[isize; MAX_DIM]>,
    pub weights: Vec<f64>,
    pub radius: [usize; MAX_DIM],
}

impl Mollifier {
    pub fn new(dim: usize, eps: f64) -> Result<Self, RegularizationError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(RegularizationError::InvalidEpsilon(eps));
        }
        Ok(Self { eps, dim, scale: 1.0 / unit_mass(dim) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `φ_ε(z)`.
    pub fn eval(&self, z: Point) -> f64 {
        let r2: f64 = z[..self.dim].iter().map(|v| v * v).sum::<f64>() / (self.eps * self.eps);
        self.scale * profile(r2) / self.eps.powi(self.dim as i32)
    }

    /// Second derivative `φ_ε''` in one dimension.
    pub fn second_derivative_1d(&self, z: f64) -> f64 {
        let x = z / self.eps;
        if x.abs() >= 1.0 {
            return 0.0;
        }
        // p(x) = exp(−1/(1−x²)): p' = −2x/(1−x²)² p, p'' = p (4x²/(1−x²)⁴ − (2 + 6x²)/(1−x²)³)
        let q = 1.0 - x * x;
        let p = (-1.0 / q).exp();
        let second = p * (4.0 * x * x / q.powi(4) - (2.0 + 6.0 * x * x) / q.powi(3));
        self.scale * second / self.eps.powi(3)
    }

    pub fn kernel(&self, grid: &Grid) -> Kernel {
        let d = grid.dim();
        let mut radius = [0usize; MAX_DIM];
        for (k, slot) in radius.iter_mut().enumerate().take(d) {
            *slot = (self.eps / grid.axis(k).spacing()).floor() as usize;
        }
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let r1 = if d > 1 { radius[1] as isize } else { 0 };
        for a in -(radius[0] as isize)..=radius[0] as isize {
            for b in -r1..=r1 {
                let mut z = [0.0; MAX_DIM];
                z[0] = a as f64 * grid.axis(0).spacing();
                if d > 1 {
                    z[1] = b as f64 * grid.axis(1).spacing();
                }
                let w = self.eval(z);
                if w > 0.0 {
                    offsets.push([a, b]);
                    weights.push(w);
                }
            }
        }
        if weights.is_empty() {
            offsets.push([0, 0]);
            weights.push(1.0);
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Kernel { offsets, weights, radius }
    }
}

/// Node indices along one axis touched by a support interval dilated by `r`.
fn active_axis(lo: usize, hi: usize, r: usize, n: usize, periodic: bool) -> Vec<usize> {
    if periodic {
        if hi - lo + 2 * r + 1 >= n {
            return (0..n).collect();
        }
        (0..=(hi - lo + 2 * r))
            .map(|k| (lo as isize - r as isize + k as isize).rem_euclid(n as isize) as usize)
            .collect()
    } else {
        (lo.saturating_sub(r)..=(hi + r).min(n - 1)).collect()
    }
}

/// Coordinate margin left between `support` and the closed boundaries.
pub fn check_fits(grid: &Grid, support: &SupportBox, eps: f64) -> Result<(), RegularizationError> {
    let margin = support.margin(grid);
    if eps >= margin {
        return Err(RegularizationError::EpsilonTooLarge { eps, limit: margin });
    }
    Ok(())
}

/// `φ_ε * f` on the grid, treating `f` as zero beyond closed boundaries.
///
/// Only nodes within the kernel footprint of the support are visited; rows are processed
/// in parallel and the result does not depend on the thread count.
pub fn convolve(grid: &Grid, kernel: &Kernel, f: &[f64]) -> Vec<f64> {
    let support = SupportBox::of(grid, f);
    let mut out = vec![0.0; f.len()];
    if support.empty {
        return out;
    }
    let d = grid.dim();
    let shape = grid.shape();
    let axes = grid.axes();
    let rows = active_axis(support.lo[0], support.hi[0], kernel.radius[0], shape[0], axes[0].periodic);
    let cols: Vec<usize> = if d > 1 {
        active_axis(support.lo[1], support.hi[1], kernel.radius[1], shape[1], axes[1].periodic)
    } else {
        vec![0]
    };
    let n1 = shape[1];
    let source = |idx: isize, k: usize| -> Option<usize> {
        let n = shape[k] as isize;
        if axes[k].periodic {
            Some(idx.rem_euclid(n) as usize)
        } else if idx < 0 || idx >= n {
            None
        } else {
            Some(idx as usize)
        }
    };
    let computed: Vec<(usize, Vec<f64>)> = rows
        .par_iter()
        .map(|&r| {
            let vals = cols
                .iter()
                .map(|&c| {
                    let mut acc = 0.0;
                    for (off, w) in kernel.offsets.iter().zip(&kernel.weights) {
                        let Some(sr) = source(r as isize - off[0], 0) else { continue };
                        let sc = if d > 1 {
                            match source(c as isize - off[1], 1) {
                                Some(v) => v,
                                None => continue,
                            }
                        } else {
                            0
                        };
                        acc += w * f[sr * n1 + sc];
                    }
                    acc
                })
                .collect();
            (r, vals)
        })
        .collect();
    for (r, vals) in computed {
        for (&c, v) in cols.iter().zip(vals) {
            out[r * n1 + c] = v;
        }
    }
    out
}

/// Convolution after checking that the dilated support stays inside the chart.
pub fn mollify(grid: &Grid, moll: &Mollifier, f: &[f64]) -> Result<Vec<f64>, RegularizationError> {
    check_fits(grid, &SupportBox::of(grid, f), moll.eps)?;
    Ok(convolve(grid, &moll.kernel(grid), f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    #[test]
    fn continuous_mass_is_one() {
        for dim in [1, 2] {
            let m = Mollifier::new(dim, 0.3).unwrap();
            let n = 600;
            let h = 0.6 / n as f64;
            let mut total = 0.0;
            for a in 0..=n {
                let x = -0.3 + a as f64 * h;
                if dim == 1 {
                    total += m.eval([x, 0.0]) * h;
                } else {
                    for b in 0..=n {
                        total += m.eval([x, -0.3 + b as f64 * h]) * h * h;
                    }
                }
            }
            assert!((total - 1.0).abs() < 1e-6, "dim {dim}: {total}");
        }
    }

    #[test]
    fn second_derivative_matches_differences() {
        let m = Mollifier::new(1, 0.5).unwrap();
        let h = 1e-4;
        for z in [-0.3, 0.0, 0.21, 0.4] {
            let fd = (m.eval([z + h, 0.0]) - 2.0 * m.eval([z, 0.0]) + m.eval([z - h, 0.0])) / (h * h);
            assert!((fd - m.second_derivative_1d(z)).abs() < 1e-4 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn ramp_preserved_in_interior() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 101, false)]).unwrap();
        let f: Vec<f64> = (0..101).map(|i| if (20..=80).contains(&i) { i as f64 * 0.01 } else { 0.0 }).collect();
        let k = Mollifier::new(1, 0.05).unwrap().kernel(&g);
        let out = convolve(&g, &k, &f);
        for i in 26..=74 {
            assert!((out[i] - f[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn too_large_epsilon_rejected() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 101, false)]).unwrap();
        let mut f = vec![0.0; 101];
        f[10] = 1.0;
        let m = Mollifier::new(1, 0.2).unwrap();
        assert!(matches!(mollify(&g, &m, &f), Err(RegularizationError::EpsilonTooLarge { .. })));
    }
}
