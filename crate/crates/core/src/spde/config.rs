//! Everything needed to rebuild a batch of paths, and the parallel path loop.

use rayon::prelude::*;
use serde::Serialize;

use super::{driver::step_count, BrownianDriver, Domain, Increments, SpdeError, SpdeProblem};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub manifold: String,
    pub resolution: usize,
    pub preset: String,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn domain(&self) -> Result<Domain, SpdeError> {
        Domain::from_name(&self.manifold)
    }

    pub fn steps(&self) -> Result<usize, SpdeError> {
        step_count(self.dt, self.horizon)
    }

    pub fn problem(&self) -> Result<SpdeProblem, SpdeError> {
        let d = self.domain()?;
        let geom = d.geometry(self.resolution)?;
        let coeffs = d.preset(&geom, &self.preset)?;
        SpdeProblem::new(geom, coeffs)
    }

    pub fn driver(&self, noises: usize) -> Result<BrownianDriver, SpdeError> {
        BrownianDriver::new(noises, self.dt, self.horizon, self.seed)
    }

    /// `space` times the nodes per axis and `dt / time`.
    pub fn refined(&self, space: usize, time: usize) -> Self {
        Self { resolution: self.resolution * space, dt: self.dt / time as f64, ..self.clone() }
    }
}

/// `f(path)` for every path id in parallel, results in path order.
pub fn par_paths<T, E, F>(paths: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync + Send,
{
    (0..paths as u64).into_par_iter().map(f).collect()
}

/// Increments for a ladder of time steps driven by one Brownian path: level `l` of
/// `levels` uses `driver.dt / ratio^l`, all coarsened from the finest level.
pub fn coupled_increments(driver: &BrownianDriver, ratio: usize, levels: usize, path: u64) -> Vec<Increments> {
    let top = ratio.pow(levels as u32 - 1);
    let fine = driver.refined(top).increments(path);
    (0..levels).map(|l| fine.coarsen(ratio.pow((levels - 1 - l) as u32))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupled_levels_share_endpoints() {
        let d = BrownianDriver::new(1, 0.1, 1.0, 2).unwrap();
        let incs = coupled_increments(&d, 4, 3, 0);
        assert_eq!(incs[0].steps(), 10);
        assert_eq!(incs[2].steps(), 160);
        let w0 = incs[0].path(0)[10];
        let w2 = incs[2].path(0)[160];
        assert!((w0 - w2).abs() < 1e-13);
    }

    #[test]
    fn path_order_is_kept() {
        let v: Result<Vec<u64>, ()> = par_paths(50, |p| Ok(p * p));
        assert_eq!(v.unwrap(), (0..50u64).map(|p| p * p).collect::<Vec<_>>());
    }
}
