//! Brownian increments `dW^i_k ~ N(0, dt)`.
//!
//! Path `p` under seed `s` draws from the ChaCha stream `(s, p)`, so a path's increments
//! never depend on how many other paths exist or which thread produced them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SpdeError;

#[derive(Clone, Debug, PartialEq)]
pub struct BrownianDriver {
    pub noises: usize,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
}

/// Increments of one path, `steps × noises`, step-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Increments {
    pub noises: usize,
    pub dt: f64,
    pub steps: usize,
    pub data: Vec<f64>,
}

impl Increments {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.data[k * self.noises..(k + 1) * self.noises]
    }

    /// Sums of `factor` consecutive increments: the same Brownian path seen at `factor·dt`.
    pub fn coarsen(&self, factor: usize) -> Increments {
        let n = self.noises;
        let coarse = self.steps() / factor;
        let mut data = vec![0.0; coarse * n];
        for k in 0..coarse {
            for j in 0..factor {
                for i in 0..n {
                    data[k * n + i] += self.data[(k * factor + j) * n + i];
                }
            }
        }
        Increments { noises: n, dt: self.dt * factor as f64, steps: coarse, data }
    }

    /// `W(t_k)` for every step boundary, one noise.
    pub fn path(&self, noise: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.steps() + 1);
        w.push(0.0);
        let mut acc = 0.0;
        for k in 0..self.steps() {
            acc += self.step(k)[noise];
            w.push(acc);
        }
        w
    }
}

/// Number of steps of size `dt` that make up `horizon`, if it is a whole number.
pub fn step_count(dt: f64, horizon: f64) -> Result<usize, SpdeError> {
    let bad = || SpdeError::BadHorizon { dt, horizon };
    if !(dt > 0.0 && horizon > 0.0 && dt.is_finite() && horizon.is_finite()) {
        return Err(bad());
    }
    let steps = (horizon / dt).round();
    if steps < 1.0 || (steps * dt - horizon).abs() > 1e-9 * horizon {
        return Err(bad());
    }
    Ok(steps as usize)
}

impl BrownianDriver {
    pub fn new(noises: usize, dt: f64, horizon: f64, seed: u64) -> Result<Self, SpdeError> {
        Ok(Self { noises, dt, steps: step_count(dt, horizon)?, seed })
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Same seed, `dt / factor`: coarsening its increments by `factor` gives a path with
    /// this driver's step.
    pub fn refined(&self, factor: usize) -> Self {
        Self { noises: self.noises, dt: self.dt / factor as f64, steps: self.steps * factor, seed: self.seed }
    }

    pub fn increments(&self, path: u64) -> Increments {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        let sd = self.dt.sqrt();
        let data = (0..self.steps * self.noises)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        Increments { noises: self.noises, dt: self.dt, steps: self.steps, data }
    }
}
