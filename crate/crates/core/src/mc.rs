//! Particle simulation: Euler–Maruyama with guard resets or thinned Poisson
//! jumps.
//!
//! Particles are split into fixed-size blocks, each with its own ChaCha
//! stream derived from `(seed, block)`. Results therefore do not depend on
//! the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HybridError, Result};
use crate::grid::{DensityField, Grid};
use crate::model::{eval_drift, HybridSystemSpec, JumpRegime};
use crate::schedule::step_schedule;

/// Particles per random stream.
pub const BLOCK_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McParams {
    pub n_particles: usize,
    pub dt: f64,
    pub rng_seed: u64,
}

impl McParams {
    pub fn new(n_particles: usize, dt: f64, rng_seed: u64) -> Self {
        Self {
            n_particles,
            dt,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(HybridError::InvalidArgument(format!(
                "need at least 2 particles, got {}",
                self.n_particles
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(HybridError::InvalidArgument(format!(
                "mc dt must be > 0, got {}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Initial law of the particles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSampler {
    Point(f64),
    Gaussian {
        mean: f64,
        sigma: f64,
    },
    /// Gaussian conditioned on `[lo, hi]` (rejection sampling).
    TruncatedGaussian {
        mean: f64,
        sigma: f64,
        lo: f64,
        hi: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl InitSampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            InitSampler::Point(x) => x,
            InitSampler::Gaussian { mean, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sigma * z
            }
            InitSampler::TruncatedGaussian { mean, sigma, lo, hi } => loop {
                let z: f64 = rng.sample(StandardNormal);
                let x = mean + sigma * z;
                if (lo..=hi).contains(&x) {
                    break x;
                }
            },
            InitSampler::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub positions: Vec<f64>,
    pub rng_seed: u64,
    pub time: f64,
    /// Total number of jumps taken by all particles so far.
    pub jumps: u64,
    streams: Vec<ChaCha8Rng>,
}

impl Ensemble {
    pub fn sample(init: &InitSampler, n_particles: usize, seed: u64) -> Self {
        let n_blocks = n_particles.div_ceil(BLOCK_SIZE);
        let mut streams: Vec<ChaCha8Rng> = (0..n_blocks)
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64);
                rng
            })
            .collect();
        let mut positions = vec![0.0; n_particles];
        positions
            .par_chunks_mut(BLOCK_SIZE)
            .zip(streams.par_iter_mut())
            .for_each(|(chunk, rng)| chunk.iter_mut().for_each(|x| *x = init.draw(rng)));
        Self {
            positions,
            rng_seed: seed,
            time: 0.0,
            jumps: 0,
            streams,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Mean number of jumps per particle.
    pub fn jumps_per_particle(&self) -> f64 {
        self.jumps as f64 / self.positions.len().max(1) as f64
    }

    fn advance(&mut self, spec: &HybridSystemSpec, dt: f64) {
        let jumps: u64 = self
            .positions
            .par_chunks_mut(BLOCK_SIZE)
            .zip(self.streams.par_iter_mut())
            .map(|(chunk, rng)| step_block(chunk, rng, spec, dt))
            .sum();
        self.jumps += jumps;
        self.time += dt;
    }
}

/// Probability that a Poisson clock of rate `lambda` fires within `dt`.
pub fn jump_probability(lambda: f64, dt: f64) -> f64 {
    -(-lambda * dt).exp_m1()
}

fn step_block(chunk: &mut [f64], rng: &mut ChaCha8Rng, spec: &HybridSystemSpec, dt: f64) -> u64 {
    let noise = spec.diffusion_h * dt.sqrt();
    let a = spec.reset_target;
    let mut jumps = 0;
    for x in chunk.iter_mut() {
        if spec.jump_regime == JumpRegime::SdePoissonJump {
            // rate frozen at the start of the step; a jumping particle rests at a
            let lambda = spec.rate_at(*x);
            if lambda > 0.0 && rng.random::<f64>() < jump_probability(lambda, dt) {
                *x = a;
                jumps += 1;
                continue;
            }
        }
        let mut next = *x + eval_drift(spec, *x) * dt;
        if noise > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            next += noise * z;
        }
        if let Some(b) = spec.guard {
            if next >= b {
                next = a;
                jumps += 1;
            }
        }
        *x = next;
    }
    jumps
}

/// One Euler–Maruyama step of every particle.
pub fn mc_step(ensemble: &Ensemble, spec: &HybridSystemSpec, dt: f64) -> Result<Ensemble> {
    spec.validate()?;
    if !(dt > 0.0) {
        return Err(HybridError::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    let mut next = ensemble.clone();
    next.advance(spec, dt);
    Ok(next)
}

/// Ensembles at the requested snapshot times (or only the final one).
pub fn run_ensemble(
    params: &McParams,
    spec: &HybridSystemSpec,
    init: &InitSampler,
    t_final: f64,
    snapshot_times: &[f64],
) -> Result<Vec<Ensemble>> {
    params.validate()?;
    spec.validate()?;
    let (steps, mut wanted) = step_schedule(params.dt, t_final, snapshot_times)?;
    if wanted.is_empty() {
        wanted.push(steps);
    }
    let mut ensemble = Ensemble::sample(init, params.n_particles, params.rng_seed);
    let mut out = Vec::with_capacity(wanted.len());
    let mut next = 0;
    for k in 0..=steps {
        if k > 0 {
            ensemble.advance(spec, params.dt);
            ensemble.time = k as f64 * params.dt;
        }
        while next < wanted.len() && wanted[next] == k {
            out.push(ensemble.clone());
            next += 1;
        }
    }
    Ok(out)
}

/// Fraction of particles per cell divided by `dx`. Particles outside the
/// mesh are dropped, so the histogram mass is the fraction inside.
pub fn histogram_density(ensemble: &Ensemble, grid: &Grid) -> DensityField {
    let mut values = vec![0.0; grid.n_cells];
    for &x in &ensemble.positions {
        if let Some(i) = grid.cell_of(x) {
            values[i] += 1.0;
        }
    }
    let scale = 1.0 / (ensemble.positions.len().max(1) as f64 * grid.dx);
    values.iter_mut().for_each(|v| *v *= scale);
    DensityField {
        values,
        time: ensemble.time,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Sample mean of `f` over the particles and its standard error.
pub fn mc_expectation<F: Fn(f64) -> f64>(ensemble: &Ensemble, f: F) -> Result<McEstimate> {
    let n = ensemble.positions.len();
    if n < 2 {
        return Err(HybridError::InvalidArgument(format!(
            "need at least 2 particles, got {n}"
        )));
    }
    // Welford: identical samples give exactly zero variance
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &x) in ensemble.positions.iter().enumerate() {
        let y = f(x);
        let delta = y - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (y - mean);
    }
    let variance = m2 / (n - 1) as f64;
    Ok(McEstimate {
        mean,
        stderr: (variance / n as f64).sqrt(),
    })
}
