//! Seeded two-dimensional Brownian paths on a uniform time grid.
//!
//! Increments are counter-based: the Gaussian for step `m`, component `c` of
//! the stream keyed by `seed` is `Phi^{-1}(u)` where `u` is the 64-bit ChaCha8
//! word at position `2m + c`. Any increment can be produced without
//! generating its predecessors, and reading the stream sequentially yields the
//! same numbers.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Standard normal quantile.
#[inline]
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

#[inline]
fn unit_open(x: u64) -> f64 {
    // (0, 1), never hits either endpoint
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal variate for `(seed, step, component)`.
pub fn standard_normal_at(seed: u64, step: u64, component: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // word position counts 32-bit words; one u64 draw spans two
    rng.set_word_pos(2 * (2 * step + component) as u128);
    normal_quantile(unit_open(rng.next_u64()))
}

/// Sequential reader over the counter-based stream of a seed.
pub struct IncrementStream {
    rng: ChaCha8Rng,
    sqrt_dt: f64,
}

impl IncrementStream {
    pub fn new(seed: u64, dt: f64) -> IncrementStream {
        IncrementStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            sqrt_dt: dt.sqrt(),
        }
    }

    #[inline]
    pub fn next_increment(&mut self) -> [f64; 2] {
        let a = normal_quantile(unit_open(self.rng.next_u64()));
        let b = normal_quantile(unit_open(self.rng.next_u64()));
        [a * self.sqrt_dt, b * self.sqrt_dt]
    }
}

/// SplitMix64 finalizer, used to derive independent stream keys.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    seed: u64,
    dt: f64,
    values: Vec<[f64; 2]>,
    increments: Vec<[f64; 2]>,
}

impl BrownianPath {
    pub fn simulate(seed: u64, steps: usize, horizon: f64) -> Result<BrownianPath> {
        if steps == 0 {
            return Err(Error::config("a Brownian path needs at least one step"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let dt = horizon / steps as f64;
        let mut stream = IncrementStream::new(seed, dt);
        let increments: Vec<[f64; 2]> = (0..steps).map(|_| stream.next_increment()).collect();
        Ok(BrownianPath::from_increments(seed, dt, increments))
    }

    fn from_increments(seed: u64, dt: f64, increments: Vec<[f64; 2]>) -> BrownianPath {
        let mut values = Vec::with_capacity(increments.len() + 1);
        let mut b = [0.0, 0.0];
        values.push(b);
        for inc in &increments {
            b = [b[0] + inc[0], b[1] + inc[1]];
            values.push(b);
        }
        BrownianPath {
            seed,
            dt,
            values,
            increments,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn increments(&self) -> &[[f64; 2]] {
        &self.increments
    }

    /// Keeps the path on `[0, t_m]` and continues with `sub_steps` fresh
    /// increments keyed by `branch_seed`.
    pub fn branch(&self, m: usize, branch_seed: u64, sub_steps: usize) -> Result<BrownianPath> {
        if m > self.steps() {
            return Err(Error::domain(format!(
                "branch index {m} outside 0..={}",
                self.steps()
            )));
        }
        let mut increments = self.increments[..m].to_vec();
        let mut stream = IncrementStream::new(branch_seed, self.dt);
        increments.extend((0..sub_steps).map(|_| stream.next_increment()));
        Ok(BrownianPath::from_increments(
            self.seed, self.dt, increments,
        ))
    }

    /// `sqrt(2 nu) B_{t_m}`.
    pub fn scaled_displacement(&self, m: usize, nu: f64) -> Result<[f64; 2]> {
        let b = self
            .values
            .get(m)
            .ok_or_else(|| Error::domain(format!("time index {m} outside 0..={}", self.steps())))?;
        let s = (2.0 * nu).sqrt();
        Ok([s * b[0], s * b[1]])
    }

    /// The same path on the grid with twice the step (pairs of increments summed).
    pub fn coarsen(&self) -> Result<BrownianPath> {
        if self.steps() % 2 != 0 {
            return Err(Error::config("coarsening needs an even number of steps"));
        }
        let increments = self
            .increments
            .chunks_exact(2)
            .map(|p| [p[0][0] + p[1][0], p[0][1] + p[1][1]])
            .collect();
        Ok(BrownianPath::from_increments(
            self.seed,
            2.0 * self.dt,
            increments,
        ))
    }

    /// Debug dump with columns `m,t,B1,B2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,t,B1,B2\n");
        for (m, b) in self.values.iter().enumerate() {
            out.push_str(&format!(
                "{m},{:.12e},{:.12e},{:.12e}\n",
                self.time(m),
                b[0],
                b[1]
            ));
        }
        out
    }
}
