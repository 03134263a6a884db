//! BSDE solver for the vorticity terminal-value problem in its Markovian form.
//!
//! For terminal data `xi(x) = psi(x + sqrt(2 nu) B_T)` every Picard iterate is
//! `Y_n(t, x) = omega_n(T - t, x + sqrt(2 nu) B_t)` for a deterministic field
//! trajectory `omega_n`, so an iterate is stored as `omega_n(tau_m, .)` on the
//! time nodes `tau_m = m dt`, `m = 0..=L`. Node `m` of a [`PicardIterate`]
//! corresponds to BSDE time `t = T - tau_m`.

mod estimator;
mod girsanov;
mod norms;
mod picard;
mod residual;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_grid_size, ScalarField, VectorField};

pub use estimator::{EnsembleStats, NodeStats};
pub use girsanov::girsanov_weight;
pub use norms::{alpha_norm, bmo_proxy, select_alpha, weighted_bmo_proxy, weighted_sup_norm};
pub use picard::{
    drifted_sde_solve, extract_z, linear_bsde_solve, outer_path, picard_solve, terminal_value,
    z_bmo_along_paths, BsdeSolution, IterateRecord, LinearSolve,
};
pub use residual::{bsde_residual, ResidualReport};

/// Branches per batch group are accumulated separately; groups feed the
/// jackknife error estimates and fix the reduction order.
pub const BATCHES: usize = 8;

/// Picard stopping tolerance on the increment `||Y_{n+1} - Y_n||_{alpha,inf}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum PicardTolerance {
    Absolute(f64),
    /// Multiple of the Monte Carlo noise floor measured during the solve.
    NoiseFloorMultiple(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Grid size `N` (even, >= 4).
    pub n: usize,
    /// Time steps `L` of the shared uniform grid.
    pub steps: usize,
    /// Diagnostic (outer) Brownian paths.
    pub outer_paths: usize,
    /// Fresh branches per conditional expectation.
    pub inner_branches: usize,
    pub nu: f64,
    pub horizon: f64,
    /// Weight of the contraction norm; `None` selects it from the sufficient
    /// conditions of the contraction estimate.
    pub alpha: Option<f64>,
    pub picard_tol: PicardTolerance,
    pub max_iter: usize,
    pub base_seed: u64,
    /// Subtract the exactly known heat-semigroup expectation from the
    /// branch average.
    pub control_variate: bool,
    /// Worker threads; `0` means the rayon default. Not serialized.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n: 32,
            steps: 32,
            outer_paths: 32,
            inner_branches: 1000,
            nu: 0.5,
            horizon: 0.25,
            alpha: None,
            picard_tol: PicardTolerance::NoiseFloorMultiple(2.0),
            max_iter: 8,
            base_seed: 2024,
            control_variate: true,
            workers: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_grid_size(self.n)?;
        if self.steps == 0
            || self.outer_paths == 0
            || self.inner_branches == 0
            || self.max_iter == 0
        {
            return Err(Error::config(
                "steps, outer_paths, inner_branches and max_iter must all be at least 1",
            ));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::config(format!(
                "nu must be positive, got {}",
                self.nu
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!(
                "horizon T must be positive, got {}",
                self.horizon
            )));
        }
        if let Some(a) = self.alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::config(format!("alpha must be >= 0, got {a}")));
            }
        }
        let tol = match self.picard_tol {
            PicardTolerance::Absolute(t) | PicardTolerance::NoiseFloorMultiple(t) => t,
        };
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::config(format!(
                "picard_tol must be positive, got {tol}"
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub(crate) fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if self.workers > 0 {
            builder = builder.num_threads(self.workers);
        }
        builder
            .build()
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
    }
}

/// Deterministic field trajectory `omega_n(tau_m, .)` representing one Picard iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardIterate {
    fields: Vec<ScalarField>,
    iteration: usize,
    alpha: f64,
    dt: f64,
}

impl PicardIterate {
    pub fn new(
        fields: Vec<ScalarField>,
        iteration: usize,
        alpha: f64,
        dt: f64,
    ) -> Result<PicardIterate> {
        if fields.len() < 2 {
            return Err(Error::config("an iterate needs at least two time nodes"));
        }
        let n = fields[0].n();
        if fields.iter().any(|f| f.n() != n) {
            return Err(Error::config("iterate fields have mixed grid sizes"));
        }
        if fields.iter().any(|f| f.mean() != 0.0) {
            return Err(Error::domain("iterate fields must have zero mean"));
        }
        if !(dt > 0.0) {
            return Err(Error::config("iterate time step must be positive"));
        }
        Ok(PicardIterate {
            fields,
            iteration,
            alpha,
            dt,
        })
    }

    /// The all-zero iterate (`h = 0` in the linear solve).
    pub fn zero(n: usize, steps: usize, dt: f64) -> Result<PicardIterate> {
        let z = ScalarField::zeros(n, true)?;
        PicardIterate::new(vec![z; steps + 1], 0, 0.0, dt)
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn field(&self, m: usize) -> &ScalarField {
        &self.fields[m]
    }

    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn n(&self) -> usize {
        self.fields[0].n()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub(crate) fn with_meta(mut self, iteration: usize, alpha: f64) -> PicardIterate {
        self.iteration = iteration;
        self.alpha = alpha;
        self
    }

    /// Node-wise difference `self - other`.
    pub fn difference(&self, other: &PicardIterate) -> Result<Vec<ScalarField>> {
        if self.fields.len() != other.fields.len() {
            return Err(Error::config("iterates live on different time grids"));
        }
        self.fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.sub(b))
            .collect()
    }

    /// Largest sup norm over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.fields.iter().fold(0.0, |m, f| m.max(f.sup_norm()))
    }

    /// `Y(t_m, x) = omega(T - t_m, x + shift)` as a field of `x`, for BSDE time index `m`.
    pub fn y_field(&self, t_index: usize, shift: [f64; 2]) -> ScalarField {
        self.fields[self.steps() - t_index].translate(shift)
    }

    /// The iterate on the grid with twice the time step.
    pub fn coarsen(&self) -> Result<PicardIterate> {
        if self.steps() % 2 != 0 {
            return Err(Error::config("coarsening needs an even number of steps"));
        }
        let fields = self.fields.iter().step_by(2).cloned().collect();
        PicardIterate::new(fields, self.iteration, self.alpha, 2.0 * self.dt)
    }

    pub fn gradients(&self) -> Vec<VectorField> {
        self.fields.iter().map(|f| f.gradient()).collect()
    }
}

/// A Monte Carlo quantity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}
