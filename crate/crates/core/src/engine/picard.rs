use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::estimator::{
    accumulate, heat_lattices, master_path, EnsembleStats, SpectralSweep, MAX_LOG_WEIGHT,
};
use super::norms::{alpha_norm, bmo_proxy, select_alpha};
use super::{Estimate, PicardIterate, PicardTolerance, SolverConfig};
use crate::biot_savart::{apply_k, closed_form_c0};
use crate::brownian::{mix_seed, BrownianPath};
use crate::error::{Error, Result};
use crate::field::{inverse_transform, ScalarField, VectorField};

const OUTER_DOMAIN: u64 = 0x6f75_7465_72;

/// Diagnostic path `index` of the outer ensemble.
pub fn outer_path(cfg: &SolverConfig, index: u64) -> Result<BrownianPath> {
    BrownianPath::simulate(
        mix_seed(&[cfg.base_seed, OUTER_DOMAIN, index]),
        cfg.steps,
        cfg.horizon,
    )
}

/// `xi(x) = psi(x + sqrt(2 nu) B_T)`.
pub fn terminal_value(
    psi: &ScalarField,
    path: &BrownianPath,
    cfg: &SolverConfig,
) -> Result<ScalarField> {
    if psi.n() != cfg.n {
        return Err(Error::config(format!(
            "terminal data on grid {} but the solver uses N = {}",
            psi.n(),
            cfg.n
        )));
    }
    if (path.horizon() - cfg.horizon).abs() > 1e-12 * cfg.horizon {
        return Err(Error::config(format!(
            "path horizon {} differs from T = {}",
            path.horizon(),
            cfg.horizon
        )));
    }
    if psi.mean() != 0.0 {
        return Err(Error::domain("terminal data must have zero mean"));
    }
    Ok(psi.translate(path.scaled_displacement(path.steps(), cfg.nu)?))
}

/// An iterate together with the ensemble statistics it was estimated from.
#[derive(Debug, Clone)]
pub struct LinearSolve {
    pub iterate: PicardIterate,
    pub stats: EnsembleStats,
    /// `max |h| sqrt(dt)` over nodes, the step-size guard quantity.
    pub drift_step: f64,
}

impl LinearSolve {
    /// `4 * max_m e^{-alpha tau_m} * pooled standard error at m`.
    pub fn noise_floor(&self, alpha: f64) -> f64 {
        let dt = self.iterate.dt();
        (0..=self.iterate.steps())
            .map(|m| (-alpha * m as f64 * dt).exp() * self.stats.pooled_std_error(m))
            .fold(0.0, f64::max)
            * 4.0
    }

    /// `4 * (largest pointwise standard error)`.
    pub fn eps_mc(&self) -> f64 {
        4.0 * self.stats.max_std_error()
    }
}

fn check_inputs(prev: &PicardIterate, psi: &ScalarField, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if prev.n() != cfg.n || psi.n() != cfg.n {
        return Err(Error::config(format!(
            "grid mismatch: iterate {}, terminal data {}, config {}",
            prev.n(),
            psi.n(),
            cfg.n
        )));
    }
    if prev.steps() != cfg.steps || (prev.dt() - cfg.dt()).abs() > 1e-12 * cfg.dt() {
        return Err(Error::config("iterate and config use different time grids"));
    }
    if psi.mean() != 0.0 {
        return Err(Error::domain("terminal data must have zero mean"));
    }
    Ok(())
}

fn drift_guard(max_speed: f64, cfg: &SolverConfig) -> Result<f64> {
    let step = max_speed / (2.0 * cfg.nu).sqrt() * cfg.dt().sqrt();
    if !(step <= 1.0) {
        return Err(Error::numerical(format!(
            "drift step max|h| sqrt(dt) = {step:.4} exceeds 1 (max|u| = {max_speed:.4}); refine the time grid"
        )));
    }
    Ok(step)
}

fn finish(
    stats: EnsembleStats,
    psi: &ScalarField,
    cfg: &SolverConfig,
    step: f64,
) -> Result<LinearSolve> {
    let fields = stats.fields(psi)?;
    Ok(LinearSolve {
        iterate: PicardIterate::new(fields, 0, 0.0, cfg.dt())?,
        stats,
        drift_step: step,
    })
}

/// One application of the Picard map: the Girsanov-weighted branch average
/// `omega(tau, z) = E[psi(z + sqrt(2 nu) W_tau) R]` with drift
/// `h = K(omega_prev)/sqrt(2 nu)` at every node and lattice point.
pub fn linear_bsde_solve(
    prev: &PicardIterate,
    psi: &ScalarField,
    cfg: &SolverConfig,
) -> Result<LinearSolve> {
    check_inputs(prev, psi, cfg)?;
    let sweep = SpectralSweep::new(prev, psi)?;
    let step = drift_guard(sweep.max_speed, cfg)?;
    let heat = heat_lattices(psi, cfg.nu, cfg.dt(), cfg.steps);
    let control = cfg.control_variate;
    let stats = accumulate(cfg, heat.clone(), |b, sink| {
        let path = master_path(cfg, b)?;
        let mut d = vec![0.0; cfg.n * cfg.n];
        sweep.run_branch(&path, cfg.nu, &mut |m, lambda, psi_vals| {
            for (z, out) in d.iter_mut().enumerate() {
                let l = lambda[z];
                if !(l <= MAX_LOG_WEIGHT) {
                    return Err(Error::numerical(format!(
                        "Girsanov exponent {l} overflows at node {m}, branch {b}"
                    )));
                }
                *out = if control {
                    psi_vals[z] * l.exp_m1()
                } else {
                    psi_vals[z] * l.exp() - heat[m][z]
                };
            }
            sink(m, &d);
            Ok(())
        })
    })?;
    finish(stats, psi, cfg, step)
}

/// Periodic cubic Lagrange interpolation on a uniform `m x m` lattice.
struct Interpolant {
    m: usize,
    values: Vec<f64>,
}

impl Interpolant {
    fn eval(&self, x: [f64; 2]) -> f64 {
        let m = self.m;
        let mf = m as f64;
        let mut idx = [[0usize; 4]; 2];
        let mut w = [[0.0; 4]; 2];
        for a in 0..2 {
            let s = x[a].rem_euclid(1.0) * mf;
            let i = s.floor();
            let f = s - i;
            let i = i as i64;
            w[a] = [
                -f * (f - 1.0) * (f - 2.0) / 6.0,
                (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
                -(f + 1.0) * f * (f - 2.0) / 2.0,
                (f + 1.0) * f * (f - 1.0) / 6.0,
            ];
            for (o, slot) in idx[a].iter_mut().enumerate() {
                *slot = (i - 1 + o as i64).rem_euclid(m as i64) as usize;
            }
        }
        let mut acc = 0.0;
        for r in 0..4 {
            let row = idx[0][r] * m;
            let mut inner = 0.0;
            for c in 0..4 {
                inner += w[1][c] * self.values[row + idx[1][c]];
            }
            acc += w[0][r] * inner;
        }
        acc
    }
}

/// Oversampling of the velocity lattice used by the drifted estimator.
const VELOCITY_OVERSAMPLING: usize = 4;

/// `psi` evaluated pointwise from its nonzero modes.
struct SparseSeries {
    modes: Vec<(f64, f64, Complex64)>,
}

impl SparseSeries {
    fn new(psi: &ScalarField) -> SparseSeries {
        let h = (psi.n() / 2) as i64;
        let mut modes = Vec::new();
        for k2 in 0..h {
            for k1 in (1 - h)..h {
                if k2 == 0 && k1 <= 0 {
                    continue;
                }
                let c = psi.mode(k1, k2);
                if c != Complex64::new(0.0, 0.0) {
                    modes.push((k1 as f64, k2 as f64, 2.0 * c));
                }
            }
        }
        SparseSeries { modes }
    }

    fn eval(&self, x: [f64; 2]) -> f64 {
        self.modes
            .iter()
            .map(|&(k1, k2, c)| {
                let (s, co) = (2.0 * PI * (k1 * x[0] + k2 * x[1])).sin_cos();
                c.re * co - c.im * s
            })
            .sum()
    }
}

/// Cross-check of [`linear_bsde_solve`]: Euler-Maruyama for
/// `dX = -u_prev(tau - r, X) dr + sqrt(2 nu) dW` on the same branches,
/// averaging `psi(X_tau)` without weights. Velocities are interpolated
/// (cubic, on a lattice oversampled four times).
pub fn drifted_sde_solve(
    prev: &PicardIterate,
    psi: &ScalarField,
    cfg: &SolverConfig,
) -> Result<LinearSolve> {
    check_inputs(prev, psi, cfg)?;
    let n = cfg.n;
    let mlat = n * VELOCITY_OVERSAMPLING;
    let mut velocity = Vec::with_capacity(cfg.steps + 1);
    let mut max_speed: f64 = 0.0;
    for f in prev.fields() {
        let u = apply_k(f)?;
        max_speed = max_speed.max(u.sup_norm());
        velocity.push([
            Interpolant {
                m: mlat,
                values: u.c1.sample(mlat)?.into_values(),
            },
            Interpolant {
                m: mlat,
                values: u.c2.sample(mlat)?.into_values(),
            },
        ]);
    }
    let step = drift_guard(max_speed, cfg)?;
    let series = SparseSeries::new(psi);
    let heat = heat_lattices(psi, cfg.nu, cfg.dt(), cfg.steps);
    let sigma = (2.0 * cfg.nu).sqrt();
    let dt = cfg.dt();
    let l = cfg.steps;
    let control = cfg.control_variate;
    let stats = accumulate(cfg, heat.clone(), |b, sink| {
        let path = master_path(cfg, b)?;
        let vals = path.values();
        let incs = path.increments();
        let mut d = vec![0.0; n * n];
        for m in 1..=l {
            let v0 = l - m;
            let shift = [
                sigma * (vals[l][0] - vals[v0][0]),
                sigma * (vals[l][1] - vals[v0][1]),
            ];
            for j1 in 0..n {
                for j2 in 0..n {
                    let z = [j1 as f64 / n as f64, j2 as f64 / n as f64];
                    let mut x = z;
                    for r in 0..m {
                        let [ua, ub] = &velocity[m - r];
                        let u = [ua.eval(x), ub.eval(x)];
                        let dw = incs[v0 + r];
                        x = [
                            x[0] - u[0] * dt + sigma * dw[0],
                            x[1] - u[1] * dt + sigma * dw[1],
                        ];
                    }
                    let val = series.eval(x);
                    if !val.is_finite() {
                        return Err(Error::numerical(format!(
                            "drifted path left the finite range at node {m}, branch {b}"
                        )));
                    }
                    d[j1 * n + j2] = if control {
                        val - series.eval([z[0] + shift[0], z[1] + shift[1]])
                    } else {
                        val - heat[m][j1 * n + j2]
                    };
                }
            }
            sink(m, &d);
        }
        Ok(())
    })?;
    finish(stats, psi, cfg, step)
}

/// `Z` at every node: the spectral gradient of the iterate field.
pub fn extract_z(iterate: &PicardIterate) -> Vec<VectorField> {
    iterate.gradients()
}

/// Per-iteration record of the Picard loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub iteration: usize,
    /// `sup |omega_n|` over nodes and lattice points.
    pub sup_abs: f64,
    /// `4 * max standard error` of the inner estimator.
    pub eps_mc: f64,
    /// `C1 + eps_mc - sup_abs`.
    pub margin: f64,
    /// `||Y_n - Y_{n-1}||_{alpha,inf}` (normalized by `e^{alpha T}`).
    pub increment: Option<f64>,
    pub noise_floor: f64,
    pub ratio: Option<f64>,
    /// Both increments of the ratio exceed the noise floor.
    pub above_noise: bool,
}

#[derive(Debug, Clone)]
pub struct BsdeSolution {
    pub config: SolverConfig,
    pub iterate: PicardIterate,
    pub z_fields: Vec<VectorField>,
    pub records: Vec<IterateRecord>,
    /// Ensemble statistics of the last linear solve.
    pub stats: EnsembleStats,
    pub alpha: f64,
    pub c0: f64,
    pub c1: f64,
    pub tolerance: f64,
    pub y_sup: f64,
    pub z_bmo: Estimate,
    /// Seeds of the diagnostic paths.
    pub outer_seeds: Vec<u64>,
}

impl BsdeSolution {
    pub fn ratios(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.ratio).collect()
    }

    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }
}

fn sup_on_lattice(iterate: &PicardIterate) -> f64 {
    iterate
        .fields()
        .iter()
        .map(|f| inverse_transform(f).max_abs())
        .fold(0.0, f64::max)
}

/// `||Z||_BMO` proxy evaluated along each outer path: `Z(t, x)` is the
/// gradient field at `tau = T - t` translated by `sqrt(2 nu) B_t`.
pub fn z_bmo_along_paths(iterate: &PicardIterate, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let z = extract_z(iterate);
    let l = iterate.steps();
    let dt = iterate.dt();
    (0..cfg.outer_paths as u64)
        .map(|p| {
            let path = outer_path(cfg, p)?;
            let g: Vec<f64> = (0..=l)
                .map(|m| {
                    let t_index = l - m;
                    let s = path.scaled_displacement(t_index, cfg.nu)?;
                    Ok(z[m].translate(s).l2_norm().powi(2))
                })
                .collect::<Result<_>>()?;
            let mut integral = 0.0;
            let mut best: f64 = 0.0;
            for m in 1..=l {
                integral += 0.5 * dt * (g[m - 1] + g[m]);
                best = best.max(integral);
            }
            Ok(best.sqrt())
        })
        .collect()
}

/// Picard iteration `Y_{n+1} = L(Y_n)` started from the heat-semigroup
/// iterate, stopped on the `||.||_{alpha,inf}` increment.
pub fn picard_solve(psi: &ScalarField, cfg: &SolverConfig) -> Result<BsdeSolution> {
    cfg.validate()?;
    if psi.n() != cfg.n {
        return Err(Error::config(format!(
            "terminal data on grid {} but the solver uses N = {}",
            psi.n(),
            cfg.n
        )));
    }
    if psi.mean() != 0.0 {
        return Err(Error::domain("terminal data must have zero mean"));
    }
    let c1 = psi.sup_norm().max(inverse_transform(psi).max_abs());
    let c0 = closed_form_c0(cfg.n, 1)?;
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => select_alpha(c0, c1, cfg.nu, cfg.horizon)?,
    };
    let dt = cfg.dt();

    let record = |iteration: usize, solve: &LinearSolve| {
        let sup_abs = sup_on_lattice(&solve.iterate);
        let eps_mc = solve.eps_mc();
        IterateRecord {
            iteration,
            sup_abs,
            eps_mc,
            margin: c1 + eps_mc - sup_abs,
            increment: None,
            noise_floor: solve.noise_floor(alpha),
            ratio: None,
            above_noise: false,
        }
    };

    let zero = PicardIterate::zero(cfg.n, cfg.steps, dt)?;
    let mut current = linear_bsde_solve(&zero, psi, cfg)?;
    let mut records = vec![record(0, &current)];
    let mut tolerance = match cfg.picard_tol {
        PicardTolerance::Absolute(t) => t,
        PicardTolerance::NoiseFloorMultiple(_) => 0.0,
    };
    let mut last: Option<(f64, f64)> = None;
    let mut converged = false;
    for iteration in 1..=cfg.max_iter {
        let next = linear_bsde_solve(&current.iterate, psi, cfg)?;
        let diff = next.iterate.difference(&current.iterate)?;
        let delta = alpha_norm(&diff, dt, alpha)?;
        let floor = next.noise_floor(alpha).max(current.noise_floor(alpha));
        tolerance = match cfg.picard_tol {
            PicardTolerance::Absolute(t) => {
                if floor > t {
                    return Err(Error::config(format!(
                        "Monte Carlo noise floor {floor:.3e} exceeds picard_tol {t:.3e}; increase inner_branches"
                    )));
                }
                t
            }
            PicardTolerance::NoiseFloorMultiple(c) => {
                if !floor.is_finite() {
                    return Err(Error::config(
                        "noise floor is undefined with a single inner branch; increase inner_branches",
                    ));
                }
                c * floor
            }
        };
        let mut rec = record(iteration, &next);
        rec.increment = Some(delta);
        rec.noise_floor = floor;
        if let Some((prev_delta, prev_floor)) = last {
            if prev_delta > 0.0 {
                rec.ratio = Some(delta / prev_delta);
                rec.above_noise = delta > floor && prev_delta > prev_floor;
            }
        }
        records.push(rec);
        last = Some((delta, floor));
        current = next;
        if delta <= tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        let (last_increment, _) = last.expect("max_iter >= 1");
        return Err(Error::NonConvergence {
            iterations: cfg.max_iter,
            last_increment,
            tolerance,
            ratios: records.iter().filter_map(|r| r.ratio).collect(),
        });
    }

    let iterate = current.iterate.clone().with_meta(records.len() - 1, alpha);
    let along = z_bmo_along_paths(&iterate, cfg)?;
    let jk = current.stats.jackknife(psi, |f| bmo_proxy(f, dt))?;
    let z_bmo = Estimate {
        value: along.iter().copied().fold(0.0, f64::max),
        std_error: jk.std_error,
    };
    Ok(BsdeSolution {
        config: cfg.clone(),
        z_fields: extract_z(&iterate),
        y_sup: iterate.sup_norm(),
        iterate,
        records,
        stats: current.stats,
        alpha,
        c0,
        c1,
        tolerance,
        z_bmo,
        outer_seeds: (0..cfg.outer_paths as u64)
            .map(|p| mix_seed(&[cfg.base_seed, OUTER_DOMAIN, p]))
            .collect(),
    })
}
