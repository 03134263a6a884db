//! The Biot-Savart operator `K`: vorticity to divergence-free velocity on the
//! torus, and the elliptic estimates that control it.
//!
//! Laplacian convention: `Delta exp(2 pi i <k,x>) = -4 pi^2 |k|^2 exp(2 pi i <k,x>)`.
//! With `g = (-Delta)^{-1} omega` the velocity is `u = (d2 g, -d1 g)`, which
//! solves `Delta u1 = -d2 omega`, `Delta u2 = d1 omega` and has `curl u = omega`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{mode_index, sobolev_weight, wavenumber, ScalarField, VectorField};

/// Spectral gap of the unit torus, the smallest nonzero eigenvalue of `-Delta`.
pub const LAMBDA1: f64 = 4.0 * PI * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiotSavartConstants {
    pub lambda1: f64,
    /// Elliptic constant in `||K_j f||_{k,2} <= C0 ||f||_{k-1,2}`.
    pub c0: f64,
    pub k_order: u32,
}

impl BiotSavartConstants {
    /// Constants with `C0` from the closed-form multiplier supremum on an `n` grid.
    pub fn closed_form(n: usize, k_order: u32) -> Result<BiotSavartConstants> {
        Ok(BiotSavartConstants {
            lambda1: LAMBDA1,
            c0: closed_form_c0(n, k_order)?,
            k_order,
        })
    }
}

fn require_mean_zero(f: &ScalarField) -> Result<()> {
    if f.mode(0, 0) != Complex64::new(0.0, 0.0) {
        return Err(Error::domain(format!(
            "operand must have zero mean, found mean {:.3e}",
            f.mean()
        )));
    }
    Ok(())
}

/// Solves `Delta g = -f`, `integral g = 0`.
pub fn green_solve(f: &ScalarField) -> Result<ScalarField> {
    require_mean_zero(f)?;
    let g = f.map_modes(|k1, k2| {
        let k2sum = (k1 * k1 + k2 * k2) as f64;
        if k2sum == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0 / (4.0 * PI * PI * k2sum), 0.0)
        }
    });
    Ok(g.project_mean_zero())
}

/// Multiplier of `K_j` at wave number `(k1, k2) != 0`.
#[inline]
pub fn k_multiplier(j: usize, k1: i64, k2: i64) -> Complex64 {
    let k2sum = (k1 * k1 + k2 * k2) as f64;
    if k2sum == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    match j {
        1 => Complex64::new(0.0, k2 as f64 / (2.0 * PI * k2sum)),
        2 => Complex64::new(0.0, -(k1 as f64) / (2.0 * PI * k2sum)),
        _ => panic!("K has components 1 and 2, got {j}"),
    }
}

/// Velocity `u = K(omega)`.
pub fn apply_k(omega: &ScalarField) -> Result<VectorField> {
    require_mean_zero(omega)?;
    let u1 = omega
        .map_modes(|k1, k2| k_multiplier(1, k1, k2))
        .project_mean_zero();
    let u2 = omega
        .map_modes(|k1, k2| k_multiplier(2, k1, k2))
        .project_mean_zero();
    VectorField::new(u1, u2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticReport {
    pub grad_bound_ok: bool,
    pub poincare_ok: bool,
    /// `||grad K_j f|| / ||f||` for j = 1, 2.
    pub grad_ratios: [f64; 2],
    /// `||K_j f|| / ||f||` for j = 1, 2; bounded by `1 / sqrt(lambda1)`.
    pub poincare_ratios: [f64; 2],
}

/// Checks `||grad K_j f|| <= ||f||` and `||K_j f|| <= ||f|| / sqrt(lambda1)`.
pub fn verify_elliptic_estimates(f: &ScalarField) -> Result<EllipticReport> {
    require_mean_zero(f)?;
    let norm = f.l2_norm();
    if norm == 0.0 {
        return Err(Error::domain(
            "elliptic ratios are undefined for the zero field",
        ));
    }
    let u = apply_k(f)?;
    let comps = [&u.c1, &u.c2];
    let grad_ratios = comps.map(|c| c.gradient().l2_norm() / norm);
    let poincare_ratios = comps.map(|c| c.l2_norm() / norm);
    let slack = 1e-12;
    let poincare_limit = 1.0 / LAMBDA1.sqrt();
    Ok(EllipticReport {
        grad_bound_ok: grad_ratios.iter().all(|r| *r <= 1.0 + slack),
        poincare_ok: poincare_ratios
            .iter()
            .all(|r| *r <= poincare_limit * (1.0 + slack)),
        grad_ratios,
        poincare_ratios,
    })
}

fn check_order(k_order: u32) -> Result<()> {
    if !(1..=3).contains(&k_order) {
        return Err(Error::config(format!(
            "elliptic estimate order must be in 1..=3, got {k_order}"
        )));
    }
    Ok(())
}

/// `max_j ||K_j f||_{k,2} / ||f||_{k-1,2}`.
pub fn elliptic_ratio(f: &ScalarField, k_order: u32) -> Result<f64> {
    check_order(k_order)?;
    let u = apply_k(f)?;
    let denom = f.sobolev_norm(k_order - 1)?;
    if denom == 0.0 {
        return Err(Error::domain("elliptic ratio of the zero field"));
    }
    Ok(u.c1.sobolev_norm(k_order)?.max(u.c2.sobolev_norm(k_order)?) / denom)
}

/// Empirical `C0`: the largest elliptic ratio over `trials` random mean-zero
/// fields on an `n` grid.
pub fn measure_c0(n: usize, k_order: u32, trials: usize, seed: u64) -> Result<f64> {
    check_order(k_order)?;
    if trials == 0 {
        return Err(Error::config("measure_c0 needs at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n / 2;
    let mut best = 0.0_f64;
    for _ in 0..trials {
        // random band limit and spectral slope so that both low- and
        // high-wave-number dominated fields are probed
        let kmax = rng.gen_range(1..half) as i64;
        let slope: f64 = rng.gen_range(0.0..3.0);
        let mut modes = vec![Complex64::new(0.0, 0.0); n * n];
        for i1 in 0..n {
            let Some(k1) = wavenumber(i1, n) else {
                continue;
            };
            for i2 in 0..n {
                let Some(k2) = wavenumber(i2, n) else {
                    continue;
                };
                if (k1, k2) == (0, 0) || k1.abs() > kmax || k2.abs() > kmax {
                    continue;
                }
                // fill one half-plane and mirror
                if k1 < 0 || (k1 == 0 && k2 < 0) {
                    continue;
                }
                let amp = (1.0 + (k1 * k1 + k2 * k2) as f64).powf(-slope / 2.0);
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
                let j1 = mode_index(-k1, n).expect("resolved");
                let j2 = mode_index(-k2, n).expect("resolved");
                modes[i1 * n + i2] = c;
                modes[j1 * n + j2] = c.conj();
            }
        }
        let f = ScalarField::from_modes(n, modes, true)?;
        if f.is_zero() {
            continue;
        }
        best = best.max(elliptic_ratio(&f, k_order)?);
    }
    Ok(best)
}

/// Supremum over resolved wave numbers of the single-mode elliptic ratio;
/// an upper bound for every field on an `n` grid since both norms are
/// diagonal in Fourier space.
pub fn closed_form_c0(n: usize, k_order: u32) -> Result<f64> {
    check_order(k_order)?;
    crate::field::check_grid_size(n)?;
    let half = (n / 2) as i64;
    let mut best = 0.0_f64;
    for k1 in (1 - half)..half {
        for k2 in (1 - half)..half {
            if (k1, k2) == (0, 0) {
                continue;
            }
            best = best.max(single_mode_c0(k1, k2, k_order));
        }
    }
    Ok(best)
}

/// Elliptic ratio of the single mode `exp(2 pi i <k, x>)` (plus conjugate).
pub fn single_mode_c0(k1: i64, k2: i64, k_order: u32) -> f64 {
    let w = (sobolev_weight(k1, k2, k_order) / sobolev_weight(k1, k2, k_order - 1)).sqrt();
    let m = k_multiplier(1, k1, k2)
        .norm()
        .max(k_multiplier(2, k1, k2).norm());
    m * w
}
