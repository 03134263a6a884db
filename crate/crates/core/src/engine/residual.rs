use serde::Serialize;

use super::PicardIterate;
use crate::biot_savart::apply_k;
use crate::brownian::BrownianPath;
use crate::error::{Error, Result};

/// Pathwise BSDE residual at every BSDE time node `t_m`.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// `R_m`, indexed by BSDE time node (`R_L = 0`).
    pub residuals: Vec<f64>,
    pub max: f64,
}

/// `R_m = || xi - Y(t_m) - sum_{j >= m} (<Z_j, K(Y_j)> dt + sqrt(2 nu) <Z_j, dB_j>) ||_{L2}`
/// along one path, with left-point sums. Products are formed on the doubled
/// lattice, where their L2 norms are exact.
pub fn bsde_residual(
    iterate: &PicardIterate,
    path: &BrownianPath,
    nu: f64,
) -> Result<ResidualReport> {
    let l = iterate.steps();
    if path.steps() != l || (path.dt() - iterate.dt()).abs() > 1e-12 * iterate.dt() {
        return Err(Error::config(format!(
            "path grid ({} steps of {}) does not match the solution grid ({} steps of {})",
            path.steps(),
            path.dt(),
            l,
            iterate.dt()
        )));
    }
    if !(nu > 0.0) {
        return Err(Error::config(format!("nu must be positive, got {nu}")));
    }
    let lat = 2 * iterate.n();
    let sigma = (2.0 * nu).sqrt();
    let dt = path.dt();
    let y_lattice = |j: usize| -> Result<Vec<f64>> {
        let y = iterate.y_field(j, path.scaled_displacement(j, nu)?);
        Ok(y.sample(lat)?.into_values())
    };
    let rms = |a: &[f64], b: &[f64]| -> f64 {
        (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
    };

    // Y_L is xi itself
    let mut acc = y_lattice(l)?;
    let mut residuals = vec![0.0; l + 1];
    for j in (0..l).rev() {
        let y = iterate.y_field(j, path.scaled_displacement(j, nu)?);
        let z = y.gradient();
        let u = apply_k(&y)?;
        let z1 = z.c1.sample(lat)?;
        let z2 = z.c2.sample(lat)?;
        let u1 = u.c1.sample(lat)?;
        let u2 = u.c2.sample(lat)?;
        let db = path.increments()[j];
        for (p, a) in acc.iter_mut().enumerate() {
            let (za, zb) = (z1.values()[p], z2.values()[p]);
            *a -= (za * u1.values()[p] + zb * u2.values()[p]) * dt
                + sigma * (za * db[0] + zb * db[1]);
        }
        let yv = y.sample(lat)?;
        residuals[j] = rms(&acc, yv.values());
    }
    let max = residuals.iter().copied().fold(0.0, f64::max);
    Ok(ResidualReport { residuals, max })
}
