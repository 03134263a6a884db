//! Weighted norms on field trajectories.
//!
//! Trajectories are indexed by `tau_m = m dt`, BSDE time being `t = T - tau`.
//! The weight `e^{alpha t}` is reported relative to its largest value
//! `e^{alpha T}`, i.e. as `e^{-alpha tau}`, which keeps large `alpha` finite.
//! Ratios of weighted norms are unaffected.

use crate::error::{Error, Result};
use crate::field::ScalarField;

fn check(fields: &[ScalarField], dt: f64, alpha: f64) -> Result<()> {
    if fields.is_empty() {
        return Err(Error::config("empty field trajectory"));
    }
    if !(dt > 0.0) || !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!(
            "need dt > 0 and alpha >= 0, got {dt}, {alpha}"
        )));
    }
    Ok(())
}

/// `max_m e^{-alpha tau_m} sup |f(tau_m)|`.
pub fn weighted_sup_norm(fields: &[ScalarField], dt: f64, alpha: f64) -> Result<f64> {
    check(fields, dt, alpha)?;
    Ok(fields
        .iter()
        .enumerate()
        .map(|(m, f)| (-alpha * m as f64 * dt).exp() * f.sup_norm())
        .fold(0.0, f64::max))
}

/// `sqrt(max_t int_t^T e^{2 alpha (s - T)} ||grad f(T - s)||^2 ds)`, trapezoid
/// rule on the nodes. The integrand is non-negative, so the maximum is the
/// integral over the whole horizon.
pub fn weighted_bmo_proxy(fields: &[ScalarField], dt: f64, alpha: f64) -> Result<f64> {
    check(fields, dt, alpha)?;
    let g: Vec<f64> = fields
        .iter()
        .enumerate()
        .map(|(m, f)| (-2.0 * alpha * m as f64 * dt).exp() * f.gradient().l2_norm().powi(2))
        .collect();
    let mut integral = 0.0;
    let mut best: f64 = 0.0;
    for m in 1..g.len() {
        integral += 0.5 * dt * (g[m - 1] + g[m]);
        best = best.max(integral);
    }
    Ok(best.sqrt())
}

/// Discrete `||Z||_BMO` proxy: `sqrt(max_t int_t^T ||grad omega(T - s)||^2 ds)`.
pub fn bmo_proxy(fields: &[ScalarField], dt: f64) -> Result<f64> {
    weighted_bmo_proxy(fields, dt, 0.0)
}

/// `||Y||_{alpha,inf} = ||Y^alpha||_inf + ||Z^alpha||_BMO` in the normalized units.
pub fn alpha_norm(fields: &[ScalarField], dt: f64, alpha: f64) -> Result<f64> {
    Ok(weighted_sup_norm(fields, dt, alpha)? + weighted_bmo_proxy(fields, dt, alpha)?)
}

/// Smallest `alpha` meeting both sufficient conditions of the contraction
/// estimate: `C0^2 C1^2 (nu + T C0 C1^2) / (alpha nu^2) <= 1/16` and
/// `C0^2 C1^2 / alpha <= nu / 4`.
pub fn select_alpha(c0: f64, c1: f64, nu: f64, horizon: f64) -> Result<f64> {
    if !(c0 >= 0.0 && c1 >= 0.0 && nu > 0.0 && horizon >= 0.0)
        || !(c0.is_finite() && c1.is_finite() && nu.is_finite() && horizon.is_finite())
    {
        return Err(Error::config(format!(
            "invalid constants C0 = {c0}, C1 = {c1}, nu = {nu}, T = {horizon}"
        )));
    }
    let a = c0 * c0 * c1 * c1;
    Ok((16.0 * a * (nu + horizon * c0 * c1 * c1) / (nu * nu)).max(4.0 * a / nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TrigTerm;
    use std::f64::consts::PI;

    fn decaying(n: usize, steps: usize, dt: f64, rate: f64) -> Vec<ScalarField> {
        (0..=steps)
            .map(|m| {
                ScalarField::from_trig_terms(
                    n,
                    &[TrigTerm::sin((-rate * m as f64 * dt).exp(), (1, 0))],
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn alpha_selection_satisfies_both_conditions() {
        for &(c0, c1, nu, t) in &[
            (1.0125, 1.0, 0.1, 0.5),
            (1.0125, 1.4, 0.5, 0.25),
            (2.0, 0.3, 3.0, 1.0),
        ] {
            let a = select_alpha(c0, c1, nu, t).unwrap();
            let k = c0 * c0 * c1 * c1;
            assert!(k * (nu + t * c0 * c1 * c1) / (a * nu * nu) <= 1.0 / 16.0 + 1e-15);
            assert!(k / a <= nu / 4.0 + 1e-15);
        }
        assert_eq!(select_alpha(1.0, 0.0, 0.1, 1.0).unwrap(), 0.0);
        assert!(select_alpha(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn single_mode_bmo_proxy_matches_integral() {
        // ||grad omega(tau)||^2 = 2 pi^2 e^{-8 pi^2 nu tau}
        let (nu, horizon, steps) = (0.1, 0.5, 512);
        let dt = horizon / steps as f64;
        let rate = 4.0 * PI * PI * nu;
        let f = decaying(16, steps, dt, rate);
        let exact = (1.0 - (-8.0 * PI * PI * nu * horizon).exp()) / (4.0 * nu);
        assert!((exact - 2.4518).abs() < 1e-4);
        let got = bmo_proxy(&f, dt).unwrap().powi(2);
        assert!((got - exact).abs() / exact < 1e-4, "{got} vs {exact}");
    }

    #[test]
    fn zero_alpha_norm_is_sup_plus_bmo() {
        let f = decaying(8, 10, 0.05, 1.0);
        let n0 = alpha_norm(&f, 0.05, 0.0).unwrap();
        let sup = f.iter().map(|g| g.sup_norm()).fold(0.0, f64::max);
        assert!((n0 - sup - bmo_proxy(&f, 0.05).unwrap()).abs() < 1e-14);
        assert!(alpha_norm(&f, 0.05, 3.0).unwrap() < n0);
    }

    #[test]
    fn weighted_sup_uses_tau_weights() {
        let n = 8;
        let z = ScalarField::zeros(n, true).unwrap();
        let one = ScalarField::from_trig_terms(n, &[TrigTerm::cos(1.0, (1, 0))]).unwrap();
        let f = vec![z.clone(), one, z];
        let w = weighted_sup_norm(&f, 0.1, 2.0).unwrap();
        assert!((w - (-0.2f64).exp()).abs() < 1e-12);
    }
}
