//! Deterministic pseudo-spectral solver for the unforced vorticity equation
//! `d_t omega - nu Delta omega + u . grad omega = 0`, `u = K(omega)`.
//!
//! Time stepping is integrating-factor Heun (RK2): diffusion is applied exactly
//! per mode, advection explicitly. The quadratic term is dealiased with 3/2
//! zero padding.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::biot_savart::apply_k;
use crate::error::{Error, Result};
use crate::field::{truncate_from_lattice, ScalarField};

/// Advective CFL limit on `dt * max|u| * 2 pi (N/2)`.
pub const CFL_LIMIT: f64 = 0.5;

/// `u . grad omega`, with `u = K(omega)`.
pub fn nonlinear_term(omega: &ScalarField) -> Result<ScalarField> {
    let n = omega.n();
    let u = apply_k(omega)?;
    let grad = omega.gradient();
    let m = 3 * n / 2;
    let u1 = u.c1.sample(m)?;
    let u2 = u.c2.sample(m)?;
    let g1 = grad.c1.sample(m)?;
    let g2 = grad.c2.sample(m)?;
    let prod: Vec<f64> = u1
        .values()
        .iter()
        .zip(u2.values())
        .zip(g1.values().iter().zip(g2.values()))
        .map(|((a, b), (c, d))| a * c + b * d)
        .collect();
    let lattice = crate::field::GridSignal::new(m, prod)?;
    let out = truncate_from_lattice(&lattice, n)?;
    debug_assert!(out.mean().abs() < 1e-12 * (1.0 + out.l2_norm()));
    Ok(out.project_mean_zero())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VorticityTrajectory {
    fields: Vec<ScalarField>,
    nu: f64,
    dt: f64,
}

impl VorticityTrajectory {
    /// Wraps precomputed node fields (e.g. decoded from a checkpoint).
    pub fn from_parts(fields: Vec<ScalarField>, nu: f64, dt: f64) -> Result<VorticityTrajectory> {
        if fields.len() < 2 {
            return Err(Error::config("a trajectory needs at least two time nodes"));
        }
        if !(dt > 0.0 && dt.is_finite()) || !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::config("trajectory needs positive finite nu and dt"));
        }
        let n = fields[0].n();
        if fields.iter().any(|f| f.n() != n) {
            return Err(Error::config("trajectory fields have mixed grid sizes"));
        }
        Ok(VorticityTrajectory { fields, nu, dt })
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

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn n(&self) -> usize {
        self.fields[0].n()
    }

    /// Field at time `tau`, linear in time between nodes.
    pub fn field_at(&self, tau: f64) -> Result<ScalarField> {
        let horizon = self.horizon();
        let slack = 1e-12 * horizon;
        if !(tau >= -slack && tau <= horizon + slack) {
            return Err(Error::domain(format!(
                "time {tau} outside trajectory range [0, {horizon}]"
            )));
        }
        let s = (tau / self.dt).clamp(0.0, self.steps() as f64);
        let m = (s.floor() as usize).min(self.steps() - 1);
        let w = s - m as f64;
        if w == 0.0 {
            return Ok(self.fields[m].clone());
        }
        if w == 1.0 {
            return Ok(self.fields[m + 1].clone());
        }
        self.fields[m].scale(1.0 - w).axpy(w, &self.fields[m + 1])
    }

    /// `omega(tau, x)`: linear in time, exact series in space.
    pub fn evaluate(&self, tau: f64, x: [f64; 2]) -> Result<f64> {
        Ok(self.field_at(tau)?.eval(x))
    }
}

fn max_speed(omega: &ScalarField) -> Result<f64> {
    Ok(apply_k(omega)?.sup_norm())
}

fn check_cfl(dt: f64, speed: f64, n: usize, horizon: f64) -> Result<()> {
    let courant = dt * speed * 2.0 * PI * (n / 2) as f64;
    if courant > CFL_LIMIT {
        let suggested = (horizon * speed * 2.0 * PI * (n / 2) as f64 / CFL_LIMIT).ceil() as usize;
        return Err(Error::config(format!(
            "advective CFL number {courant:.3} exceeds {CFL_LIMIT}; use at least {suggested} steps"
        )));
    }
    Ok(())
}

/// Integrates from `omega0` to time `horizon` in `steps` uniform steps.
pub fn evolve(
    omega0: &ScalarField,
    nu: f64,
    horizon: f64,
    steps: usize,
) -> Result<VorticityTrajectory> {
    if steps == 0 {
        return Err(Error::config("evolve needs at least one step"));
    }
    if !(nu > 0.0 && nu.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config("evolve needs positive finite nu and horizon"));
    }
    if omega0.mode(0, 0) != Complex64::new(0.0, 0.0) {
        return Err(Error::domain("initial vorticity must have zero mean"));
    }
    let n = omega0.n();
    let dt = horizon / steps as f64;
    let decay = |k1: i64, k2: i64| {
        Complex64::new(
            (-4.0 * PI * PI * nu * (k1 * k1 + k2 * k2) as f64 * dt).exp(),
            0.0,
        )
    };
    let mut fields = Vec::with_capacity(steps + 1);
    let mut w = omega0.project_mean_zero();
    fields.push(w.clone());
    for _ in 0..steps {
        check_cfl(dt, max_speed(&w)?, n, horizon)?;
        // d_t w = nu Delta w - N(w)
        let a = nonlinear_term(&w)?.scale(-1.0);
        let predictor = w.axpy(dt, &a)?.map_modes(decay);
        let b = nonlinear_term(&predictor)?.scale(-1.0);
        let next = w
            .map_modes(decay)
            .axpy(0.5 * dt, &a.map_modes(decay))?
            .axpy(0.5 * dt, &b)?;
        w = next.project_mean_zero();
        if w.modes()
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::numerical("non-finite vorticity during evolution"));
        }
        fields.push(w.clone());
    }
    VorticityTrajectory::from_parts(fields, nu, dt)
}

/// `(enstrophy, energy, sup|omega|)` at each node; enstrophy is `||omega||^2`,
/// energy `||K(omega)||^2`.
pub fn trajectory_statistics(traj: &VorticityTrajectory) -> Result<Vec<[f64; 3]>> {
    traj.fields()
        .iter()
        .map(|w| {
            let e = w.l2_norm().powi(2);
            let kin = apply_k(w)?.l2_norm().powi(2);
            Ok([e, kin, w.sup_norm()])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{inverse_transform, TrigTerm};

    fn sin1(n: usize) -> ScalarField {
        ScalarField::from_trig_terms(n, &[TrigTerm::sin(1.0, (1, 0))]).unwrap()
    }

    fn two_mode(n: usize) -> ScalarField {
        ScalarField::from_trig_terms(n, &[TrigTerm::sin(1.0, (1, 0)), TrigTerm::cos(0.5, (1, 1))])
            .unwrap()
    }

    #[test]
    fn nonlinear_term_examples() {
        assert!(nonlinear_term(&sin1(16)).unwrap().l2_norm() < 1e-14);
        assert!(nonlinear_term(&ScalarField::zeros(16, true).unwrap())
            .unwrap()
            .is_zero());
    }

    #[test]
    fn nonlinear_term_is_orthogonal_to_omega() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let mut terms = Vec::new();
            for k1 in -4i64..=4 {
                for k2 in 1i64..=4 {
                    terms.push(TrigTerm::cos(rng.gen_range(-1.0..1.0), (k1, k2)));
                    terms.push(TrigTerm::sin(rng.gen_range(-1.0..1.0), (k1, k2)));
                }
            }
            let w = ScalarField::from_trig_terms(32, &terms).unwrap();
            let nl = nonlinear_term(&w).unwrap();
            // quadrature oracle on a fine lattice (exact for this band)
            let a = nl.sample(64).unwrap();
            let b = w.sample(64).unwrap();
            let integral: f64 = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| x * y)
                .sum::<f64>()
                / (64.0 * 64.0);
            assert!(integral.abs() < 1e-10, "{integral}");
            assert!(nl.mean().abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_decays_exactly() {
        let traj = evolve(&sin1(32), 0.1, 0.5, 128).unwrap();
        let amp = (-2.0 * PI * PI / 10.0).exp();
        assert!((amp - 0.138911).abs() < 1e-6);
        let end = traj.field(128);
        let expected = sin1(32).scale(amp);
        assert!(end.sub(&expected).unwrap().l2_norm() < 1e-6 * expected.l2_norm());
        for w in traj.fields() {
            assert!(nonlinear_term(w).unwrap().l2_norm() < 1e-10);
        }
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let traj = evolve(&ScalarField::zeros(16, true).unwrap(), 0.3, 1.0, 8).unwrap();
        assert!(traj.fields().iter().all(|f| f.is_zero()));
    }

    #[test]
    fn enstrophy_and_energy_decrease() {
        let traj = evolve(&two_mode(32), 0.05, 0.5, 64).unwrap();
        let stats = trajectory_statistics(&traj).unwrap();
        for w in stats.windows(2) {
            assert!(w[1][0] <= w[0][0]);
            assert!(w[1][1] <= w[0][1]);
        }
        let half = evolve(&two_mode(32), 0.05, 0.5, 128).unwrap();
        let e_half = half.field(128).l2_norm();
        assert!(e_half < two_mode(32).l2_norm());
        assert!((e_half - traj.field(64).l2_norm()).abs() < 1e-4);
        for f in traj.fields() {
            assert_eq!(f.mean(), 0.0);
        }
    }

    #[test]
    fn rk2_self_convergence_ratio() {
        let w0 = two_mode(32);
        let coarse = evolve(&w0, 0.02, 0.5, 40).unwrap();
        let mid = evolve(&w0, 0.02, 0.5, 80).unwrap();
        let fine = evolve(&w0, 0.02, 0.5, 160).unwrap();
        let d1 = coarse.field(40).sub(mid.field(80)).unwrap().l2_norm();
        let d2 = mid.field(80).sub(fine.field(160)).unwrap().l2_norm();
        let ratio = d1 / d2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn evaluate_examples() {
        let w0 = sin1(16);
        let traj = evolve(&w0, 0.1, 0.5, 64).unwrap();
        let x = [0.13, 0.71];
        assert_eq!(traj.evaluate(0.0, x).unwrap(), w0.eval(x));
        let tau = 0.2 + 0.5 * traj.dt();
        let exact = (-4.0 * PI * PI * 0.1 * tau).exp() * (2.0 * PI * x[0]).sin();
        let interp_bound = traj.dt().powi(2) * (4.0 * PI * PI * 0.1_f64).powi(2) / 8.0;
        assert!((traj.evaluate(tau, x).unwrap() - exact).abs() <= interp_bound * 1.01);
        let a = traj.evaluate(0.3, x).unwrap();
        let b = traj.evaluate(0.3, [x[0] + 1.0, x[1]]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(matches!(traj.evaluate(0.6, x), Err(Error::Domain(_))));
        assert!(matches!(traj.evaluate(-0.1, x), Err(Error::Domain(_))));
        // lattice agreement with synthesis
        let g = inverse_transform(traj.field(10));
        assert!(
            (g.get(3, 5)
                - traj
                    .evaluate(10.0 * traj.dt(), [3.0 / 16.0, 5.0 / 16.0])
                    .unwrap())
            .abs()
                < 1e-13
        );
    }

    #[test]
    fn cfl_violation_suggests_steps() {
        let strong = sin1(32).scale(400.0);
        let err = evolve(&strong, 0.1, 1.0, 2).unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("use at least")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
