use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use vorticity_bsde::diagnostics::{alpha_report, z_bmo_bound};
use vorticity_bsde::engine::{
    alpha_norm, bmo_proxy, linear_bsde_solve, select_alpha, weighted_sup_norm, PicardIterate,
    SolverConfig,
};
use vorticity_bsde::field::{ScalarField, TrigTerm};

fn small_config(control_variate: bool, seed: u64) -> SolverConfig {
    SolverConfig {
        n: 8,
        steps: 4,
        outer_paths: 2,
        inner_branches: 12,
        nu: 0.3,
        horizon: 0.2,
        base_seed: seed,
        control_variate,
        ..SolverConfig::default()
    }
}

fn terms() -> impl Strategy<Value = Vec<TrigTerm>> {
    proptest::collection::vec((-2.0f64..2.0, -3i64..=3, -3i64..=3, any::<bool>()), 1..4).prop_map(
        |ts| {
            ts.into_iter()
                .filter(|&(_, k1, k2, _)| (k1, k2) != (0, 0))
                .map(|(a, k1, k2, s)| {
                    if s {
                        TrigTerm::sin(a, (k1, k2))
                    } else {
                        TrigTerm::cos(a, (k1, k2))
                    }
                })
                .collect()
        },
    )
}

fn heat(psi: &ScalarField, nu: f64, tau: f64) -> ScalarField {
    psi.map_modes(|k1, k2| {
        Complex64::new(
            (-4.0 * PI * PI * nu * (k1 * k1 + k2 * k2) as f64 * tau).exp(),
            0.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn driftless_solve_with_control_variate_is_the_heat_semigroup(ts in terms(), seed in any::<u64>()) {
        let cfg = small_config(true, seed);
        let psi = ScalarField::from_trig_terms(cfg.n, &ts).unwrap();
        let zero = PicardIterate::zero(cfg.n, cfg.steps, cfg.dt()).unwrap();
        let s = linear_bsde_solve(&zero, &psi, &cfg).unwrap();
        for m in 0..=cfg.steps {
            let exact = heat(&psi, cfg.nu, m as f64 * cfg.dt());
            let err = s.iterate.field(m).sub(&exact).unwrap().l2_norm();
            prop_assert!(err <= 1e-12 * (1.0 + psi.l2_norm()), "node {} err {}", m, err);
        }
    }

    #[test]
    fn driftless_solve_is_linear_in_terminal_data(ts in terms(), c in -3.0f64..3.0, seed in any::<u64>()) {
        let cfg = small_config(false, seed);
        let psi = ScalarField::from_trig_terms(cfg.n, &ts).unwrap();
        let zero = PicardIterate::zero(cfg.n, cfg.steps, cfg.dt()).unwrap();
        let a = linear_bsde_solve(&zero, &psi, &cfg).unwrap();
        let b = linear_bsde_solve(&zero, &psi.scale(c), &cfg).unwrap();
        for m in 0..=cfg.steps {
            let err = b.iterate.field(m).sub(&a.iterate.field(m).scale(c)).unwrap().l2_norm();
            prop_assert!(err <= 1e-10 * (1.0 + psi.l2_norm() * c.abs()), "node {} err {}", m, err);
        }
    }

    #[test]
    fn weighted_norm_reduces_to_unweighted_at_zero_alpha(ts in terms(), steps in 1usize..12) {
        let psi = ScalarField::from_trig_terms(8, &ts).unwrap();
        let dt = 0.3 / steps as f64;
        let fields: Vec<ScalarField> = (0..=steps).map(|m| heat(&psi, 0.2, m as f64 * dt)).collect();
        let unweighted = fields.iter().map(|f| f.sup_norm()).fold(0.0, f64::max)
            + bmo_proxy(&fields, dt).unwrap();
        let a0 = alpha_norm(&fields, dt, 0.0).unwrap();
        prop_assert!((a0 - unweighted).abs() <= 1e-12 * (1.0 + unweighted));
        prop_assert!(weighted_sup_norm(&fields, dt, 5.0).unwrap() <= weighted_sup_norm(&fields, dt, 0.0).unwrap());
    }

    #[test]
    fn selected_alpha_meets_both_conditions(
        c0 in 0.1f64..5.0, c1 in 0.0f64..5.0, nu in 0.01f64..5.0, t in 0.0f64..3.0
    ) {
        let a = select_alpha(c0, c1, nu, t).unwrap();
        prop_assert!(alpha_report(a, c0, c1, nu, t).satisfied);
    }

    #[test]
    fn bmo_bound_grows_with_horizon(c0 in 0.1f64..5.0, c1 in 0.01f64..5.0, nu in 0.01f64..5.0, t in 0.0f64..3.0, dt in 0.01f64..1.0) {
        prop_assert!(z_bmo_bound(c1, nu, t + dt, c0) > z_bmo_bound(c1, nu, t, c0));
    }
}

#[test]
fn bmo_bound_at_zero_horizon() {
    assert_eq!(z_bmo_bound(1.0, 1.0, 0.0, 123.0), 1.0);
    let b = z_bmo_bound(1.0, 0.5, 0.25, 1.0125);
    assert!((b - 2.0 * (0.5f64 + 0.25 * 1.0125).sqrt()).abs() < 1e-15);
}
