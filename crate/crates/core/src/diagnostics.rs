//! Checks of the a priori estimates on a computed solution: maximum
//! principle, the `||Z||_BMO` bound and contraction of the Picard map.

use serde::{Deserialize, Serialize};

use crate::biot_savart::LAMBDA1;
use crate::engine::{BsdeSolution, Estimate, IterateRecord, PicardIterate};
use crate::error::{Error, Result};
use crate::field::inverse_transform;

pub const SCHEMA_VERSION: u32 = 1;

/// `(C1 / nu) sqrt(nu + T C0 C1^2)`.
pub fn z_bmo_bound(c1: f64, nu: f64, horizon: f64, c0: f64) -> f64 {
    (c1 / nu) * (nu + horizon * c0 * c1 * c1).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateMargin {
    pub iteration: usize,
    pub sup_abs: f64,
    pub eps_mc: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub c1: f64,
    /// Smallest `C1 + eps_mc - sup|omega_n|` over iterations.
    pub margin: f64,
    pub pass: bool,
    pub violations: usize,
    pub iterations: Vec<IterateMargin>,
}

/// `C1 + eps_mc - sup |omega(tau_m, .)|` over all nodes, on the lattice.
pub fn max_principle_margin(iterate: &PicardIterate, c1: f64, eps_mc: f64) -> f64 {
    let sup = iterate
        .fields()
        .iter()
        .map(|f| inverse_transform(f).max_abs())
        .fold(0.0, f64::max);
    c1 + eps_mc - sup
}

pub fn max_principle_check(records: &[IterateRecord], c1: f64) -> MaxPrincipleReport {
    let iterations: Vec<IterateMargin> = records
        .iter()
        .map(|r| IterateMargin {
            iteration: r.iteration,
            sup_abs: r.sup_abs,
            eps_mc: r.eps_mc,
            margin: c1 + r.eps_mc - r.sup_abs,
        })
        .collect();
    let margin = iterations
        .iter()
        .map(|m| m.margin)
        .fold(f64::INFINITY, f64::min);
    let violations = iterations.iter().filter(|m| !(m.margin >= 0.0)).count();
    MaxPrincipleReport {
        c1,
        margin,
        pass: violations == 0,
        violations,
        iterations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZBmoReport {
    pub measured: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `measured - 3 SE <= bound`.
    pub pass: bool,
}

pub fn z_bmo_check(measured: Estimate, c0: f64, c1: f64, nu: f64, horizon: f64) -> ZBmoReport {
    let bound = z_bmo_bound(c1, nu, horizon, c0);
    ZBmoReport {
        measured: measured.value,
        std_error: measured.std_error,
        bound,
        pass: measured.value - 3.0 * measured.std_error <= bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractionStatus {
    Pass,
    Fail,
    /// Fewer than two ratios above the noise floor.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub status: ContractionStatus,
    pub alpha: f64,
    pub ratios: Vec<f64>,
    pub above_noise_ratios: Vec<f64>,
    /// Whether every above-noise ratio is at most `1/2` plus its noise
    /// allowance; `None` without above-noise ratios.
    pub half_factor_holds: Option<bool>,
    pub converged: bool,
}

/// Classifies the recorded increment ratios. The noise allowance of a ratio
/// `delta_n / delta_{n-1}` is `floor_n / delta_{n-1}`.
pub fn contraction_check(
    records: &[IterateRecord],
    alpha: f64,
    converged: bool,
) -> ContractionReport {
    let mut ratios = Vec::new();
    let mut above = Vec::new();
    let mut half = true;
    let mut prev: Option<f64> = None;
    for r in records {
        if let Some(ratio) = r.ratio {
            ratios.push(ratio);
            if r.above_noise {
                above.push(ratio);
                let allowance = prev.map_or(0.0, |p| if p > 0.0 { r.noise_floor / p } else { 0.0 });
                half &= ratio <= 0.5 + allowance;
            }
        }
        if r.increment.is_some() {
            prev = r.increment;
        }
    }
    let status = if above.iter().any(|&r| !(r < 1.0)) {
        ContractionStatus::Fail
    } else if above.len() < 2 {
        ContractionStatus::Inconclusive
    } else {
        ContractionStatus::Pass
    };
    ContractionReport {
        status,
        alpha,
        half_factor_holds: (!above.is_empty()).then_some(half),
        ratios,
        above_noise_ratios: above,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub value: f64,
    /// `C0^2 C1^2 (nu + T C0 C1^2) / (alpha nu^2)`, required `<= 1/16`.
    pub condition_1: f64,
    /// `C0^2 C1^2 / alpha`, required `<= nu / 4`.
    pub condition_2: f64,
    pub satisfied: bool,
}

pub fn alpha_report(alpha: f64, c0: f64, c1: f64, nu: f64, horizon: f64) -> AlphaReport {
    let k = c0 * c0 * c1 * c1;
    let (condition_1, condition_2) = if alpha > 0.0 {
        (
            k * (nu + horizon * c0 * c1 * c1) / (alpha * nu * nu),
            k / alpha,
        )
    } else if k == 0.0 {
        (0.0, 0.0)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let eps = 1e-12;
    AlphaReport {
        value: alpha,
        condition_1,
        condition_2,
        satisfied: condition_1 <= 1.0 / 16.0 + eps && condition_2 <= nu / 4.0 + eps,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c0: f64,
    pub c1: f64,
    pub lambda1: f64,
    pub nu: f64,
    pub horizon: f64,
}

/// The diagnostics document emitted per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub max_principle: MaxPrincipleReport,
    pub z_bmo: ZBmoReport,
    pub contraction: ContractionReport,
    pub alpha: AlphaReport,
    pub constants: Constants,
}

impl EstimateReport {
    /// All estimate checks hold (an inconclusive contraction counts as holding).
    pub fn all_pass(&self) -> bool {
        self.max_principle.pass
            && self.z_bmo.pass
            && self.contraction.status != ContractionStatus::Fail
    }
}

/// Assembles the report from the stored pieces of a solution.
pub fn build_report(
    records: &[IterateRecord],
    z_bmo: Estimate,
    alpha: f64,
    constants: Constants,
    converged: bool,
) -> Result<EstimateReport> {
    if records.is_empty() {
        return Err(Error::config("no iterations recorded"));
    }
    Ok(EstimateReport {
        schema_version: SCHEMA_VERSION,
        max_principle: max_principle_check(records, constants.c1),
        z_bmo: z_bmo_check(
            z_bmo,
            constants.c0,
            constants.c1,
            constants.nu,
            constants.horizon,
        ),
        contraction: contraction_check(records, alpha, converged),
        alpha: alpha_report(
            alpha,
            constants.c0,
            constants.c1,
            constants.nu,
            constants.horizon,
        ),
        constants,
    })
}

pub fn estimate_report(solution: &BsdeSolution) -> Result<EstimateReport> {
    build_report(
        &solution.records,
        solution.z_bmo,
        solution.alpha,
        Constants {
            c0: solution.c0,
            c1: solution.c1,
            lambda1: LAMBDA1,
            nu: solution.config.nu,
            horizon: solution.config.horizon,
        },
        true,
    )
}
