use crate::error::{Error, Result};

use super::estimator::MAX_LOG_WEIGHT;

/// `exp(-sum <h_m, dB_m> - 1/2 sum |h_m|^2 dt)` with `h_m` taken at the left
/// end of each step.
pub fn girsanov_weight(h: &[[f64; 2]], increments: &[[f64; 2]], dt: f64) -> Result<f64> {
    if h.len() != increments.len() {
        return Err(Error::config(format!(
            "{} drift values for {} increments",
            h.len(),
            increments.len()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let mut exponent = 0.0;
    for (i, (hm, db)) in h.iter().zip(increments).enumerate() {
        if !(hm[0].is_finite() && hm[1].is_finite()) {
            return Err(Error::numerical(format!("drift is not finite at step {i}")));
        }
        exponent -= hm[0] * db[0] + hm[1] * db[1];
        exponent -= 0.5 * (hm[0] * hm[0] + hm[1] * hm[1]) * dt;
    }
    if !(exponent.is_finite() && exponent <= MAX_LOG_WEIGHT) {
        return Err(Error::numerical(format!(
            "Girsanov exponent {exponent} overflows"
        )));
    }
    Ok(exponent.exp())
}
