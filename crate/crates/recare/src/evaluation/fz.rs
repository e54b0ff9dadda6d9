//! Joint VaR-ES scoring rule.
//!
//! The strictly consistent scoring function obtained from the
//! Fissler-Ziegel family with `G1(x) = x`, `G2(x) = H(x) = exp(x)` and
//! `a(y) = 1 - ln(1 - alpha)`:
//!
//! ```text
//! S_t = (I_t - alpha) VaR_t - I_t r_t
//!     + exp(ES_t) (ES_t - VaR_t + (I_t / alpha)(VaR_t - r_t))
//!     - exp(ES_t) + 1 - ln(1 - alpha)
//! ```
//!
//! Expected loss is jointly minimized by the true (VaR, ES) series.

use crate::error::{Error, Result};
use crate::forecasting::ForecastSeries;

/// Largest ES accepted before `exp` overflows the score.
const ES_EXP_LIMIT: f64 = 700.0;

/// Per-day score for one observation.
pub fn fz_loss_single(r: f64, var: f64, es: f64, alpha: f64) -> Result<f64> {
    if es > ES_EXP_LIMIT {
        return Err(Error::EsOverflow(es));
    }
    let hit = f64::from(r < var);
    let e = es.exp();
    let s = (hit - alpha) * var - hit * r + e * (es - var + hit / alpha * (var - r)) - e + 1.0
        - (1.0 - alpha).ln();
    if !s.is_finite() {
        return Err(Error::EsOverflow(es));
    }
    Ok(s)
}

/// Total and per-day scores for a forecast series.
pub fn fz_joint_loss(fc: &ForecastSeries, alpha: f64) -> Result<(f64, Vec<f64>)> {
    let mut per_day = Vec::with_capacity(fc.len());
    let mut total = 0.0;
    for t in 0..fc.len() {
        let s = fz_loss_single(fc.realized[t], fc.var[t], fc.es[t], alpha)?;
        per_day.push(s);
        total += s;
    }
    Ok((total, per_day))
}
