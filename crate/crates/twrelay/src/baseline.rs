//! Fixed-schedule reference system.
//!
//! Both users and the relay transmit in a fixed rotation whose phase
//! durations are tuned offline. Each phase spans many fades, so every
//! link runs at its ergodic capacity; the broadcast phase must be long
//! enough to forward both queues, and the optimal split makes both
//! forwarding constraints tight simultaneously.

use crate::math;
use crate::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// Ergodic capacities, optimal time split and the resulting sum-rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceResult {
    /// Ergodic capacity of the user0 <-> relay link, bits/slot.
    pub ce0: f64,
    /// Ergodic capacity of the relay <-> user2 link, bits/slot.
    pub ce2: f64,
    /// Fraction of time user 0 transmits.
    pub t0_frac: f64,
    /// Fraction of time the relay broadcasts.
    pub t1_frac: f64,
    /// Fraction of time user 2 transmits.
    pub t2_frac: f64,
    /// Maximal end-to-end sum-rate, bits/slot.
    pub sum_rate: f64,
}

/// Ergodic capacity `E{ log2(1 + gamma) }` of a Rayleigh-faded link with
/// mean SNR `omega`: `e^{1/omega} E1(1/omega) / ln 2`.
pub fn ergodic_capacity(omega: f64) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!(
            "ergodic_capacity requires omega > 0, got {omega}"
        )));
    }
    // The scaled form survives small omega, where E1 alone underflows.
    Ok(math::exp_integral_e1_scaled(1.0 / omega)? / LN_2)
}

/// Optimal fixed schedule for a pair of mean SNRs.
///
/// With both broadcast constraints tight, `t0 : t1 : t2` is
/// `ce2^2 : ce0*ce2 : ce0^2` (normalised), and the sum-rate closed form is
/// `(ce0^2 ce2 + ce2^2 ce0) / (ce0^2 + ce2^2 + ce0 ce2)`.
pub fn reference_optimum(omega0: f64, omega2: f64) -> Result<ReferenceResult> {
    let ce0 = ergodic_capacity(omega0)?;
    let ce2 = ergodic_capacity(omega2)?;
    let denom = ce0 * ce0 + ce2 * ce2 + ce0 * ce2;
    Ok(ReferenceResult {
        ce0,
        ce2,
        t0_frac: ce2 * ce2 / denom,
        t1_frac: ce0 * ce2 / denom,
        t2_frac: ce0 * ce0 / denom,
        sum_rate: (ce0 * ce0 * ce2 + ce2 * ce2 * ce0) / denom,
    })
}
