//! Adaptive link-selection policy.
//!
//! Each slot goes to exactly one of user 0, the relay, or user 2. The rule
//! compares the instantaneous capacity ratio `c0/c2` against two
//! thresholds derived from the multiplier pair `(lambda, mu)`; here it is
//! evaluated in division-free linear form, which stays well-defined on the
//! boundary of the feasible region where the ratio thresholds blow up.

use crate::simulator::BufferState;
use crate::{Error, Result};

/// Multiplier pair parameterising the decision thresholds.
///
/// Feasible pairs satisfy `-1 <= lambda, mu <= 0`, `lambda + mu + 1 <= 0`
/// and `lambda^2 + mu^2 + lambda*mu + lambda + mu <= 0`; outside that set
/// the three decision regions no longer partition the capacity plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub lambda: f64,
    pub mu: f64,
}

impl Thresholds {
    pub fn new(lambda: f64, mu: f64) -> Self {
        Self { lambda, mu }
    }

    /// `lambda^2 + mu^2 + lambda*mu + lambda + mu`; feasible iff <= 0.
    pub fn quadratic_form(&self) -> f64 {
        let (l, m) = (self.lambda, self.mu);
        l * l + m * m + l * m + l + m
    }

    /// Exact-arithmetic membership test for the feasible region.
    pub fn feasible(&self) -> bool {
        let (l, m) = (self.lambda, self.mu);
        (-1.0..=0.0).contains(&l)
            && (-1.0..=0.0).contains(&m)
            && l + m + 1.0 <= 0.0
            && self.quadratic_form() <= 0.0
    }

    /// Smallest slack across the four feasibility constraints; positive in
    /// the interior, negative outside.
    pub fn feasibility_slack(&self) -> f64 {
        let (l, m) = (self.lambda, self.mu);
        let mut slack = l + 1.0;
        slack = slack.min(-l);
        slack = slack.min(m + 1.0);
        slack = slack.min(-m);
        slack = slack.min(-(l + m + 1.0));
        slack.min(-self.quadratic_form())
    }
}

/// Which node transmits in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotDecision {
    /// User 0 sends uplink; its bits join queue 0 at the relay.
    U0,
    /// The relay broadcasts, draining both queues.
    Relay,
    /// User 2 sends uplink; its bits join queue 2.
    U2,
}

/// Feasibility predicate for a threshold pair.
pub fn feasible(t: Thresholds) -> bool {
    t.feasible()
}

/// Pick the transmitter for a slot with capacities `c0`, `c2` (bits/slot).
///
/// Linear tests: user 0 wins iff `(l+m+1)c0 + (l+1)c2 < 0`, user 2 iff
/// `(m+1)c0 + (l+m+1)c2 < 0`, the relay iff both forms are >= 0. On the
/// feasible set the regions partition the positive quadrant; boundary ties
/// go to the relay.
pub fn decide(c0: f64, c2: f64, t: Thresholds) -> Result<SlotDecision> {
    if !t.feasible() {
        return Err(Error::InfeasibleThresholds {
            lambda: t.lambda,
            mu: t.mu,
        });
    }
    Ok(decide_unchecked(c0, c2, t))
}

#[inline]
pub(crate) fn decide_unchecked(c0: f64, c2: f64, t: Thresholds) -> SlotDecision {
    debug_assert!(c0 > 0.0 && c2 > 0.0);
    let s = t.lambda + t.mu + 1.0;
    let u0_form = s * c0 + (t.lambda + 1.0) * c2;
    let u2_form = (t.mu + 1.0) * c0 + s * c2;
    if u0_form >= 0.0 && u2_form >= 0.0 {
        SlotDecision::Relay
    } else if u0_form < 0.0 {
        SlotDecision::U0
    } else {
        SlotDecision::U2
    }
}

/// [`decide`] with finite buffers: an uplink whose acceptance would push
/// its queue past the cap is excluded. The relay is never excluded.
///
/// Fallback when the unconstrained winner is blocked: broadcast if either
/// queue holds data; with both queues empty take the other uplink if it
/// fits, otherwise broadcast an empty (idle) slot.
pub fn decide_finite(c0: f64, c2: f64, t: Thresholds, buf: &BufferState) -> Result<SlotDecision> {
    let unconstrained = decide(c0, c2, t)?;
    Ok(apply_buffer_caps(unconstrained, c0, c2, buf))
}

#[inline]
pub(crate) fn apply_buffer_caps(
    unconstrained: SlotDecision,
    c0: f64,
    c2: f64,
    buf: &BufferState,
) -> SlotDecision {
    let u0_blocked = c0 + buf.q0 > buf.cap0;
    let u2_blocked = c2 + buf.q2 > buf.cap2;
    match unconstrained {
        SlotDecision::Relay => SlotDecision::Relay,
        SlotDecision::U0 if !u0_blocked => SlotDecision::U0,
        SlotDecision::U2 if !u2_blocked => SlotDecision::U2,
        blocked => {
            if buf.q0 + buf.q2 > 0.0 {
                SlotDecision::Relay
            } else {
                match blocked {
                    SlotDecision::U0 if !u2_blocked => SlotDecision::U2,
                    SlotDecision::U2 if !u0_blocked => SlotDecision::U0,
                    _ => SlotDecision::Relay,
                }
            }
        }
    }
}
