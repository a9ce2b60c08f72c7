//! Slot-by-slot Monte Carlo simulation of the buffered two-way relay.
//!
//! The relay keeps one queue per direction: uplink slots append the
//! transmitting user's instantaneous capacity to its queue, broadcast
//! slots drain both queues at the opposite link's capacity, clipped at
//! whatever the queue actually holds. Throughput counts delivered
//! (post-clipping) bits, which is the honest end-to-end metric for finite
//! runs and finite buffers.

use crate::channel::{ChannelConfig, ChannelSampler, SlotChannel};
use crate::policy::{self, SlotDecision, Thresholds};
use crate::{Error, Result};

/// Relay queue occupancies in bits, plus per-queue caps
/// (`f64::INFINITY` = unlimited).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferState {
    /// Bits from user 0 waiting for delivery to user 2.
    pub q0: f64,
    /// Bits from user 2 waiting for delivery to user 0.
    pub q2: f64,
    pub cap0: f64,
    pub cap2: f64,
}

impl BufferState {
    /// Empty queues, unlimited caps.
    pub fn empty_unbounded() -> Self {
        Self {
            q0: 0.0,
            q2: 0.0,
            cap0: f64::INFINITY,
            cap2: f64::INFINITY,
        }
    }

    /// Empty queues, equal finite caps.
    pub fn empty_capped(cap: f64) -> Self {
        Self {
            q0: 0.0,
            q2: 0.0,
            cap0: cap,
            cap2: cap,
        }
    }

    /// Given queue levels under one shared cap.
    pub fn with_caps(cap: f64, q0: f64, q2: f64) -> Self {
        Self {
            q0,
            q2,
            cap0: cap,
            cap2: cap,
        }
    }
}

/// Bits delivered end-to-end in one slot, split by destination.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Delivered {
    /// Bits out of queue 0, delivered to user 2 over link 2.
    pub to_u2: f64,
    /// Bits out of queue 2, delivered to user 0 over link 0.
    pub to_u0: f64,
}

impl Delivered {
    pub fn total(&self) -> f64 {
        self.to_u2 + self.to_u0
    }
}

/// Apply one slot's decision to the buffers.
///
/// Uplink slots grow the sender's queue by its link capacity and deliver
/// nothing end-to-end; a broadcast slot drains `min(c2, q0)` toward user 2
/// and `min(c0, q2)` toward user 0.
pub fn step(buf: &BufferState, decision: SlotDecision, ch: &SlotChannel) -> (BufferState, Delivered) {
    let mut next = *buf;
    match decision {
        SlotDecision::U0 => {
            next.q0 += ch.c0;
            (next, Delivered::default())
        }
        SlotDecision::U2 => {
            next.q2 += ch.c2;
            (next, Delivered::default())
        }
        SlotDecision::Relay => {
            let to_u2 = ch.c2.min(buf.q0);
            let to_u0 = ch.c0.min(buf.q2);
            next.q0 -= to_u2;
            next.q2 -= to_u0;
            (next, Delivered { to_u2, to_u0 })
        }
    }
}

/// Full simulation setup: channel, thresholds, horizon, optional equal
/// buffer cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub channel: ChannelConfig,
    pub thresholds: Thresholds,
    pub num_slots: u64,
    /// Equal cap for both queues; `None` = unlimited.
    pub buffer_cap: Option<f64>,
}

/// Slot shares taken by each transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionFractions {
    pub u0: f64,
    pub relay: f64,
    pub u2: f64,
}

impl DecisionFractions {
    pub fn sum(&self) -> f64 {
        self.u0 + self.relay + self.u2
    }
}

/// Outcome of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimReport {
    /// Delivered bits per slot, both directions combined.
    pub sum_rate: f64,
    /// Delivered bits per slot from user 0 to user 2.
    pub uplink0_rate: f64,
    /// Delivered bits per slot from user 2 to user 0.
    pub uplink2_rate: f64,
    pub decision_fractions: DecisionFractions,
    pub final_q0: f64,
    pub final_q2: f64,
    pub mean_q0: f64,
    pub mean_q2: f64,
    /// Fraction of broadcast slots where at least one queue could not fill
    /// its link (the min-clipping bound was active).
    pub underrun_fraction: f64,
    /// Bits per slot accepted into each queue by uplink slots.
    pub accepted0_rate: f64,
    pub accepted2_rate: f64,
    pub num_slots: u64,
}

/// Run the slot loop: sample channel, decide, update buffers.
///
/// Buffers start empty. With a finite cap the capped decision rule is
/// used and cap respect is asserted after every slot.
pub fn run(config: &SimConfig) -> Result<SimReport> {
    if config.num_slots == 0 {
        return Err(Error::InvalidArgument(
            "num_slots must be >= 1".to_string(),
        ));
    }
    if !config.thresholds.feasible() {
        return Err(Error::InfeasibleThresholds {
            lambda: config.thresholds.lambda,
            mu: config.thresholds.mu,
        });
    }
    if let Some(cap) = config.buffer_cap {
        if !(cap >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "buffer_cap must be >= 0, got {cap}"
            )));
        }
    }

    let mut sampler = ChannelSampler::new(&config.channel);
    let mut buf = match config.buffer_cap {
        Some(cap) => BufferState::empty_capped(cap),
        None => BufferState::empty_unbounded(),
    };
    let capped = config.buffer_cap.is_some();
    let t = config.thresholds;

    let mut delivered_to_u2 = 0.0;
    let mut delivered_to_u0 = 0.0;
    let mut accepted0 = 0.0;
    let mut accepted2 = 0.0;
    let mut counts = [0u64; 3];
    let mut relay_underruns = 0u64;
    let mut q0_sum = 0.0;
    let mut q2_sum = 0.0;

    for _ in 0..config.num_slots {
        let ch = sampler.sample_slot();
        let unconstrained = policy::decide_unchecked(ch.c0, ch.c2, t);
        let decision = if capped {
            policy::apply_buffer_caps(unconstrained, ch.c0, ch.c2, &buf)
        } else {
            unconstrained
        };
        match decision {
            SlotDecision::U0 => {
                counts[0] += 1;
                accepted0 += ch.c0;
            }
            SlotDecision::Relay => {
                counts[1] += 1;
                if ch.c2 > buf.q0 || ch.c0 > buf.q2 {
                    relay_underruns += 1;
                }
            }
            SlotDecision::U2 => {
                counts[2] += 1;
                accepted2 += ch.c2;
            }
        }
        let (next, delivered) = step(&buf, decision, &ch);
        if capped {
            assert!(
                next.q0 <= next.cap0 && next.q2 <= next.cap2,
                "buffer cap violated: {next:?}"
            );
        }
        delivered_to_u2 += delivered.to_u2;
        delivered_to_u0 += delivered.to_u0;
        buf = next;
        q0_sum += buf.q0;
        q2_sum += buf.q2;
    }

    let n = config.num_slots as f64;
    let relay_slots = counts[1];
    Ok(SimReport {
        sum_rate: (delivered_to_u2 + delivered_to_u0) / n,
        uplink0_rate: delivered_to_u2 / n,
        uplink2_rate: delivered_to_u0 / n,
        decision_fractions: DecisionFractions {
            u0: counts[0] as f64 / n,
            relay: counts[1] as f64 / n,
            u2: counts[2] as f64 / n,
        },
        final_q0: buf.q0,
        final_q2: buf.q2,
        mean_q0: q0_sum / n,
        mean_q2: q2_sum / n,
        underrun_fraction: if relay_slots > 0 {
            relay_underruns as f64 / relay_slots as f64
        } else {
            0.0
        },
        accepted0_rate: accepted0 / n,
        accepted2_rate: accepted2 / n,
        num_slots: config.num_slots,
    })
}

/// Queue-drift stability test: both final occupancies must stay below
/// 0.01 bits per elapsed slot. Meaningful for runs of at least 1e5 slots.
pub fn stability_check(report: &SimReport) -> bool {
    let n = report.num_slots as f64;
    report.final_q0 / n < 0.01 && report.final_q2 / n < 0.01
}
