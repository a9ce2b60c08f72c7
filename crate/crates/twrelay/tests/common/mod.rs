//! Monte Carlo estimators used as independent oracles: they exercise the
//! channel sampler and the per-slot decision rule, never the quadrature
//! path they are checked against.

use twrelay::channel::{ChannelConfig, ChannelSampler};
use twrelay::policy::{decide, Thresholds};
use twrelay::policy::SlotDecision;

#[derive(Debug, Clone, Copy)]
pub struct McMoment {
    pub mean: f64,
    pub std_err: f64,
}

impl McMoment {
    pub fn within(&self, reference: f64, sigmas: f64) -> bool {
        (self.mean - reference).abs() <= sigmas * self.std_err
    }
}

#[derive(Debug, Clone, Copy)]
pub struct McExpectations {
    pub e_p0_c0: McMoment,
    pub e_p2_c2: McMoment,
    pub e_p1_c2: McMoment,
    pub e_p1_c0: McMoment,
    /// Per-slot `p0 c0 - p1 c2` (queue-0 balance).
    pub h1: McMoment,
    /// Per-slot `p2 c2 - p1 c0` (queue-2 balance).
    pub h2: McMoment,
}

struct Accumulator {
    sum: f64,
    sum_sq: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            sum: 0.0,
            sum_sq: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn moment(&self, n: u64) -> McMoment {
        let n = n as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        McMoment {
            mean,
            std_err: (var / n).sqrt(),
        }
    }
}

/// Estimate the four stationary rate expectations and the balance
/// residuals by averaging decisions over sampled slots.
pub fn mc_expectations(t: Thresholds, config: &ChannelConfig, slots: u64) -> McExpectations {
    let mut sampler = ChannelSampler::new(config);
    let mut acc = [
        Accumulator::new(),
        Accumulator::new(),
        Accumulator::new(),
        Accumulator::new(),
        Accumulator::new(),
        Accumulator::new(),
    ];
    for _ in 0..slots {
        let ch = sampler.sample_slot();
        let d = decide(ch.c0, ch.c2, t).expect("feasible thresholds");
        let (p0c0, p2c2, p1c2, p1c0) = match d {
            SlotDecision::U0 => (ch.c0, 0.0, 0.0, 0.0),
            SlotDecision::U2 => (0.0, ch.c2, 0.0, 0.0),
            SlotDecision::Relay => (0.0, 0.0, ch.c2, ch.c0),
        };
        acc[0].push(p0c0);
        acc[1].push(p2c2);
        acc[2].push(p1c2);
        acc[3].push(p1c0);
        acc[4].push(p0c0 - p1c2);
        acc[5].push(p2c2 - p1c0);
    }
    McExpectations {
        e_p0_c0: acc[0].moment(slots),
        e_p2_c2: acc[1].moment(slots),
        e_p1_c2: acc[2].moment(slots),
        e_p1_c0: acc[3].moment(slots),
        h1: acc[4].moment(slots),
        h2: acc[5].moment(slots),
    }
}

/// Rejection-sample a strictly interior feasible threshold pair.
pub fn random_feasible_thresholds(rng: &mut impl rand::Rng, min_slack: f64) -> Thresholds {
    loop {
        let t = Thresholds::new(rng.gen_range(-1.0..0.0), rng.gen_range(-1.0..0.0));
        if t.feasibility_slack() >= min_slack {
            return t;
        }
    }
}
