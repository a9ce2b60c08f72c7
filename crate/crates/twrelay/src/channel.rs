//! Rayleigh block-fading channel model.
//!
//! Each slot draws one instantaneous SNR per link, exponentially
//! distributed with mean `omega`, constant within the slot and independent
//! across slots. Channels are reciprocal: the same draw serves whichever
//! direction of the link a slot ends up using.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Mean link SNRs (linear, not dB) and the RNG seed for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Mean SNR of the user0 <-> relay link.
    pub omega0: f64,
    /// Mean SNR of the relay <-> user2 link.
    pub omega2: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(omega0: f64, omega2: f64, seed: u64) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite()) || !(omega2 > 0.0 && omega2.is_finite()) {
            return Err(Error::Domain(format!(
                "mean SNRs must be positive and finite, got omega0 = {omega0}, omega2 = {omega2}"
            )));
        }
        Ok(Self {
            omega0,
            omega2,
            seed,
        })
    }
}

/// One slot's instantaneous SNRs and the matching link capacities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotChannel {
    pub gamma0: f64,
    pub gamma2: f64,
    /// `log2(1 + gamma0)`, bits/slot.
    pub c0: f64,
    /// `log2(1 + gamma2)`, bits/slot.
    pub c2: f64,
}

/// Instantaneous capacity `log2(1 + gamma)` in bits/slot.
pub fn capacity(gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!(
            "capacity requires gamma >= 0, got {gamma}"
        )));
    }
    Ok(gamma.ln_1p() / std::f64::consts::LN_2)
}

/// Per-slot channel sampler.
///
/// ChaCha8 in counter mode, one stream per link (stream ids 0 and 2), both
/// derived from the single config seed. The exponential draw is the
/// inverse CDF `gamma = -omega * ln(u)`, `u` uniform on (0, 1], so a given
/// seed reproduces the same fading trace on any platform.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    rng0: ChaCha8Rng,
    rng2: ChaCha8Rng,
    omega0: f64,
    omega2: f64,
}

impl ChannelSampler {
    pub fn new(config: &ChannelConfig) -> Self {
        let mut rng0 = ChaCha8Rng::seed_from_u64(config.seed);
        rng0.set_stream(0);
        let mut rng2 = ChaCha8Rng::seed_from_u64(config.seed);
        rng2.set_stream(2);
        Self {
            rng0,
            rng2,
            omega0: config.omega0,
            omega2: config.omega2,
        }
    }

    /// Draw both links for the next slot.
    pub fn sample_slot(&mut self) -> SlotChannel {
        let gamma0 = sample_exponential(&mut self.rng0, self.omega0);
        let gamma2 = sample_exponential(&mut self.rng2, self.omega2);
        SlotChannel {
            gamma0,
            gamma2,
            c0: gamma0.ln_1p() / std::f64::consts::LN_2,
            c2: gamma2.ln_1p() / std::f64::consts::LN_2,
        }
    }
}

fn sample_exponential(rng: &mut ChaCha8Rng, omega: f64) -> f64 {
    loop {
        let u: f64 = rng.gen(); // [0, 1)
        let gamma = -omega * (1.0 - u).ln();
        // u = 0 maps to gamma = 0, excluded so capacities stay positive.
        if gamma > 0.0 {
            return gamma;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn capacity_anchor_points() {
        assert_eq!(capacity(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(capacity(1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(capacity(3.0).unwrap(), 2.0, epsilon = 1e-15);
        assert!(matches!(capacity(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn capacity_strictly_increasing() {
        let mut prev = -1.0;
        for i in 0..100 {
            let c = capacity(i as f64 * 0.37).unwrap();
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let config = ChannelConfig::new(10.0, 3.0, 42).unwrap();
        let mut a = ChannelSampler::new(&config);
        let mut b = ChannelSampler::new(&config);
        for _ in 0..100 {
            assert_eq!(a.sample_slot(), b.sample_slot());
        }
    }

    #[test]
    fn link_streams_are_independent_of_each_other() {
        // Changing omega2 must not perturb the gamma0 trace.
        let base = ChannelConfig::new(10.0, 3.0, 7).unwrap();
        let alt = ChannelConfig::new(10.0, 30.0, 7).unwrap();
        let mut a = ChannelSampler::new(&base);
        let mut b = ChannelSampler::new(&alt);
        for _ in 0..50 {
            assert_eq!(a.sample_slot().gamma0, b.sample_slot().gamma0);
        }
    }

    #[test]
    fn empirical_mean_matches_omega() {
        let config = ChannelConfig::new(10.0, 1.0, 12_345).unwrap();
        let mut sampler = ChannelSampler::new(&config);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sampler.sample_slot().gamma0;
        }
        // 3-sigma band for the mean of exponential(10): 3 * 10 / sqrt(n).
        assert_abs_diff_eq!(sum / n as f64, 10.0, epsilon = 0.05);
    }

    #[test]
    fn slot_capacities_match_definition() {
        let config = ChannelConfig::new(5.0, 5.0, 9).unwrap();
        let mut sampler = ChannelSampler::new(&config);
        for _ in 0..1000 {
            let slot = sampler.sample_slot();
            assert!(slot.gamma0 > 0.0 && slot.gamma2 > 0.0);
            assert_eq!(slot.c0, capacity(slot.gamma0).unwrap());
            assert_eq!(slot.c2, capacity(slot.gamma2).unwrap());
        }
    }

    #[test]
    fn empirical_cdf_passes_kolmogorov_smirnov() {
        let omega = 4.0;
        let config = ChannelConfig::new(omega, omega, 99).unwrap();
        let mut sampler = ChannelSampler::new(&config);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n).map(|_| sampler.sample_slot().gamma2).collect();
        draws.sort_by(f64::total_cmp);
        let mut d_stat = 0.0f64;
        for (i, g) in draws.iter().enumerate() {
            let cdf = 1.0 - (-g / omega).exp();
            let hi = (i + 1) as f64 / n as f64 - cdf;
            let lo = cdf - i as f64 / n as f64;
            d_stat = d_stat.max(hi).max(lo);
        }
        // Critical value at significance 0.01: 1.6276 / sqrt(n).
        let critical = 1.6276 / (n as f64).sqrt();
        assert!(
            d_stat < critical,
            "KS statistic {d_stat} exceeds critical {critical}"
        );
    }

    #[test]
    fn config_rejects_non_positive_snr() {
        assert!(ChannelConfig::new(0.0, 1.0, 0).is_err());
        assert!(ChannelConfig::new(1.0, -2.0, 0).is_err());
        assert!(ChannelConfig::new(f64::NAN, 1.0, 0).is_err());
    }
}
