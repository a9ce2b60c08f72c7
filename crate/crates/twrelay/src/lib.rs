//! Buffer-aided two-way relaying with adaptive link selection.
//!
//! Two users exchange data through a half-duplex decode-and-forward relay
//! that keeps one queue per direction. Instead of a fixed transmission
//! schedule, every time slot is granted to one of the three nodes (user 0,
//! the relay, or user 2) by a threshold rule on the instantaneous link
//! capacities. The thresholds are a pair of multipliers `(lambda, mu)`
//! chosen so that, in the long run, each queue receives exactly as many
//! bits as the relay drains from it.
//!
//! The crate is organised around that pipeline:
//!
//! - [`math`] — exponential integral `E1`, the closed-form segment integral
//!   of `ln(1+x)` against an exponential density, and adaptive
//!   Gauss-Kronrod quadrature over the positive half-line.
//! - [`channel`] — Rayleigh block fading: per-slot exponential SNR draws
//!   and `log2(1+snr)` link capacities, reproducible via per-link
//!   counter-mode RNG streams.
//! - [`policy`] — the three-way slot decision rule, its feasibility region,
//!   and the finite-buffer variant that blocks uplinks which would
//!   overflow a queue.
//! - [`solver`] — stationary expectations of the per-slot rates as double
//!   integrals, queue-balance residuals, and a damped Newton iteration
//!   (with a grid-scan fallback) that solves for `(lambda, mu)`.
//! - [`simulator`] — slot-by-slot Monte Carlo of the queue recursion, with
//!   throughput, decision-fraction, and stability diagnostics.
//! - [`baseline`] — the fixed-schedule reference system: ergodic link
//!   capacities and the closed-form optimal time split.

pub mod baseline;
pub mod channel;
mod error;
pub mod math;
pub mod policy;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
