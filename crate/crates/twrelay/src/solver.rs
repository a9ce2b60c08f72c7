//! Threshold solver.
//!
//! For a candidate multiplier pair the stationary per-slot rate
//! expectations are double integrals over the two fading densities: the
//! inner integral has the closed form of [`math::segment_log_integral`]
//! between decision-region limits, the outer one is adaptive quadrature.
//! Queue balance demands that each queue's inflow expectation equals its
//! broadcast outflow expectation; the solver drives that residual pair to
//! zero with a damped Newton iteration, falling back to a feasible-region
//! grid scan when Newton stalls.

use crate::channel::ChannelConfig;
use crate::math::{self, QuadratureSpec};
use crate::policy::Thresholds;
use crate::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// Interior point of the feasible region used as the Newton start and as
/// the retraction target when an iterate leaves the region.
const INTERIOR_ANCHOR: (f64, f64) = (-0.58, -0.58);

/// Stationary expectations of the per-slot rates, bits/slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationSet {
    /// E{ c0 ; user 0 transmits } — inflow into queue 0.
    pub e_p0_c0: f64,
    /// E{ c2 ; user 2 transmits } — inflow into queue 2.
    pub e_p2_c2: f64,
    /// E{ c2 ; relay transmits } — outflow capacity of queue 0.
    pub e_p1_c2: f64,
    /// E{ c0 ; relay transmits } — outflow capacity of queue 2.
    pub e_p1_c0: f64,
}

/// Queue-balance residuals, bits/slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPair {
    /// Inflow minus outflow for queue 0.
    pub h1: f64,
    /// Inflow minus outflow for queue 2.
    pub h2: f64,
}

impl ResidualPair {
    pub fn from_expectations(ex: &ExpectationSet) -> Self {
        Self {
            h1: ex.e_p0_c0 - ex.e_p1_c2,
            h2: ex.e_p2_c2 - ex.e_p1_c0,
        }
    }

    fn max_abs(&self) -> f64 {
        self.h1.abs().max(self.h2.abs())
    }

    fn norm(&self) -> f64 {
        self.h1.hypot(self.h2)
    }
}

/// SNR bounds of the inner integrals, all evaluated at one opposite-link
/// SNR value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationLimits {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
}

/// Convergence parameters for [`solve_thresholds_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual magnitude (bits/slot) accepted as converged.
    pub residual_tolerance: f64,
    /// Newton step budget.
    pub max_iterations: usize,
    /// Central-difference step for the Jacobian.
    pub fd_step: f64,
    /// Iterates are kept at least this far inside every feasibility
    /// constraint; the limit exponents blow up on the boundary itself.
    pub boundary_margin: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tolerance: 1e-6,
            max_iterations: 200,
            fd_step: 1e-5,
            boundary_margin: 1e-9,
        }
    }
}

/// Converged thresholds plus the diagnostics that justify them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverResult {
    pub thresholds: Thresholds,
    pub residuals: ResidualPair,
    /// E{ c0 + c2 ; relay transmits } at the solution, bits/slot.
    pub theoretical_sum_rate: f64,
    /// Residual evaluations spent (Newton, line search and fallback).
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct LimitExponents {
    e1: f64,
    e2: f64,
    e3: f64,
    e4: f64,
}

fn limit_exponents(t: &Thresholds) -> Result<LimitExponents> {
    let s = t.lambda + t.mu + 1.0;
    if s == 0.0 || t.lambda == -1.0 || t.mu == -1.0 {
        return Err(Error::SingularThresholds(format!(
            "limit exponents undefined at lambda = {}, mu = {} (need lambda != -1, mu != -1, \
             lambda + mu + 1 != 0)",
            t.lambda, t.mu
        )));
    }
    Ok(LimitExponents {
        e1: -(t.lambda + 1.0) / s,
        e2: -(t.mu + 1.0) / s,
        e3: -s / (t.lambda + 1.0),
        e4: -s / (t.mu + 1.0),
    })
}

#[inline]
fn power_limit(gamma: f64, exponent: f64) -> f64 {
    (gamma + 1.0).powf(exponent) - 1.0
}

/// The four inner-integral bounds evaluated at one SNR value: `l1`/`l4`
/// apply when the value is the opposite link's `gamma2`, `l2`/`l3` when it
/// is `gamma0`.
pub fn integration_limits(gamma_opposite: f64, t: &Thresholds) -> Result<IntegrationLimits> {
    if !(gamma_opposite >= 0.0) {
        return Err(Error::Domain(format!(
            "integration_limits requires gamma >= 0, got {gamma_opposite}"
        )));
    }
    let ex = limit_exponents(t)?;
    Ok(IntegrationLimits {
        l1: power_limit(gamma_opposite, ex.e1),
        l2: power_limit(gamma_opposite, ex.e2),
        l3: power_limit(gamma_opposite, ex.e3),
        l4: power_limit(gamma_opposite, ex.e4),
    })
}

/// Evaluate the four stationary rate expectations at `t`.
pub fn compute_expectations(
    t: &Thresholds,
    config: &ChannelConfig,
    spec: &QuadratureSpec,
) -> Result<ExpectationSet> {
    if !t.feasible() {
        return Err(Error::InfeasibleThresholds {
            lambda: t.lambda,
            mu: t.mu,
        });
    }
    let ex = limit_exponents(t)?;
    let (omega0, omega2) = (config.omega0, config.omega2);

    // Inner integrals in nats; one /ln2 per expectation at the end.
    let tail = |from: f64, omega: f64| math::segment_log_integral_unchecked(from, f64::INFINITY, omega);
    let band = |lo: f64, hi: f64, omega: f64| {
        // Rounding in powf can cross the bounds when the relay band is
        // nearly empty; an inverted band integrates to zero.
        if lo >= hi {
            0.0
        } else {
            math::segment_log_integral_unchecked(lo, hi, omega)
        }
    };

    let e_p0_c0 =
        math::integrate_semi_infinite(|g2| tail(power_limit(g2, ex.e1), omega0), omega2, spec)?;
    let e_p2_c2 =
        math::integrate_semi_infinite(|g0| tail(power_limit(g0, ex.e2), omega2), omega0, spec)?;
    let e_p1_c2 = math::integrate_semi_infinite(
        |g0| band(power_limit(g0, ex.e3), power_limit(g0, ex.e2), omega2),
        omega0,
        spec,
    )?;
    let e_p1_c0 = math::integrate_semi_infinite(
        |g2| band(power_limit(g2, ex.e4), power_limit(g2, ex.e1), omega0),
        omega2,
        spec,
    )?;

    Ok(ExpectationSet {
        e_p0_c0: e_p0_c0 / LN_2,
        e_p2_c2: e_p2_c2 / LN_2,
        e_p1_c2: e_p1_c2 / LN_2,
        e_p1_c0: e_p1_c0 / LN_2,
    })
}

/// Queue-balance residuals at `t`.
pub fn residuals(
    t: &Thresholds,
    config: &ChannelConfig,
    spec: &QuadratureSpec,
) -> Result<ResidualPair> {
    Ok(ResidualPair::from_expectations(&compute_expectations(
        t, config, spec,
    )?))
}

/// Sum of both broadcast-slot rate expectations at `t`, bits/slot.
pub fn theoretical_sum_rate(
    t: &Thresholds,
    config: &ChannelConfig,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let ex = compute_expectations(t, config, spec)?;
    Ok(ex.e_p1_c0 + ex.e_p1_c2)
}

/// Solve for the threshold pair with default options.
pub fn solve_thresholds(config: &ChannelConfig, spec: &QuadratureSpec) -> Result<SolverResult> {
    solve_thresholds_with(config, spec, &SolverOptions::default())
}

/// Solve for the threshold pair balancing both queues.
///
/// Damped Newton on the residual map from an interior symmetric start,
/// with central-difference Jacobians; if Newton stalls, a 41x41 feasible
/// grid scan plus local zoom restarts it. Deterministic for fixed inputs.
pub fn solve_thresholds_with(
    config: &ChannelConfig,
    spec: &QuadratureSpec,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    let mut ctx = SolveContext {
        config,
        spec,
        opts,
        evals: 0,
    };

    let start = project_feasible(INTERIOR_ANCHOR.0, INTERIOR_ANCHOR.1, opts.boundary_margin);
    let first = ctx.eval(start)?;
    let newton = ctx.newton(start, first);

    let best = if newton.residuals.max_abs() <= opts.residual_tolerance {
        newton
    } else {
        let scanned = ctx.grid_scan(newton);
        if scanned.residuals.max_abs() <= opts.residual_tolerance {
            scanned
        } else {
            let polished = ctx.newton(scanned.point, scanned.clone());
            if polished.norm() <= scanned.norm() {
                polished
            } else {
                scanned
            }
        }
    };

    let residuals = best.residuals;
    let thresholds = Thresholds::new(best.point.0, best.point.1);
    if residuals.max_abs() <= opts.residual_tolerance {
        Ok(SolverResult {
            thresholds,
            residuals,
            theoretical_sum_rate: best.expectations.e_p1_c0 + best.expectations.e_p1_c2,
            iterations: ctx.evals,
            converged: true,
        })
    } else {
        Err(Error::SolverStalled {
            lambda: thresholds.lambda,
            mu: thresholds.mu,
            h1: residuals.h1,
            h2: residuals.h2,
            iterations: ctx.evals,
        })
    }
}

#[derive(Debug, Clone)]
struct Iterate {
    point: (f64, f64),
    expectations: ExpectationSet,
    residuals: ResidualPair,
}

impl Iterate {
    fn norm(&self) -> f64 {
        self.residuals.norm()
    }
}

struct SolveContext<'a> {
    config: &'a ChannelConfig,
    spec: &'a QuadratureSpec,
    opts: &'a SolverOptions,
    evals: usize,
}

impl SolveContext<'_> {
    fn eval(&mut self, point: (f64, f64)) -> Result<Iterate> {
        self.evals += 1;
        let t = Thresholds::new(point.0, point.1);
        let expectations = compute_expectations(&t, self.config, self.spec)?;
        Ok(Iterate {
            point,
            residuals: ResidualPair::from_expectations(&expectations),
            expectations,
        })
    }

    fn try_eval(&mut self, point: (f64, f64)) -> Option<Iterate> {
        self.eval(point).ok()
    }

    /// Damped Newton from `current`; returns the best iterate reached.
    fn newton(&mut self, start: (f64, f64), first: Iterate) -> Iterate {
        let margin = self.opts.boundary_margin;
        let tol = self.opts.residual_tolerance;
        let mut x = start;
        let mut fx = first;

        for _ in 0..self.opts.max_iterations {
            if fx.residuals.max_abs() <= tol {
                break;
            }
            let Some(jac) = self.jacobian(x) else { break };
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            let scale = jac
                .iter()
                .flatten()
                .fold(0.0f64, |acc, v| acc.max(v.abs()));
            if !det.is_finite() || det.abs() <= 1e-14 * scale * scale {
                break;
            }
            let (h1, h2) = (fx.residuals.h1, fx.residuals.h2);
            let dx = (
                -(jac[1][1] * h1 - jac[0][1] * h2) / det,
                -(jac[0][0] * h2 - jac[1][0] * h1) / det,
            );

            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha >= 1e-6 {
                let cand = project_feasible(x.0 + alpha * dx.0, x.1 + alpha * dx.1, margin);
                if let Some(fc) = self.try_eval(cand) {
                    if fc.norm() < fx.norm() {
                        x = cand;
                        fx = fc;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        fx
    }

    /// Central-difference Jacobian with feasibility-projected stencil.
    fn jacobian(&mut self, x: (f64, f64)) -> Option<[[f64; 2]; 2]> {
        let h = self.opts.fd_step;
        let margin = self.opts.boundary_margin;
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut plus = x;
            let mut minus = x;
            if j == 0 {
                plus.0 += h;
                minus.0 -= h;
            } else {
                plus.1 += h;
                minus.1 -= h;
            }
            let plus = project_feasible(plus.0, plus.1, margin);
            let minus = project_feasible(minus.0, minus.1, margin);
            let denom = if j == 0 {
                plus.0 - minus.0
            } else {
                plus.1 - minus.1
            };
            if denom.abs() < 0.05 * h {
                return None;
            }
            let fp = self.try_eval(plus)?;
            let fm = self.try_eval(minus)?;
            jac[0][j] = (fp.residuals.h1 - fm.residuals.h1) / denom;
            jac[1][j] = (fp.residuals.h2 - fm.residuals.h2) / denom;
        }
        Some(jac)
    }

    /// 41x41 scan of the feasible region followed by local zoom.
    fn grid_scan(&mut self, mut best: Iterate) -> Iterate {
        const GRID: usize = 41;
        // Grid points need enough interior slack for the quadrature to
        // stay well-conditioned.
        const SCAN_SLACK: f64 = 1e-6;
        for i in 0..GRID {
            for j in 0..GRID {
                let lambda = -1.0 + (i as f64 + 0.5) / GRID as f64;
                let mu = -1.0 + (j as f64 + 0.5) / GRID as f64;
                let t = Thresholds::new(lambda, mu);
                if t.feasibility_slack() < SCAN_SLACK {
                    continue;
                }
                if let Some(it) = self.try_eval((lambda, mu)) {
                    if it.norm() < best.norm() {
                        best = it;
                    }
                }
            }
        }

        // Zoom: shrink a 9x9 window around the incumbent.
        let mut width = 1.0 / GRID as f64;
        for _ in 0..4 {
            let center = best.point;
            for i in 0..9 {
                for j in 0..9 {
                    let lambda = center.0 + (i as f64 / 4.0 - 1.0) * width;
                    let mu = center.1 + (j as f64 / 4.0 - 1.0) * width;
                    let p = project_feasible(lambda, mu, self.opts.boundary_margin);
                    if let Some(it) = self.try_eval(p) {
                        if it.norm() < best.norm() {
                            best = it;
                        }
                    }
                }
            }
            width *= 0.25;
        }
        best
    }
}

/// Pull a point into the feasible region, keeping `margin` of slack on
/// every constraint. Box and half-plane are handled directly; the
/// quadratic constraint retracts toward the interior anchor.
fn project_feasible(lambda: f64, mu: f64, margin: f64) -> (f64, f64) {
    let lo = -1.0 + margin;
    let hi = -margin;
    let mut l = lambda.clamp(lo, hi);
    let mut m = mu.clamp(lo, hi);

    let excess = l + m + 1.0 + margin;
    if excess > 0.0 {
        l -= 0.5 * excess;
        m -= 0.5 * excess;
        if l < lo {
            m -= lo - l;
            l = lo;
        }
        if m < lo {
            l -= lo - m;
            m = lo;
        }
        l = l.clamp(lo, hi);
        m = m.clamp(lo, hi);
    }

    if Thresholds::new(l, m).quadratic_form() > -margin {
        // Bisect along the segment to the anchor: the first three
        // constraints are convex and hold at both endpoints, so the
        // retracted point satisfies all four.
        let (mut lo_t, mut hi_t) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo_t + hi_t);
            let pl = l + mid * (INTERIOR_ANCHOR.0 - l);
            let pm = m + mid * (INTERIOR_ANCHOR.1 - m);
            if Thresholds::new(pl, pm).quadratic_form() <= -margin {
                hi_t = mid;
            } else {
                lo_t = mid;
            }
        }
        l += hi_t * (INTERIOR_ANCHOR.0 - l);
        m += hi_t * (INTERIOR_ANCHOR.1 - m);
    }
    (l, m)
}
