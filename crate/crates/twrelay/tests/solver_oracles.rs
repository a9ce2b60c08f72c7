//! Monte Carlo cross-checks of the quadrature-based expectations and of
//! the solved thresholds.

mod common;

use common::{mc_expectations, random_feasible_thresholds};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twrelay::channel::ChannelConfig;
use twrelay::math::QuadratureSpec;
use twrelay::policy::Thresholds;
use twrelay::solver::{compute_expectations, residuals, solve_thresholds};

#[test]
fn residuals_agree_with_monte_carlo_on_random_thresholds() {
    let spec = QuadratureSpec::default();
    let config = ChannelConfig::new(10.0, 4.0, 8_101).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(311);
    for trial in 0..20 {
        let t = random_feasible_thresholds(&mut rng, 1e-3);
        let quad = residuals(&t, &config, &spec).unwrap();
        let mc = mc_expectations(t, &config, 1_000_000);
        assert!(
            mc.h1.within(quad.h1, 3.0),
            "trial {trial}: h1 quad {} vs MC {} +- {}",
            quad.h1,
            mc.h1.mean,
            mc.h1.std_err
        );
        assert!(
            mc.h2.within(quad.h2, 3.0),
            "trial {trial}: h2 quad {} vs MC {} +- {}",
            quad.h2,
            mc.h2.mean,
            mc.h2.std_err
        );
    }
}

#[test]
fn expectations_agree_with_monte_carlo_at_a_fixed_pair() {
    let spec = QuadratureSpec::default();
    let config = ChannelConfig::new(10.0, 10.0, 2_024).unwrap();
    let t = Thresholds::new(-0.61, -0.57);
    let quad = compute_expectations(&t, &config, &spec).unwrap();
    let mc = mc_expectations(t, &config, 4_000_000);
    assert!(mc.e_p0_c0.within(quad.e_p0_c0, 3.0));
    assert!(mc.e_p2_c2.within(quad.e_p2_c2, 3.0));
    assert!(mc.e_p1_c2.within(quad.e_p1_c2, 3.0));
    assert!(mc.e_p1_c0.within(quad.e_p1_c0, 3.0));
}

#[test]
fn corner_residual_signs_confirmed_by_monte_carlo() {
    // Near the diagonal end where the relay almost never transmits the
    // queues fill without draining (positive residuals); near the
    // always-broadcast end they drain without filling (negative).
    let config = ChannelConfig::new(10.0, 10.0, 5_555).unwrap();
    let uplink_heavy = mc_expectations(Thresholds::new(-0.66, -0.66), &config, 1_000_000);
    assert!(uplink_heavy.h1.mean - 3.0 * uplink_heavy.h1.std_err > 0.0);
    assert!(uplink_heavy.h2.mean - 3.0 * uplink_heavy.h2.std_err > 0.0);
    let relay_heavy = mc_expectations(Thresholds::new(-0.51, -0.51), &config, 1_000_000);
    assert!(relay_heavy.h1.mean + 3.0 * relay_heavy.h1.std_err < 0.0);
    assert!(relay_heavy.h2.mean + 3.0 * relay_heavy.h2.std_err < 0.0);
}

#[test]
fn symmetric_solution_matches_diagonal_grid_scan_oracle() {
    // Independent root location: scan the symmetric diagonal, estimate
    // the queue-0 residual by Monte Carlo at each grid point, and bracket
    // the sign change.
    let config = ChannelConfig::new(10.0, 10.0, 97).unwrap();
    let result = solve_thresholds(&config, &QuadratureSpec::default()).unwrap();
    let solved = result.thresholds.lambda;
    assert!((result.thresholds.mu - solved).abs() <= 1e-6);
    assert!(solved > -2.0 / 3.0 && solved < -0.5);

    let slots = 1_000_000;
    let grid: Vec<f64> = (0..17).map(|i| -0.66 + 0.01 * i as f64).collect();
    let mut bracket = None;
    let mut prev: Option<(f64, f64)> = None;
    for &lambda in &grid {
        let mc = mc_expectations(Thresholds::new(lambda, lambda), &config, slots);
        if let Some((prev_lambda, prev_h1)) = prev {
            if prev_h1 > 0.0 && mc.h1.mean <= 0.0 {
                bracket = Some((prev_lambda, lambda));
                break;
            }
        }
        prev = Some((lambda, mc.h1.mean));
    }
    let (lo, hi) = bracket.expect("residual sign change on the diagonal");
    // Allow one grid cell of slack for Monte Carlo noise at the ends.
    assert!(
        solved >= lo - 0.01 && solved <= hi + 0.01,
        "solver lambda {solved} outside MC bracket [{lo}, {hi}]"
    );
}

#[test]
fn asymmetric_solution_balances_queues_under_monte_carlo() {
    let config = ChannelConfig::new(10.0, 1.0, 4_242).unwrap();
    let result = solve_thresholds(&config, &QuadratureSpec::default()).unwrap();
    assert!(result.converged);
    assert!(result.residuals.h1.abs() <= 1e-6 && result.residuals.h2.abs() <= 1e-6);
    let mc = mc_expectations(result.thresholds, &config, 10_000_000);
    // At the root the two balance equations hold: inflow equals outflow
    // for both queues, up to Monte Carlo resolution.
    assert!(
        mc.h1.within(0.0, 3.0),
        "h1 MC {} +- {}",
        mc.h1.mean,
        mc.h1.std_err
    );
    assert!(
        mc.h2.within(0.0, 3.0),
        "h2 MC {} +- {}",
        mc.h2.mean,
        mc.h2.std_err
    );
}
