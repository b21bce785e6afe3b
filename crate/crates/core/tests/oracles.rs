mod common;

use common::*;
use nats_core::inference::{compute_posterior, em_update_gamma, Evidence, SblConfig, SblPosterior};
use nats_core::policy::nats_reward;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn evidence(m: usize, rows: &[Row]) -> Evidence<f64> {
    let mut ev = Evidence::new(m);
    for &(c, y, v) in rows {
        ev.add_row(c, y, v, 0.0).unwrap();
    }
    ev
}

#[test]
fn posterior_matches_dense_model_worked_case() {
    // M = 6, four rows, two on the same cell
    let rows = [(0, 0.9, 0.005), (2, 0.1, 0.02), (2, 0.3, 0.045), (5, 0.6, 0.02)];
    let gamma = [1.0, 0.5, 2.0, 1.0, 0.1, 0.3];
    let post = compute_posterior(&evidence(6, &rows), &gamma).unwrap();
    let (mu, v) = dense_posterior(6, &rows, &gamma);
    for i in 0..6 {
        assert!((post.mu[i] - mu[i]).abs() < 1e-8);
        for j in 0..6 {
            let ours = if i == j { post.var[i] } else { 0.0 };
            assert!((ours - v[(i, j)]).abs() < 1e-8);
        }
    }
}

#[test]
fn reward_matches_monte_carlo_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let post = SblPosterior {
        mu: vec![0.2, 0.0, 0.7, 0.1],
        var: vec![0.5, 1.0, 0.05, 0.2],
        gamma: vec![1.0; 4],
    };
    let bt = [1.1, -0.3, 0.6, 0.0];
    let rows = [(0, 0.0, 0.02), (1, 0.0, 0.045), (1, 0.0, 0.005), (3, 0.0, 0.02)];
    let closed = nats_reward(&bt, &post, &action_from_rows(&rows), 0.0);
    let (mc, se) = monte_carlo_reward(&bt, &post, &rows, 100_000, &mut rng);
    assert!((closed - mc).abs() < 3.0 * se, "{closed} vs {mc} +- {se}");
}

#[test]
fn em_update_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let mu: f64 = rng.random_range(-2.0..2.0);
        let v: f64 = rng.random_range(0.0..1.0);
        let cfg = SblConfig {
            a: rng.random_range(0.0..3.0),
            b: rng.random_range(0.0..1.0),
            ..SblConfig::default()
        };
        let post = SblPosterior {
            mu: vec![mu],
            var: vec![v],
            gamma: vec![1.0],
        };
        let g = em_update_gamma(&post, &cfg)[0];
        assert_eq!(g, em_reference(mu, v, cfg.a, cfg.b, cfg.gamma_floor));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_agrees_with_dense(seed in any::<u64>(), m in 1usize..8, q in 0usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = random_rows(m, q, &mut rng);
        let gamma: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..2.0)).collect();
        let post = compute_posterior(&evidence(m, &rows), &gamma).unwrap();
        let (mu, v) = dense_posterior(m, &rows, &gamma);
        for i in 0..m {
            prop_assert!((post.mu[i] - mu[i]).abs() < 1e-8);
            prop_assert!((post.var[i] - v[(i, i)]).abs() < 1e-8);
        }
    }

    #[test]
    fn more_data_never_widens_posterior(seed in any::<u64>(), m in 1usize..10, q in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = random_rows(m, q, &mut rng);
        let extra = random_rows(m, 3, &mut rng);
        let gamma = vec![1.0; m];
        let before = compute_posterior(&evidence(m, &rows), &gamma).unwrap();
        let all: Vec<Row> = rows.iter().chain(&extra).copied().collect();
        let after = compute_posterior(&evidence(m, &all), &gamma).unwrap();
        for i in 0..m {
            prop_assert!(after.var[i] <= before.var[i] + 1e-15);
        }
        prop_assert!(after.log_det() <= before.log_det() + 1e-12);
    }

    #[test]
    fn row_order_is_irrelevant(seed in any::<u64>(), m in 1usize..10, q in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = random_rows(m, q, &mut rng);
        let mut rev = rows.clone();
        rev.reverse();
        let gamma = vec![0.7; m];
        let a = compute_posterior(&evidence(m, &rows), &gamma).unwrap();
        let b = compute_posterior(&evidence(m, &rev), &gamma).unwrap();
        for i in 0..m {
            prop_assert!((a.mu[i] - b.mu[i]).abs() < 1e-12);
            prop_assert!((a.var[i] - b.var[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn reward_never_exceeds_zero(seed in any::<u64>(), m in 1usize..12, q in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let post = SblPosterior {
            mu: (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
            var: (0..m).map(|_| rng.random_range(0.0..2.0)).collect(),
            gamma: vec![1.0; m],
        };
        let bt: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..2.0)).collect();
        let rows = random_rows(m, q, &mut rng);
        let r = nats_reward(&bt, &post, &action_from_rows(&rows), 0.0);
        prop_assert!(r <= 0.0);
    }
}
