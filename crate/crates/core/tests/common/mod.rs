//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nats_core::inference::SblPosterior;
use nats_core::sensing::{FovCell, Heading, SensingAction};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// One stacked row: cell, observation, noise variance.
pub type Row = (usize, f64, f64);

pub fn random_rows<R: Rng>(m: usize, q: usize, rng: &mut R) -> Vec<Row> {
    (0..q)
        .map(|_| {
            (
                rng.random_range(0..m),
                rng.random::<f64>(),
                rng.random_range(0.001..0.1),
            )
        })
        .collect()
}

pub fn action_from_rows(rows: &[Row]) -> SensingAction {
    SensingAction {
        agent_cell: 0,
        heading: Heading::N,
        fov: rows
            .iter()
            .map(|&(cell, _, variance)| FovCell {
                cell,
                depth: 1.0,
                variance,
            })
            .collect(),
    }
}

fn design(m: usize, rows: &[Row]) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let q = rows.len();
    let x = DMatrix::from_fn(q, m, |r, c| f64::from(u8::from(rows[r].0 == c)));
    let sigma = DMatrix::from_diagonal(&DVector::from_iterator(q, rows.iter().map(|r| r.2)));
    let y = DVector::from_iterator(q, rows.iter().map(|r| r.1));
    (x, sigma, y)
}

/// Dense Bayesian linear model: `V = (Gamma^-1 + X^T Sigma^-1 X)^-1`, `mu = V X^T Sigma^-1 y`.
pub fn dense_posterior(m: usize, rows: &[Row], gamma: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let (x, sigma, y) = design(m, rows);
    let sigma_inv = sigma.try_inverse().expect("noise covariance invertible");
    let gamma_inv = DMatrix::from_diagonal(&DVector::from_iterator(m, gamma.iter().map(|g| 1.0 / g)));
    let precision = gamma_inv + x.transpose() * &sigma_inv * &x;
    let v = precision.try_inverse().expect("posterior precision invertible");
    let mu = &v * x.transpose() * sigma_inv * y;
    (mu, v)
}

/// Monte-Carlo estimate of `-E ||beta_tilde - mu+||^2` with `y ~ N(X beta_tilde, Sigma)`,
/// using the dense Kalman update of the Gaussian prior `N(mu, diag var)`.
/// Returns (mean, standard error).
pub fn monte_carlo_reward<R: Rng>(
    beta_tilde: &[f64],
    post: &SblPosterior<f64>,
    rows: &[Row],
    samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    let m = post.mu.len();
    let (x, sigma, _) = design(m, rows);
    let v = DMatrix::from_diagonal(&DVector::from_vec(post.var.clone()));
    let mu = DVector::from_vec(post.mu.clone());
    let bt = DVector::from_vec(beta_tilde.to_vec());
    let s = &x * &v * x.transpose() + &sigma;
    let gain = &v * x.transpose() * s.try_inverse().expect("innovation covariance invertible");
    let mean_y = &x * &bt;
    let innov0 = &mean_y - &x * &mu;
    let sd: Vec<f64> = rows.iter().map(|r| r.2.sqrt()).collect();
    let (mut sum, mut sum2) = (0.0, 0.0);
    let mut noise = DVector::zeros(rows.len());
    for _ in 0..samples {
        for (i, s) in sd.iter().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            noise[i] = s * z;
        }
        let mu_plus = &mu + &gain * (&innov0 + &noise);
        let e = -(&bt - mu_plus).norm_squared();
        sum += e;
        sum2 += e * e;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// The EM prior-variance update written out term by term:
/// second posterior moment plus `2b`, over `1 + 2a`, then floored.
pub fn em_reference(mu: f64, v: f64, a: f64, b: f64, floor: f64) -> f64 {
    let second_moment = v + mu.powi(2);
    ((second_moment + 2.0 * b) / (2.0 * a + 1.0)).max(floor)
}
