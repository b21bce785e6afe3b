use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ActionCatalog, ActionSet};
use crate::error::Result;
use crate::grid::GridEnvironment;
use crate::inference::{sample_posterior, SblPosterior};
use crate::scalar::Real;
use crate::sensing::SensingAction;

/// Negative expected squared error between `beta_tilde` and the posterior
/// mean after also observing `candidate`, with `y ~ N(X beta_tilde, Sigma)`.
///
/// Closed form: `-( ||beta_tilde - E[mu+]||^2 + tr Cov[mu+] )`. Only cells
/// inside the footprint change, so the cost is `O(M + Q^2)`.
pub fn nats_reward<T: Real>(beta_tilde: &[T], post: &SblPosterior<T>, candidate: &SensingAction, jitter: T) -> T {
    let mut err: T = beta_tilde.iter().zip(&post.mu).map(|(&b, &m)| (b - m) * (b - m)).sum();
    for (cell, p) in footprint_precision(candidate, jitter) {
        let v = post.var[cell];
        let d = beta_tilde[cell] - post.mu[cell];
        let gain = v * p / (T::one() + v * p);
        let v_plus = v / (T::one() + v * p);
        let residual = (T::one() - gain) * d;
        err = err - d * d + residual * residual + v_plus * v_plus * p;
    }
    -err
}

/// Per-cell summed noise precision of a footprint (duplicate rows merge).
pub(crate) fn footprint_precision<T: Real>(candidate: &SensingAction, jitter: T) -> Vec<(usize, T)> {
    let mut out: Vec<(usize, T)> = Vec::with_capacity(candidate.fov.len());
    for f in &candidate.fov {
        let p = (T::of(f.variance) + jitter).recip();
        match out.iter_mut().find(|(c, _)| *c == f.cell) {
            Some(slot) => slot.1 = slot.1 + p,
            None => out.push((f.cell, p)),
        }
    }
    out
}

/// Euclidean move length between two agent cells, in cell units.
pub fn travel_cost(env: &GridEnvironment, from: usize, to: usize) -> f64 {
    env.cell_distance(from, to)
}

/// Argmax over the action set of `reward - alpha * travel`. First maximum wins.
pub fn best_response<T: Real>(
    beta_tilde: &[T],
    post: &SblPosterior<T>,
    set: &ActionSet,
    catalog: &ActionCatalog,
    prev_pos: usize,
    alpha: T,
    jitter: T,
) -> (usize, T) {
    let env = catalog.env();
    let mut best: Option<(usize, T)> = None;
    for (idx, action) in set.iter(catalog) {
        let mut score = nats_reward(beta_tilde, post, action, jitter);
        if alpha > T::zero() {
            score = score - alpha * T::of(travel_cost(env, prev_pos, action.agent_cell));
        }
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((idx, score));
        }
    }
    best.expect("action set must not be empty")
}

/// Thompson step: sample `beta_tilde` from the posterior and act optimally for it.
///
/// Returns the catalog index and score of the chosen action.
#[allow(clippy::too_many_arguments)]
pub fn nats_select<T, R>(
    post: &SblPosterior<T>,
    set: &ActionSet,
    catalog: &ActionCatalog,
    prev_pos: usize,
    alpha: T,
    jitter: T,
    rng: &mut R,
) -> Result<(usize, T)>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    let beta_tilde = sample_posterior(post, jitter, rng)?;
    Ok(best_response(&beta_tilde, post, set, catalog, prev_pos, alpha, jitter))
}
