//! Comparison policies: information-greedy, binary-prior Thompson sampling,
//! uniform random, and exhaustive point sweeping.

use rand::Rng;

use super::nats::{best_response, footprint_precision};
use super::{ActionCatalog, ActionSet};
use crate::grid::GridEnvironment;
use crate::inference::SblPosterior;
use crate::scalar::Real;
use crate::sensing::{Measurement, SensingAction};

/// Entropy reduction `1/2 (log det V - log det V+)` from observing `candidate`.
pub fn ig_gain<T: Real>(post: &SblPosterior<T>, candidate: &SensingAction, jitter: T) -> T {
    let half = T::of(0.5);
    footprint_precision(candidate, jitter)
        .into_iter()
        .map(|(cell, p)| half * (post.var[cell] * p).ln_1p())
        .sum()
}

/// Deterministic argmax of [`ig_gain`]; first maximum wins.
pub fn ig_select<T: Real>(post: &SblPosterior<T>, set: &ActionSet, catalog: &ActionCatalog, jitter: T) -> (usize, T) {
    let mut best: Option<(usize, T)> = None;
    for (idx, action) in set.iter(catalog) {
        let g = ig_gain(post, action, jitter);
        if best.is_none_or(|(_, s)| g > s) {
            best = Some((idx, g));
        }
    }
    best.expect("action set must not be empty")
}

/// Independent per-cell Bernoulli beliefs, kept as log-odds.
///
/// Each confidence `y` at variance `s` updates the log-odds by the Gaussian
/// likelihood ratio of `beta = 1` against `beta = 0`: `(2y - 1) / (2s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliBeliefs {
    log_odds: Vec<f64>,
}

impl BernoulliBeliefs {
    pub fn new(cells: usize, prior: f64) -> Self {
        let lo = (prior / (1.0 - prior)).ln();
        Self {
            log_odds: vec![lo; cells],
        }
    }

    pub fn from_measurements<'a, I>(cells: usize, prior: f64, data: I, jitter: f64) -> Self
    where
        I: IntoIterator<Item = &'a Measurement>,
    {
        let mut b = Self::new(cells, prior);
        for m in data {
            b.update(m, jitter);
        }
        b
    }

    pub fn update(&mut self, m: &Measurement, jitter: f64) {
        for (cell, y, var) in m.rows() {
            let lo = &mut self.log_odds[cell];
            if lo.is_finite() {
                *lo += (2.0 * y - 1.0) / (2.0 * (var + jitter));
            }
        }
    }

    pub fn probability(&self, cell: usize) -> f64 {
        let lo = self.log_odds[cell];
        if lo == f64::INFINITY {
            1.0
        } else {
            1.0 / (1.0 + (-lo).exp())
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.log_odds.len()).map(|m| self.probability(m)).collect()
    }

    pub fn sample_world<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.log_odds.len())
            .map(|m| f64::from(u8::from(rng.random::<f64>() < self.probability(m))))
            .collect()
    }

    /// Moment-matched Gaussian belief: mean `p`, variance `p (1 - p)`.
    pub fn surrogate(&self) -> SblPosterior<f64> {
        let mu = self.probabilities();
        let var: Vec<f64> = mu.iter().map(|p| p * (1.0 - p)).collect();
        SblPosterior {
            mu,
            gamma: var.clone(),
            var,
        }
    }
}

/// Binary Thompson step: sample a world from the Bernoulli beliefs and pick
/// the action with the best expected squared error against it.
pub fn bints_select<R: Rng + ?Sized>(
    beliefs: &BernoulliBeliefs,
    set: &ActionSet,
    catalog: &ActionCatalog,
    prev_pos: usize,
    alpha: f64,
    jitter: f64,
    rng: &mut R,
) -> (usize, f64) {
    let world = beliefs.sample_world(rng);
    let surrogate = beliefs.surrogate();
    best_response(&world, &surrogate, set, catalog, prev_pos, alpha, jitter)
}

/// Uniform draw from the action set.
pub fn rnd_select<R: Rng + ?Sized>(set: &ActionSet, rng: &mut R) -> usize {
    set.indices[rng.random_range(0..set.len())]
}

/// Cell swept by `agent` at its `step`-th action: raster order interleaved by agent.
pub fn point_next(step: usize, agent: usize, agents: usize, env: &GridEnvironment) -> usize {
    (agent + step * agents) % env.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::DepthNoiseModel;
    use crate::policy::enumerate_action_set;
    use crate::sensing::{DepthMetric, Heading};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn world() -> (ActionCatalog, GridEnvironment) {
        let env = GridEnvironment::new(16, 16, 1.0).unwrap();
        let cat = ActionCatalog::new(&env, &DepthNoiseModel::synthetic(), DepthMetric::Rows, None);
        (cat, env)
    }

    #[test]
    fn ig_empty_candidate_never_wins() {
        let post = SblPosterior::<f64>::prior(vec![1.0; 4]);
        let noise = DepthNoiseModel::synthetic();
        let empty = SensingAction::new(0, Heading::N, &[], &noise);
        assert_eq!(ig_gain(&post, &empty, 1e-9), 0.0);
        let one = SensingAction::new(0, Heading::N, &[(2, 3.0)], &noise);
        assert!(ig_gain(&post, &one, 1e-9) > 0.0);
    }

    #[test]
    fn ig_prefers_low_variance_footprint() {
        let post = SblPosterior::<f64>::prior(vec![1.0; 24]);
        let cells_a: Vec<_> = (0..12).map(|c| (c, 1.0)).collect();
        let cells_b: Vec<_> = (12..24).map(|c| (c, 3.0)).collect();
        let noise = DepthNoiseModel::synthetic();
        let near = SensingAction::new(0, Heading::N, &cells_a, &noise);
        let far = SensingAction::new(0, Heading::N, &cells_b, &noise);
        let gn = ig_gain(&post, &near, 0.0);
        let gf = ig_gain(&post, &far, 0.0);
        // direct log-det: 12 * 0.5 * ln(1 + 1 / s)
        assert!((gn - 6.0 * (201.0f64).ln()).abs() < 1e-12);
        assert!((gf - 6.0 * (1.0 + 1.0 / 0.045f64).ln()).abs() < 1e-12);
        assert!(gn > gf);
    }

    #[test]
    fn ig_is_deterministic() {
        let (cat, env) = world();
        let post = SblPosterior::<f64>::prior(vec![1.0; env.len()]);
        let set = enumerate_action_set(&cat, 0, None);
        let a = ig_select(&post, &set, &cat, 1e-9);
        let b = ig_select(&post, &set, &cat, 1e-9);
        assert_eq!(a, b);
    }

    #[test]
    fn bints_all_zero_beliefs_pick_first() {
        let (cat, env) = world();
        let beliefs = BernoulliBeliefs::new(env.len(), 0.0);
        let set = enumerate_action_set(&cat, 0, None);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let world = beliefs.sample_world(&mut rng);
        assert!(world.iter().all(|&w| w == 0.0));
        let (idx, _) = bints_select(&beliefs, &set, &cat, 0, 0.0, 1e-9, &mut rng);
        assert_eq!(idx, set.indices[0]);
    }

    #[test]
    fn bints_certain_cell_always_sampled() {
        let mut beliefs = BernoulliBeliefs::new(10, 0.1);
        beliefs.log_odds[4] = f64::INFINITY;
        assert_eq!(beliefs.probability(4), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(beliefs.sample_world(&mut rng)[4], 1.0);
        }
    }

    #[test]
    fn bints_strong_detection_is_believed() {
        // two-hypothesis ratio N(0.95; 1, s) / N(0.95; 0, s) with s = 0.005
        let noise = DepthNoiseModel::synthetic();
        let act = SensingAction::new(0, Heading::N, &[(3, 1.0)], &noise);
        let m = Measurement {
            id: 1,
            agent: 0,
            issue_time: 0.0,
            completion_time: 1.0,
            action: act,
            y: vec![0.95],
        };
        let prior = 1.0 / 256.0;
        let b = BernoulliBeliefs::from_measurements(16, prior, [&m], 0.0);
        let s = 0.005;
        let lr = (-(0.05f64).powi(2) / (2.0 * s)).exp() / (-(0.95f64).powi(2) / (2.0 * s)).exp();
        let oracle = prior * lr / (prior * lr + (1.0 - prior));
        assert!((b.probability(3) - oracle).abs() < 1e-12);
        assert!(b.probability(3) > 0.99);
    }

    #[test]
    fn rnd_singleton_and_uniformity() {
        let (cat, _) = world();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let single = enumerate_action_set(&cat, 9, Some(0));
        let one = ActionSet {
            indices: vec![single.indices[2]],
            radius: Some(0),
        };
        assert_eq!(rnd_select(&one, &mut rng), single.indices[2]);

        let set = enumerate_action_set(&cat, 0, None);
        let n = 100_000;
        let mut counts = vec![0usize; 1024];
        for _ in 0..n {
            counts[rnd_select(&set, &mut rng)] += 1;
        }
        let e = n as f64 / 1024.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 1023 dof: mean 1023, sd ~45; 99.9% quantile ~ 1168
        assert!(chi2 < 1168.0, "chi2 {chi2}");
    }

    #[test]
    fn rnd_is_reproducible() {
        let (cat, _) = world();
        let set = enumerate_action_set(&cat, 0, None);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| rnd_select(&set, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn point_sweep_schedule() {
        let env = GridEnvironment::new(16, 16, 1.0).unwrap();
        let single: Vec<_> = (0..5).map(|s| point_next(s, 0, 1, &env)).collect();
        assert_eq!(single, vec![0, 1, 2, 3, 4]);
        let a2: Vec<_> = (0..3).map(|s| point_next(s, 2, 4, &env)).collect();
        assert_eq!(a2, vec![2, 6, 10]);
        let all: HashSet<_> = (0..256).map(|s| point_next(s, 0, 1, &env)).collect();
        assert_eq!(all.len(), 256);
        assert_eq!(point_next(256, 0, 1, &env), 0);
    }
}
