//! Action selection: noise-aware Thompson sampling and the comparison baselines.

mod baselines;
mod nats;

pub use baselines::{bints_select, ig_gain, ig_select, point_next, rnd_select, BernoulliBeliefs};
pub use nats::{nats_reward, nats_select, travel_cost};

use serde::{Deserialize, Serialize};

use crate::grid::GridEnvironment;
use crate::noise::DepthNoiseModel;
use crate::sensing::{enumerate_fov_cells, DepthMetric, Heading, SensingAction, Visibility};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Nats,
    #[serde(rename = "bints")]
    BinTs,
    Ig,
    Rnd,
    Point,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Nats => "nats",
            PolicyKind::BinTs => "bints",
            PolicyKind::Ig => "ig",
            PolicyKind::Rnd => "rnd",
            PolicyKind::Point => "point",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "nats" => Ok(PolicyKind::Nats),
            "bints" => Ok(PolicyKind::BinTs),
            "ig" => Ok(PolicyKind::Ig),
            "rnd" => Ok(PolicyKind::Rnd),
            "point" => Ok(PolicyKind::Point),
            other => Err(format!("unknown policy '{other}'")),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Every pose of the grid with its footprint, in position-major, N/S/E/W order.
#[derive(Debug, Clone)]
pub struct ActionCatalog {
    env: GridEnvironment,
    actions: Vec<SensingAction>,
}

impl ActionCatalog {
    pub fn new(
        env: &GridEnvironment,
        noise: &DepthNoiseModel,
        metric: DepthMetric,
        visibility: Option<&dyn Visibility>,
    ) -> Self {
        let mut actions = Vec::with_capacity(env.len() * 4);
        for cell in 0..env.len() {
            for h in Heading::ALL {
                let fov = enumerate_fov_cells(cell, h, env, metric, visibility);
                actions.push(SensingAction::new(cell, h, &fov, noise));
            }
        }
        Self { env: *env, actions }
    }

    pub fn env(&self) -> &GridEnvironment {
        &self.env
    }

    pub fn get(&self, index: usize) -> &SensingAction {
        &self.actions[index]
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Candidate actions available to one agent at one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    /// Indices into the [`ActionCatalog`], in enumeration order.
    pub indices: Vec<usize>,
    /// Chebyshev radius in cells; `None` means the whole grid.
    pub radius: Option<usize>,
}

impl ActionSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter<'a>(&'a self, catalog: &'a ActionCatalog) -> impl Iterator<Item = (usize, &'a SensingAction)> + 'a {
        self.indices.iter().map(move |&i| (i, catalog.get(i)))
    }
}

/// All poses within `radius` (Chebyshev) of `agent_pos`.
pub fn enumerate_action_set(catalog: &ActionCatalog, agent_pos: usize, radius: Option<usize>) -> ActionSet {
    let env = catalog.env();
    let indices = match radius {
        None => (0..catalog.len()).collect(),
        Some(r) => {
            let (ar, ac) = env.unflatten(agent_pos);
            let mut idx = Vec::new();
            for row in ar.saturating_sub(r)..=(ar + r).min(env.rows - 1) {
                for col in ac.saturating_sub(r)..=(ac + r).min(env.cols - 1) {
                    let cell = row * env.cols + col;
                    idx.extend((0..4).map(|h| cell * 4 + h));
                }
            }
            idx
        }
    };
    ActionSet { indices, radius }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog(rows: usize, cols: usize) -> ActionCatalog {
        let env = GridEnvironment::new(rows, cols, 1.0).unwrap();
        ActionCatalog::new(&env, &DepthNoiseModel::synthetic(), DepthMetric::Rows, None)
    }

    #[test]
    fn unbounded_set_covers_every_pose() {
        let cat = catalog(16, 16);
        let set = enumerate_action_set(&cat, 0, None);
        assert_eq!(set.len(), 1024);
    }

    #[test]
    fn radius_zero_is_four_headings() {
        let cat = catalog(16, 16);
        let set = enumerate_action_set(&cat, 37, Some(0));
        assert_eq!(set.len(), 4);
        let heads: Vec<_> = set.iter(&cat).map(|(_, a)| (a.agent_cell, a.heading)).collect();
        assert_eq!(
            heads,
            vec![(37, Heading::N), (37, Heading::S), (37, Heading::E), (37, Heading::W)]
        );
    }

    #[test]
    fn radius_one_at_corner() {
        let cat = catalog(16, 16);
        assert_eq!(enumerate_action_set(&cat, 0, Some(1)).len(), 16);
        assert_eq!(enumerate_action_set(&cat, 255, Some(1)).len(), 16);
        assert_eq!(enumerate_action_set(&cat, 17, Some(1)).len(), 36);
    }

    #[test]
    fn enumeration_is_position_major() {
        let cat = catalog(4, 4);
        let set = enumerate_action_set(&cat, 5, Some(1));
        let cells: Vec<_> = set.iter(&cat).map(|(_, a)| a.agent_cell).collect();
        assert!(cells.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn policy_names_roundtrip() {
        for k in [
            PolicyKind::Nats,
            PolicyKind::BinTs,
            PolicyKind::Ig,
            PolicyKind::Rnd,
            PolicyKind::Point,
        ] {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("rsi".parse::<PolicyKind>().is_err());
    }
}
