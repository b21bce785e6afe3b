//! Asynchronous decentralized event loop.
//!
//! Whenever an agent finishes sensing it stores its own measurement,
//! broadcasts it, refits its belief from whatever it holds at that instant
//! and starts the next action right away. Nothing ever waits on the bus.

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bus::MessageBus;
use super::trace::{Event, SimTrace, StopReason, TraceHeader, TRACE_SCHEMA, TRACE_VERSION};
use crate::config::{BeliefNoise, ExperimentConfig, TerrainSection};
use crate::error::Result;
use crate::grid::{generate_ground_truth, GridEnvironment, GroundTruth};
use crate::inference::{estimate_beta, fit, fit_from, Evidence, SblConfig};
use crate::noise::DepthNoiseModel;
use crate::policy::{
    bints_select, enumerate_action_set, ig_select, nats_select, point_next, rnd_select, ActionCatalog,
    BernoulliBeliefs, PolicyKind,
};
use crate::sensing::{observe, DepthMetric, Measurement, SensingAction, Visibility};
use crate::viewshed::{coarsen, load_dem, Dem, Nodata, VisibilityTable};

const STREAM_TRUTH: u64 = 1;
const STREAM_START: u64 = 2;
const STREAM_BUS: u64 = 3;
const STREAM_AGENT_BASE: u64 = 16;

/// Independent ChaCha stream `stream` of `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Everything about a run that does not depend on the seed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ExperimentConfig,
    pub env: GridEnvironment,
    /// Footprints carrying the agents' belief variances.
    pub catalog: Arc<ActionCatalog>,
    pub truth_noise: DepthNoiseModel,
    pub belief_noise: DepthNoiseModel,
    pub visibility: Option<Arc<VisibilityTable>>,
}

impl Scenario {
    /// Validate the config and precompute footprints (and terrain visibility if configured).
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        match &config.terrain {
            None => Self::assemble(config, config.environment()?, None),
            Some(t) => {
                let nodata = t.nodata_fill.map_or(Nodata::Reject, Nodata::Fill);
                let dem = load_dem(&t.dem, nodata)?;
                Self::with_dem(config, &dem)
            }
        }
    }

    /// Scenario on the coarse waypoint grid of an in-memory DEM.
    pub fn with_dem(config: &ExperimentConfig, dem: &Dem) -> Result<Self> {
        config.validate()?;
        let t = config
            .terrain
            .clone()
            .unwrap_or_else(|| TerrainSection::new(PathBuf::new()));
        let grid = coarsen(dem, t.spacing)?;
        let env = grid.environment();
        if config.targets.k > env.len() {
            return Err(crate::error::Error::config(format!(
                "k = {} exceeds coarse node count {}",
                config.targets.k,
                env.len()
            )));
        }
        let vis = VisibilityTable::compute(dem, &grid, t.observer_height, t.pixel_stride, t.visibility_threshold);
        let mut config = config.clone();
        config.terrain = Some(t);
        config.grid.rows = env.rows;
        config.grid.cols = env.cols;
        config.grid.cell_size = env.cell_size;
        Self::assemble(&config, env, Some(Arc::new(vis)))
    }

    fn assemble(config: &ExperimentConfig, env: GridEnvironment, vis: Option<Arc<VisibilityTable>>) -> Result<Self> {
        let truth_noise = config.noise.model()?;
        let belief_noise = match config.noise.belief {
            BeliefNoise::DepthAware => truth_noise.clone(),
            BeliefNoise::Flat => truth_noise.flattened(),
        };
        let vref = vis.as_deref().map(|v| v as &dyn Visibility);
        let catalog = ActionCatalog::new(&env, &belief_noise, config.noise.metric, vref);
        if let Some(start) = &config.agents.start {
            if let Some(&bad) = start.iter().find(|&&s| s >= env.len()) {
                return Err(crate::error::Error::config(format!("start cell {bad} outside grid")));
            }
        }
        Ok(Self {
            config: config.clone(),
            env,
            catalog: Arc::new(catalog),
            truth_noise,
            belief_noise,
            visibility: vis,
        })
    }

    pub fn metric(&self) -> DepthMetric {
        self.config.noise.metric
    }

    /// Draw the ground truth for `seed`.
    pub fn ground_truth(&self, seed: u64) -> Result<GroundTruth> {
        generate_ground_truth(&self.env, self.config.targets.k, &mut rng_stream(seed, STREAM_TRUTH))
    }

    pub fn run(&self, seed: u64) -> Result<SimTrace> {
        let truth = self.ground_truth(seed)?;
        self.run_with_truth(seed, &truth)
    }

    pub fn run_with_truth(&self, seed: u64, truth: &GroundTruth) -> Result<SimTrace> {
        Simulation::new(self, seed, truth).run()
    }
}

/// Build the scenario from `config` and run it with `config.seed`.
pub fn run_simulation(config: &ExperimentConfig) -> Result<SimTrace> {
    Scenario::build(config)?.run(config.seed)
}

struct Pending {
    action: SensingAction,
    issue_time: f64,
    completes_at: f64,
}

struct Agent {
    id: usize,
    policy: PolicyKind,
    position: usize,
    known: Vec<u64>,
    has: Vec<bool>,
    evidence: Evidence<f64>,
    gamma: Vec<f64>,
    bints: Option<BernoulliBeliefs>,
    tasks: usize,
    rng_policy: ChaCha8Rng,
    rng_obs: ChaCha8Rng,
    rng_time: ChaCha8Rng,
    pending: Option<Pending>,
    travel: f64,
}

impl Agent {
    fn receive(&mut self, slot: usize, m: &Measurement, jitter: f64) -> Result<bool> {
        if self.has[slot] {
            return Ok(false);
        }
        self.has[slot] = true;
        self.known.push(m.id);
        self.evidence.add(m, jitter)?;
        if let Some(b) = self.bints.as_mut() {
            b.update(m, jitter);
        }
        Ok(true)
    }
}

struct Simulation<'a> {
    sc: &'a Scenario,
    cfg: &'a ExperimentConfig,
    sbl: SblConfig<f64>,
    truth: &'a GroundTruth,
    seed: u64,
    agents: Vec<Agent>,
    store: Vec<Measurement>,
    pooled: Evidence<f64>,
    bus: MessageBus,
    events: Vec<Event>,
    start: Vec<usize>,
}

impl<'a> Simulation<'a> {
    fn new(sc: &'a Scenario, seed: u64, truth: &'a GroundTruth) -> Self {
        let cfg = &sc.config;
        let m = sc.env.len();
        let j = cfg.agents.count;
        let start = match &cfg.agents.start {
            Some(s) => s.clone(),
            None => {
                let mut rng = rng_stream(seed, STREAM_START);
                (0..j).map(|_| rng.random_range(0..m)).collect()
            }
        };
        let prior = cfg.targets.k as f64 / m as f64;
        let agents = (0..j)
            .map(|id| {
                let base = STREAM_AGENT_BASE + 3 * id as u64;
                let policy = cfg.agents.policy_of(id);
                Agent {
                    id,
                    policy,
                    position: start[id],
                    known: Vec::new(),
                    has: vec![false; cfg.budget],
                    evidence: Evidence::new(m),
                    gamma: vec![1.0; m],
                    bints: (policy == PolicyKind::BinTs).then(|| BernoulliBeliefs::new(m, prior)),
                    tasks: 0,
                    rng_policy: rng_stream(seed, base),
                    rng_obs: rng_stream(seed, base + 1),
                    rng_time: rng_stream(seed, base + 2),
                    pending: None,
                    travel: 0.0,
                }
            })
            .collect();
        Self {
            sc,
            cfg,
            sbl: cfg.sbl,
            truth,
            seed,
            agents,
            store: Vec::with_capacity(cfg.budget),
            pooled: Evidence::new(m),
            bus: MessageBus::new(cfg.comm.drop, cfg.comm.delay.clone(), rng_stream(seed, STREAM_BUS)),
            events: Vec::new(),
            start,
        }
    }

    fn recovered(&self) -> Result<bool> {
        let post = fit(&self.pooled, &self.sbl)?;
        Ok(self.truth.matches(&estimate_beta(&post, self.cfg.threshold)))
    }

    fn run(mut self) -> Result<SimTrace> {
        let budget = self.cfg.budget;
        let mut now = 0.0;
        let recovered0 = self.recovered()?;
        self.events.push(Event::Recovery {
            time: 0.0,
            t: 0,
            recovered: recovered0,
        });
        let reason = if recovered0 && self.cfg.stop_on_recovery {
            StopReason::Recovered
        } else if budget == 0 {
            StopReason::Budget
        } else {
            for id in 0..self.agents.len() {
                self.issue(id, 0.0)?;
            }
            loop {
                let next_done = self
                    .agents
                    .iter()
                    .filter_map(|a| a.pending.as_ref().map(|p| (p.completes_at, a.id)))
                    .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
                    .expect("some agent is always busy");
                if let Some(t) = self.bus.next_time() {
                    if t <= next_done.0 {
                        let msg = self.bus.pop().expect("peeked");
                        now = msg.at;
                        let m = &self.store[msg.slot];
                        if self.agents[msg.to].receive(msg.slot, m, self.sbl.jitter)? {
                            self.events.push(Event::Delivered {
                                time: now,
                                to: msg.to,
                                id: m.id,
                            });
                        }
                        continue;
                    }
                }
                now = next_done.0;
                let done = self.complete(next_done.1, now)?;
                if done && self.cfg.stop_on_recovery {
                    break StopReason::Recovered;
                }
                if self.store.len() >= budget {
                    break StopReason::Budget;
                }
                self.issue(next_done.1, now)?;
            }
        };
        for a in &self.agents {
            self.events.push(Event::Final {
                time: now,
                agent: a.id,
                position: a.position,
                known: a.known.clone(),
                travel: a.travel,
            });
        }
        self.events.push(Event::End {
            time: now,
            measurements: self.store.len(),
            reason,
        });
        let header = TraceHeader {
            schema: TRACE_SCHEMA.into(),
            version: TRACE_VERSION,
            seed: self.seed,
            config: self.cfg.clone(),
            truth: self.truth.support(),
            start: self.start,
        };
        Ok(SimTrace {
            header,
            events: self.events,
        })
    }

    /// Finish agent `id`'s pending action at `now`. Returns whether the pooled
    /// estimate now equals the truth.
    fn complete(&mut self, id: usize, now: f64) -> Result<bool> {
        let agents = self.agents.len();
        let jitter = self.sbl.jitter;
        let agent = &mut self.agents[id];
        let p = agent.pending.take().expect("completing agent is busy");
        let truth_action = if self.cfg.noise.belief == BeliefNoise::DepthAware {
            None
        } else {
            Some(p.action.reweighted(&self.sc.truth_noise))
        };
        let mut m = observe(
            self.truth,
            truth_action.as_ref().unwrap_or(&p.action),
            &mut agent.rng_obs,
        );
        m.action = p.action;
        m.id = self.store.len() as u64 + 1;
        m.agent = id;
        m.issue_time = p.issue_time;
        m.completion_time = now;
        let slot = self.store.len();
        agent.receive(slot, &m, jitter)?;
        self.pooled.add(&m, jitter)?;
        self.events.push(Event::Observed {
            time: now,
            agent: id,
            measurement: m.clone(),
        });
        for d in self.bus.broadcast(id, agents, slot, now) {
            self.events.push(match d.at {
                Some(at) => Event::Sent {
                    time: now,
                    from: id,
                    to: d.to,
                    id: m.id,
                    deliver_at: at,
                },
                None => Event::Dropped {
                    time: now,
                    from: id,
                    to: d.to,
                    id: m.id,
                },
            });
        }
        self.store.push(m);
        let rec = self.recovered()?;
        self.events.push(Event::Recovery {
            time: now,
            t: self.store.len(),
            recovered: rec,
        });
        Ok(rec)
    }

    /// Agent `id` decides and starts its next action at `now`.
    fn issue(&mut self, id: usize, now: f64) -> Result<()> {
        let cfg = self.cfg;
        let sc = self.sc;
        let catalog = &*sc.catalog;
        let sbl = &self.sbl;
        let agents = self.agents.len();
        let a = &mut self.agents[id];
        let needs_posterior = matches!(a.policy, PolicyKind::Nats | PolicyKind::Ig) || cfg.trace.snapshots;
        let post = if !needs_posterior {
            None
        } else if sbl.warm_start {
            let p = fit_from(&a.evidence, a.gamma.clone(), sbl)?;
            a.gamma.clone_from(&p.gamma);
            Some(p)
        } else {
            Some(fit(&a.evidence, sbl)?)
        };
        if let (true, Some(p)) = (cfg.trace.snapshots, post.as_ref()) {
            self.events.push(Event::Snapshot {
                time: now,
                agent: id,
                mu: p.mu.clone(),
                var: p.var.clone(),
                gamma: p.gamma.clone(),
            });
        }
        let radius = cfg.radius();
        let alpha = cfg.alpha();
        let (action, score) = match a.policy {
            PolicyKind::Point => {
                let cell = point_next(a.tasks, id, agents, &sc.env);
                (SensingAction::point(cell, &sc.belief_noise), 0.0)
            }
            policy => {
                let set = enumerate_action_set(catalog, a.position, radius);
                let (idx, score) = match policy {
                    PolicyKind::Nats => nats_select(
                        post.as_ref().expect("fitted"),
                        &set,
                        catalog,
                        a.position,
                        alpha,
                        sbl.jitter,
                        &mut a.rng_policy,
                    )?,
                    PolicyKind::Ig => ig_select(post.as_ref().expect("fitted"), &set, catalog, sbl.jitter),
                    PolicyKind::BinTs => bints_select(
                        a.bints.as_ref().expect("bints state"),
                        &set,
                        catalog,
                        a.position,
                        alpha,
                        sbl.jitter,
                        &mut a.rng_policy,
                    ),
                    PolicyKind::Rnd => (rnd_select(&set, &mut a.rng_policy), 0.0),
                    PolicyKind::Point => unreachable!(),
                };
                (catalog.get(idx).clone(), score)
            }
        };
        self.events.push(Event::Issued {
            time: now,
            agent: id,
            task: a.tasks,
            policy: a.policy,
            cell: action.agent_cell,
            heading: action.heading,
            score,
            known: a.known.len(),
        });
        a.travel += sc.env.cell_distance(a.position, action.agent_cell) * sc.env.cell_size;
        a.position = action.agent_cell;
        a.tasks += 1;
        let duration = cfg.timing.duration + cfg.timing.jitter * a.rng_time.random::<f64>();
        a.pending = Some(Pending {
            action,
            issue_time: now,
            completes_at: now + duration,
        });
        Ok(())
    }
}
