//! Discrete-time Tangle simulation.
//!
//! At step `t` every new transaction picks two tips of the graph as it stood
//! at `t - 1`, independently and with repetition, with probability
//! proportional to tip weight. A transaction issued at `t` becomes a tip
//! candidate at `t + 1`. Tips that gained an incoming edge during step `t`
//! leave the tip set once all of step `t`'s arrivals have been placed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{Assignment, CostModel, ExpCost, MechanismConfig};

pub const GENESIS_ID: usize = 0;
pub const GENESIS_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Owner {
    Genesis,
    Agent(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: usize,
    pub owner: Owner,
    pub weight: f64,
    pub created_at: u64,
    /// Step of the first incoming approval.
    pub approved_at: Option<u64>,
    /// The two approved tips; `None` only for genesis.
    pub approves: Option<[usize; 2]>,
}

#[derive(Debug, Clone)]
pub struct TangleState {
    transactions: Vec<Transaction>,
    tips: Vec<usize>,
    // position of each transaction in `tips`, if it is a tip
    tip_slot: Vec<Option<usize>>,
    pending: Vec<usize>,
    clock: u64,
}

impl Default for TangleState {
    fn default() -> Self {
        Self::genesis()
    }
}

impl TangleState {
    /// Time 0: the genesis transaction alone, eligible as a tip from t = 1.
    pub fn genesis() -> Self {
        Self {
            transactions: vec![Transaction {
                id: GENESIS_ID,
                owner: Owner::Genesis,
                weight: GENESIS_WEIGHT,
                created_at: 0,
                approved_at: None,
                approves: None,
            }],
            tips: Vec::new(),
            tip_slot: vec![None],
            pending: vec![GENESIS_ID],
            clock: 0,
        }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    /// Transactions eligible for approval at the next step, excluding the
    /// ones issued during the current step.
    pub fn tips(&self) -> &[usize] {
        &self.tips
    }

    /// Transactions issued at the current step.
    pub fn pending(&self) -> &[usize] {
        &self.pending
    }

    fn promote_pending(&mut self) {
        for id in std::mem::take(&mut self.pending) {
            self.tip_slot[id] = Some(self.tips.len());
            self.tips.push(id);
        }
    }

    fn remove_tip(&mut self, id: usize) {
        if let Some(slot) = self.tip_slot[id].take() {
            self.tips.swap_remove(slot);
            if let Some(&moved) = self.tips.get(slot) {
                self.tip_slot[moved] = Some(slot);
            }
        }
    }

    /// Advances one step with the given number of arrivals per agent type;
    /// arrivals of type `i` carry `weights[i]`.
    pub fn step_with_arrivals<R: Rng + ?Sized>(
        &mut self,
        arrivals: &[u64],
        weights: &[f64],
        rng: &mut R,
    ) {
        self.clock += 1;
        let now = self.clock;
        self.promote_pending();

        let total: u64 = arrivals.iter().sum();
        if total == 0 {
            return;
        }
        let snapshot: Vec<(usize, f64)> = self
            .tips
            .iter()
            .map(|&id| (id, self.transactions[id].weight))
            .collect();
        let sampler = TipSampler::new(&snapshot);

        let mut approved = Vec::new();
        for (owner, (&count, &weight)) in arrivals.iter().zip(weights).enumerate() {
            for _ in 0..count {
                let (a, b) = sampler.pair(rng);
                let id = self.transactions.len();
                for target in [a, b] {
                    let tx = &mut self.transactions[target];
                    if tx.approved_at.is_none() {
                        tx.approved_at = Some(now);
                        approved.push(target);
                    }
                }
                self.transactions.push(Transaction {
                    id,
                    owner: Owner::Agent(owner),
                    weight,
                    created_at: now,
                    approved_at: None,
                    approves: Some([a, b]),
                });
                self.tip_slot.push(None);
                self.pending.push(id);
            }
        }
        for id in approved {
            self.remove_tip(id);
        }
    }
}

/// Weight-proportional tip selection by accept-reject: draw a tip uniformly
/// and keep it with probability `weight / max_weight`.
#[derive(Debug, Clone, Copy)]
pub struct TipSampler<'a> {
    tips: &'a [(usize, f64)],
    max_weight: f64,
}

impl<'a> TipSampler<'a> {
    /// Panics if `tips` is empty or holds a non-positive weight.
    pub fn new(tips: &'a [(usize, f64)]) -> Self {
        assert!(!tips.is_empty(), "tip selection needs at least one tip");
        let max_weight = tips.iter().fold(0.0_f64, |m, &(_, w)| {
            assert!(w > 0.0, "tip weights must be positive");
            m.max(w)
        });
        Self { tips, max_weight }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        loop {
            let (id, weight) = self.tips[rng.random_range(0..self.tips.len())];
            if weight >= self.max_weight || rng.random::<f64>() * self.max_weight < weight {
                return id;
            }
        }
    }

    pub fn pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        (self.sample(rng), self.sample(rng))
    }
}

/// Two tips drawn independently, with repetition, proportionally to weight.
pub fn select_tips<R: Rng + ?Sized>(tips: &[(usize, f64)], rng: &mut R) -> (usize, usize) {
    TipSampler::new(tips).pair(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalModel {
    /// Poisson counts with mean `N * p(x) * rate(x, d(x))` per type.
    #[default]
    Poisson,
    /// That mean rounded half-to-even, every step.
    Deterministic,
}

/// Expected arrivals per step for every type under `assignment`.
pub fn arrival_means(config: &MechanismConfig, assignment: &Assignment) -> Vec<f64> {
    let agents = config.agents() as f64;
    config
        .types()
        .iter()
        .zip(assignment.difficulty().levels())
        .map(|(t, &level)| agents * t.fraction * ExpCost.rate(t.power, level))
        .collect()
}

pub fn arrivals_for_step<R: Rng + ?Sized>(
    config: &MechanismConfig,
    assignment: &Assignment,
    model: ArrivalModel,
    rng: &mut R,
) -> Vec<u64> {
    arrival_means(config, assignment)
        .into_iter()
        .map(|mean| draw_arrivals(mean, model, rng))
        .collect()
}

fn draw_arrivals<R: Rng + ?Sized>(mean: f64, model: ArrivalModel, rng: &mut R) -> u64 {
    match model {
        ArrivalModel::Deterministic => mean.round_ties_even() as u64,
        ArrivalModel::Poisson => match Poisson::new(mean) {
            Ok(dist) => dist.sample(rng) as u64,
            // zero rate
            Err(_) => 0,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: u64,
    pub seed: u64,
    pub arrival_model: ArrivalModel,
    pub assignment: Assignment,
    pub config: MechanismConfig,
}

impl SimConfig {
    pub fn new(
        horizon: u64,
        seed: u64,
        arrival_model: ArrivalModel,
        assignment: Assignment,
        config: MechanismConfig,
    ) -> Result<Self> {
        if horizon < 1 {
            return Err(Error::invalid("SimConfig", "horizon must be at least 1"));
        }
        if assignment.len() != config.n_types() {
            return Err(Error::invalid(
                "SimConfig",
                format!(
                    "assignment covers {} types but the configuration has {}",
                    assignment.len(),
                    config.n_types()
                ),
            ));
        }
        Ok(Self {
            horizon,
            seed,
            arrival_model,
            assignment,
            config,
        })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// One step of the simulation with arrivals drawn from `sim`.
pub fn step<R: Rng + ?Sized>(state: &mut TangleState, sim: &SimConfig, rng: &mut R) {
    let arrivals = arrivals_for_step(&sim.config, &sim.assignment, sim.arrival_model, rng);
    state.step_with_arrivals(&arrivals, sim.assignment.weights().values(), rng);
}

/// Runs `sim.horizon` steps from genesis and returns the final state.
pub fn simulate(sim: &SimConfig) -> TangleState {
    let mut rng = sim.rng();
    let mut state = TangleState::genesis();
    for _ in 0..sim.horizon {
        step(&mut state, sim, &mut rng);
    }
    state
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeMetrics {
    pub created: u64,
    pub approved: u64,
    /// Censored: still unapproved at the horizon.
    pub unapproved: u64,
    /// Over approved transactions only; `None` when none were approved.
    pub mean_approval_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApprovalStats {
    pub per_type: Vec<TypeMetrics>,
    pub genesis: TypeMetrics,
}

pub fn approval_stats(state: &TangleState, n_types: usize) -> ApprovalStats {
    let mut acc = vec![(0u64, 0u64, 0u64); n_types + 1];
    for tx in state.transactions() {
        let slot = match tx.owner {
            Owner::Genesis => n_types,
            Owner::Agent(i) => i,
        };
        let entry = &mut acc[slot];
        entry.0 += 1;
        if let Some(at) = tx.approved_at {
            entry.1 += 1;
            entry.2 += at - tx.created_at;
        }
    }
    let mut metrics: Vec<TypeMetrics> = acc
        .into_iter()
        .map(|(created, approved, total_wait)| TypeMetrics {
            created,
            approved,
            unapproved: created - approved,
            mean_approval_time: (approved > 0).then(|| total_wait as f64 / approved as f64),
        })
        .collect();
    let genesis = metrics.pop().expect("genesis slot");
    ApprovalStats {
        per_type: metrics,
        genesis,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub per_type: Vec<TypeMetrics>,
    pub genesis: TypeMetrics,
    /// Transactions without an incoming edge at the horizon, including the
    /// ones issued at the final step.
    pub final_tips: usize,
    pub total_transactions: usize,
}

pub fn metrics(state: &TangleState, n_types: usize) -> SimMetrics {
    let stats = approval_stats(state, n_types);
    SimMetrics {
        per_type: stats.per_type,
        genesis: stats.genesis,
        final_tips: state.tips().len() + state.pending().len(),
        total_transactions: state.transactions().len(),
    }
}

pub fn run(sim: &SimConfig) -> SimMetrics {
    metrics(&simulate(sim), sim.config.n_types())
}
