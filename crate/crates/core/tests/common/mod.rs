#![allow(dead_code)]

use std::collections::BTreeSet;

use pap_core::inner_solver::{brute_force_weights, InnerResult};
use pap_core::tangle_sim::{Owner, TangleState};
use pap_core::{enumerate_monotone, AgentType, AgentTypeSet, DifficultyVector, MechanismConfig};
use rand::Rng;

/// Transactions with no incoming edge among those issued before the
/// current step, recomputed from the edge list alone.
pub fn recompute_tips(state: &TangleState) -> BTreeSet<usize> {
    let txs = state.transactions();
    let mut approved = vec![false; txs.len()];
    for tx in txs {
        if let Some([a, b]) = tx.approves {
            approved[a] = true;
            approved[b] = true;
        }
    }
    txs.iter()
        .filter(|tx| tx.created_at < state.clock() && !approved[tx.id])
        .map(|tx| tx.id)
        .collect()
}

/// Structural violations of a final state: edges that do not point back in
/// time, wrong out-degree, approvals at creation time, and inconsistent
/// first-approval timestamps.
pub fn structural_violations(state: &TangleState) -> Vec<String> {
    let txs = state.transactions();
    let mut problems = Vec::new();
    let mut first_approval: Vec<Option<u64>> = vec![None; txs.len()];
    for tx in txs {
        match (tx.owner, tx.approves) {
            (Owner::Genesis, None) => {
                if tx.id != 0 || tx.created_at != 0 {
                    problems.push(format!("genesis must be id 0 at t=0, got {tx:?}"));
                }
            }
            (Owner::Genesis, Some(_)) => problems.push(format!("genesis has out-edges: {tx:?}")),
            (Owner::Agent(_), None) => problems.push(format!("missing approvals: {tx:?}")),
            (Owner::Agent(_), Some(targets)) => {
                for t in targets {
                    let target = &txs[t];
                    if target.created_at >= tx.created_at {
                        problems.push(format!(
                            "edge {} -> {} does not point back in time",
                            tx.id, t
                        ));
                    }
                    let first = first_approval[t].get_or_insert(tx.created_at);
                    *first = (*first).min(tx.created_at);
                }
            }
        }
    }
    for tx in txs {
        if let Some(at) = tx.approved_at {
            if at < tx.created_at + 1 {
                problems.push(format!("tx {} approved at its own step", tx.id));
            }
        }
        if tx.approved_at != first_approval[tx.id] {
            problems.push(format!(
                "tx {} approved_at {:?} but first approver arrived at {:?}",
                tx.id, tx.approved_at, first_approval[tx.id]
            ));
        }
    }
    problems
}

pub fn tip_set(state: &TangleState) -> BTreeSet<usize> {
    state.tips().iter().copied().collect()
}

pub fn random_config<R: Rng>(rng: &mut R) -> MechanismConfig {
    let n = rng.random_range(2..=3);
    let m = rng.random_range(2..=5);
    let mut powers: Vec<f64> = Vec::new();
    let mut x = rng.random_range(0.5..3.0);
    for _ in 0..n {
        powers.push(x);
        x += rng.random_range(0.5..6.0);
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut fractions: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let head: f64 = fractions[..n - 1].iter().sum();
    fractions[n - 1] = 1.0 - head;
    let types = AgentTypeSet::new(
        powers
            .into_iter()
            .zip(fractions)
            .map(|(power, fraction)| AgentType { power, fraction })
            .collect(),
    )
    .unwrap();
    MechanismConfig::new(
        types,
        m,
        rng.random_range(0.01..1.0),
        rng.random_range(10.0..100.0),
        rng.random_range(0.0..20.0),
        rng.random_range(1..1000),
    )
    .unwrap()
}

pub fn random_monotone<R: Rng>(rng: &mut R, config: &MechanismConfig) -> DifficultyVector {
    let all: Vec<DifficultyVector> =
        enumerate_monotone(config.n_types(), config.max_difficulty()).collect();
    all[rng.random_range(0..all.len())].clone()
}

/// An upper bound on every coordinate of the minimal feasible weight vector,
/// computed from the raw cost terms.
pub fn weight_ceiling(config: &MechanismConfig, d: &DifficultyVector) -> f64 {
    let n = config.n_types();
    let mut worst_cost: f64 = 0.0;
    for i in 0..n {
        for &level in d.levels() {
            worst_cost = worst_cost.max(f64::from(level).exp() / config.types().power(i));
        }
    }
    1.0 + (config.u0().max(0.0) + n as f64 * worst_cost) / config.beta()
}

pub fn oracle(config: &MechanismConfig, d: &DifficultyVector, grid_step: f64) -> InnerResult {
    brute_force_weights(config, d, grid_step, weight_ceiling(config, d) + grid_step).unwrap()
}
