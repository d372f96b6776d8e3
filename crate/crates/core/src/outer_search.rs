//! Search over difficulty vectors.
//!
//! Optimal difficulty levels are nondecreasing in computing power whenever
//! the cost model has decreasing differences, so the pruned search only
//! visits the C(n+m-1, n) nondecreasing vectors instead of all m^n.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner_solver::{solve_weights_with, verify_assignment_with, InnerResult};
use crate::mechanism::{
    has_decreasing_differences, Assignment, CostModel, DifficultyVector, ExpCost, MechanismConfig,
    Objective, Provenance, RateFairness, WeightVector, FEASIBILITY_TOL,
};

/// Largest candidate count an exhaustive search will accept.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Nondecreasing difficulty vectors only.
    #[default]
    Pruned,
    /// Every vector in {1..m}^n.
    Exhaustive,
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Pruned => "pruned",
            SearchMode::Exhaustive => "exhaustive",
        })
    }
}

/// Lexicographic odometer over {1..m}^n, optionally restricted to
/// nondecreasing vectors.
#[derive(Debug, Clone)]
pub struct DifficultyVectors {
    current: Option<Vec<u32>>,
    max: u32,
    monotone: bool,
}

impl DifficultyVectors {
    fn new(n: usize, m: u32, monotone: bool) -> Self {
        Self {
            current: (n >= 1 && m >= 1).then(|| vec![1; n]),
            max: m,
            monotone,
        }
    }
}

impl Iterator for DifficultyVectors {
    type Item = DifficultyVector;

    fn next(&mut self) -> Option<DifficultyVector> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().expect("checked above");
        match cur.iter().rposition(|&v| v < self.max) {
            Some(k) => {
                cur[k] += 1;
                let reset = if self.monotone { cur[k] } else { 1 };
                for v in &mut cur[k + 1..] {
                    *v = reset;
                }
            }
            None => self.current = None,
        }
        Some(DifficultyVector::from_levels(out))
    }
}

/// All nondecreasing vectors in {1..m}^n, in lexicographic order.
pub fn enumerate_monotone(n: usize, m: u32) -> DifficultyVectors {
    DifficultyVectors::new(n, m, true)
}

/// All vectors in {1..m}^n, in lexicographic order.
pub fn enumerate_all(n: usize, m: u32) -> DifficultyVectors {
    DifficultyVectors::new(n, m, false)
}

/// `C(n + m - 1, n)`, the number of nondecreasing vectors in {1..m}^n.
pub fn count_monotone(n: usize, m: u32) -> u128 {
    binomial(n as u128 + u128::from(m) - 1, n as u128)
}

pub fn count_all(n: usize, m: u32) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..n {
        total = total.saturating_mul(u128::from(m));
    }
    total
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSolution {
    pub assignment: Assignment,
    pub objective_value: f64,
    pub candidates_examined: u64,
    pub candidates_feasible: u64,
    pub mode: SearchMode,
}

impl MechanismSolution {
    pub fn difficulty(&self) -> &DifficultyVector {
        self.assignment.difficulty()
    }

    pub fn weights(&self) -> &WeightVector {
        self.assignment.weights()
    }
}

/// Optimal truthful mechanism under the exponential cost model and the
/// rate-plus-fairness objective.
pub fn solve_mechanism(config: &MechanismConfig, mode: SearchMode) -> Result<MechanismSolution> {
    solve_mechanism_with(config, mode, &ExpCost, &RateFairness)
}

pub fn solve_mechanism_with(
    config: &MechanismConfig,
    mode: SearchMode,
    model: &dyn CostModel,
    goal: &dyn Objective,
) -> Result<MechanismSolution> {
    let n = config.n_types();
    let m = config.max_difficulty();
    let candidates = match mode {
        SearchMode::Pruned => {
            if !has_decreasing_differences(model, config.types(), m) {
                return Err(Error::invalid(
                    "CostModel",
                    "pruned search requires decreasing differences in computing power",
                ));
            }
            enumerate_monotone(n, m)
        }
        SearchMode::Exhaustive => {
            let count = count_all(n, m);
            if count > EXHAUSTIVE_LIMIT {
                return Err(Error::SearchTooLarge {
                    count,
                    limit: EXHAUSTIVE_LIMIT,
                });
            }
            enumerate_all(n, m)
        }
    };

    let mut examined = 0u64;
    let mut feasible = 0u64;
    let mut best: Option<(f64, DifficultyVector, WeightVector)> = None;
    let mut nearest: Option<(f64, DifficultyVector, String)> = None;

    // Candidates arrive in lexicographic order, so a strict improvement test
    // keeps the lexicographically smallest d among equal objectives.
    for d in candidates {
        examined += 1;
        match solve_weights_with(config, &d, model) {
            InnerResult::Feasible(f) => {
                feasible += 1;
                let value = goal.value(config, &d, f.weights.values(), model);
                if best.as_ref().is_none_or(|b| value < b.0) {
                    best = Some((value, d, f.weights));
                }
            }
            InnerResult::Infeasible(info) => {
                if nearest.as_ref().is_none_or(|b| info.violation < b.0) {
                    nearest = Some((info.violation, d, info.reason));
                }
            }
        }
    }

    let Some((objective_value, d, w)) = best else {
        let witness = nearest
            .map(|(_, d, reason)| format!("d = {d}: {reason}"))
            .unwrap_or_else(|| "none".to_string());
        return Err(Error::NoFeasibleMechanism { examined, witness });
    };

    let assignment = Assignment::new(d, w, Provenance::Mechanism)?;
    check_solution(config, &assignment, model)?;
    Ok(MechanismSolution {
        assignment,
        objective_value,
        candidates_examined: examined,
        candidates_feasible: feasible,
        mode,
    })
}

fn check_solution(
    config: &MechanismConfig,
    assignment: &Assignment,
    model: &dyn CostModel,
) -> Result<()> {
    let report = verify_assignment_with(config, assignment, model);
    if !report.passed() || report.min_slack < -FEASIBILITY_TOL {
        return Err(Error::Invariant(format!(
            "optimal assignment fails verification ({} failures, min slack {:e})",
            report.failures(),
            report.min_slack
        )));
    }
    if !assignment.difficulty().is_nondecreasing() {
        return Err(Error::Invariant(format!(
            "optimal difficulty {} is not nondecreasing in computing power",
            assignment.difficulty()
        )));
    }
    if !assignment.weights().is_nondecreasing(FEASIBILITY_TOL) {
        return Err(Error::Invariant(format!(
            "optimal weights {:?} are not nondecreasing in computing power",
            assignment.weights().values()
        )));
    }
    Ok(())
}
