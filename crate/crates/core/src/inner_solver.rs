//! Minimal feasible weights for a fixed difficulty vector.
//!
//! Once the difficulty levels are fixed every cost term is a constant, so
//! the weight problem is linear. Each incentive row `IC(i,j)` is a
//! difference constraint `w(i) >= w(j) + gap(i,j)` and every other row is a
//! constant lower bound, which makes the least solution computable by
//! longest-path relaxation from the static bounds with `w(1)` pinned to 1.
//! Because the principal's objective is nondecreasing in every weight, the
//! least solution is also inner-optimal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{
    build_constraints, build_constraints_with, Assignment, ConstraintSystem, ConstraintTag,
    CostModel, DifficultyVector, ExpCost, MechanismConfig, Objective, RateFairness, WeightVector,
    FEASIBILITY_TOL,
};

/// Smallest increase treated as progress when checking for a positive cycle.
const CYCLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleWeights {
    pub weights: WeightVector,
    /// Per type, the lower-bounding rows with zero slack.
    pub binding: Vec<Vec<ConstraintTag>>,
    /// Relaxation sweeps that changed at least one weight.
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infeasibility {
    pub reason: String,
    /// How far the tightest conflicting pair of bounds is from agreeing,
    /// in weight units.
    pub violation: f64,
    /// Set by the grid oracle: no grid point was feasible, but a feasible
    /// point finer than the grid cannot be ruled out.
    pub inconclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InnerResult {
    Feasible(FeasibleWeights),
    Infeasible(Infeasibility),
}

impl InnerResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, InnerResult::Feasible(_))
    }

    pub fn weights(&self) -> Option<&WeightVector> {
        match self {
            InnerResult::Feasible(f) => Some(&f.weights),
            InnerResult::Infeasible(_) => None,
        }
    }

    pub fn infeasibility(&self) -> Option<&Infeasibility> {
        match self {
            InnerResult::Feasible(_) => None,
            InnerResult::Infeasible(i) => Some(i),
        }
    }

    fn infeasible(reason: String, violation: f64) -> Self {
        InnerResult::Infeasible(Infeasibility {
            reason,
            violation,
            inconclusive: false,
        })
    }
}

/// Componentwise-minimal weights satisfying `build_constraints(config, d)`.
pub fn solve_weights(config: &MechanismConfig, d: &DifficultyVector) -> InnerResult {
    solve_weights_with(config, d, &ExpCost)
}

pub fn solve_weights_with(
    config: &MechanismConfig,
    d: &DifficultyVector,
    model: &dyn CostModel,
) -> InnerResult {
    relax(config, d, model, None)
}

/// Weight iterates of the relaxation: the static bounds first, then the
/// state after every sweep (including the final sweep that detects the
/// fixpoint).
pub fn fixpoint_trace(config: &MechanismConfig, d: &DifficultyVector) -> Vec<Vec<f64>> {
    let mut trace = Vec::new();
    relax(config, d, &ExpCost, Some(&mut trace));
    trace
}

fn relax(
    config: &MechanismConfig,
    d: &DifficultyVector,
    model: &dyn CostModel,
    mut trace: Option<&mut Vec<Vec<f64>>>,
) -> InnerResult {
    let n = config.n_types();
    let beta = config.beta();
    let levels = d.levels();
    let power = |i: usize| config.types().power(i);

    // gap[i][j]: type i's cost saving from mimicking j, in weight units.
    let gap: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let own = model.cost(levels[i], power(i));
            (0..n)
                .map(|j| (own - model.cost(levels[j], power(i))) / beta)
                .collect()
        })
        .collect();
    let static_bound: Vec<f64> = (0..n)
        .map(|i| ((config.u0() + model.cost(levels[i], power(i))) / beta).max(1.0))
        .collect();

    if static_bound[0] > 1.0 + FEASIBILITY_TOL {
        return InnerResult::infeasible(
            format!(
                "PC(1) requires w(1) >= {:.6} but NORM fixes w(1) = 1",
                static_bound[0]
            ),
            static_bound[0] - 1.0,
        );
    }

    let mut w = static_bound.clone();
    w[0] = 1.0;
    if let Some(t) = trace.as_deref_mut() {
        t.push(w.clone());
    }

    let mut sweeps = 0;
    loop {
        let mut changed = false;
        for i in 1..n {
            for j in (0..n).filter(|&j| j != i) {
                let candidate = w[j] + gap[i][j];
                if candidate > w[i] {
                    if candidate - w[i] > CYCLE_TOL * w[i].abs().max(1.0) {
                        changed = true;
                    }
                    w[i] = candidate;
                }
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(w.clone());
        }
        if !changed {
            break;
        }
        sweeps += 1;
        if sweeps > n.saturating_sub(1) {
            return positive_cycle(&gap);
        }
    }

    // Rows bounding w(1) from below cap the other weights from above.
    let worst = (1..n)
        .map(|j| (j, w[j] - (1.0 - gap[0][j])))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((j, excess)) = worst {
        if excess > FEASIBILITY_TOL {
            let system = build_constraints_with(config, d, model);
            let cause = binding_for(&system, &w, j)
                .first()
                .map(|t| t.to_string())
                .unwrap_or_else(|| "a chain of lower bounds".to_string());
            return InnerResult::infeasible(
                format!(
                    "IC(1,{k}) caps w({k}) at {cap:.6} while {cause} requires w({k}) >= {lb:.6}",
                    k = j + 1,
                    cap = 1.0 - gap[0][j],
                    lb = w[j],
                ),
                excess,
            );
        }
    }

    let system = build_constraints_with(config, d, model);
    let binding = (0..n).map(|i| binding_for(&system, &w, i)).collect();
    match WeightVector::new(w) {
        Ok(weights) => InnerResult::Feasible(FeasibleWeights {
            weights,
            binding,
            sweeps,
        }),
        Err(e) => InnerResult::infeasible(e.to_string(), f64::INFINITY),
    }
}

#[allow(clippy::needless_range_loop)]
fn positive_cycle(gap: &[Vec<f64>]) -> InnerResult {
    let n = gap.len();
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 1..n {
        for j in i + 1..n {
            let gain = gap[i][j] + gap[j][i];
            if best.is_none_or(|b| gain > b.2) {
                best = Some((i, j, gain));
            }
        }
    }
    match best {
        Some((i, j, gain)) if gain > 0.0 => InnerResult::infeasible(
            format!(
                "IC({a},{b}) and IC({b},{a}) form a cycle with positive gap {gain:.6}; no finite weights satisfy both",
                a = i + 1,
                b = j + 1
            ),
            gain,
        ),
        _ => InnerResult::infeasible(
            "incentive constraints contain a cycle with positive total gap".to_string(),
            f64::INFINITY,
        ),
    }
}

fn binding_for(system: &ConstraintSystem, w: &[f64], i: usize) -> Vec<ConstraintTag> {
    system
        .rows
        .iter()
        .filter(|r| r.tag.bounded_type() == Some(i) && r.slack(w).abs() <= FEASIBILITY_TOL)
        .map(|r| r.tag)
        .collect()
}

/// Grid-scan oracle for [`solve_weights`].
///
/// Scans `w(i) in {1, 1 + grid_step, ..., w_max}` for every type but the
/// first (which is pinned to 1) and returns the grid point minimizing the
/// principal's objective among those satisfying every row to within
/// `grid_step` weight units. Rows are checked as soon as all the weights
/// they touch are fixed, and because the objective is nondecreasing in
/// each weight a branch is abandoned once it cannot beat the incumbent;
/// neither shortcut changes the result of a full scan. Meant for at most
/// three types.
pub fn brute_force_weights(
    config: &MechanismConfig,
    d: &DifficultyVector,
    grid_step: f64,
    w_max: f64,
) -> Result<InnerResult> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::invalid(
            "grid",
            format!("grid_step must be > 0, got {grid_step}"),
        ));
    }
    if !(w_max.is_finite() && w_max >= 1.0) {
        return Err(Error::invalid(
            "grid",
            format!("w_max must be >= 1, got {w_max}"),
        ));
    }
    let n = config.n_types();
    let system = build_constraints(config, d);
    let steps = ((w_max - 1.0) / grid_step + 1e-9).floor() as u64;

    // Rows grouped by the highest weight index they touch.
    let mut by_depth: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, row) in system.rows.iter().enumerate() {
        let last = row
            .coefficients
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0);
        by_depth[last].push(r);
    }

    let mut scan = GridScan {
        config,
        d,
        system: &system,
        by_depth: &by_depth,
        grid_step,
        steps,
        w: vec![1.0; n],
        best: None,
    };
    if scan.rows_ok(0) {
        scan.descend(1);
    }

    Ok(match scan.best {
        Some((_, w)) => {
            let binding = (0..n)
                .map(|i| {
                    system
                        .rows
                        .iter()
                        .filter(|r| {
                            r.tag.bounded_type() == Some(i) && r.weight_slack(&w) < grid_step
                        })
                        .map(|r| r.tag)
                        .collect()
                })
                .collect();
            InnerResult::Feasible(FeasibleWeights {
                weights: WeightVector::new(w)?,
                binding,
                sweeps: 0,
            })
        }
        None => InnerResult::Infeasible(Infeasibility {
            reason: format!(
                "no grid point in [1, {w_max}] at step {grid_step} satisfies every constraint \
                 (inconclusive below that resolution)"
            ),
            violation: f64::NAN,
            inconclusive: true,
        }),
    })
}

struct GridScan<'a> {
    config: &'a MechanismConfig,
    d: &'a DifficultyVector,
    system: &'a ConstraintSystem,
    by_depth: &'a [Vec<usize>],
    grid_step: f64,
    steps: u64,
    w: Vec<f64>,
    best: Option<(f64, Vec<f64>)>,
}

impl GridScan<'_> {
    fn rows_ok(&self, depth: usize) -> bool {
        self.by_depth[depth]
            .iter()
            .all(|&r| self.system.rows[r].weight_slack(&self.w) >= -self.grid_step)
    }

    fn value(&self) -> f64 {
        RateFairness.value(self.config, self.d, &self.w, &ExpCost)
    }

    fn descend(&mut self, depth: usize) {
        let n = self.w.len();
        if depth == n {
            let value = self.value();
            if self.best.as_ref().is_none_or(|b| value < b.0) {
                self.best = Some((value, self.w.clone()));
            }
            return;
        }
        for k in 0..=self.steps {
            self.w[depth] = 1.0 + k as f64 * self.grid_step;
            for rest in &mut self.w[depth + 1..] {
                *rest = 1.0;
            }
            if let Some((incumbent, _)) = &self.best {
                if self.value() >= *incumbent {
                    break;
                }
            }
            if !self.rows_ok(depth) {
                continue;
            }
            let found_before = self.best.as_ref().map(|b| b.0);
            self.descend(depth + 1);
            if depth == n - 1 && self.best.as_ref().map(|b| b.0) != found_before {
                // Larger values of the last weight only raise the objective.
                break;
            }
        }
        self.w[depth] = 1.0;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTellingCheck {
    pub passed: bool,
    /// Largest utility gain available by reporting another type (<= 0 when
    /// truthful).
    pub max_gain: f64,
    pub best_mimic: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipationCheck {
    pub passed: bool,
    /// Utility above the reservation level.
    pub surplus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub truth_telling: Vec<TruthTellingCheck>,
    pub participation: Vec<ParticipationCheck>,
    /// Smallest slack over every row of the constraint system.
    pub min_slack: f64,
}

impl VerificationReport {
    pub fn failures(&self) -> usize {
        self.truth_telling.iter().filter(|c| !c.passed).count()
            + self.participation.iter().filter(|c| !c.passed).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }
}

/// Checks truth-telling and participation for every type under `a`.
pub fn verify_assignment(config: &MechanismConfig, a: &Assignment) -> VerificationReport {
    verify_assignment_with(config, a, &ExpCost)
}

pub fn verify_assignment_with(
    config: &MechanismConfig,
    a: &Assignment,
    model: &dyn CostModel,
) -> VerificationReport {
    let beta = config.beta();
    let levels = a.difficulty().levels();
    let w = a.weights().values();
    let n = levels.len().min(config.n_types());

    let mut truth_telling = Vec::with_capacity(n);
    let mut participation = Vec::with_capacity(n);
    for i in 0..n {
        let x = config.types().power(i);
        let utility_of = |j: usize| beta * w[j] - model.cost(levels[j], x);
        let own = utility_of(i);
        let alternative = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, utility_of(j) - own))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        truth_telling.push(match alternative {
            Some((j, gain)) => TruthTellingCheck {
                passed: gain <= FEASIBILITY_TOL,
                max_gain: gain,
                best_mimic: Some(j),
            },
            None => TruthTellingCheck {
                passed: true,
                max_gain: f64::NEG_INFINITY,
                best_mimic: None,
            },
        });
        let surplus = own - config.u0();
        participation.push(ParticipationCheck {
            passed: surplus >= -FEASIBILITY_TOL,
            surplus,
        });
    }

    let min_slack = if n == config.n_types() {
        build_constraints_with(config, a.difficulty(), model).min_slack(w)
    } else {
        f64::NEG_INFINITY
    };
    VerificationReport {
        truth_telling,
        participation,
        min_slack,
    }
}
