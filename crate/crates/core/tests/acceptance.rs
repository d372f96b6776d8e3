//! Acceptance criteria. Runs as a plain binary and prints one PASS/FAIL line
//! per criterion; exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pap_core::inner_solver::verify_assignment;
use pap_core::tangle_sim::{arrival_means, arrivals_for_step, run, step, TangleState, TipSampler};
use pap_core::{
    count_monotone, enumerate_monotone, fixed_linear_scheme, solve_mechanism, solve_weights,
    ArrivalModel, Assignment, DifficultyVector, LinearScheme, MechanismConfig, MechanismSolution,
    Provenance, SearchMode, SimConfig, WeightVector,
};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{
    oracle, random_config, random_monotone, recompute_tips, structural_violations, tip_set,
};

const SWEEP: [u64; 4] = [100, 1_000, 10_000, 100_000];
const OBJECTIVE_TOL: f64 = 1e-9;
const ORDER_TOL: f64 = 1e-9;
const SLACK_TOL: f64 = 1e-9;
const GRID_STEP: f64 = 1e-3;
const ORACLE_TOL: f64 = 2e-3;
const ORACLE_CONFIGS: usize = 200;
const SIM_AGENTS: u64 = 100;
const SIM_HORIZON: u64 = 2000;
const SIM_SEEDS: u64 = 20;
const ORDERING_REQUIRED: usize = 18;
const TV_LIMIT: f64 = 0.01;
const SAMPLING_DRAWS: usize = 100_000;
const POISSON_STEPS: usize = 100_000;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed <= Duration::from_secs(limit_secs), || {
        format!("took {elapsed:.2?}, limit {limit_secs} s")
    })
}

struct SweepRuns {
    pruned: Vec<(u64, MechanismConfig, MechanismSolution)>,
    exhaustive: Vec<MechanismSolution>,
    elapsed: Duration,
}

fn sweep_runs() -> Result<SweepRuns, String> {
    let started = Instant::now();
    let mut pruned = Vec::new();
    let mut exhaustive = Vec::new();
    for agents in SWEEP {
        let config = MechanismConfig::table1(agents).map_err(|e| e.to_string())?;
        let p = solve_mechanism(&config, SearchMode::Pruned).map_err(|e| e.to_string())?;
        let f = solve_mechanism(&config, SearchMode::Exhaustive).map_err(|e| e.to_string())?;
        pruned.push((agents, config, p));
        exhaustive.push(f);
    }
    Ok(SweepRuns {
        pruned,
        exhaustive,
        elapsed: started.elapsed(),
    })
}

fn prune_equivalence(runs: &SweepRuns) -> Outcome {
    for ((agents, _, p), f) in runs.pruned.iter().zip(&runs.exhaustive) {
        ensure(p.difficulty() == f.difficulty(), || {
            format!(
                "N={agents}: pruned d {} vs exhaustive d {}",
                p.difficulty(),
                f.difficulty()
            )
        })?;
        let gap = (p.objective_value - f.objective_value).abs();
        ensure(gap <= OBJECTIVE_TOL, || {
            format!("N={agents}: objective gap {gap:e}")
        })?;
        ensure(
            p.candidates_examined == 364 && f.candidates_examined == 1728,
            || {
                format!(
                    "N={agents}: examined {} / {} candidates",
                    p.candidates_examined, f.candidates_examined
                )
            },
        )?;
    }
    within(runs.elapsed, 5)?;
    let ds: Vec<String> = runs
        .pruned
        .iter()
        .map(|(n, _, s)| format!("N={n}: d={}", s.difficulty()))
        .collect();
    Ok(format!("{} in {:.2?}", ds.join(", "), runs.elapsed))
}

fn monotone_mechanism(runs: &SweepRuns) -> Outcome {
    let all = runs
        .pruned
        .iter()
        .map(|(n, _, s)| (*n, s))
        .chain(runs.exhaustive.iter().zip(SWEEP).map(|(s, n)| (n, s)));
    for (agents, s) in all {
        ensure(s.difficulty().is_nondecreasing(), || {
            format!("N={agents}: d {} not nondecreasing in type", s.difficulty())
        })?;
        ensure(s.weights().is_nondecreasing(ORDER_TOL), || {
            format!(
                "N={agents}: w {:?} not nondecreasing in type",
                s.weights().values()
            )
        })?;
    }
    for pair in runs.pruned.windows(2) {
        let (n0, _, a) = &pair[0];
        let (n1, _, b) = &pair[1];
        for i in 0..a.difficulty().len() {
            ensure(
                a.difficulty().levels()[i] <= b.difficulty().levels()[i],
                || format!("type {}: d decreases from N={n0} to N={n1}", i + 1),
            )?;
            ensure(
                a.weights().values()[i] <= b.weights().values()[i] + ORDER_TOL,
                || format!("type {}: w decreases from N={n0} to N={n1}", i + 1),
            )?;
        }
    }
    let ws: Vec<String> = runs
        .pruned
        .iter()
        .map(|(n, _, s)| {
            let w: Vec<String> = s
                .weights()
                .values()
                .iter()
                .map(|w| format!("{w:.4}"))
                .collect();
            format!("N={n}: w=[{}]", w.join(", "))
        })
        .collect();
    Ok(ws.join(", "))
}

fn inner_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut feasible = 0;
    let mut worst: f64 = 0.0;
    for k in 0..ORACLE_CONFIGS {
        let config = random_config(&mut rng);
        let d = random_monotone(&mut rng, &config);
        let exact = solve_weights(&config, &d);
        let grid = oracle(&config, &d, GRID_STEP);
        ensure(exact.is_feasible() == grid.is_feasible(), || {
            format!("instance {k}: verdicts differ for d = {d}")
        })?;
        if let (Some(a), Some(b)) = (exact.weights(), grid.weights()) {
            feasible += 1;
            for (x, y) in a.values().iter().zip(b.values()) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    ensure(worst <= ORACLE_TOL, || {
        format!("max deviation {worst:e} > {ORACLE_TOL:e}")
    })?;
    let elapsed = started.elapsed();
    within(elapsed, 30)?;
    Ok(format!(
        "{ORACLE_CONFIGS} instances ({feasible} feasible), verdicts agree, max deviation {worst:.2e}, {elapsed:.2?}"
    ))
}

fn truth_telling(runs: &SweepRuns) -> Outcome {
    let mut min_slack = f64::INFINITY;
    for ((agents, config, p), f) in runs.pruned.iter().zip(&runs.exhaustive) {
        for s in [p, f] {
            let report = verify_assignment(config, &s.assignment);
            ensure(report.passed(), || {
                format!("N={agents}: {} failed checks", report.failures())
            })?;
            min_slack = min_slack.min(report.min_slack);
        }
    }
    ensure(min_slack >= -SLACK_TOL, || {
        format!("min slack {min_slack:e}")
    })?;
    Ok(format!("all checks pass, min slack {min_slack:.3e}"))
}

fn convexity(runs: &SweepRuns) -> Outcome {
    let distinct = runs.pruned.iter().rev().find(|(_, _, s)| {
        let set: BTreeSet<u32> = s.difficulty().levels().iter().copied().collect();
        set.len() == s.difficulty().len()
    });
    let Some((agents, _, s)) = distinct else {
        return Ok("vacuous: no sweep point has pairwise distinct difficulties".into());
    };
    let slopes: Vec<f64> = s.assignment.weight_slopes().into_iter().flatten().collect();
    ensure(slopes.windows(2).all(|p| p[0] <= p[1] + ORDER_TOL), || {
        format!("N={agents}: slopes {slopes:?} decrease")
    })?;
    Ok(format!(
        "N={agents}: d={}, slopes {slopes:.4?}",
        s.difficulty()
    ))
}

fn baseline() -> Outcome {
    let config = MechanismConfig::table1(100).map_err(|e| e.to_string())?;
    let a = fixed_linear_scheme(&config, LinearScheme::new(1.0, 0.0).unwrap())
        .map_err(|e| e.to_string())?;
    let levels = a.difficulty().levels();
    ensure(levels[0] == 4 && levels[2] == 7, || {
        format!("best responses {levels:?}, expected 4 for x=1 and 7 for x=10")
    })?;
    Ok(format!("best responses for x=(1,3,10): {levels:?}"))
}

fn table1_sim(seed: u64) -> Result<SimConfig, String> {
    let config = MechanismConfig::table1(SIM_AGENTS).map_err(|e| e.to_string())?;
    let assignment = solve_mechanism(&config, SearchMode::Pruned)
        .map_err(|e| e.to_string())?
        .assignment;
    SimConfig::new(SIM_HORIZON, seed, ArrivalModel::Poisson, assignment, config)
        .map_err(|e| e.to_string())
}

fn simulator_invariants() -> Outcome {
    let started = Instant::now();
    let sim = table1_sim(42)?;
    let mut rng = sim.rng();
    let mut state = TangleState::genesis();
    let mut tip_mismatches = 0;
    for _ in 0..sim.horizon {
        step(&mut state, &sim, &mut rng);
        if tip_set(&state) != recompute_tips(&state) {
            tip_mismatches += 1;
        }
    }
    let violations = structural_violations(&state);
    ensure(tip_mismatches == 0, || {
        format!("{tip_mismatches} steps with a wrong tip set")
    })?;
    ensure(violations.is_empty(), || {
        format!("{} violations, first: {}", violations.len(), violations[0])
    })?;
    let elapsed = started.elapsed();
    within(elapsed, 10)?;
    Ok(format!(
        "{} transactions over {} steps, zero violations, {elapsed:.2?}",
        state.transactions().len(),
        sim.horizon
    ))
}

fn approval_ordering() -> Outcome {
    let mut ordered = 0;
    let mut detail = Vec::new();
    for k in 0..SIM_SEEDS {
        let sim = table1_sim(42 + k)?;
        let m = run(&sim);
        let low = m.per_type.first().and_then(|t| t.mean_approval_time);
        let high = m.per_type.last().and_then(|t| t.mean_approval_time);
        if let (Some(low), Some(high)) = (low, high) {
            if high <= low {
                ordered += 1;
            }
            detail.push(format!("{high:.2}/{low:.2}"));
        } else {
            detail.push("undefined".into());
        }
    }
    ensure(ordered >= ORDERING_REQUIRED, || {
        format!(
            "highest <= lowest in only {ordered}/{SIM_SEEDS} runs (high/low: {})",
            detail.join(" ")
        )
    })?;
    Ok(format!(
        "highest type waits no longer in {ordered}/{SIM_SEEDS} runs (high/low, first 3: {})",
        detail[..3].join(" ")
    ))
}

fn sampling() -> Outcome {
    let tips: Vec<(usize, f64)> = vec![(0, 1.0), (1, 2.5), (2, 0.5), (3, 4.0), (4, 2.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let sampler = TipSampler::new(&tips);
    let direct = WeightedIndex::new(tips.iter().map(|t| t.1)).unwrap();
    let mut ar = [0usize; 5];
    let mut cw = [0usize; 5];
    for _ in 0..SAMPLING_DRAWS {
        ar[sampler.sample(&mut rng)] += 1;
        cw[direct.sample(&mut rng)] += 1;
    }
    let tv = ar
        .iter()
        .zip(&cw)
        .map(|(a, b)| (*a as f64 - *b as f64).abs())
        .sum::<f64>()
        / (2.0 * SAMPLING_DRAWS as f64);
    ensure(tv <= TV_LIMIT, || format!("total variation {tv:.4}"))?;

    let config = MechanismConfig::table1(SIM_AGENTS).map_err(|e| e.to_string())?;
    let assignment = Assignment::new(
        DifficultyVector::for_config(vec![4, 6, 8], &config).map_err(|e| e.to_string())?,
        WeightVector::new(vec![1.0, 2.0, 5.0]).map_err(|e| e.to_string())?,
        Provenance::Mechanism,
    )
    .map_err(|e| e.to_string())?;
    let means = arrival_means(&config, &assignment);
    let mut totals = [0u64; 3];
    for _ in 0..POISSON_STEPS {
        for (t, c) in totals.iter_mut().zip(arrivals_for_step(
            &config,
            &assignment,
            ArrivalModel::Poisson,
            &mut rng,
        )) {
            *t += c;
        }
    }
    let mut z_max: f64 = 0.0;
    for (total, mean) in totals.iter().zip(&means) {
        let sample = *total as f64 / POISSON_STEPS as f64;
        let sigma = (mean / POISSON_STEPS as f64).sqrt();
        z_max = z_max.max((sample - mean).abs() / sigma);
    }
    ensure(z_max <= 4.0, || {
        format!("Poisson sample mean off by {z_max:.2} sigma")
    })?;
    Ok(format!(
        "TV {tv:.4}, max Poisson deviation {z_max:.2} sigma"
    ))
}

fn enumeration() -> Outcome {
    let vectors: Vec<DifficultyVector> = enumerate_monotone(3, 12).collect();
    let distinct: BTreeSet<&DifficultyVector> = vectors.iter().collect();
    ensure(vectors.len() == 364, || {
        format!("{} vectors", vectors.len())
    })?;
    ensure(distinct.len() == vectors.len(), || "duplicates".into())?;
    ensure(
        vectors.iter().all(DifficultyVector::is_nondecreasing),
        || "a vector decreases".into(),
    )?;
    ensure(count_monotone(3, 12) == 364, || {
        "count_monotone(3, 12) != 364".into()
    })?;
    Ok("364 distinct nondecreasing vectors".into())
}

fn main() -> ExitCode {
    let runs = sweep_runs();
    let with_runs = |f: fn(&SweepRuns) -> Outcome| match &runs {
        Ok(r) => f(r),
        Err(e) => Err(format!("solve failed: {e}")),
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("1 prune-equivalence", with_runs(prune_equivalence)),
        ("2 monotone mechanism", with_runs(monotone_mechanism)),
        ("3 inner-solver oracle", inner_oracle()),
        (
            "4 truth-telling and participation",
            with_runs(truth_telling),
        ),
        ("5 convexity of weight in difficulty", with_runs(convexity)),
        ("6 baseline best response", baseline()),
        ("7 simulator invariants", simulator_invariants()),
        ("8 approval-time ordering", approval_ordering()),
        ("9 sampling correctness", sampling()),
        ("10 enumeration count", enumeration()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
