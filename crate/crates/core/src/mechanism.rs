//! Agent types, the PoW cost model, the principal's objective and the
//! linear constraint system that a weight vector must satisfy once the
//! difficulty levels are fixed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for every constraint-satisfaction check.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const FRACTION_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentType {
    /// Computing power `x`.
    pub power: f64,
    /// Fraction of the population with this computing power.
    pub fraction: f64,
}

/// Agent types ordered by strictly increasing computing power.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTypeSet {
    entries: Vec<AgentType>,
}

impl AgentTypeSet {
    pub fn new(entries: Vec<AgentType>) -> Result<Self> {
        const WHAT: &str = "AgentTypeSet";
        if entries.is_empty() {
            return Err(Error::invalid(WHAT, "at least one agent type is required"));
        }
        for (i, t) in entries.iter().enumerate() {
            if !(t.power.is_finite() && t.power > 0.0) {
                return Err(Error::invalid(
                    WHAT,
                    format!(
                        "type {} has non-positive computing power {}",
                        i + 1,
                        t.power
                    ),
                ));
            }
            if !(t.fraction.is_finite() && t.fraction > 0.0 && t.fraction <= 1.0) {
                return Err(Error::invalid(
                    WHAT,
                    format!("type {} has fraction {} outside (0, 1]", i + 1, t.fraction),
                ));
            }
        }
        if let Some(i) = entries.windows(2).position(|w| w[0].power >= w[1].power) {
            return Err(Error::invalid(
                WHAT,
                format!(
                    "computing powers must be strictly increasing (type {} = {}, type {} = {})",
                    i + 1,
                    entries[i].power,
                    i + 2,
                    entries[i + 1].power
                ),
            ));
        }
        let total: f64 = entries.iter().map(|t| t.fraction).sum();
        if (total - 1.0).abs() > FRACTION_SUM_TOL {
            return Err(Error::invalid(
                WHAT,
                format!("fractions sum to {total}, expected 1"),
            ));
        }
        Ok(Self { entries })
    }

    /// Equal population fractions over the given computing powers.
    pub fn uniform(powers: &[f64]) -> Result<Self> {
        let fraction = 1.0 / powers.len().max(1) as f64;
        Self::new(
            powers
                .iter()
                .map(|&power| AgentType { power, fraction })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&AgentType> {
        self.entries.get(index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AgentType> {
        self.entries.iter()
    }

    pub fn power(&self, index: usize) -> f64 {
        self.entries[index].power
    }

    pub fn fraction(&self, index: usize) -> f64 {
        self.entries[index].fraction
    }
}

/// Parameters of the transaction-rate control problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismConfig {
    types: AgentTypeSet,
    max_difficulty: u32,
    alpha: f64,
    beta: f64,
    u0: f64,
    agents: u64,
}

impl MechanismConfig {
    pub fn new(
        types: AgentTypeSet,
        max_difficulty: u32,
        alpha: f64,
        beta: f64,
        u0: f64,
        agents: u64,
    ) -> Result<Self> {
        const WHAT: &str = "MechanismConfig";
        if max_difficulty < 1 {
            return Err(Error::invalid(WHAT, "max_difficulty must be at least 1"));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid(
                WHAT,
                format!("alpha must be >= 0, got {alpha}"),
            ));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(
                WHAT,
                format!("beta must be > 0, got {beta}"),
            ));
        }
        if !u0.is_finite() {
            return Err(Error::invalid(WHAT, format!("u0 must be finite, got {u0}")));
        }
        if agents < 1 {
            return Err(Error::invalid(WHAT, "agent count N must be at least 1"));
        }
        Ok(Self {
            types,
            max_difficulty,
            alpha,
            beta,
            u0,
            agents,
        })
    }

    /// Three equally likely types with computing powers {1, 3, 10},
    /// difficulties 1..=12, alpha = 0.1, beta = 80, u0 = 10.
    pub fn table1(agents: u64) -> Result<Self> {
        Self::new(
            AgentTypeSet::uniform(&[1.0, 3.0, 10.0])?,
            12,
            0.1,
            80.0,
            10.0,
            agents,
        )
    }

    /// Same parameters with a different agent count.
    pub fn with_agents(&self, agents: u64) -> Result<Self> {
        Self::new(
            self.types.clone(),
            self.max_difficulty,
            self.alpha,
            self.beta,
            self.u0,
            agents,
        )
    }

    pub fn types(&self) -> &AgentTypeSet {
        &self.types
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn max_difficulty(&self) -> u32 {
        self.max_difficulty
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn u0(&self) -> f64 {
        self.u0
    }

    pub fn agents(&self) -> u64 {
        self.agents
    }
}

/// Cost of proof of work and the transaction rate it induces.
///
/// Implementations must have decreasing differences in computing power:
/// for `d1 < d2` the extra cost `cost(d2, x) - cost(d1, x)` strictly
/// decreases as `x` grows. The monotone search relies on it; see
/// [`has_decreasing_differences`].
pub trait CostModel: Send + Sync {
    fn cost(&self, level: u32, power: f64) -> f64;

    /// Expected transactions per step produced by one agent.
    fn rate(&self, power: f64, level: u32) -> f64;
}

/// `cost = exp(d) / x`, `rate = x * exp(-d)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExpCost;

impl CostModel for ExpCost {
    fn cost(&self, level: u32, power: f64) -> f64 {
        f64::from(level).exp() / power
    }

    fn rate(&self, power: f64, level: u32) -> f64 {
        power * (-f64::from(level)).exp()
    }
}

/// Checks decreasing differences on every pair of levels in `1..=max_level`
/// and every pair of adjacent computing powers in `types`.
pub fn has_decreasing_differences(
    model: &dyn CostModel,
    types: &AgentTypeSet,
    max_level: u32,
) -> bool {
    let powers: Vec<f64> = types.iter().map(|t| t.power).collect();
    for lo in 1..=max_level {
        for hi in lo + 1..=max_level {
            for pair in powers.windows(2) {
                let small = model.cost(hi, pair[0]) - model.cost(lo, pair[0]);
                let large = model.cost(hi, pair[1]) - model.cost(lo, pair[1]);
                if small.partial_cmp(&large) != Some(std::cmp::Ordering::Greater) {
                    return false;
                }
            }
        }
    }
    true
}

fn check_domain(level: u32, power: f64) -> Result<()> {
    if level < 1 {
        return Err(Error::Domain(format!(
            "difficulty level must be >= 1, got {level}"
        )));
    }
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::Domain(format!(
            "computing power must be > 0, got {power}"
        )));
    }
    Ok(())
}

/// PoW cost `exp(level) / power`.
pub fn cost(level: u32, power: f64) -> Result<f64> {
    check_domain(level, power)?;
    Ok(ExpCost.cost(level, power))
}

/// Agent utility `beta * weight - cost(level, power)`.
pub fn utility(weight: f64, level: u32, power: f64, beta: f64) -> Result<f64> {
    Ok(beta * weight - cost(level, power)?)
}

/// Per-agent transaction rate `power * exp(-level)`.
pub fn tx_rate(power: f64, level: u32) -> Result<f64> {
    check_domain(level, power)?;
    Ok(ExpCost.rate(power, level))
}

/// PoW difficulty level per agent type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DifficultyVector(Vec<u32>);

impl DifficultyVector {
    pub fn new(levels: Vec<u32>, max_difficulty: u32) -> Result<Self> {
        if let Some((i, &d)) = levels
            .iter()
            .enumerate()
            .find(|(_, &d)| d < 1 || d > max_difficulty)
        {
            return Err(Error::invalid(
                "DifficultyVector",
                format!("level {d} of type {} outside 1..={max_difficulty}", i + 1),
            ));
        }
        Ok(Self(levels))
    }

    /// Validates length and range against `config`.
    pub fn for_config(levels: Vec<u32>, config: &MechanismConfig) -> Result<Self> {
        if levels.len() != config.n_types() {
            return Err(Error::invalid(
                "DifficultyVector",
                format!("expected {} levels, got {}", config.n_types(), levels.len()),
            ));
        }
        Self::new(levels, config.max_difficulty())
    }

    pub(crate) fn from_levels(levels: Vec<u32>) -> Self {
        Self(levels)
    }

    pub fn levels(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }
}

impl fmt::Display for DifficultyVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Transaction weight (WoT) per agent type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// A mechanism weight vector: every entry at least 1 and the lowest
    /// type normalized to exactly 1.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        const WHAT: &str = "WeightVector";
        if let Some((i, w)) = values
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 1.0 - FEASIBILITY_TOL))
        {
            return Err(Error::invalid(
                WHAT,
                format!("weight {w} of type {} is below 1", i + 1),
            ));
        }
        match values.first() {
            Some(&w) if w != 1.0 => Err(Error::invalid(
                WHAT,
                format!("lowest type must have weight exactly 1, got {w}"),
            )),
            _ => Ok(Self(values)),
        }
    }

    /// Weights that only need to be positive, as produced by the fixed
    /// linear scheme.
    pub fn unnormalized(values: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = values
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::invalid(
                "WeightVector",
                format!("weight {w} of type {} is not positive", i + 1),
            ));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1] + tol)
    }
}

/// Which constraint of the inner weight problem a row encodes.
/// Indices are zero-based; `Display` prints them one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintTag {
    /// Type `agent` weakly prefers its own bundle to the bundle of `mimic`.
    Incentive {
        agent: usize,
        mimic: usize,
    },
    Participation(usize),
    LowerBound(usize),
    Normalization,
}

impl ConstraintTag {
    /// The type whose weight this row bounds from below, if any.
    pub fn bounded_type(&self) -> Option<usize> {
        match *self {
            ConstraintTag::Incentive { agent, .. } => Some(agent),
            ConstraintTag::Participation(i) | ConstraintTag::LowerBound(i) => Some(i),
            ConstraintTag::Normalization => Some(0),
        }
    }
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConstraintTag::Incentive { agent, mimic } => {
                write!(f, "IC({},{})", agent + 1, mimic + 1)
            }
            ConstraintTag::Participation(i) => write!(f, "PC({})", i + 1),
            ConstraintTag::LowerBound(i) => write!(f, "LB({})", i + 1),
            ConstraintTag::Normalization => write!(f, "NORM"),
        }
    }
}

/// `coefficients · w >= rhs`, or `==` for [`ConstraintTag::Normalization`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
    pub tag: ConstraintTag,
}

impl Constraint {
    pub fn lhs(&self, w: &[f64]) -> f64 {
        self.coefficients.iter().zip(w).map(|(c, w)| c * w).sum()
    }

    /// Nonnegative when satisfied. Equality rows report `-|lhs - rhs|`.
    pub fn slack(&self, w: &[f64]) -> f64 {
        let diff = self.lhs(w) - self.rhs;
        match self.tag {
            ConstraintTag::Normalization => -diff.abs(),
            _ => diff,
        }
    }

    /// Slack divided by the largest coefficient magnitude, i.e. measured in
    /// units of weight.
    pub fn weight_slack(&self, w: &[f64]) -> f64 {
        let scale = self
            .coefficients
            .iter()
            .fold(0.0_f64, |acc, c| acc.max(c.abs()));
        self.slack(w) / scale
    }

    pub fn is_equality(&self) -> bool {
        self.tag == ConstraintTag::Normalization
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub rows: Vec<Constraint>,
}

/// Row counts by kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowCounts {
    pub incentive: usize,
    pub participation: usize,
    pub lower_bound: usize,
    pub normalization: usize,
}

impl ConstraintSystem {
    pub fn counts(&self) -> RowCounts {
        let mut counts = RowCounts::default();
        for row in &self.rows {
            match row.tag {
                ConstraintTag::Incentive { .. } => counts.incentive += 1,
                ConstraintTag::Participation(_) => counts.participation += 1,
                ConstraintTag::LowerBound(_) => counts.lower_bound += 1,
                ConstraintTag::Normalization => counts.normalization += 1,
            }
        }
        counts
    }

    pub fn row(&self, tag: ConstraintTag) -> Option<&Constraint> {
        self.rows.iter().find(|r| r.tag == tag)
    }

    /// Smallest slack over all rows; `+inf` for an empty system.
    pub fn min_slack(&self, w: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.slack(w))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_satisfied(&self, w: &[f64], tol: f64) -> bool {
        self.rows.iter().all(|r| r.slack(w) >= -tol)
    }
}

/// Constraint system of the inner problem under the exponential cost model.
pub fn build_constraints(config: &MechanismConfig, d: &DifficultyVector) -> ConstraintSystem {
    build_constraints_with(config, d, &ExpCost)
}

pub fn build_constraints_with(
    config: &MechanismConfig,
    d: &DifficultyVector,
    model: &dyn CostModel,
) -> ConstraintSystem {
    let n = config.n_types();
    let beta = config.beta();
    let levels = d.levels();
    let unit = |i: usize, value: f64| {
        let mut c = vec![0.0; n];
        c[i] = value;
        c
    };
    let mut rows = Vec::with_capacity(n * (n - 1) + 2 * n + 1);

    for agent in 0..n {
        let x = config.types().power(agent);
        let own = model.cost(levels[agent], x);
        for mimic in (0..n).filter(|&j| j != agent) {
            let mut coefficients = unit(agent, beta);
            coefficients[mimic] = -beta;
            rows.push(Constraint {
                coefficients,
                rhs: own - model.cost(levels[mimic], x),
                tag: ConstraintTag::Incentive { agent, mimic },
            });
        }
    }
    for (i, &level) in levels.iter().enumerate() {
        let x = config.types().power(i);
        rows.push(Constraint {
            coefficients: unit(i, beta),
            rhs: config.u0() + model.cost(level, x),
            tag: ConstraintTag::Participation(i),
        });
    }
    for i in 0..n {
        rows.push(Constraint {
            coefficients: unit(i, 1.0),
            rhs: 1.0,
            tag: ConstraintTag::LowerBound(i),
        });
    }
    rows.push(Constraint {
        coefficients: unit(0, 1.0),
        rhs: 1.0,
        tag: ConstraintTag::Normalization,
    });
    ConstraintSystem { rows }
}

/// The principal's cost of a mechanism. Implementations must be
/// nondecreasing in every weight coordinate, otherwise the minimal feasible
/// weight vector is no longer optimal for a fixed difficulty vector.
pub trait Objective: Send + Sync {
    fn value(
        &self,
        config: &MechanismConfig,
        d: &DifficultyVector,
        w: &[f64],
        model: &dyn CostModel,
    ) -> f64;
}

/// `sum_x p(x) * (N * rate(x, d(x)) + alpha * w(x))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RateFairness;

impl Objective for RateFairness {
    fn value(
        &self,
        config: &MechanismConfig,
        d: &DifficultyVector,
        w: &[f64],
        model: &dyn CostModel,
    ) -> f64 {
        let agents = config.agents() as f64;
        config
            .types()
            .iter()
            .zip(d.levels())
            .zip(w)
            .map(|((t, &level), &weight)| {
                t.fraction * (agents * model.rate(t.power, level) + config.alpha() * weight)
            })
            .sum()
    }
}

pub fn objective(config: &MechanismConfig, d: &DifficultyVector, w: &WeightVector) -> f64 {
    RateFairness.value(config, d, w.values(), &ExpCost)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Mechanism,
    Baseline,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Mechanism => "mechanism",
            Provenance::Baseline => "baseline",
        })
    }
}

/// A (difficulty, weight) bundle for every agent type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    difficulty: DifficultyVector,
    weights: WeightVector,
    provenance: Provenance,
}

impl Assignment {
    pub fn new(
        difficulty: DifficultyVector,
        weights: WeightVector,
        provenance: Provenance,
    ) -> Result<Self> {
        if difficulty.len() != weights.len() {
            return Err(Error::invalid(
                "Assignment",
                format!(
                    "{} difficulty levels but {} weights",
                    difficulty.len(),
                    weights.len()
                ),
            ));
        }
        Ok(Self {
            difficulty,
            weights,
            provenance,
        })
    }

    pub fn difficulty(&self) -> &DifficultyVector {
        &self.difficulty
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.difficulty.len()
    }

    pub fn is_empty(&self) -> bool {
        self.difficulty.is_empty()
    }

    /// `(w(i+1) - w(i)) / (d(i+1) - d(i))` for consecutive types; `None`
    /// where the two difficulty levels coincide.
    pub fn weight_slopes(&self) -> Vec<Option<f64>> {
        let d = self.difficulty.levels();
        let w = self.weights.values();
        (1..d.len())
            .map(|i| {
                (d[i] != d[i - 1])
                    .then(|| (w[i] - w[i - 1]) / (f64::from(d[i]) - f64::from(d[i - 1])))
            })
            .collect()
    }

    /// Weights rescaled so the lowest type has weight 1.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let base = self.weights.values()[0];
        self.weights.values().iter().map(|w| w / base).collect()
    }
}

/// Weight as an affine function of the self-selected difficulty level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearScheme {
    pub slope: f64,
    pub intercept: f64,
}

impl Default for LinearScheme {
    fn default() -> Self {
        Self {
            slope: 1.0,
            intercept: 0.0,
        }
    }
}

impl LinearScheme {
    pub fn new(slope: f64, intercept: f64) -> Result<Self> {
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::invalid(
                "LinearScheme",
                format!("slope must be > 0, got {slope}"),
            ));
        }
        if !(intercept.is_finite() && intercept >= 0.0) {
            return Err(Error::invalid(
                "LinearScheme",
                format!("intercept must be >= 0, got {intercept}"),
            ));
        }
        Ok(Self { slope, intercept })
    }

    pub fn weight(&self, level: u32) -> f64 {
        self.intercept + self.slope * f64::from(level)
    }

    /// Difficulty maximizing the agent's utility; ties go to the easier level.
    pub fn best_response(&self, power: f64, beta: f64, max_difficulty: u32) -> u32 {
        let mut best = (1, f64::NEG_INFINITY);
        for level in 1..=max_difficulty {
            let u = beta * self.weight(level) - ExpCost.cost(level, power);
            if u > best.1 {
                best = (level, u);
            }
        }
        best.0
    }
}

/// Assignment produced when every type best-responds to a fixed linear
/// weight schedule.
pub fn fixed_linear_scheme(config: &MechanismConfig, scheme: LinearScheme) -> Result<Assignment> {
    let scheme = LinearScheme::new(scheme.slope, scheme.intercept)?;
    let levels: Vec<u32> = config
        .types()
        .iter()
        .map(|t| scheme.best_response(t.power, config.beta(), config.max_difficulty()))
        .collect();
    let weights = levels.iter().map(|&d| scheme.weight(d)).collect();
    Assignment::new(
        DifficultyVector::from_levels(levels),
        WeightVector::unnormalized(weights)?,
        Provenance::Baseline,
    )
}
