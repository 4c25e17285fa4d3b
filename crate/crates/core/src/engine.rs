//! Maximal deliberations under a scheduling policy, with the monotonicity
//! checks enforced on every step, plus random scenario generation and
//! parallel batches.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::{CoalitionStructure, DeliberativeCoalition, Signature, Violation};
use crate::geometry::{Location, Metric, Point};
use crate::scalar::Scalar;
use crate::space::{Agent, DeliberationSpace, ListedProposal, Proposal, ProposalSet, SpaceError};
use crate::transitions::{self, Transition, TransitionError, TransitionKind, UnknownKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    UniformRandom,
    FirstEnumerated,
}

impl FromStr for Selector {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform_random" | "random" => Ok(Selector::UniformRandom),
            "first_enumerated" | "first" => Ok(Selector::FirstEnumerated),
            other => Err(PolicyError::UnknownSelector(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("a policy needs at least one transition kind")]
    Empty,
    #[error("transition kind `{0}` listed twice")]
    Duplicate(TransitionKind),
    #[error(transparent)]
    UnknownKind(#[from] UnknownKind),
    #[error("unknown selector `{0}` (expected uniform_random or first_enumerated)")]
    UnknownSelector(String),
}

/// Allowed transition kinds in priority tiers, a selector and a seed.
///
/// Only the highest tier with an available transition is visible to the
/// selector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub tiers: Vec<Vec<TransitionKind>>,
    pub selector: Selector,
    pub seed: u64,
}

impl Policy {
    pub fn new(tiers: Vec<Vec<TransitionKind>>, selector: Selector, seed: u64) -> Result<Self, PolicyError> {
        let tiers: Vec<Vec<TransitionKind>> = tiers.into_iter().filter(|t| !t.is_empty()).collect();
        if tiers.is_empty() {
            return Err(PolicyError::Empty);
        }
        let mut seen = Vec::new();
        for &k in tiers.iter().flatten() {
            if seen.contains(&k) {
                return Err(PolicyError::Duplicate(k));
            }
            seen.push(k);
        }
        Ok(Policy { tiers, selector, seed })
    }

    /// Parses `follow,single_agent` (one tier) or `subsume>compromise` (two tiers).
    pub fn parse(raw: &str, selector: Selector, seed: u64) -> Result<Self, PolicyError> {
        let tiers = raw
            .split('>')
            .map(|tier| {
                tier.split(',')
                    .map(str::trim)
                    .filter(|k| !k.is_empty())
                    .map(TransitionKind::from_str)
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Policy::new(tiers, selector, seed)
    }

    pub fn kinds(&self) -> Vec<TransitionKind> {
        self.tiers.iter().flatten().copied().collect()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Policy { seed, ..self.clone() }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tiers: Vec<String> =
            self.tiers.iter().map(|t| t.iter().map(|k| k.name()).collect::<Vec<_>>().join(",")).collect();
        f.write_str(&tiers.join(">"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Successful,
    Unsuccessful,
    StepCapReached,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::Successful => "successful",
            Classification::Unsuccessful => "unsuccessful",
            Classification::StepCapReached => "step_cap_reached",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("initial structure is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidInitial(Vec<Violation>),
    #[error("step cap must be at least 1")]
    BadStepCap,
    #[error("invariant breach at step {step}: {detail}")]
    InvariantBreach { step: usize, detail: String },
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step<T> {
    pub index: usize,
    pub transition: Transition<T>,
    /// Potential and signature of the structure after the step.
    pub potential: u64,
    pub signature: Signature,
    /// Structure the transition was enumerated from; sources index into it.
    pub before: CoalitionStructure<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace<T> {
    pub policy: Policy,
    pub step_cap: usize,
    pub initial: CoalitionStructure<T>,
    pub steps: Vec<Step<T>>,
    pub terminal: CoalitionStructure<T>,
    pub classification: Classification,
    pub max_support: usize,
}

impl<T: Scalar> RunTrace<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

pub fn default_step_cap(n: usize) -> usize {
    (10 * n * n).max(1)
}

/// SplitMix64 seeded with `seed` as its initial state.
pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Uniform index in `0..len` from one 64-bit draw (multiply-shift).
pub fn pick_index(rng: &mut SplitMix64, len: usize) -> usize {
    ((rng.next_u64() as u128 * len as u128) >> 64) as usize
}

/// Uniform real in `[lo, hi)` from the top 53 bits of one draw.
pub fn pick_real(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

/// Transitions of the highest non-empty tier, in tier order.
pub fn available<T: Scalar>(
    policy: &Policy,
    d: &CoalitionStructure<T>,
    s: &DeliberationSpace<T>,
) -> Result<Vec<Transition<T>>, TransitionError> {
    for tier in &policy.tiers {
        let mut found = Vec::new();
        for &kind in tier {
            found.extend(transitions::enumerate(kind, d, s)?);
        }
        if !found.is_empty() {
            return Ok(found);
        }
    }
    Ok(Vec::new())
}

/// Runs a maximal deliberation from `d0`, stopping early at `step_cap` steps.
pub fn run<T: Scalar>(
    s: &DeliberationSpace<T>,
    d0: &CoalitionStructure<T>,
    policy: &Policy,
    step_cap: usize,
) -> Result<RunTrace<T>, EngineError> {
    if step_cap == 0 {
        return Err(EngineError::BadStepCap);
    }
    d0.validate(s).map_err(EngineError::InvalidInitial)?;
    let report = s.max_support()?;
    let n = s.n_agents() as u64;
    let mut rng = rng(policy.seed);
    let mut d = d0.clone();
    let mut steps = Vec::new();
    let classification = loop {
        let options = available(policy, &d, s)?;
        if options.is_empty() {
            break if d.is_successful(s, &report) { Classification::Successful } else { Classification::Unsuccessful };
        }
        if steps.len() == step_cap {
            break Classification::StepCapReached;
        }
        let pick = match policy.selector {
            Selector::UniformRandom => pick_index(&mut rng, options.len()),
            Selector::FirstEnumerated => 0,
        };
        let t = options.into_iter().nth(pick).expect("index in range");
        let next = transitions::apply(&d, &t, s)?;
        let index = steps.len();
        check_step(s, &d, &next, &t, n).map_err(|detail| EngineError::InvariantBreach { step: index, detail })?;
        log::debug!("step {index}: {}", t.describe(s));
        steps.push(Step { index, potential: next.potential(), signature: next.signature(), transition: t, before: d });
        d = next;
    };
    Ok(RunTrace {
        policy: policy.clone(),
        step_cap,
        initial: d0.clone(),
        steps,
        terminal: d,
        classification,
        max_support: report.max_support,
    })
}

fn check_step<T: Scalar>(
    s: &DeliberationSpace<T>,
    before: &CoalitionStructure<T>,
    after: &CoalitionStructure<T>,
    t: &Transition<T>,
    n: u64,
) -> Result<(), String> {
    after.validate(s).map_err(|v| format!("{} produced an invalid structure: {v:?}", t.kind))?;
    let delta = after.potential() as i64 - before.potential() as i64;
    let x = before.coalitions[t.sources[0]].size() as i64;
    let y = before.coalitions[t.sources[1]].size() as i64;
    let k = t.movers[0].len() as i64;
    let expected = match t.kind {
        TransitionKind::SingleAgent => Some(2 * (y - x) + 2),
        TransitionKind::Follow | TransitionKind::Merge => Some(2 * x * y),
        TransitionKind::Subsume => Some(2 * k * (y - x + k)),
        TransitionKind::Compromise => None,
    };
    if let Some(e) = expected {
        if delta != e || delta < 2 {
            return Err(format!("{} changed the potential by {delta}, expected {e} ≥ 2", t.kind));
        }
    }
    if matches!(t.kind, TransitionKind::Compromise | TransitionKind::Subsume) {
        let (a, b) = (before.signature(), after.signature());
        if !a.lex_less(&b) {
            return Err(format!("{} did not raise the signature: {a} -> {b}", t.kind));
        }
    }
    if after.potential() > n * n {
        return Err(format!("potential {} exceeds n² = {}", after.potential(), n * n));
    }
    Ok(())
}

/// Every agent that approves something starts alone behind its nearest
/// approved proposal (ties by list order; on a continuous space, its own
/// location). Everyone else shares one status-quo coalition.
pub fn default_initial_structure<T: Scalar>(s: &DeliberationSpace<T>) -> CoalitionStructure<T> {
    let mut coalitions = Vec::new();
    let mut idle = Vec::new();
    for v in 0..s.n_agents() {
        let choice = if s.is_continuous() {
            s.approves_anything(v).then(|| Proposal::Point(s.agent_point(v).expect("euclidean").clone()))
        } else {
            let here = &s.agents()[v].location;
            s.listed()
                .iter()
                .enumerate()
                .filter(|(k, _)| s.approves(v, &Proposal::Listed(*k)))
                .map(|(k, p)| (k, s.metric().distance(here, &p.location).expect("validated space")))
                .fold(None, |best: Option<(usize, T)>, (k, dist)| match best {
                    Some((_, b)) if b <= dist => best,
                    _ => Some((k, dist)),
                })
                .map(|(k, _)| Proposal::Listed(k))
        };
        match choice {
            Some(p) => coalitions.push(DeliberativeCoalition::new([v], p)),
            None => idle.push(v),
        }
    }
    if !idle.is_empty() {
        coalitions.push(DeliberativeCoalition::new(idle, Proposal::StatusQuo));
    }
    CoalitionStructure::new(coalitions)
}

/// Bounds for random scenarios. Agents and listed proposals are drawn
/// uniformly from a cube of half-width `spread` around a centre drawn
/// from `[-offset, offset]ᵈ`; the status quo is the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub name: String,
    pub dims: Vec<usize>,
    pub n_min: usize,
    pub n_max: usize,
    /// Listed proposal count bounds; ignored when `continuous`.
    #[serde(default)]
    pub x_min: usize,
    #[serde(default)]
    pub x_max: usize,
    #[serde(default)]
    pub continuous: bool,
    pub offset: f64,
    pub spread: f64,
}

impl GeneratorConfig {
    fn finite(name: &str, dims: Vec<usize>, n_max: usize, x_max: usize) -> Self {
        GeneratorConfig {
            name: name.into(),
            dims,
            n_min: 1,
            n_max,
            x_min: 1,
            x_max,
            continuous: false,
            offset: 5.0,
            spread: 10.0,
        }
    }

    /// Built-in presets: `finite`, `line`, `continuous`, `small`.
    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "finite" => Self::finite(name, vec![1, 2, 3], 10, 8),
            "line" => Self::finite(name, vec![1], 10, 8),
            "small" => Self::finite(name, vec![1, 2], 6, 5),
            "continuous" => GeneratorConfig {
                name: name.into(),
                dims: vec![1, 2, 3],
                n_min: 1,
                n_max: 8,
                x_min: 0,
                x_max: 0,
                continuous: true,
                offset: 5.0,
                spread: 10.0,
            },
            _ => return None,
        })
    }

    pub const PRESETS: [&'static str; 4] = ["finite", "line", "continuous", "small"];
}

/// A random space and its default initial structure, reproducible from `seed`.
pub fn generate_scenario(
    config: &GeneratorConfig,
    seed: u64,
) -> Result<(DeliberationSpace<f64>, CoalitionStructure<f64>), SpaceError> {
    let mut rng = rng(seed);
    let between = |lo: usize, hi: usize, rng: &mut SplitMix64| lo + pick_index(rng, hi.saturating_sub(lo) + 1);
    let d = config.dims[pick_index(&mut rng, config.dims.len())];
    let n = between(config.n_min.max(1), config.n_max, &mut rng);
    let x = if config.continuous { 0 } else { between(config.x_min.max(1), config.x_max, &mut rng) };
    let centre: Vec<f64> = (0..d).map(|_| pick_real(&mut rng, -config.offset, config.offset)).collect();
    let draw = |rng: &mut SplitMix64| {
        Location::Coords(Point(centre.iter().map(|c| c + pick_real(rng, -config.spread, config.spread)).collect()))
    };
    let agents = (1..=n).map(|k| Agent { id: format!("v{k}"), location: draw(&mut rng) }).collect();
    let proposals = if config.continuous {
        ProposalSet::Continuous
    } else {
        ProposalSet::Finite((1..=x).map(|k| ListedProposal { id: format!("x{k}"), location: draw(&mut rng) }).collect())
    };
    let space = DeliberationSpace::new(Metric::Euclidean { dim: d }, agents, proposals, Location::Coords(Point::origin(d)))?;
    let initial = default_initial_structure(&space);
    Ok((space, initial))
}

/// One row of a batch summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    /// Listed proposal count, `None` for a continuous space.
    pub x_size: Option<usize>,
    pub policy: String,
    pub steps: usize,
    pub classification: Classification,
    pub m_star: usize,
    pub max_terminal_coalition: usize,
}

/// Runs every (seed, policy) pair in parallel. Each run uses its scenario
/// seed as the policy seed; rows come back in (seed, policy) order.
pub fn batch(
    config: &GeneratorConfig,
    policies: &[Policy],
    seeds: impl IntoIterator<Item = u64>,
) -> Result<Vec<BatchRow>, EngineError> {
    let jobs: Vec<(u64, &Policy)> = seeds.into_iter().flat_map(|seed| policies.iter().map(move |p| (seed, p))).collect();
    jobs.par_iter()
        .map(|&(seed, policy)| {
            let (space, d0) = generate_scenario(config, seed)?;
            let trace = run(&space, &d0, &policy.with_seed(seed), default_step_cap(space.n_agents()))?;
            Ok(BatchRow {
                seed,
                n: space.n_agents(),
                d: space.dimension().unwrap_or(0),
                x_size: (!space.is_continuous()).then(|| space.listed().len()),
                policy: policy.to_string(),
                steps: trace.len(),
                classification: trace.classification,
                m_star: trace.max_support,
                max_terminal_coalition: trace.terminal.largest_coalition(),
            })
        })
        .collect()
}

/// Per-policy aggregate of a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub policy: String,
    pub runs: usize,
    pub successful: usize,
    pub step_cap_reached: usize,
    pub max_steps: usize,
    pub step_histogram: BTreeMap<usize, usize>,
}

impl PolicyStats {
    pub fn success_rate(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.successful as f64 / self.runs as f64
        }
    }
}

pub fn aggregate(rows: &[BatchRow]) -> Vec<PolicyStats> {
    let mut out: Vec<PolicyStats> = Vec::new();
    for row in rows {
        let idx = match out.iter().position(|s| s.policy == row.policy) {
            Some(i) => i,
            None => {
                out.push(PolicyStats {
                    policy: row.policy.clone(),
                    runs: 0,
                    successful: 0,
                    step_cap_reached: 0,
                    max_steps: 0,
                    step_histogram: BTreeMap::new(),
                });
                out.len() - 1
            }
        };
        let stats = &mut out[idx];
        stats.runs += 1;
        stats.successful += usize::from(row.classification == Classification::Successful);
        stats.step_cap_reached += usize::from(row.classification == Classification::StepCapReached);
        stats.max_steps = stats.max_steps.max(row.steps);
        *stats.step_histogram.entry(row.steps).or_default() += 1;
    }
    out
}
