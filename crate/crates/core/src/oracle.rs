//! Brute-force checks for finite proposal sets: support counting straight
//! from the metric, transition relations rebuilt from the definitions by
//! trying every pair, proposal and subset, and exhaustive state-graph search.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::{CanonicalKey, CoalitionStructure, DeliberativeCoalition};
use crate::geometry::{self, GeometryError, Location};
use crate::scalar::Scalar;
use crate::space::{AgentSet, DeliberationSpace, Proposal, SpaceError, SupportReport};
use crate::transitions::{self, TransitionError, TransitionKind};

pub const DEFAULT_STATE_CAP: usize = 200_000;
pub const MAX_EXPLORE_AGENTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("the oracle needs a finite proposal set")]
    Continuous,
    #[error("{n} agents exceed the exploration limit of {max}")]
    TooManyAgents { n: usize, max: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

fn require_finite<T: Scalar>(s: &DeliberationSpace<T>) -> Result<(), OracleError> {
    if s.is_continuous() {
        Err(OracleError::Continuous)
    } else {
        Ok(())
    }
}

/// Every element of `X`: the status quo followed by the listed proposals.
fn all_proposals<T: Scalar>(s: &DeliberationSpace<T>) -> Vec<Proposal<T>> {
    std::iter::once(Proposal::StatusQuo).chain((0..s.listed().len()).map(Proposal::Listed)).collect()
}

fn location_of<'a, T: Scalar>(s: &'a DeliberationSpace<T>, p: &Proposal<T>) -> &'a Location<T> {
    match p {
        Proposal::StatusQuo => s.status_quo(),
        Proposal::Listed(k) => &s.listed()[*k].location,
        Proposal::Point(_) => unreachable!("finite spaces only"),
    }
}

/// `ρ(v, p) < ρ(v, r)` evaluated from the metric, bypassing the space's cache.
fn naive_approves<T: Scalar>(s: &DeliberationSpace<T>, v: usize, p: &Proposal<T>) -> Result<bool, OracleError> {
    Ok(geometry::approves(&s.agents()[v].location, location_of(s, p), s.status_quo(), s.metric())?)
}

/// Maximum support by a double loop over `X ∖ {r}` and `V`.
pub fn naive_max_support<T: Scalar>(s: &DeliberationSpace<T>) -> Result<SupportReport<T>, OracleError> {
    require_finite(s)?;
    let mut best = 0;
    let mut witnesses = Vec::new();
    for k in 0..s.listed().len() {
        let p = Proposal::Listed(k);
        let mut count = 0;
        for v in 0..s.n_agents() {
            if naive_approves(s, v, &p)? {
                count += 1;
            }
        }
        if count > best {
            best = count;
            witnesses.clear();
        }
        if count == best && count > 0 {
            witnesses.push(p);
        }
    }
    Ok(SupportReport { max_support: best, witnesses })
}

/// Whether `coalitions` is a deliberative coalition structure, checked from
/// the definitions alone.
fn naive_valid<T: Scalar>(s: &DeliberationSpace<T>, coalitions: &[DeliberativeCoalition<T>]) -> Result<bool, OracleError> {
    let mut seen = AgentSet::new();
    for c in coalitions {
        for &v in &c.members {
            if !seen.insert(v) {
                return Ok(false);
            }
            if c.proposal.is_status_quo() {
                for x in 0..s.listed().len() {
                    if naive_approves(s, v, &Proposal::Listed(x))? {
                        return Ok(false);
                    }
                }
            } else if !naive_approves(s, v, &c.proposal)? {
                return Ok(false);
            }
        }
    }
    Ok(seen.len() == s.n_agents())
}

fn subsets(set: &AgentSet) -> Vec<AgentSet> {
    let items: Vec<usize> = set.iter().copied().collect();
    (0u32..1 << items.len())
        .map(|mask| items.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &v)| v).collect())
        .collect()
}

fn replace<T: Scalar>(
    d: &CoalitionStructure<T>,
    removed: &[usize],
    added: Vec<DeliberativeCoalition<T>>,
) -> Vec<DeliberativeCoalition<T>> {
    d.coalitions
        .iter()
        .enumerate()
        .filter(|(k, _)| !removed.contains(k))
        .map(|(_, c)| c.clone())
        .chain(added)
        .collect()
}

/// Canonical successors of `d` under `kind`, built by trying every pair of
/// coalitions, every `p ∈ X` (including `r`) and every choice of moving
/// agents, and keeping the structures that satisfy the definition.
pub fn naive_successors<T: Scalar>(
    kind: TransitionKind,
    d: &CoalitionStructure<T>,
    s: &DeliberationSpace<T>,
) -> Result<BTreeSet<CanonicalKey>, OracleError> {
    require_finite(s)?;
    let mut out = BTreeSet::new();
    let m = d.len();
    let supporters = |c: &AgentSet, p: &Proposal<T>| -> Result<AgentSet, OracleError> {
        let mut set = AgentSet::new();
        for &v in c {
            if naive_approves(s, v, p)? {
                set.insert(v);
            }
        }
        Ok(set)
    };
    let mut keep = |coalitions: Vec<DeliberativeCoalition<T>>| -> Result<(), OracleError> {
        if naive_valid(s, &coalitions)? {
            out.insert(CoalitionStructure::new(coalitions).canonical_key());
        }
        Ok(())
    };
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let (d1, d2) = (&d.coalitions[i], &d.coalitions[j]);
            let (c1, c2) = (&d1.members, &d2.members);
            match kind {
                TransitionKind::SingleAgent => {
                    if c2.len() < c1.len() {
                        continue;
                    }
                    for moved in subsets(c1).into_iter().filter(|t| t.len() == 1) {
                        let left = DeliberativeCoalition { members: c1 - &moved, proposal: d1.proposal.clone() };
                        let grown = DeliberativeCoalition { members: c2 | &moved, proposal: d2.proposal.clone() };
                        keep(replace(d, &[i, j], vec![left, grown]))?;
                    }
                }
                TransitionKind::Follow | TransitionKind::Merge => {
                    if c1.is_empty() || c2.is_empty() {
                        continue;
                    }
                    let targets =
                        if kind == TransitionKind::Follow { vec![d2.proposal.clone()] } else { all_proposals(s) };
                    for p in targets {
                        keep(replace(d, &[i, j], vec![DeliberativeCoalition { members: c1 | c2, proposal: p }]))?;
                    }
                }
                TransitionKind::Compromise | TransitionKind::Subsume => {
                    if kind == TransitionKind::Compromise && j < i {
                        continue;
                    }
                    for p in all_proposals(s) {
                        let (a1, a2) = (supporters(c1, &p)?, supporters(c2, &p)?);
                        for s1 in subsets(c1) {
                            for s2 in subsets(c2) {
                                if s1 != a1 || s2 != a2 {
                                    continue;
                                }
                                let joined = &s1 | &s2;
                                let ok = match kind {
                                    TransitionKind::Compromise => joined.len() > c1.len().max(c2.len()),
                                    _ => s2 == *c2 && !s1.is_empty() && joined.len() > c1.len(),
                                };
                                if !ok {
                                    continue;
                                }
                                let added = vec![
                                    DeliberativeCoalition { members: c1 - &s1, proposal: d1.proposal.clone() },
                                    DeliberativeCoalition { members: c2 - &s2, proposal: d2.proposal.clone() },
                                    DeliberativeCoalition { members: joined, proposal: p.clone() },
                                ];
                                keep(replace(d, &[i, j], added))?;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Canonical successors of `d` under `kind` via the transitions module.
pub fn module_successors<T: Scalar>(
    kind: TransitionKind,
    d: &CoalitionStructure<T>,
    s: &DeliberationSpace<T>,
) -> Result<BTreeSet<CanonicalKey>, OracleError> {
    transitions::enumerate(kind, d, s)?
        .iter()
        .map(|t| Ok(transitions::apply(d, t, s)?.canonical_key()))
        .collect()
}

/// Successor sets present on only one side of the comparison.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct EnumerationDiff {
    pub only_naive: BTreeSet<CanonicalKey>,
    pub only_module: BTreeSet<CanonicalKey>,
}

impl EnumerationDiff {
    pub fn is_empty(&self) -> bool {
        self.only_naive.is_empty() && self.only_module.is_empty()
    }
}

pub fn compare_enumeration<T: Scalar>(
    kind: TransitionKind,
    d: &CoalitionStructure<T>,
    s: &DeliberationSpace<T>,
) -> Result<EnumerationDiff, OracleError> {
    let naive = naive_successors(kind, d, s)?;
    let module = module_successors(kind, d, s)?;
    Ok(EnumerationDiff {
        only_naive: naive.difference(&module).cloned().collect(),
        only_module: module.difference(&naive).cloned().collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreCaps {
    pub max_states: usize,
    pub max_agents: usize,
}

impl Default for ExploreCaps {
    fn default() -> Self {
        ExploreCaps { max_states: DEFAULT_STATE_CAP, max_agents: MAX_EXPLORE_AGENTS }
    }
}

/// Step on a witness path: the kind applied and the structure reached.
#[derive(Clone, Debug, PartialEq)]
pub struct PathStep<T> {
    pub kind: TransitionKind,
    pub state: CoalitionStructure<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExploreReport<T> {
    pub states: usize,
    pub edges: usize,
    /// The state cap stopped the search; counts cover the explored part.
    pub truncated: bool,
    pub max_support: usize,
    pub terminals: Vec<CoalitionStructure<T>>,
    pub successful_terminals: usize,
    pub unsuccessful_terminals: usize,
    /// Shortest path from the initial state to an unsuccessful terminal.
    pub unsuccessful_path: Option<Vec<PathStep<T>>>,
    pub acyclic: bool,
    /// Edges along which the kind's order measure fails to rise: the
    /// potential for single agent, follow, merge and subsume, the signature
    /// for compromise and subsume.
    pub order_violations: usize,
    /// States whose successor sets differ from the brute-force relation.
    pub equivalence_mismatches: Option<usize>,
}

impl<T> ExploreReport<T> {
    pub fn all_terminals_successful(&self) -> bool {
        self.unsuccessful_terminals == 0
    }
}

/// Successors of one state and its count of brute-force mismatches.
type Expansion<T> = (Vec<(TransitionKind, CoalitionStructure<T>)>, usize);

/// Breadth-first search over canonical structures reachable from `d0`.
///
/// Each frontier level is expanded in parallel; the visited set is updated
/// in frontier order, so ids and reports are deterministic.
pub fn explore<T: Scalar>(
    s: &DeliberationSpace<T>,
    d0: &CoalitionStructure<T>,
    kinds: &[TransitionKind],
    caps: ExploreCaps,
    check_equivalence: bool,
) -> Result<ExploreReport<T>, OracleError> {
    require_finite(s)?;
    if s.n_agents() > caps.max_agents {
        return Err(OracleError::TooManyAgents { n: s.n_agents(), max: caps.max_agents });
    }
    let report = s.max_support()?;
    let start = d0.canonical();
    let mut ids: HashMap<CanonicalKey, usize> = HashMap::from([(start.canonical_key(), 0)]);
    let mut states = vec![start];
    let mut parent: Vec<Option<(usize, TransitionKind)>> = vec![None];
    let mut edges: BTreeSet<(usize, usize, TransitionKind)> = BTreeSet::new();
    let mut expanded = vec![false];
    let mut truncated = false;
    let mut mismatches = 0usize;
    let mut frontier: VecDeque<usize> = VecDeque::from([0]);

    while !frontier.is_empty() {
        let level: Vec<usize> = frontier.drain(..).collect();
        let results: Vec<Result<Expansion<T>, OracleError>> = level
            .par_iter()
            .map(|&id| {
                let d = &states[id];
                let mut next = Vec::new();
                let mut bad = 0;
                for &kind in kinds {
                    for t in transitions::enumerate(kind, d, s)? {
                        next.push((kind, transitions::apply(d, &t, s)?.canonical()));
                    }
                    if check_equivalence && !compare_enumeration(kind, d, s)?.is_empty() {
                        bad += 1;
                    }
                }
                Ok((next, bad))
            })
            .collect();
        for (&id, res) in level.iter().zip(results) {
            let (next, bad) = res?;
            expanded[id] = true;
            mismatches += bad;
            for (kind, state) in next {
                let key = state.canonical_key();
                let to = match ids.get(&key) {
                    Some(&to) => to,
                    None if states.len() >= caps.max_states => {
                        truncated = true;
                        continue;
                    }
                    None => {
                        let to = states.len();
                        ids.insert(key, to);
                        states.push(state);
                        parent.push(Some((id, kind)));
                        expanded.push(false);
                        frontier.push_back(to);
                        to
                    }
                };
                edges.insert((id, to, kind));
            }
        }
    }

    let mut out_degree = vec![0usize; states.len()];
    for &(from, _, _) in &edges {
        out_degree[from] += 1;
    }
    let mut terminals = Vec::new();
    let (mut successful, mut unsuccessful) = (0, 0);
    let mut unsuccessful_path = None;
    // Ids are assigned in BFS order, so the first unsuccessful terminal is a nearest one.
    for id in 0..states.len() {
        if !expanded[id] || out_degree[id] > 0 {
            continue;
        }
        if states[id].is_successful(s, &report) {
            successful += 1;
        } else {
            unsuccessful += 1;
            if unsuccessful_path.is_none() {
                unsuccessful_path = Some(path_to(id, &parent, &states));
            }
        }
        terminals.push(states[id].clone());
    }

    let order_violations = edges
        .iter()
        .filter(|&&(from, to, kind)| {
            let (a, b) = (&states[from], &states[to]);
            let potential_up = b.potential() > a.potential();
            let signature_up = a.signature().lex_less(&b.signature());
            match kind {
                TransitionKind::SingleAgent | TransitionKind::Follow | TransitionKind::Merge => !potential_up,
                TransitionKind::Compromise => !signature_up,
                TransitionKind::Subsume => !(potential_up && signature_up),
            }
        })
        .count();

    Ok(ExploreReport {
        states: states.len(),
        edges: edges.len(),
        truncated,
        max_support: report.max_support,
        terminals,
        successful_terminals: successful,
        unsuccessful_terminals: unsuccessful,
        unsuccessful_path,
        acyclic: is_acyclic(states.len(), &edges),
        order_violations,
        equivalence_mismatches: check_equivalence.then_some(mismatches),
    })
}

fn path_to<T: Scalar>(
    mut id: usize,
    parent: &[Option<(usize, TransitionKind)>],
    states: &[CoalitionStructure<T>],
) -> Vec<PathStep<T>> {
    let mut path = Vec::new();
    while let Some((prev, kind)) = parent[id] {
        path.push(PathStep { kind, state: states[id].clone() });
        id = prev;
    }
    path.reverse();
    path
}

/// Kahn's algorithm.
fn is_acyclic(n: usize, edges: &BTreeSet<(usize, usize, TransitionKind)>) -> bool {
    let arcs: BTreeSet<(usize, usize)> = edges.iter().map(|&(a, b, _)| (a, b)).collect();
    let mut indegree = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in &arcs {
        indegree[b] += 1;
        succ[a].push(b);
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop() {
        seen += 1;
        for &w in &succ[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                queue.push(w);
            }
        }
    }
    seen == n
}
