//! The five transition operators: enumeration against a structure, and
//! application with revalidation.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::{CoalitionStructure, DeliberativeCoalition};
use crate::scalar::Scalar;
use crate::space::{AgentIdx, AgentSet, DeliberationSpace, Proposal, SpaceError};

/// Largest combined membership the continuous subset search accepts.
pub const SUBSET_SEARCH_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    SingleAgent,
    Follow,
    Merge,
    Compromise,
    Subsume,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 5] = [
        TransitionKind::SingleAgent,
        TransitionKind::Follow,
        TransitionKind::Merge,
        TransitionKind::Compromise,
        TransitionKind::Subsume,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransitionKind::SingleAgent => "single_agent",
            TransitionKind::Follow => "follow",
            TransitionKind::Merge => "merge",
            TransitionKind::Compromise => "compromise",
            TransitionKind::Subsume => "subsume",
        }
    }
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown transition kind `{0}` (expected single_agent, follow, merge, compromise or subsume)")]
pub struct UnknownKind(pub String);

impl FromStr for TransitionKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TransitionKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransitionError {
    #[error("stale {kind} transition: {reason}")]
    Stale { kind: TransitionKind, reason: String },
    #[error("subset search over {size} agents exceeds the cap of {cap}")]
    SubsetCapExceeded { size: usize, cap: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// One operator application.
///
/// `movers[k]` is the set of agents leaving `sources[k]`. Per kind:
/// single agent `[{v}, ∅]`, follow `[C₁, ∅]`, merge `[C₁, C₂]`,
/// compromise `[C₁ᵖ, C₂ᵖ]`, subsume `[C₁ᵖ, C₂]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition<T> {
    pub kind: TransitionKind,
    pub sources: [usize; 2],
    pub target: Proposal<T>,
    pub movers: [AgentSet; 2],
}

impl<T: Scalar> Transition<T> {
    /// Agents supporting `target` once the transition is applied.
    pub fn new_coalition(&self, d: &CoalitionStructure<T>) -> AgentSet {
        match self.kind {
            TransitionKind::SingleAgent | TransitionKind::Follow => {
                let mut c = d.coalitions[self.sources[1]].members.clone();
                c.extend(self.movers[0].iter().copied());
                c
            }
            _ => self.movers[0].union(&self.movers[1]).copied().collect(),
        }
    }

    pub fn describe(&self, space: &DeliberationSpace<T>) -> String {
        let ids = |set: &AgentSet| set.iter().map(|&v| space.agent_id(v)).join(",");
        format!(
            "{} d{}->d{} at {} movers=[{}|{}]",
            self.kind,
            self.sources[0],
            self.sources[1],
            space.proposal_label(&self.target),
            ids(&self.movers[0]),
            ids(&self.movers[1]),
        )
    }
}

fn is_active<T>(c: &DeliberativeCoalition<T>) -> bool {
    c.size() > 0 && !c.supports_status_quo()
}

fn active_indices<T>(d: &CoalitionStructure<T>) -> Vec<usize> {
    d.coalitions.iter().enumerate().filter(|(_, c)| is_active(c)).map(|(i, _)| i).collect()
}

pub fn enumerate<T: Scalar>(
    kind: TransitionKind,
    d: &CoalitionStructure<T>,
    s: &DeliberationSpace<T>,
) -> Result<Vec<Transition<T>>, TransitionError> {
    match kind {
        TransitionKind::SingleAgent => Ok(enumerate_single_agent(d, s)),
        TransitionKind::Follow => Ok(enumerate_follow(d, s)),
        TransitionKind::Merge => enumerate_merge(d, s),
        TransitionKind::Compromise => enumerate_compromise(d, s),
        TransitionKind::Subsume => enumerate_subsume(d, s),
    }
}

pub fn enumerate_single_agent<T: Scalar>(d: &CoalitionStructure<T>, s: &DeliberationSpace<T>) -> Vec<Transition<T>> {
    let active = active_indices(d);
    let mut out = Vec::new();
    for &i in &active {
        let from = &d.coalitions[i];
        for &v in &from.members {
            for &j in &active {
                let to = &d.coalitions[j];
                if i != j && to.size() >= from.size() && s.approves(v, &to.proposal) {
                    out.push(Transition {
                        kind: TransitionKind::SingleAgent,
                        sources: [i, j],
                        target: to.proposal.clone(),
                        movers: [AgentSet::from([v]), AgentSet::new()],
                    });
                }
            }
        }
    }
    out
}

pub fn enumerate_follow<T: Scalar>(d: &CoalitionStructure<T>, s: &DeliberationSpace<T>) -> Vec<Transition<T>> {
    let active = active_indices(d);
    let mut out = Vec::new();
    for &i in &active {
        for &j in &active {
            let (c1, c2) = (&d.coalitions[i], &d.coalitions[j]);
            if i != j && s.all_approve(&c1.members, &c2.proposal) {
                out.push(Transition {
                    kind: TransitionKind::Follow,
                    sources: [i, j],
                    target: c2.proposal.clone(),
                    movers: [c1.members.clone(), AgentSet::new()],
                });
            }
        }
    }
    out
}

pub fn enumerate_merge<T: Scalar>(
    d: &CoalitionStructure<T>,
    s: &DeliberationSpace<T>,
) -> Result<Vec<Transition<T>>, TransitionError> {
    let active = active_indices(d);
    let mut out = Vec::new();
    for (&i, &j) in active.iter().tuple_combinations() {
        let (c1, c2) = (&d.coalitions[i].members, &d.coalitions[j].members);
        let union: AgentSet = c1.union(c2).copied().collect();
        let mut push = |target: Proposal<T>| {
            out.push(Transition {
                kind: TransitionKind::Merge,
                sources: [i, j],
                target,
                movers: [c1.clone(), c2.clone()],
            })
        };
        if s.is_continuous() {
            let group: Vec<AgentIdx> = union.iter().copied().collect();
            if let Some(p) = synthesize(s, &group)? {
                if s.all_approve(&union, &p) {
                    push(p);
                }
            }
        } else {
            for k in 0..s.listed().len() {
                let p = Proposal::Listed(k);
                if s.all_approve(&union, &p) {
                    push(p);
                }
            }
        }
    }
    Ok(out)
}

pub fn enumerate_compromise<T: Scalar>(
    d: &CoalitionStructure<T>,
    s: &DeliberationSpace<T>,
) -> Result<Vec<Transition<T>>, TransitionError> {
    let active = active_indices(d);
    let mut out = Vec::new();
    for (&i, &j) in active.iter().tuple_combinations() {
        let (c1, c2) = (&d.coalitions[i].members, &d.coalitions[j].members);
        let floor = c1.len().max(c2.len());
        let mut push = |target: Proposal<T>, joined: &AgentSet| {
            out.push(Transition {
                kind: TransitionKind::Compromise,
                sources: [i, j],
                target,
                movers: [c1.intersection(joined).copied().collect(), c2.intersection(joined).copied().collect()],
            })
        };
        if s.is_continuous() {
            let union: Vec<AgentIdx> = c1.union(c2).copied().collect();
            for (p, closure) in maximal_groups(s, &union, &[], floor + 1)? {
                push(p, &closure);
            }
        } else {
            for k in 0..s.listed().len() {
                let p = Proposal::Listed(k);
                let joined: AgentSet = s.supporters(c1, &p).union(&s.supporters(c2, &p)).copied().collect();
                if joined.len() > floor {
                    push(p, &joined);
                }
            }
        }
    }
    Ok(out)
}

pub fn enumerate_subsume<T: Scalar>(
    d: &CoalitionStructure<T>,
    s: &DeliberationSpace<T>,
) -> Result<Vec<Transition<T>>, TransitionError> {
    let active = active_indices(d);
    let mut out = Vec::new();
    for &i in &active {
        for &j in &active {
            if i == j {
                continue;
            }
            let (c1, c2) = (&d.coalitions[i].members, &d.coalitions[j].members);
            let mut push = |target: Proposal<T>, from_c1: AgentSet| {
                out.push(Transition {
                    kind: TransitionKind::Subsume,
                    sources: [i, j],
                    target,
                    movers: [from_c1, c2.clone()],
                })
            };
            if s.is_continuous() {
                // Any T ⊆ C₁ with |T| ≥ |C₁| − |C₂| + 1 keeps the new coalition larger than C₁.
                let min_taken = (c1.len() + 1).saturating_sub(c2.len()).max(1);
                let fixed: Vec<AgentIdx> = c2.iter().copied().collect();
                let free: Vec<AgentIdx> = c1.iter().copied().collect();
                for (p, closure) in maximal_groups(s, &free, &fixed, min_taken)? {
                    push(p, c1.intersection(&closure).copied().collect());
                }
            } else {
                for k in 0..s.listed().len() {
                    let p = Proposal::Listed(k);
                    if !s.all_approve(c2, &p) {
                        continue;
                    }
                    let taken = s.supporters(c1, &p);
                    if !taken.is_empty() && taken.len() + c2.len() > c1.len() {
                        push(p, taken);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Searches subsets `F ∪ S` with `S ⊆ free`, `|S| ≥ min_free`, for groups
/// that jointly approve a synthesized proposal. Larger sets come first,
/// lexicographic within a size; subsets of a group already found are
/// skipped. Returns each witness with its full approver set in
/// `F ∪ free`, deduplicated by that set.
fn maximal_groups<T: Scalar>(
    s: &DeliberationSpace<T>,
    free: &[AgentIdx],
    fixed: &[AgentIdx],
    min_free: usize,
) -> Result<Vec<(Proposal<T>, AgentSet)>, TransitionError> {
    let size = free.len() + fixed.len();
    if size > SUBSET_SEARCH_CAP {
        return Err(TransitionError::SubsetCapExceeded { size, cap: SUBSET_SEARCH_CAP });
    }
    if fixed.iter().tuple_combinations().any(|(&u, &w)| s.balls_disjoint(u, w)) {
        return Ok(Vec::new());
    }
    let pool: AgentSet = free.iter().chain(fixed).copied().collect();
    let mut found: Vec<AgentSet> = Vec::new();
    let mut out: Vec<(Proposal<T>, AgentSet)> = Vec::new();
    for k in (min_free.max(1)..=free.len()).rev() {
        for chosen in free.iter().copied().combinations(k) {
            let group: AgentSet = chosen.iter().chain(fixed).copied().collect();
            if found.iter().any(|f| group.is_subset(f)) {
                continue;
            }
            let clash = chosen
                .iter()
                .enumerate()
                .any(|(a, &u)| chosen[a + 1..].iter().chain(fixed).any(|&w| s.balls_disjoint(u, w)));
            if clash {
                continue;
            }
            let members: Vec<AgentIdx> = group.iter().copied().collect();
            let Some(p) = synthesize(s, &members)? else { continue };
            let closure = s.supporters(&pool, &p);
            if !group.is_subset(&closure) {
                continue;
            }
            if !out.iter().any(|(_, c)| *c == closure) {
                out.push((p, closure.clone()));
            }
            found.push(closure);
        }
    }
    Ok(out)
}

/// A proposal every member of `group` approves with margin, if one exists.
fn synthesize<T: Scalar>(s: &DeliberationSpace<T>, group: &[AgentIdx]) -> Result<Option<Proposal<T>>, TransitionError> {
    let res = s.common_proposal(group)?;
    Ok(res.is_feasible().then_some(Proposal::Point(res.witness)))
}

/// Applies `t` to `d` after rechecking the operator's definition.
///
/// Untouched coalitions keep their positions. Follow updates the target
/// coalition in place, merge replaces the lower source index, and
/// compromise and subsume append the new coalition after the leftovers.
/// Empty coalitions are dropped.
pub fn apply<T: Scalar>(
    d: &CoalitionStructure<T>,
    t: &Transition<T>,
    s: &DeliberationSpace<T>,
) -> Result<CoalitionStructure<T>, TransitionError> {
    check(d, t, s).map_err(|reason| TransitionError::Stale { kind: t.kind, reason })?;
    let [i, j] = t.sources;
    let mut coalitions = d.coalitions.clone();
    match t.kind {
        TransitionKind::SingleAgent | TransitionKind::Follow => {
            for v in &t.movers[0] {
                coalitions[i].members.remove(v);
            }
            coalitions[j].members.extend(t.movers[0].iter().copied());
        }
        TransitionKind::Merge => {
            let merged = DeliberativeCoalition {
                members: coalitions[i].members.union(&coalitions[j].members).copied().collect(),
                proposal: t.target.clone(),
            };
            coalitions[i.min(j)] = merged;
            coalitions[i.max(j)].members.clear();
        }
        TransitionKind::Compromise | TransitionKind::Subsume => {
            for (src, movers) in t.sources.iter().zip(&t.movers) {
                for v in movers {
                    coalitions[*src].members.remove(v);
                }
            }
            coalitions.push(DeliberativeCoalition {
                members: t.movers[0].union(&t.movers[1]).copied().collect(),
                proposal: t.target.clone(),
            });
        }
    }
    coalitions.retain(|c| c.size() > 0);
    Ok(CoalitionStructure::new(coalitions))
}

fn check<T: Scalar>(d: &CoalitionStructure<T>, t: &Transition<T>, s: &DeliberationSpace<T>) -> Result<(), String> {
    let [i, j] = t.sources;
    if i == j || i >= d.len() || j >= d.len() {
        return Err(format!("source indices {i}, {j} do not name two coalitions"));
    }
    let (d1, d2) = (&d.coalitions[i], &d.coalitions[j]);
    if !is_active(d1) || !is_active(d2) {
        return Err("sources must be non-empty and not support r".into());
    }
    if t.target.is_status_quo() {
        return Err("target proposal is r".into());
    }
    s.check_proposal(&t.target).map_err(|e| e.to_string())?;
    let (c1, c2) = (&d1.members, &d2.members);
    let [m1, m2] = &t.movers;
    let ok = match t.kind {
        TransitionKind::SingleAgent => {
            m1.len() == 1
                && m1.is_subset(c1)
                && m2.is_empty()
                && c2.len() >= c1.len()
                && t.target == d2.proposal
                && s.all_approve(m1, &t.target)
        }
        TransitionKind::Follow => m1 == c1 && m2.is_empty() && t.target == d2.proposal && s.all_approve(c1, &t.target),
        TransitionKind::Merge => m1 == c1 && m2 == c2 && s.all_approve(c1, &t.target) && s.all_approve(c2, &t.target),
        TransitionKind::Compromise => {
            *m1 == s.supporters(c1, &t.target)
                && *m2 == s.supporters(c2, &t.target)
                && m1.len() + m2.len() > c1.len().max(c2.len())
        }
        TransitionKind::Subsume => {
            *m1 == s.supporters(c1, &t.target)
                && !m1.is_empty()
                && m2 == c2
                && s.all_approve(c2, &t.target)
                && m1.len() + c2.len() > c1.len()
        }
    };
    if ok {
        Ok(())
    } else {
        Err(format!("definition no longer holds for d{i}, d{j} at {}", s.proposal_label(&t.target)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Location, Metric, Point};
    use crate::space::{Agent, ListedProposal, ProposalSet};

    fn line(agents: &[f64], proposals: &[f64]) -> DeliberationSpace<f64> {
        let pt = |x: f64| Location::Coords(Point(vec![x]));
        let proposals = if proposals.is_empty() {
            ProposalSet::Continuous
        } else {
            ProposalSet::Finite(
                proposals.iter().enumerate().map(|(k, x)| ListedProposal { id: format!("x{k}"), location: pt(*x) }).collect(),
            )
        };
        DeliberationSpace::new(
            Metric::Euclidean { dim: 1 },
            agents.iter().enumerate().map(|(k, x)| Agent { id: format!("v{k}"), location: pt(*x) }).collect(),
            proposals,
            pt(0.0),
        )
        .unwrap()
    }

    fn structure(parts: &[(&[usize], Proposal<f64>)]) -> CoalitionStructure<f64> {
        CoalitionStructure::new(parts.iter().map(|(m, p)| DeliberativeCoalition::new(m.iter().copied(), p.clone())).collect())
    }

    #[test]
    fn kind_names_round_trip() {
        for k in TransitionKind::ALL {
            assert_eq!(k.name().parse::<TransitionKind>().unwrap(), k);
        }
        assert!("split".parse::<TransitionKind>().is_err());
    }

    #[test]
    fn single_agent_into_larger_coalition() {
        // v0 at 0.6 supports 0.5; v1, v2 at 1 support 1.
        let s = line(&[0.6, 1.0, 1.0], &[0.5, 1.0]);
        let d = structure(&[(&[0], Proposal::Listed(0)), (&[1, 2], Proposal::Listed(1))]);
        let ts = enumerate_single_agent(&d, &s);
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].sources, [0, 1]);
        assert_eq!(ts[0].movers[0], AgentSet::from([0]));

        let after = apply(&d, &ts[0], &s).unwrap();
        assert_eq!(after.len(), 1);
        assert_eq!(after.potential(), d.potential() + 4);
    }

    #[test]
    fn follow_both_directions() {
        let s = line(&[0.6, 1.0, 1.0], &[0.5, 1.0]);
        let d = structure(&[(&[0], Proposal::Listed(0)), (&[1, 2], Proposal::Listed(1))]);
        let ts = enumerate_follow(&d, &s);
        let pairs: Vec<[usize; 2]> = ts.iter().map(|t| t.sources).collect();
        assert_eq!(pairs, vec![[0, 1], [1, 0]]);
        for t in &ts {
            let after = apply(&d, t, &s).unwrap();
            assert_eq!(after.potential(), d.potential() + 2 * 2);
            assert_eq!(after.validate(&s), Ok(()));
        }
    }

    #[test]
    fn subsume_on_a_line() {
        // d1 = ({3, 9}, 5), d2 = ({1}, 1); p = 1.5 takes everyone.
        let s = line(&[3.0, 9.0, 1.0], &[5.0, 1.0, 1.5]);
        let d = structure(&[(&[0, 1], Proposal::Listed(0)), (&[2], Proposal::Listed(1))]);
        let ts = enumerate_subsume(&d, &s).unwrap();
        let t = ts.iter().find(|t| t.target == Proposal::Listed(2)).expect("subsume at 1.5");
        assert_eq!(t.sources, [0, 1]);
        assert_eq!(t.movers, [AgentSet::from([0, 1]), AgentSet::from([2])]);
        let after = apply(&d, t, &s).unwrap();
        let k = 2i64;
        let delta = 2 * k * (1 - 2 + k);
        assert_eq!(after.potential() as i64 - d.potential() as i64, delta);
    }

    #[test]
    fn compromise_requires_strict_growth() {
        // Within d1 = {v0, v1} only v1 approves x2 = 2; with v2 that is 2 = |d1|.
        let s = line(&[1.0, 10.0, 2.5], &[1.0, 10.0, 2.0]);
        let d = structure(&[(&[0, 1], Proposal::Listed(0)), (&[2], Proposal::Listed(2))]);
        let ts = enumerate_compromise(&d, &s).unwrap();
        assert!(ts.iter().all(|t| t.target != Proposal::Listed(2)), "{ts:?}");
    }

    #[test]
    fn stale_transition_rejected() {
        let s = line(&[0.6, 1.0, 1.0], &[0.5, 1.0]);
        let d = structure(&[(&[0], Proposal::Listed(0)), (&[1, 2], Proposal::Listed(1))]);
        let t = enumerate_follow(&d, &s).remove(0);
        let after = apply(&d, &t, &s).unwrap();
        assert!(matches!(apply(&after, &t, &s), Err(TransitionError::Stale { .. })));
    }

    #[test]
    fn continuous_merge_synthesizes_a_point() {
        let s = line(&[2.0, 4.0], &[]);
        let d = structure(&[(&[0], Proposal::Point(Point(vec![2.0]))), (&[1], Proposal::Point(Point(vec![4.0])))]);
        let ts = enumerate_merge(&d, &s).unwrap();
        assert_eq!(ts.len(), 1);
        assert!(s.all_approve(&AgentSet::from([0, 1]), &ts[0].target));
        let after = apply(&d, &ts[0], &s).unwrap();
        assert_eq!(after.signature().0, vec![2]);
    }

    #[test]
    fn continuous_opposite_sides_admit_nothing() {
        let s = line(&[-2.0, 3.0], &[]);
        let d = structure(&[(&[0], Proposal::Point(Point(vec![-2.0]))), (&[1], Proposal::Point(Point(vec![3.0])))]);
        assert!(enumerate_merge(&d, &s).unwrap().is_empty());
        assert!(enumerate_compromise(&d, &s).unwrap().is_empty());
        assert!(enumerate_subsume(&d, &s).unwrap().is_empty());
    }

    #[test]
    fn continuous_compromise_strands_the_far_side() {
        // {2, 3} and {5, 6} share a proposal; −1 sits on the other side of r.
        let s = line(&[-1.0, 2.0, 3.0, 5.0, 6.0], &[]);
        let d = structure(&[
            (&[1, 2], Proposal::Point(Point(vec![2.5]))),
            (&[0], Proposal::Point(Point(vec![-1.0]))),
            (&[3, 4], Proposal::Point(Point(vec![5.5]))),
        ]);
        assert_eq!(d.validate(&s), Ok(()));
        let ts = enumerate_compromise(&d, &s).unwrap();
        let t = ts.iter().find(|t| t.sources == [0, 2]).expect("compromise between the right-hand coalitions");
        assert_eq!(t.new_coalition(&d), AgentSet::from([1, 2, 3, 4]));
        assert!(ts.iter().all(|t| !t.new_coalition(&d).contains(&0)));
    }

    #[test]
    fn continuous_subset_cap() {
        let agents: Vec<f64> = (1..=21).map(|k| k as f64).collect();
        let s = line(&agents, &[]);
        let d = structure(&[
            ((0..20).collect::<Vec<_>>().as_slice(), Proposal::Point(Point(vec![10.0]))),
            (&[20], Proposal::Point(Point(vec![21.0]))),
        ]);
        assert_eq!(
            enumerate_compromise(&d, &s).unwrap_err(),
            TransitionError::SubsetCapExceeded { size: 21, cap: SUBSET_SEARCH_CAP }
        );
    }
}
