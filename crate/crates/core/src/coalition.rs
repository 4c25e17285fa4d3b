//! Deliberative coalitions, coalition structures, and the quantities the
//! termination arguments track: the potential and the size signature.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::space::{AgentIdx, AgentSet, DeliberationSpace, Proposal, SupportReport};

/// A group of agents behind one proposal.
#[derive(Clone, Debug, PartialEq)]
pub struct DeliberativeCoalition<T> {
    pub members: AgentSet,
    pub proposal: Proposal<T>,
}

impl<T> DeliberativeCoalition<T> {
    pub fn new(members: impl IntoIterator<Item = AgentIdx>, proposal: Proposal<T>) -> Self {
        DeliberativeCoalition { members: members.into_iter().collect(), proposal }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn supports_status_quo(&self) -> bool {
        self.proposal.is_status_quo()
    }
}

/// A partition of the agents into deliberative coalitions.
#[derive(Clone, Debug, PartialEq)]
pub struct CoalitionStructure<T> {
    pub coalitions: Vec<DeliberativeCoalition<T>>,
}

/// A clause of the coalition or structure definition that fails.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    UnknownAgent { coalition: usize, agent: AgentIdx },
    InvalidProposal { coalition: usize, reason: String },
    Overlap { agent: AgentIdx, first: usize, second: usize },
    Uncovered { agent: AgentIdx },
    NotApproved { coalition: usize, agent: AgentIdx },
    StatusQuoMember { coalition: usize, agent: AgentIdx },
}

impl Violation {
    pub fn clause(&self) -> &'static str {
        match self {
            Violation::UnknownAgent { .. } => "unknown_agent",
            Violation::InvalidProposal { .. } => "proposal",
            Violation::Overlap { .. } | Violation::Uncovered { .. } => "partition",
            Violation::NotApproved { .. } => "approval",
            Violation::StatusQuoMember { .. } => "status_quo",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownAgent { coalition, agent } => write!(f, "coalition {coalition}: unknown agent #{agent}"),
            Violation::InvalidProposal { coalition, reason } => write!(f, "coalition {coalition}: {reason}"),
            Violation::Overlap { agent, first, second } => {
                write!(f, "agent #{agent} belongs to coalitions {first} and {second}")
            }
            Violation::Uncovered { agent } => write!(f, "agent #{agent} belongs to no coalition"),
            Violation::NotApproved { coalition, agent } => {
                write!(f, "coalition {coalition}: agent #{agent} does not approve the supported proposal")
            }
            Violation::StatusQuoMember { coalition, agent } => {
                write!(f, "coalition {coalition}: agent #{agent} supports r but approves some proposal")
            }
        }
    }
}

/// Coalition sizes in non-increasing order, empty coalitions dropped.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(pub Vec<usize>);

impl Signature {
    /// Strict lexicographic order on non-increasing sequences: either the
    /// first difference is smaller, or `self` is a proper prefix of `other`.
    pub fn lex_less(&self, other: &Signature) -> bool {
        let (a, b) = (&self.0, &other.0);
        for (x, y) in a.iter().zip(b) {
            match x.cmp(y) {
                Ordering::Less => return true,
                Ordering::Greater => return false,
                Ordering::Equal => {}
            }
        }
        a.len() < b.len()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Hashable identity of a proposal, used for canonical state keys.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProposalKey {
    StatusQuo,
    Listed(usize),
    Point(Vec<u64>),
}

impl<T: Scalar> From<&Proposal<T>> for ProposalKey {
    fn from(p: &Proposal<T>) -> Self {
        match p {
            Proposal::StatusQuo => ProposalKey::StatusQuo,
            Proposal::Listed(k) => ProposalKey::Listed(*k),
            Proposal::Point(pt) => ProposalKey::Point(pt.0.iter().map(|c| c.as_f64().to_bits()).collect()),
        }
    }
}

/// Structure identity up to coalition order and empty coalitions.
pub type CanonicalKey = Vec<(Vec<AgentIdx>, ProposalKey)>;

impl<T: Scalar> CoalitionStructure<T> {
    pub fn new(coalitions: Vec<DeliberativeCoalition<T>>) -> Self {
        CoalitionStructure { coalitions }
    }

    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }

    /// Checks every clause of the coalition and structure definitions and
    /// reports each failure with the offending agent or coalition.
    pub fn validate(&self, space: &DeliberationSpace<T>) -> Result<(), Vec<Violation>> {
        let n = space.n_agents();
        let mut owner: Vec<Option<usize>> = vec![None; n];
        let mut violations = Vec::new();
        for (ci, coalition) in self.coalitions.iter().enumerate() {
            let proposal_ok = match space.check_proposal(&coalition.proposal) {
                Ok(()) => true,
                Err(e) => {
                    violations.push(Violation::InvalidProposal { coalition: ci, reason: e.to_string() });
                    false
                }
            };
            for &v in &coalition.members {
                if v >= n {
                    violations.push(Violation::UnknownAgent { coalition: ci, agent: v });
                    continue;
                }
                match owner[v] {
                    Some(first) => violations.push(Violation::Overlap { agent: v, first, second: ci }),
                    None => owner[v] = Some(ci),
                }
                if !proposal_ok {
                    continue;
                }
                if coalition.supports_status_quo() {
                    if space.approves_anything(v) {
                        violations.push(Violation::StatusQuoMember { coalition: ci, agent: v });
                    }
                } else if !space.approves(v, &coalition.proposal) {
                    violations.push(Violation::NotApproved { coalition: ci, agent: v });
                }
            }
        }
        for (v, o) in owner.iter().enumerate() {
            if o.is_none() {
                violations.push(Violation::Uncovered { agent: v });
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// `Σ |C|²`.
    pub fn potential(&self) -> u64 {
        self.coalitions.iter().map(|c| (c.size() as u64).pow(2)).sum()
    }

    pub fn signature(&self) -> Signature {
        let mut sizes: Vec<usize> = self.coalitions.iter().map(|c| c.size()).filter(|s| *s > 0).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        Signature(sizes)
    }

    /// Index of a coalition `(C, p)` with `p ≠ r` and `|C| = |V^p| = m*`.
    pub fn successful_coalition(&self, space: &DeliberationSpace<T>, report: &SupportReport<T>) -> Option<usize> {
        let m_star = report.max_support;
        self.coalitions.iter().position(|c| {
            !c.supports_status_quo()
                && c.size() == m_star
                && space.supporters(&space.all_agents(), &c.proposal).len() == m_star
        })
    }

    /// Success, vacuously true when no agent approves anything (`m* = 0`).
    pub fn is_successful(&self, space: &DeliberationSpace<T>, report: &SupportReport<T>) -> bool {
        report.max_support == 0 || self.successful_coalition(space, report).is_some()
    }

    /// Coalitions sorted by size (descending) then smallest member, empties dropped.
    pub fn canonical(&self) -> CoalitionStructure<T> {
        let mut coalitions: Vec<DeliberativeCoalition<T>> =
            self.coalitions.iter().filter(|c| c.size() > 0).cloned().collect();
        coalitions.sort_by(|a, b| {
            b.size()
                .cmp(&a.size())
                .then_with(|| a.members.iter().next().cmp(&b.members.iter().next()))
        });
        CoalitionStructure { coalitions }
    }

    pub fn canonical_key(&self) -> CanonicalKey {
        self.canonical()
            .coalitions
            .iter()
            .map(|c| (c.members.iter().copied().collect(), ProposalKey::from(&c.proposal)))
            .collect()
    }

    /// Largest coalition supporting a proposal other than `r`.
    pub fn largest_coalition(&self) -> usize {
        self.coalitions
            .iter()
            .filter(|c| !c.supports_status_quo())
            .map(|c| c.size())
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Location, Metric, Point};
    use crate::space::{Agent, ListedProposal, ProposalSet};

    fn sizes(s: &[usize]) -> CoalitionStructure<f64> {
        let mut next = 0;
        CoalitionStructure::new(
            s.iter()
                .map(|&k| {
                    let c = DeliberativeCoalition::new(next..next + k, Proposal::Listed(0));
                    next += k;
                    c
                })
                .collect(),
        )
    }

    fn line(agents: &[f64], proposals: &[f64]) -> DeliberationSpace<f64> {
        DeliberationSpace::new(
            Metric::Euclidean { dim: 1 },
            agents
                .iter()
                .enumerate()
                .map(|(i, x)| Agent { id: format!("v{i}"), location: Location::Coords(Point(vec![*x])) })
                .collect(),
            ProposalSet::Finite(
                proposals
                    .iter()
                    .enumerate()
                    .map(|(i, x)| ListedProposal { id: format!("x{i}"), location: Location::Coords(Point(vec![*x])) })
                    .collect(),
            ),
            Location::Coords(Point(vec![0.0])),
        )
        .unwrap()
    }

    #[test]
    fn potential_examples() {
        assert_eq!(sizes(&[10]).potential(), 100);
        assert_eq!(sizes(&[1, 1, 1, 1, 1]).potential(), 5);
        assert_eq!(sizes(&[3, 4, 3]).potential(), 34);
    }

    #[test]
    fn signature_examples() {
        assert_eq!(sizes(&[3, 4, 3]).signature(), Signature(vec![4, 3, 3]));
        assert_eq!(sizes(&[0, 2, 0]).signature(), Signature(vec![2]));
        assert!(Signature(vec![4, 3, 3]).lex_less(&Signature(vec![5, 2, 2, 1])));
        assert!(Signature(vec![3, 3]).lex_less(&Signature(vec![3, 3, 1])));
        assert!(!Signature(vec![3, 3]).lex_less(&Signature(vec![3, 3])));
        assert!(!Signature(vec![5]).lex_less(&Signature(vec![4, 1])));
    }

    #[test]
    fn validation_reports_each_clause() {
        let s = line(&[1.0, 5.0, 0.0], &[1.0, 5.0]);
        let ok = CoalitionStructure::new(vec![
            DeliberativeCoalition::new([0], Proposal::Listed(0)),
            DeliberativeCoalition::new([1], Proposal::Listed(1)),
            DeliberativeCoalition::new([2], Proposal::StatusQuo),
        ]);
        assert_eq!(ok.validate(&s), Ok(()));

        let overlap = CoalitionStructure::new(vec![
            DeliberativeCoalition::new([0, 1], Proposal::Listed(0)),
            DeliberativeCoalition::new([1, 2], Proposal::StatusQuo),
        ]);
        let errs = overlap.validate(&s).unwrap_err();
        assert!(errs.iter().any(|v| v.clause() == "partition"), "{errs:?}");

        // Agent at 1 does not approve 5 (|1−5| = 4 ≥ 1).
        let disapproved = CoalitionStructure::new(vec![
            DeliberativeCoalition::new([0, 1], Proposal::Listed(1)),
            DeliberativeCoalition::new([2], Proposal::StatusQuo),
        ]);
        assert_eq!(
            disapproved.validate(&s).unwrap_err(),
            vec![Violation::NotApproved { coalition: 0, agent: 0 }]
        );

        let sq = CoalitionStructure::new(vec![
            DeliberativeCoalition::new([0], Proposal::StatusQuo),
            DeliberativeCoalition::new([1, 2], Proposal::StatusQuo),
        ]);
        let errs = sq.validate(&s).unwrap_err();
        assert_eq!(errs.iter().filter(|v| v.clause() == "status_quo").count(), 2);

        let missing = CoalitionStructure::new(vec![DeliberativeCoalition::new([0], Proposal::Listed(0))]);
        let errs = missing.validate(&s).unwrap_err();
        assert_eq!(errs, vec![Violation::Uncovered { agent: 1 }, Violation::Uncovered { agent: 2 }]);
    }

    #[test]
    fn empty_coalitions_are_valid_and_ignored() {
        let s = line(&[1.0, 2.0], &[1.5]);
        let d = CoalitionStructure::new(vec![
            DeliberativeCoalition::new([], Proposal::Listed(0)),
            DeliberativeCoalition::new([0, 1], Proposal::Listed(0)),
        ]);
        assert_eq!(d.validate(&s), Ok(()));
        assert_eq!(d.canonical().len(), 1);
        let report = s.max_support().unwrap();
        assert!(d.is_successful(&s, &report));
    }

    #[test]
    fn unanimous_grand_coalition_is_successful() {
        let s = line(&[1.0, 2.0, 3.0], &[1.5, -1.0]);
        let d = CoalitionStructure::new(vec![DeliberativeCoalition::new([0, 1, 2], Proposal::Listed(0))]);
        let report = s.max_support().unwrap();
        assert_eq!(report.max_support, 3);
        assert!(d.is_successful(&s, &report));
    }

    #[test]
    fn canonical_key_ignores_order() {
        let a = CoalitionStructure::<f64>::new(vec![
            DeliberativeCoalition::new([2], Proposal::Listed(1)),
            DeliberativeCoalition::new([0, 1], Proposal::Listed(0)),
        ]);
        let b = CoalitionStructure::<f64>::new(vec![
            DeliberativeCoalition::new([1, 0], Proposal::Listed(0)),
            DeliberativeCoalition::new([], Proposal::StatusQuo),
            DeliberativeCoalition::new([2], Proposal::Listed(1)),
        ]);
        assert_eq!(a.canonical_key(), b.canonical_key());
    }
}
