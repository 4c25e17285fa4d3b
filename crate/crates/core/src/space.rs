//! The deliberation space `(X, V, r, ρ)`: agents and proposals in a common
//! metric space, a distinguished status quo, and support queries over them.

use std::collections::{BTreeSet, HashSet};

use itertools::Itertools;
use thiserror::Error;

use crate::geometry::{self, euclidean, FeasibilityResult, GeometryError, Location, Metric, Point, SolverError};
use crate::scalar::Scalar;

/// Reserved identifier of the status quo.
pub const STATUS_QUO_ID: &str = "r";

/// Default agent cap for the continuous most-supported-alternative search.
pub const DEFAULT_ORACLE_CAP: usize = 16;

/// Position of an agent in [`DeliberationSpace::agents`].
pub type AgentIdx = usize;

/// A set of agents, kept ordered so every traversal is deterministic.
pub type AgentSet = BTreeSet<AgentIdx>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("a deliberation space needs at least one agent")]
    NoAgents,
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("id `{0}` is reserved for the status quo")]
    ReservedId(String),
    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch { what: String, expected: usize, found: usize },
    #[error("{0}: coordinates must be finite")]
    NonFinite(String),
    #[error("dimension must be between 1 and {max}, got {got}")]
    BadDimension { got: usize, max: usize },
    #[error("{what}: location kind does not match the metric")]
    KindMismatch { what: String },
    #[error("a continuous proposal space requires the euclidean metric")]
    ContinuousRequiresEuclidean,
    #[error("{0} is not supported on a continuous proposal space")]
    UnsupportedOnContinuous(&'static str),
    #[error("proposal reference is not valid in this space: {0}")]
    InvalidProposal(String),
    #[error("{n} agents exceed the oracle cap of {cap}")]
    OracleCapExceeded { n: usize, cap: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// A proposal: the status quo, an entry of a finite proposal list, or (on a
/// continuous space) an arbitrary point of `ℝᵈ`.
#[derive(Clone, Debug, PartialEq)]
pub enum Proposal<T> {
    StatusQuo,
    Listed(usize),
    Point(Point<T>),
}

impl<T> Proposal<T> {
    pub fn is_status_quo(&self) -> bool {
        matches!(self, Proposal::StatusQuo)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent<T> {
    pub id: String,
    pub location: Location<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ListedProposal<T> {
    pub id: String,
    pub location: Location<T>,
}

/// `X ∖ {r}`: a finite list, or all of `ℝᵈ`.
#[derive(Clone, Debug, PartialEq)]
pub enum ProposalSet<T> {
    Finite(Vec<ListedProposal<T>>),
    Continuous,
}

/// Maximum support `m*` and proposals attaining it.
///
/// On a finite space `witnesses` is exactly the set of most-supported
/// alternatives; on a continuous space it holds one witness point. It is
/// empty when no agent approves anything (`m* = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct SupportReport<T> {
    pub max_support: usize,
    pub witnesses: Vec<Proposal<T>>,
}

#[derive(Clone, Debug)]
pub struct DeliberationSpace<T> {
    metric: Metric<T>,
    agents: Vec<Agent<T>>,
    proposals: ProposalSet<T>,
    status_quo: Location<T>,
    oracle_cap: usize,
    // ρ(v, r) per agent.
    radii: Vec<T>,
    // Finite spaces: approves[v][x].
    approval: Vec<Vec<bool>>,
}

impl<T: Scalar> DeliberationSpace<T> {
    pub fn new(
        metric: Metric<T>,
        agents: Vec<Agent<T>>,
        proposals: ProposalSet<T>,
        status_quo: Location<T>,
    ) -> Result<Self, SpaceError> {
        if agents.is_empty() {
            return Err(SpaceError::NoAgents);
        }
        if let Metric::Euclidean { dim } = metric {
            if dim == 0 || dim > geometry::MAX_DIMENSION {
                return Err(SpaceError::BadDimension { got: dim, max: geometry::MAX_DIMENSION });
            }
        }
        if matches!(proposals, ProposalSet::Continuous) && !metric.is_euclidean() {
            return Err(SpaceError::ContinuousRequiresEuclidean);
        }
        check_location(&metric, &status_quo, STATUS_QUO_ID)?;

        let mut seen = HashSet::new();
        for agent in &agents {
            if agent.id == STATUS_QUO_ID {
                return Err(SpaceError::ReservedId(agent.id.clone()));
            }
            if !seen.insert(agent.id.as_str()) {
                return Err(SpaceError::DuplicateId(agent.id.clone()));
            }
            check_location(&metric, &agent.location, &agent.id)?;
        }
        let mut seen_proposals = HashSet::new();
        if let ProposalSet::Finite(list) = &proposals {
            for p in list {
                if p.id == STATUS_QUO_ID {
                    return Err(SpaceError::ReservedId(p.id.clone()));
                }
                if !seen_proposals.insert(p.id.as_str()) {
                    return Err(SpaceError::DuplicateId(p.id.clone()));
                }
                check_location(&metric, &p.location, &p.id)?;
            }
        }

        let radii = agents
            .iter()
            .map(|a| metric.distance(&a.location, &status_quo))
            .collect::<Result<Vec<_>, _>>()?;
        let approval = match &proposals {
            ProposalSet::Finite(list) => agents
                .iter()
                .zip(&radii)
                .map(|(a, rad)| {
                    list.iter()
                        .map(|p| Ok(metric.distance(&a.location, &p.location)? < *rad))
                        .collect::<Result<Vec<bool>, GeometryError>>()
                })
                .collect::<Result<Vec<_>, _>>()?,
            ProposalSet::Continuous => Vec::new(),
        };

        Ok(DeliberationSpace {
            metric,
            agents,
            proposals,
            status_quo,
            oracle_cap: DEFAULT_ORACLE_CAP,
            radii,
            approval,
        })
    }

    pub fn with_oracle_cap(mut self, cap: usize) -> Self {
        self.oracle_cap = cap;
        self
    }

    pub fn oracle_cap(&self) -> usize {
        self.oracle_cap
    }

    pub fn metric(&self) -> &Metric<T> {
        &self.metric
    }

    pub fn dimension(&self) -> Option<usize> {
        self.metric.dimension()
    }

    pub fn agents(&self) -> &[Agent<T>] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn all_agents(&self) -> AgentSet {
        (0..self.agents.len()).collect()
    }

    pub fn agent_id(&self, v: AgentIdx) -> &str {
        &self.agents[v].id
    }

    pub fn agent_index(&self, id: &str) -> Option<AgentIdx> {
        self.agents.iter().position(|a| a.id == id)
    }

    pub fn proposals(&self) -> &ProposalSet<T> {
        &self.proposals
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.proposals, ProposalSet::Continuous)
    }

    pub fn listed(&self) -> &[ListedProposal<T>] {
        match &self.proposals {
            ProposalSet::Finite(list) => list,
            ProposalSet::Continuous => &[],
        }
    }

    pub fn proposal_index(&self, id: &str) -> Option<usize> {
        self.listed().iter().position(|p| p.id == id)
    }

    pub fn status_quo(&self) -> &Location<T> {
        &self.status_quo
    }

    /// Status quo coordinates on a Euclidean space.
    pub fn status_quo_point(&self) -> Option<&Point<T>> {
        match &self.status_quo {
            Location::Coords(p) => Some(p),
            Location::Node(_) => None,
        }
    }

    /// Agent coordinates on a Euclidean space.
    pub fn agent_point(&self, v: AgentIdx) -> Option<&Point<T>> {
        match &self.agents[v].location {
            Location::Coords(p) => Some(p),
            Location::Node(_) => None,
        }
    }

    /// `ρ(v, r)`, the radius of the agent's approval ball.
    pub fn approval_radius(&self, v: AgentIdx) -> T {
        self.radii[v]
    }

    /// Human-readable label: an id, `r`, or coordinates.
    pub fn proposal_label(&self, p: &Proposal<T>) -> String {
        match p {
            Proposal::StatusQuo => STATUS_QUO_ID.to_string(),
            Proposal::Listed(k) => self.listed().get(*k).map_or_else(|| format!("#{k}"), |l| l.id.clone()),
            Proposal::Point(pt) => {
                let coords: Vec<String> = pt.0.iter().map(|c| format!("{c}")).collect();
                format!("({})", coords.join(", "))
            }
        }
    }

    /// Checks that `p` denotes an element of `X` in this space.
    pub fn check_proposal(&self, p: &Proposal<T>) -> Result<(), SpaceError> {
        match (p, &self.proposals) {
            (Proposal::StatusQuo, _) => Ok(()),
            (Proposal::Listed(k), ProposalSet::Finite(list)) if *k < list.len() => Ok(()),
            (Proposal::Point(pt), ProposalSet::Continuous) => {
                let dim = self.dimension().expect("continuous spaces are euclidean");
                if pt.dim() != dim {
                    return Err(SpaceError::DimensionMismatch { what: "proposal".into(), expected: dim, found: pt.dim() });
                }
                if !pt.is_finite() {
                    return Err(SpaceError::NonFinite("proposal".into()));
                }
                Ok(())
            }
            _ => Err(SpaceError::InvalidProposal(self.proposal_label(p))),
        }
    }

    /// `p >_v r`, for a proposal already accepted by [`check_proposal`](Self::check_proposal).
    pub fn approves(&self, v: AgentIdx, p: &Proposal<T>) -> bool {
        match p {
            Proposal::StatusQuo => false,
            Proposal::Listed(k) => self.approval[v][*k],
            Proposal::Point(pt) => match &self.agents[v].location {
                Location::Coords(a) => euclidean(a, pt) < self.radii[v],
                Location::Node(_) => false,
            },
        }
    }

    /// Whether the agent's approval set `X^v` is non-empty.
    pub fn approves_anything(&self, v: AgentIdx) -> bool {
        match &self.proposals {
            ProposalSet::Finite(_) => self.approval[v].iter().any(|a| *a),
            // The agent's own location is approved unless it sits on r.
            ProposalSet::Continuous => self.radii[v] > T::zero(),
        }
    }

    /// `X^v` as indices into the proposal list.
    pub fn approval_set(&self, v: AgentIdx) -> Result<BTreeSet<usize>, SpaceError> {
        if self.is_continuous() {
            return Err(SpaceError::UnsupportedOnContinuous("approval_set"));
        }
        Ok(self.approval[v].iter().enumerate().filter(|(_, a)| **a).map(|(k, _)| k).collect())
    }

    /// `C^p`: the members of `group` approving `p`.
    pub fn supporters(&self, group: &AgentSet, p: &Proposal<T>) -> AgentSet {
        group.iter().copied().filter(|&v| self.approves(v, p)).collect()
    }

    /// Whether every member of `group` approves `p`.
    pub fn all_approve(&self, group: &AgentSet, p: &Proposal<T>) -> bool {
        group.iter().all(|&v| self.approves(v, p))
    }

    /// Coordinates of a group of agents (Euclidean spaces only).
    pub fn agent_points<'a>(&self, group: impl IntoIterator<Item = &'a AgentIdx>) -> Vec<Point<T>> {
        group
            .into_iter()
            .map(|&v| self.agent_point(v).expect("euclidean agent").clone())
            .collect()
    }

    /// Best jointly approved proposal for a group on a continuous space.
    pub fn common_proposal(&self, group: &[AgentIdx]) -> Result<FeasibilityResult<T>, SpaceError> {
        let r = self.status_quo_point().ok_or(SpaceError::UnsupportedOnContinuous("common_proposal"))?;
        let pts = self.agent_points(group);
        Ok(geometry::best_common_proposal(&pts, r)?)
    }

    /// Whether two approval balls are disjoint, which rules out any group holding both.
    pub fn balls_disjoint(&self, u: AgentIdx, w: AgentIdx) -> bool {
        let (Some(a), Some(b)) = (self.agent_point(u), self.agent_point(w)) else {
            return false;
        };
        euclidean(a, b) >= self.radii[u] + self.radii[w]
    }

    /// `m*` and the most-supported alternatives.
    pub fn max_support(&self) -> Result<SupportReport<T>, SpaceError> {
        match &self.proposals {
            ProposalSet::Finite(list) => {
                let counts: Vec<usize> = (0..list.len())
                    .map(|k| self.approval.iter().filter(|row| row[k]).count())
                    .collect();
                let best = counts.iter().copied().max().unwrap_or(0);
                let witnesses = if best == 0 {
                    Vec::new()
                } else {
                    counts
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| **c == best)
                        .map(|(k, _)| Proposal::Listed(k))
                        .collect()
                };
                Ok(SupportReport { max_support: best, witnesses })
            }
            ProposalSet::Continuous => self.max_support_continuous(),
        }
    }

    fn max_support_continuous(&self) -> Result<SupportReport<T>, SpaceError> {
        let n = self.agents.len();
        if n > self.oracle_cap {
            return Err(SpaceError::OracleCapExceeded { n, cap: self.oracle_cap });
        }
        // Agents sitting on r have empty approval balls and never count.
        let candidates: Vec<AgentIdx> = (0..n).filter(|&v| self.radii[v] > T::zero()).collect();
        for size in (1..=candidates.len()).rev() {
            for subset in candidates.iter().copied().combinations(size) {
                if subset
                    .iter()
                    .tuple_combinations()
                    .any(|(&u, &w)| self.balls_disjoint(u, w))
                {
                    continue;
                }
                let res = self.common_proposal(&subset)?;
                if res.is_feasible() {
                    return Ok(SupportReport { max_support: size, witnesses: vec![Proposal::Point(res.witness)] });
                }
            }
        }
        Ok(SupportReport { max_support: 0, witnesses: Vec::new() })
    }
}

fn check_location<T: Scalar>(metric: &Metric<T>, loc: &Location<T>, what: &str) -> Result<(), SpaceError> {
    match (metric, loc) {
        (Metric::Euclidean { dim }, Location::Coords(p)) => {
            if p.dim() != *dim {
                return Err(SpaceError::DimensionMismatch { what: what.to_string(), expected: *dim, found: p.dim() });
            }
            if !p.is_finite() {
                return Err(SpaceError::NonFinite(what.to_string()));
            }
            Ok(())
        }
        (Metric::Explicit(m), Location::Node(i)) => {
            if *i >= m.names().len() {
                return Err(GeometryError::UnknownPoint(*i).into());
            }
            Ok(())
        }
        _ => Err(SpaceError::KindMismatch { what: what.to_string() }),
    }
}
