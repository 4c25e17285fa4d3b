//! JSON scenario files, built-in fixtures, run traces and CSV batch summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::{CoalitionStructure, DeliberativeCoalition, Signature, Violation};
use crate::engine::{BatchRow, Classification, RunTrace, Selector};
use crate::geometry::{ExplicitMetric, Location, Metric, MetricError, Point};
use crate::scalar::Scalar;
use crate::space::{Agent, DeliberationSpace, ListedProposal, Proposal, ProposalSet, SpaceError, STATUS_QUO_ID};
use crate::transitions::TransitionKind;

pub const FORMAT_VERSION: u32 = 1;

pub const SUMMARY_HEADER: &str = "seed,n,d,x_size,policy,steps,classification,m_star,max_terminal_coalition";

pub const FIXTURE_NAMES: [&str; 7] =
    ["example1", "example1_euclidean", "example2", "example3", "example4", "example5", "example6"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported format_version {found} (this build reads {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("space.matrix violates {}: {source}", .source.clause())]
    Metric { source: MetricError },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("{field}: unknown id `{id}`")]
    UnknownId { field: String, id: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("initial_structure violates {}: {}", .0[0].clause(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Structure(Vec<Violation>),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
}

impl ScenarioError {
    /// Stable machine-readable code, e.g. `metric.symmetry` or `structure.approval`.
    pub fn code(&self) -> String {
        match self {
            ScenarioError::Parse(_) => "parse".into(),
            ScenarioError::UnsupportedVersion { .. } => "version".into(),
            ScenarioError::Metric { source } => format!("metric.{}", source.clause()),
            ScenarioError::Field { .. } => "field".into(),
            ScenarioError::UnknownId { .. } => "unknown_id".into(),
            ScenarioError::Space(_) => "space".into(),
            ScenarioError::Structure(v) => format!("structure.{}", v[0].clause()),
            ScenarioError::UnknownFixture(_) => "unknown_fixture".into(),
        }
    }

    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Field { field: field.into(), message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Euclidean { dimension: usize },
    Explicit { points: Vec<String>, matrix: Vec<Vec<f64>> },
}

/// Either coordinates or a named point of an explicit metric.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedLocation {
    pub id: String,
    #[serde(flatten)]
    pub location: LocationSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProposalsSpec {
    List(Vec<NamedLocation>),
    Marker(String),
}

/// A proposal reference: an id (`r` for the status quo) or coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProposalRef {
    Id(String),
    Coords { coords: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoalitionSpec {
    pub proposal: ProposalRef,
    pub members: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub space: SpaceSpec,
    pub status_quo: LocationSpec,
    pub agents: Vec<NamedLocation>,
    pub proposals: ProposalsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_structure: Option<Vec<CoalitionSpec>>,
}

/// A loaded scenario: a validated space and a valid initial structure.
#[derive(Clone, Debug)]
pub struct Scenario<T> {
    pub name: Option<String>,
    pub space: DeliberationSpace<T>,
    pub initial: CoalitionStructure<T>,
}

pub fn load_scenario(text: &str) -> Result<Scenario<f64>, ScenarioError> {
    load_scenario_as(text)
}

pub fn load_scenario_as<T: Scalar>(text: &str) -> Result<Scenario<T>, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    scenario_from_file(&file)
}

pub fn scenario_from_file<T: Scalar>(file: &ScenarioFile) -> Result<Scenario<T>, ScenarioError> {
    if file.format_version != FORMAT_VERSION {
        return Err(ScenarioError::UnsupportedVersion { found: file.format_version });
    }
    let metric = match &file.space {
        SpaceSpec::Euclidean { dimension } => Metric::Euclidean { dim: *dimension },
        SpaceSpec::Explicit { points, matrix } => {
            let matrix = matrix.iter().map(|row| row.iter().map(|x| T::lit(*x)).collect()).collect();
            Metric::Explicit(
                ExplicitMetric::new(points.clone(), matrix).map_err(|source| ScenarioError::Metric { source })?,
            )
        }
    };
    let status_quo = location(&metric, &file.status_quo, "status_quo")?;
    let agents = file
        .agents
        .iter()
        .enumerate()
        .map(|(k, a)| {
            Ok(Agent { id: a.id.clone(), location: location(&metric, &a.location, &format!("agents[{k}]"))? })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    let proposals = match &file.proposals {
        ProposalsSpec::Marker(m) if m == "continuous" => ProposalSet::Continuous,
        ProposalsSpec::Marker(m) => {
            return Err(ScenarioError::field("proposals", format!("expected a list or \"continuous\", got \"{m}\"")))
        }
        ProposalsSpec::List(list) => ProposalSet::Finite(
            list.iter()
                .enumerate()
                .map(|(k, p)| {
                    Ok(ListedProposal {
                        id: p.id.clone(),
                        location: location(&metric, &p.location, &format!("proposals[{k}]"))?,
                    })
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?,
        ),
    };
    let space = DeliberationSpace::new(metric, agents, proposals, status_quo)?;
    let initial = match &file.initial_structure {
        Some(specs) => {
            let d = structure_from_specs(&space, specs)?;
            d.validate(&space).map_err(ScenarioError::Structure)?;
            d
        }
        None => crate::engine::default_initial_structure(&space),
    };
    Ok(Scenario { name: file.name.clone(), space, initial })
}

fn location<T: Scalar>(metric: &Metric<T>, given: &LocationSpec, field: &str) -> Result<Location<T>, ScenarioError> {
    match (metric, &given.coords, &given.point) {
        (Metric::Euclidean { .. }, Some(c), None) => Ok(Location::Coords(Point(c.iter().map(|x| T::lit(*x)).collect()))),
        (Metric::Explicit(m), None, Some(name)) => m
            .index_of(name)
            .map(Location::Node)
            .ok_or_else(|| ScenarioError::UnknownId { field: field.to_string(), id: name.clone() }),
        (Metric::Euclidean { .. }, _, _) => Err(ScenarioError::field(field, "a euclidean space needs `coords` only")),
        (Metric::Explicit(_), _, _) => Err(ScenarioError::field(field, "an explicit metric needs `point` only")),
    }
}

pub fn proposal_from_ref<T: Scalar>(
    space: &DeliberationSpace<T>,
    r: &ProposalRef,
    field: &str,
) -> Result<Proposal<T>, ScenarioError> {
    let p = match r {
        ProposalRef::Id(id) if id == STATUS_QUO_ID => Proposal::StatusQuo,
        ProposalRef::Id(id) => Proposal::Listed(
            space.proposal_index(id).ok_or_else(|| ScenarioError::UnknownId { field: field.into(), id: id.clone() })?,
        ),
        ProposalRef::Coords { coords } => Proposal::Point(Point(coords.iter().map(|x| T::lit(*x)).collect())),
    };
    space.check_proposal(&p).map_err(|e| ScenarioError::field(field, e.to_string()))?;
    Ok(p)
}

pub fn proposal_to_ref<T: Scalar>(space: &DeliberationSpace<T>, p: &Proposal<T>) -> ProposalRef {
    match p {
        Proposal::StatusQuo => ProposalRef::Id(STATUS_QUO_ID.into()),
        Proposal::Listed(k) => ProposalRef::Id(space.listed()[*k].id.clone()),
        Proposal::Point(pt) => ProposalRef::Coords { coords: pt.0.iter().map(|c| c.as_f64()).collect() },
    }
}

pub fn structure_from_specs<T: Scalar>(
    space: &DeliberationSpace<T>,
    specs: &[CoalitionSpec],
) -> Result<CoalitionStructure<T>, ScenarioError> {
    let coalitions = specs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let field = format!("initial_structure[{k}]");
            let proposal = proposal_from_ref(space, &c.proposal, &format!("{field}.proposal"))?;
            let members = c
                .members
                .iter()
                .map(|id| {
                    space
                        .agent_index(id)
                        .ok_or_else(|| ScenarioError::UnknownId { field: format!("{field}.members"), id: id.clone() })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(DeliberativeCoalition::new(members, proposal))
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(CoalitionStructure::new(coalitions))
}

pub fn structure_to_specs<T: Scalar>(space: &DeliberationSpace<T>, d: &CoalitionStructure<T>) -> Vec<CoalitionSpec> {
    d.coalitions
        .iter()
        .map(|c| CoalitionSpec {
            proposal: proposal_to_ref(space, &c.proposal),
            members: c.members.iter().map(|&v| space.agent_id(v).to_string()).collect(),
        })
        .collect()
}

fn location_spec<T: Scalar>(metric: &Metric<T>, loc: &Location<T>) -> LocationSpec {
    match (metric, loc) {
        (Metric::Explicit(m), Location::Node(i)) => LocationSpec { coords: None, point: Some(m.names()[*i].clone()) },
        (_, Location::Coords(p)) => LocationSpec { coords: Some(p.0.iter().map(|c| c.as_f64()).collect()), point: None },
        (_, Location::Node(i)) => LocationSpec { coords: None, point: Some(format!("#{i}")) },
    }
}

pub fn scenario_to_file<T: Scalar>(
    name: Option<&str>,
    space: &DeliberationSpace<T>,
    initial: &CoalitionStructure<T>,
) -> ScenarioFile {
    let metric = space.metric();
    let named = |id: &str, loc: &Location<T>| NamedLocation { id: id.to_string(), location: location_spec(metric, loc) };
    ScenarioFile {
        format_version: FORMAT_VERSION,
        name: name.map(str::to_string),
        space: match metric {
            Metric::Euclidean { dim } => SpaceSpec::Euclidean { dimension: *dim },
            Metric::Explicit(m) => SpaceSpec::Explicit {
                points: m.names().to_vec(),
                matrix: m.matrix().iter().map(|row| row.iter().map(|x| x.as_f64()).collect()).collect(),
            },
        },
        status_quo: location_spec(metric, space.status_quo()),
        agents: space.agents().iter().map(|a| named(&a.id, &a.location)).collect(),
        proposals: match space.proposals() {
            ProposalSet::Continuous => ProposalsSpec::Marker("continuous".into()),
            ProposalSet::Finite(list) => ProposalsSpec::List(list.iter().map(|p| named(&p.id, &p.location)).collect()),
        },
        initial_structure: Some(structure_to_specs(space, initial)),
    }
}

pub fn write_scenario<T: Scalar>(
    name: Option<&str>,
    space: &DeliberationSpace<T>,
    initial: &CoalitionStructure<T>,
) -> String {
    let mut text = serde_json::to_string_pretty(&scenario_to_file(name, space, initial)).expect("serializable");
    text.push('\n');
    text
}

/// JSON source of a built-in fixture.
pub fn fixture_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "example1" => include_str!("../fixtures/example1.json"),
        "example1_euclidean" => include_str!("../fixtures/example1_euclidean.json"),
        "example2" => include_str!("../fixtures/example2.json"),
        "example3" => include_str!("../fixtures/example3.json"),
        "example4" => include_str!("../fixtures/example4.json"),
        "example5" => include_str!("../fixtures/example5.json"),
        "example6" => include_str!("../fixtures/example6.json"),
        _ => return None,
    })
}

pub fn builtin_fixture(name: &str) -> Result<Scenario<f64>, ScenarioError> {
    let text = fixture_source(name).ok_or_else(|| ScenarioError::UnknownFixture(name.to_string()))?;
    load_scenario(text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub index: usize,
    pub kind: TransitionKind,
    pub sources: [usize; 2],
    pub movers: [Vec<String>; 2],
    pub proposal: ProposalRef,
    pub potential: u64,
    pub signature: Signature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFile {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub policy: String,
    pub selector: Selector,
    pub seed: u64,
    pub step_cap: usize,
    pub m_star: usize,
    pub initial: Vec<CoalitionSpec>,
    pub steps: Vec<StepRecord>,
    pub terminal: Vec<CoalitionSpec>,
    pub classification: Classification,
}

pub fn trace_to_file<T: Scalar>(scenario: Option<&str>, space: &DeliberationSpace<T>, trace: &RunTrace<T>) -> TraceFile {
    let ids = |set: &crate::space::AgentSet| set.iter().map(|&v| space.agent_id(v).to_string()).collect::<Vec<_>>();
    TraceFile {
        format_version: FORMAT_VERSION,
        scenario: scenario.map(str::to_string),
        policy: trace.policy.to_string(),
        selector: trace.policy.selector,
        seed: trace.policy.seed,
        step_cap: trace.step_cap,
        m_star: trace.max_support,
        initial: structure_to_specs(space, &trace.initial),
        steps: trace
            .steps
            .iter()
            .map(|s| StepRecord {
                index: s.index,
                kind: s.transition.kind,
                sources: s.transition.sources,
                movers: [ids(&s.transition.movers[0]), ids(&s.transition.movers[1])],
                proposal: proposal_to_ref(space, &s.transition.target),
                potential: s.potential,
                signature: s.signature.clone(),
            })
            .collect(),
        terminal: structure_to_specs(space, &trace.terminal),
        classification: trace.classification,
    }
}

pub fn write_trace<T: Scalar>(scenario: Option<&str>, space: &DeliberationSpace<T>, trace: &RunTrace<T>) -> String {
    let mut text = serde_json::to_string_pretty(&trace_to_file(scenario, space, trace)).expect("serializable");
    text.push('\n');
    text
}

pub fn read_trace(text: &str) -> Result<TraceFile, ScenarioError> {
    let file: TraceFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(ScenarioError::UnsupportedVersion { found: file.format_version });
    }
    Ok(file)
}

#[derive(Serialize, Deserialize)]
struct SummaryRecord {
    seed: u64,
    n: usize,
    d: usize,
    x_size: String,
    policy: String,
    steps: usize,
    classification: Classification,
    m_star: usize,
    max_terminal_coalition: usize,
}

pub fn write_summary(rows: &[BatchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(SummaryRecord {
            seed: r.seed,
            n: r.n,
            d: r.d,
            x_size: r.x_size.map_or_else(|| "continuous".to_string(), |x| x.to_string()),
            policy: r.policy.clone(),
            steps: r.steps,
            classification: r.classification,
            m_star: r.m_star,
            max_terminal_coalition: r.max_terminal_coalition,
        })
        .expect("in-memory csv");
    }
    if rows.is_empty() {
        w.write_record(SUMMARY_HEADER.split(',')).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

pub fn read_summary(text: &str) -> Result<Vec<BatchRow>, ScenarioError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| ScenarioError::Parse(e.to_string()))?.iter().collect::<Vec<_>>().join(",");
    if header != SUMMARY_HEADER {
        return Err(ScenarioError::field("header", format!("expected `{SUMMARY_HEADER}`")));
    }
    r.deserialize::<SummaryRecord>()
        .map(|rec| {
            let rec = rec.map_err(|e| ScenarioError::Parse(e.to_string()))?;
            let x_size = match rec.x_size.as_str() {
                "continuous" => None,
                x => Some(x.parse().map_err(|_| ScenarioError::field("x_size", format!("bad value `{x}`")))?),
            };
            Ok(BatchRow {
                seed: rec.seed,
                n: rec.n,
                d: rec.d,
                x_size,
                policy: rec.policy,
                steps: rec.steps,
                classification: rec.classification,
                m_star: rec.m_star,
                max_terminal_coalition: rec.max_terminal_coalition,
            })
        })
        .collect()
}
