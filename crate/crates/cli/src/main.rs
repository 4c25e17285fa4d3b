//! `delib`: run deliberations, enumerate transitions, query the oracle and
//! batch random experiments from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation error, 3 solver or cap
//! failure (including a run that reaches its step cap).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use delib_core::engine::{self, EngineError, GeneratorConfig};
use delib_core::oracle::{self, ExploreCaps};
use delib_core::scenario_io::{self, ScenarioError, FIXTURE_NAMES};
use delib_core::transitions;
use delib_core::{Classification, Policy, Scenario, Selector, Space, Structure, TransitionKind};

#[derive(Parser, Debug)]
#[command(name = "delib", version, about = "Coalition formation by deliberation")]
struct Cli {
    /// Output format for stdout.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one deliberation and report its terminal structure.
    Run(RunArgs),
    /// List the transitions available from the initial structure.
    Transitions(TransitionsArgs),
    /// Report the maximum support and optionally explore the state graph.
    Oracle(OracleArgs),
    /// Run seeded random experiments and write a CSV summary.
    Batch(BatchArgs),
    /// List or print the built-in example scenarios.
    Fixtures(FixturesArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Built-in fixture name (see `delib fixtures --list`).
    #[arg(long)]
    fixture: Option<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Transition kinds: `,` joins kinds in a tier, `>` orders tiers.
    #[arg(long)]
    policy: String,
    /// Seed for the uniform random selector.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `uniform_random` or `first_enumerated`.
    #[arg(long, default_value = "uniform_random")]
    selector: String,
    /// Maximum number of steps (default 10·n²).
    #[arg(long)]
    step_cap: Option<usize>,
    /// Write the JSON trace here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TransitionsArgs {
    #[command(flatten)]
    source: Source,
    /// Comma-separated transition kinds (default: all).
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<String>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    source: Source,
    /// Explore every structure reachable from the initial one.
    #[arg(long)]
    explore: bool,
    /// Comma-separated transition kinds for exploration (default: all).
    #[arg(long, value_delimiter = ',', requires = "explore")]
    kinds: Vec<String>,
    /// Stop exploring after this many states.
    #[arg(long, default_value_t = oracle::DEFAULT_STATE_CAP, requires = "explore")]
    max_states: usize,
    /// Compare every explored state against the brute-force relation.
    #[arg(long, requires = "explore")]
    check_equivalence: bool,
}

#[derive(Args, Debug)]
struct BatchArgs {
    /// Generator preset (finite, line, small, continuous) or a JSON config file.
    #[arg(long = "gen")]
    generator: String,
    /// Policies separated by `;` or given as repeated flags.
    #[arg(long, required = true, value_delimiter = ';')]
    policies: Vec<String>,
    /// Inclusive seed range `A..B`, or a single seed.
    #[arg(long)]
    seeds: String,
    /// `uniform_random` or `first_enumerated`.
    #[arg(long, default_value = "uniform_random")]
    selector: String,
    /// Write the CSV summary here (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct FixturesArgs {
    /// Print the fixture names.
    #[arg(long)]
    list: bool,
    /// Print the scenario JSON of a fixture.
    #[arg(long, value_name = "NAME")]
    dump: Option<String>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{message}")]
    Validation { code: String, message: String },
    #[error(transparent)]
    Core(#[from] delib_core::Error),
    /// The command completed but hit a configured cap; output was produced.
    #[error("{0}")]
    Cap(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation { .. } => 2,
            CliError::Core(delib_core::Error::Policy(_) | delib_core::Error::Engine(EngineError::BadStepCap)) => 1,
            CliError::Core(e) if e.is_solver_or_cap() => 3,
            CliError::Core(_) => 2,
            CliError::Cap(_) => 3,
        }
    }

    fn code(&self) -> String {
        match self {
            CliError::Usage(_) => "usage".into(),
            CliError::Validation { code, .. } => code.clone(),
            CliError::Core(delib_core::Error::Scenario(e)) => e.code(),
            CliError::Core(e) if e.is_solver_or_cap() => "solver".into(),
            CliError::Core(delib_core::Error::Policy(_) | delib_core::Error::Engine(EngineError::BadStepCap)) => {
                "usage".into()
            }
            CliError::Core(_) => "validation".into(),
            CliError::Cap(_) => "cap".into(),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::UnknownFixture(_) => CliError::Usage(e.to_string()),
            other => CliError::Validation { code: other.code(), message: other.to_string() },
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DELIB_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let format = cli.format;
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, format),
        Command::Transitions(a) => cmd_transitions(a, format),
        Command::Oracle(a) => cmd_oracle(a, format),
        Command::Batch(a) => cmd_batch(a, format),
        Command::Fixtures(a) => cmd_fixtures(a, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code())
        }
    }
}

fn emit(format: Format, text: &str, value: Value) {
    match format {
        Format::Text => print!("{text}"),
        Format::Json => println!("{}", serde_json::to_string_pretty(&value).expect("serializable")),
    }
}

fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Validation { code: "io".into(), message: format!("{}: {e}", path.display()) }
}

fn load(source: &Source) -> Result<Scenario, CliError> {
    match (&source.scenario, &source.fixture) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            Ok(scenario_io::load_scenario(&text)?)
        }
        (None, Some(name)) => Ok(scenario_io::builtin_fixture(name)?),
        (None, None) => Err(CliError::Usage("one of --scenario or --fixture is required".into())),
    }
}

fn scenario_label(scenario: &Scenario, source: &Source) -> Option<String> {
    scenario.name.clone().or_else(|| source.fixture.clone())
}

fn parse_kinds(kinds: &[String]) -> Result<Vec<TransitionKind>, CliError> {
    if kinds.is_empty() {
        return Ok(TransitionKind::ALL.to_vec());
    }
    kinds.iter().map(|k| k.parse().map_err(|e: transitions::UnknownKind| CliError::Usage(e.to_string()))).collect()
}

fn parse_selector(s: &str) -> Result<Selector, CliError> {
    s.parse().map_err(|e: engine::PolicyError| CliError::Usage(e.to_string()))
}

fn parse_policy(raw: &str, selector: Selector, seed: u64) -> Result<Policy, CliError> {
    Policy::parse(raw, selector, seed).map_err(|e| CliError::Usage(format!("policy `{raw}`: {e}")))
}

fn parse_seeds(raw: &str) -> Result<std::ops::RangeInclusive<u64>, CliError> {
    let bad = || CliError::Usage(format!("seeds `{raw}`: expected A..B or a single seed"));
    let (a, b) = match raw.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let s = raw.trim().parse().map_err(|_| bad())?;
            (s, s)
        }
    };
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

fn structure_text(space: &Space, d: &Structure) -> String {
    d.canonical()
        .coalitions
        .iter()
        .map(|c| {
            let ids: Vec<&str> = c.members.iter().map(|&v| space.agent_id(v)).collect();
            format!("{{{}}}@{}", ids.join(","), space.proposal_label(&c.proposal))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_run(a: RunArgs, format: Format) -> Result<(), CliError> {
    let scenario = load(&a.source)?;
    let policy = parse_policy(&a.policy, parse_selector(&a.selector)?, a.seed)?;
    let space = &scenario.space;
    let cap = a.step_cap.unwrap_or_else(|| engine::default_step_cap(space.n_agents()));
    let trace = engine::run(space, &scenario.initial, &policy, cap).map_err(delib_core::Error::from)?;
    if let Some(path) = &a.out {
        let text = scenario_io::write_trace(scenario_label(&scenario, &a.source).as_deref(), space, &trace);
        std::fs::write(path, text).map_err(|e| io_error(path, e))?;
    }
    let class = trace.classification.name().to_uppercase();
    let mut text = format!("terminal after {} steps: {} (m*={})\n", trace.len(), class, trace.max_support);
    text.push_str(&format!("terminal structure: {}\n", structure_text(space, &trace.terminal)));
    emit(
        format,
        &text,
        json!({
            "policy": policy.to_string(),
            "seed": a.seed,
            "step_cap": cap,
            "steps": trace.len(),
            "classification": trace.classification,
            "m_star": trace.max_support,
            "terminal": scenario_io::structure_to_specs(space, &trace.terminal),
        }),
    );
    if trace.classification == Classification::StepCapReached {
        return Err(CliError::Cap(format!("step cap of {cap} reached before a terminal structure")));
    }
    Ok(())
}

fn cmd_transitions(a: TransitionsArgs, format: Format) -> Result<(), CliError> {
    let scenario = load(&a.source)?;
    let kinds = parse_kinds(&a.kinds)?;
    let space = &scenario.space;
    let mut text = String::new();
    let mut entries = Vec::new();
    for kind in kinds {
        let found = transitions::enumerate(kind, &scenario.initial, space).map_err(delib_core::Error::from)?;
        let described: Vec<String> = found.iter().map(|t| t.describe(space)).collect();
        text.push_str(&format!("{kind}: {}\n", found.len()));
        for line in &described {
            text.push_str(&format!("  {line}\n"));
        }
        entries.push(json!({ "kind": kind, "count": found.len(), "transitions": described }));
    }
    emit(format, &text, Value::Array(entries));
    Ok(())
}

fn cmd_oracle(a: OracleArgs, format: Format) -> Result<(), CliError> {
    let scenario = load(&a.source)?;
    let space = &scenario.space;
    let report = space.max_support().map_err(delib_core::Error::from)?;
    let witnesses: Vec<String> = report.witnesses.iter().map(|p| space.proposal_label(p)).collect();
    let mut text = format!("m*={} witnesses=[{}]\n", report.max_support, witnesses.join(","));
    let mut value = json!({ "m_star": report.max_support, "witnesses": witnesses });
    let mut truncated = false;
    if a.explore {
        let kinds = parse_kinds(&a.kinds)?;
        let caps = ExploreCaps { max_states: a.max_states, ..ExploreCaps::default() };
        let r = oracle::explore(space, &scenario.initial, &kinds, caps, a.check_equivalence)
            .map_err(delib_core::Error::from)?;
        truncated = r.truncated;
        let names: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
        text.push_str(&format!(
            "explore [{}]: states={} edges={} terminals={} successful={} unsuccessful={} acyclic={} order_violations={} truncated={}\n",
            names.join(","),
            r.states,
            r.edges,
            r.terminals.len(),
            r.successful_terminals,
            r.unsuccessful_terminals,
            r.acyclic,
            r.order_violations,
            r.truncated,
        ));
        if let Some(m) = r.equivalence_mismatches {
            text.push_str(&format!("equivalence mismatches: {m}\n"));
        }
        let path: Option<Vec<Value>> = r.unsuccessful_path.as_ref().map(|steps| {
            steps.iter().map(|s| json!({ "kind": s.kind, "structure": structure_text(space, &s.state) })).collect()
        });
        if let Some(steps) = &r.unsuccessful_path {
            text.push_str(&format!("unsuccessful path from {}:\n", structure_text(space, &scenario.initial)));
            for s in steps {
                text.push_str(&format!("  {} -> {}\n", s.kind, structure_text(space, &s.state)));
            }
        }
        value["explore"] = json!({
            "kinds": names,
            "states": r.states,
            "edges": r.edges,
            "terminals": r.terminals.len(),
            "successful_terminals": r.successful_terminals,
            "unsuccessful_terminals": r.unsuccessful_terminals,
            "acyclic": r.acyclic,
            "order_violations": r.order_violations,
            "truncated": r.truncated,
            "equivalence_mismatches": r.equivalence_mismatches,
            "unsuccessful_path": path,
        });
    }
    emit(format, &text, value);
    if truncated {
        return Err(CliError::Cap(format!("exploration stopped at the state cap of {}", a.max_states)));
    }
    Ok(())
}

fn load_generator(raw: &str) -> Result<GeneratorConfig, CliError> {
    if let Some(config) = GeneratorConfig::preset(raw) {
        return Ok(config);
    }
    let path = PathBuf::from(raw);
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "--gen `{raw}` is neither a preset ({}) nor a file",
            GeneratorConfig::PRESETS.join(", ")
        )));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    let config: GeneratorConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation { code: "parse".into(), message: format!("{raw}: {e}") })?;
    let invalid = |m: &str| CliError::Validation { code: "field".into(), message: format!("{raw}: {m}") };
    if config.dims.is_empty() || config.dims.contains(&0) {
        return Err(invalid("dims must be non-empty positive dimensions"));
    }
    if config.n_max == 0 || config.n_min > config.n_max {
        return Err(invalid("need 1 ≤ n_max and n_min ≤ n_max"));
    }
    if !config.continuous && (config.x_max == 0 || config.x_min > config.x_max) {
        return Err(invalid("need 1 ≤ x_max and x_min ≤ x_max"));
    }
    if !(config.offset >= 0.0 && config.spread > 0.0 && config.offset.is_finite() && config.spread.is_finite()) {
        return Err(invalid("offset must be ≥ 0 and spread > 0"));
    }
    Ok(config)
}

fn cmd_batch(a: BatchArgs, format: Format) -> Result<(), CliError> {
    let config = load_generator(&a.generator)?;
    let selector = parse_selector(&a.selector)?;
    let policies: Vec<Policy> = a
        .policies
        .iter()
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| parse_policy(p, selector, 0))
        .collect::<Result<_, _>>()?;
    if policies.is_empty() {
        return Err(CliError::Usage("--policies needs at least one policy".into()));
    }
    let seeds = parse_seeds(&a.seeds)?;
    let rows = engine::batch(&config, &policies, seeds).map_err(delib_core::Error::from)?;
    let csv = scenario_io::write_summary(&rows);
    match &a.out {
        Some(path) => std::fs::write(path, &csv).map_err(|e| io_error(path, e))?,
        None if format == Format::Text => print!("{csv}"),
        None => {}
    }
    let stats = engine::aggregate(&rows);
    let mut text = String::new();
    if a.out.is_some() {
        for s in &stats {
            text.push_str(&format!(
                "{}: {}/{} successful, {} at step cap, max {} steps\n",
                s.policy, s.successful, s.runs, s.step_cap_reached, s.max_steps
            ));
        }
    }
    emit(format, &text, json!({ "rows": rows.len(), "policies": stats }));
    let capped: usize = stats.iter().map(|s| s.step_cap_reached).sum();
    if capped > 0 {
        return Err(CliError::Cap(format!("{capped} run(s) reached the step cap")));
    }
    Ok(())
}

fn cmd_fixtures(a: FixturesArgs, format: Format) -> Result<(), CliError> {
    if a.list {
        let text: String = FIXTURE_NAMES.iter().map(|n| format!("{n}\n")).collect();
        emit(format, &text, json!(FIXTURE_NAMES));
        return Ok(());
    }
    let name = a.dump.as_deref().unwrap_or_default();
    let source = scenario_io::fixture_source(name)
        .ok_or_else(|| CliError::Usage(format!("unknown fixture `{name}`")))?;
    match format {
        Format::Text => print!("{source}"),
        Format::Json => {
            let value: Value = serde_json::from_str(source).expect("fixtures are valid JSON");
            println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
        }
    }
    Ok(())
}
