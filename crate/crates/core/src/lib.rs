//! Coalition formation by deliberation in metric spaces.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what scenario files use.

pub mod coalition;
pub mod engine;
pub mod geometry;
mod linalg;
pub mod oracle;
pub mod scalar;
pub mod scenario_io;
pub mod space;
pub mod transitions;

pub use coalition::{Signature, Violation};
pub use engine::{Classification, Policy, Selector};
pub use scalar::Scalar;
pub use space::{AgentIdx, AgentSet};
pub use transitions::TransitionKind;

pub type Point = geometry::Point<f64>;
pub type Metric = geometry::Metric<f64>;
pub type Location = geometry::Location<f64>;
pub type FeasibilityResult = geometry::FeasibilityResult<f64>;
pub type Space = space::DeliberationSpace<f64>;
pub type Proposal = space::Proposal<f64>;
pub type SupportReport = space::SupportReport<f64>;
pub type Coalition = coalition::DeliberativeCoalition<f64>;
pub type Structure = coalition::CoalitionStructure<f64>;
pub type Transition = transitions::Transition<f64>;
pub type RunTrace = engine::RunTrace<f64>;
pub type Scenario = scenario_io::Scenario<f64>;
pub type ExploreReport = oracle::ExploreReport<f64>;

/// Any failure the library reports.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Solver(#[from] geometry::SolverError),
    #[error(transparent)]
    Space(#[from] space::SpaceError),
    #[error(transparent)]
    Transition(#[from] transitions::TransitionError),
    #[error(transparent)]
    Policy(#[from] engine::PolicyError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
    #[error(transparent)]
    Scenario(#[from] scenario_io::ScenarioError),
}

impl Error {
    /// Whether the failure comes from a solver or a configured cap rather
    /// than from invalid input.
    pub fn is_solver_or_cap(&self) -> bool {
        use engine::EngineError as E;
        use space::SpaceError as S;
        use transitions::TransitionError as T;
        let space = |e: &S| matches!(e, S::Solver(_) | S::OracleCapExceeded { .. });
        let transition = |e: &T| match e {
            T::SubsetCapExceeded { .. } => true,
            T::Space(s) => space(s),
            T::Stale { .. } => false,
        };
        match self {
            Error::Solver(_) => true,
            Error::Space(s) => space(s),
            Error::Transition(t) => transition(t),
            Error::Engine(E::Transition(t)) => transition(t),
            Error::Engine(E::Space(s)) => space(s),
            Error::Engine(E::InvariantBreach { .. }) => true,
            Error::Oracle(oracle::OracleError::TooManyAgents { .. }) => true,
            Error::Oracle(oracle::OracleError::Space(s)) => space(s),
            Error::Oracle(oracle::OracleError::Transition(t)) => transition(t),
            _ => false,
        }
    }
}
