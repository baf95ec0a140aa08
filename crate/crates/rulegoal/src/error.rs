//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by the core language, buffer and semantics operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("unknown or retired goal id {0}: registry inconsistency")]
    UnknownGoal(u32),
    #[error("action predicate cannot be a member of a state")]
    ActionInState,
    #[error("goal interpretations range over sensor predicates only")]
    GoalInInterpretation,
    #[error("{0} must be non-empty")]
    EmptyState(&'static str),
    #[error("edge would make the goal order cyclic")]
    PosetCycle,
    #[error("goal name `{0}` already in use")]
    DuplicateGoalName(String),
    #[error("the primary goal cannot be retired")]
    RetirePrimary,
    #[error("tuple index {0} out of range (buffer holds {1})")]
    TupleIndex(usize, usize),
    #[error("chain condition violated: post-state of tuple {0} differs from the appended pre-state")]
    ChainBroken(usize),
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("policy refinement precondition violated: {0}")]
    BadRefinement(&'static str),
    #[error("policy steps must share one goal-predicate set")]
    MixedGoalSets,
    #[error("policy must have at least one step")]
    EmptyPolicy,
}

/// Errors raised by the grid-world environment.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("grid {width}x{height} cannot hold {items} items plus the agent")]
    InfeasiblePlacement { width: u32, height: u32, items: u32 },
    #[error("item type count must be at least 1")]
    NoItemTypes,
    #[error("grid dimensions must be positive")]
    EmptyGrid,
    #[error("notify_primary_goal_achieved called without a pending type-k pickup")]
    NoPendingPrimary,
}

/// Errors raised when parsing the textual grammar.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("empty {0} is not allowed")]
    Empty(&'static str),
    #[error("unknown goal name `{0}`")]
    UnknownGoalName(String),
    #[error("{0}")]
    Core(#[from] CoreError),
}

impl ParseError {
    pub fn syntax(line: usize, msg: impl Into<String>) -> Self {
        ParseError::Syntax { line, msg: msg.into() }
    }
}

/// Errors raised while resolving or validating a run configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("failed to read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse config file: {0}")]
    Toml(String),
}

impl ConfigError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ConfigError::Invalid(msg.into())
    }
}
