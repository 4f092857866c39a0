use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("unknown player {0}")]
    UnknownPlayer(usize),

    #[error("time {time} is not a payoff time of decision `{decision}`")]
    NotAPayoffTime { decision: String, time: usize },

    #[error("invalid game: {count} violation(s), first: {first}")]
    InvalidGame { count: usize, first: String },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("incomplete assignment: `{0}` is not assigned")]
    IncompleteAssignment(String),

    #[error("value {value} out of range for `{var}` (domain size {size})")]
    ValueOutOfRange { var: String, value: usize, size: usize },

    #[error("factors disagree on the domain size of a shared variable")]
    ScopeMismatch,

    #[error("variable is not in the factor scope")]
    NotInScope,

    #[error("factor table size does not match its scope")]
    BadTableSize,

    #[error("factor entries must be finite")]
    NonFiniteEntry,

    #[error("table of {0} cells exceeds the addressable size")]
    TableOverflow(u128),

    #[error("cell budget exceeded: {needed} cells needed, {budget} allowed")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("network cycle detected")]
    Cyclic,

    #[error("pass `{0}` was already applied to this network")]
    PassAlreadyApplied(String),

    #[error("one-step property violated: edge `{parent}` -> `{child}` spans more than one time step")]
    NotOneStep { parent: String, child: String },

    #[error("`{0}` is not a decision-payoff variable")]
    NotAPayoffVariable(String),

    #[error("empty query")]
    EmptyQuery,

    #[error("player {player} has {decisions} decisions; exactly one is supported")]
    MultiDecisionPlayer { player: usize, decisions: usize },

    #[error("observation context space of `{decision}` has {contexts} configurations, over the budget of {budget}")]
    ContextBudget {
        decision: String,
        contexts: u128,
        budget: usize,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
