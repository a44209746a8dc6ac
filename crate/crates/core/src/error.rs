use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown level `{level}` for variable `{variable}`")]
    UnknownLevel { variable: String, level: String },
    #[error("cell {0} listed more than once")]
    DuplicateCell(String),
    #[error("count {count} for cell {cell} is not a nonnegative integer")]
    InvalidCount { cell: String, count: f64 },
    #[error("cell tuple has {got} levels, schema has {expected} variables")]
    CellArity { expected: usize, got: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("table has zero total mass")]
    ZeroTotal,
    #[error("variable subset is empty")]
    EmptySubset,
    #[error("target and conditioning variables overlap")]
    OverlappingSubsets,
    #[error("tables are defined on different schemas")]
    SchemaMismatch,
    #[error("expected a normalized distribution")]
    NotADistribution,
    #[error("divergence is infinite: mass at {0} where the reference is zero")]
    SupportViolation(String),
    #[error("invalid constraint {index}: {reason}")]
    InvalidConstraint { index: usize, reason: String },
    #[error("invalid projection settings: {0}")]
    InvalidSpec(String),
    #[error("constraint set is infeasible: constraint {constraint} ({description}) stalled at residual {residual:e}")]
    Infeasible {
        constraint: usize,
        description: String,
        residual: f64,
    },
    #[error("confounder profile {profile} is unobserved in group {group}; parity cannot be enforced without regularization")]
    UnobservedProfile { group: String, profile: String },
    #[error("schema lacks a {0} variable")]
    MissingRole(&'static str),
    #[error("odds in reference group {0} are undefined or zero")]
    UndefinedReferenceOdds(String),
    #[error("conditional probability is undefined: {0}")]
    UndefinedConditional(String),
    #[error("Mantel-Haenszel denominator is zero")]
    ZeroDenominator,
    #[error("expected count is zero in cell ({row}, {col})")]
    ZeroExpectedCount { row: usize, col: usize },
    #[error("p-values require integer counts")]
    NonIntegerCounts,
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
}
