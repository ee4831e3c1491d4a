use thiserror::Error;

/// Errors surfaced by atlas construction, the solvers, and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("atlas vertex cap exceeded ({0} vertices); raise max_atlas_vertices")]
    ResourceLimit(usize),

    #[error("element {0} is not explored to the required radius")]
    Unexplored(u32),

    #[error("operation not supported on the degenerate {{{p},{q}}} skeleton")]
    Degenerate { p: u16, q: u16 },

    #[error("seed vertex set is not connected in the atlas")]
    DisconnectedSeed,

    #[error("input subgraph is not convex")]
    NonConvexInput,

    #[error("triplet violates a validity condition: {0}")]
    InvalidTriplet(&'static str),

    #[error("compatibility check needs a pinning vertex shared between parent and child")]
    AnchorInsufficient,

    #[error("noose does not fit inside the working ball of radius {0}")]
    NooseExceedsBall(u32),

    #[error("oracle requires the atlas explored to radius {needed}, have {have}")]
    RadiusInsufficient { needed: u32, have: u32 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed formula: {0}")]
    MalformedFormula(String),

    #[error("pattern has {0} vertices, above the solver ceiling {1}")]
    PatternTooLarge(usize, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
