use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: size {size} exceeds cap {cap}")]
    CapExceeded { what: &'static str, size: u128, cap: u128 },
    #[error("cover has no sets")]
    EmptyCover,
    #[error("covers live on different point sets ({0} vs {1})")]
    MismatchedPointSets(usize, usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("window of radius {available} cannot support a shift of norm {needed}")]
    InsufficientMargin { needed: i64, available: i64 },
    #[error("site subset is not invariant under the site map")]
    NotInvariant,
    #[error("rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },
    #[error("counterexample to expansivity: points {0} and {1} stay within 2c")]
    CounterexampleFound(usize, usize),
    #[error("expansivity inconclusive: {0}")]
    Inconclusive(String),
    #[error("no admissible value found up to {0}")]
    NotFoundWithin(i64),
    #[error("boundary gap collapsed below resolution at N = {n}")]
    GapCollapse { n: i64 },
    #[error("generators do not commute")]
    NonCommuting,
    #[error("matrix has an eigenvalue on the unit circle")]
    NonHyperbolic,
    #[error("quasi-metric axiom fails at ({0}, {1}, {2})")]
    QuasiAxiomViolation(usize, usize, usize),
    #[error("points {0} and {1} are not separated within the search window")]
    Unresolved(usize, usize),
    #[error("invalid tower parameters: {0}")]
    InvalidParams(String),
    #[error("template does not fit: {0}")]
    TemplateDoesNotFit(String),
    #[error("density {0} not achievable at this quantization")]
    DensityUnachievable(f64),
    #[error("witness map contracts a sampled pair: {input} > {output}")]
    WitnessViolation { input: f64, output: f64 },
    #[error("window too short: {0}")]
    WindowTooShort(String),
    #[error("degenerate scale ladder: {0}")]
    DegenerateLadder(String),
    #[error("assertion failed: {0}")]
    AssertionFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
