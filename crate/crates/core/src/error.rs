use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("labels and masses have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("space has no atoms or cells")]
    EmptySpace,

    #[error("negative mass {value} at atom {index}")]
    NegativeMass { index: usize, value: f64 },

    #[error("masses sum to {0}, outside [1 - 1e-6, 1 + 1e-6]")]
    SumOutOfTolerance(f64),

    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),

    #[error("density function is negative ({value}) at {point:?}")]
    NegativeDensity { point: Vec<f64>, value: f64 },

    #[error("density has zero total mass on the box")]
    ZeroTotalMass,

    #[error("unsupported dimension {0} (grids support 1..=3)")]
    UnsupportedDim(usize),

    #[error("degenerate box on axis {axis}: [{lo}, {hi}]")]
    DegenerateBox { axis: usize, lo: f64, hi: f64 },

    #[error("resolution {res} on axis {axis} is below 2")]
    ResolutionTooSmall { axis: usize, res: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("assignment is not total: label `{0}` has no image")]
    NotTotal(String),

    #[error("interval length must be positive, got {0}")]
    NonpositiveLength(f64),

    #[error("intervals ({a}, {a}+{d}) and ({b}, {b}+{d}) overlap or are empty")]
    OverlappingIntervals { a: f64, b: f64, d: f64 },

    #[error("atoms {j} and {k} have unequal masses {mj} and {mk}")]
    UnequalMasses { j: usize, k: usize, mj: f64, mk: f64 },

    #[error("matrix is not special orthogonal: {0}")]
    NotSpecialOrthogonal(String),

    #[error("map `{0}` has no inverse")]
    MissingInverse(String),

    #[error("map `{0}` has no Jacobian")]
    MissingJacobian(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} lies outside the ball of radius {radius}")]
    OutsideDomain { point: Vec<f64>, radius: f64 },

    #[error("pushed mass outside the target box is {0:.3e} (limit 1e-3)")]
    TargetBoxTooSmall(f64),

    #[error("operation `{op}` is not defined for this map on this space")]
    Unsupported { op: &'static str },

    #[error("label sets differ")]
    LabelMismatch,

    #[error("grids differ in box or resolution")]
    GridMismatch,

    #[error("spaces do not share an ambient space ({0} vs {1})")]
    AmbientMismatch(usize, usize),

    #[error("space has {0} atoms; enumeration is limited to 9")]
    TooLarge(usize),

    #[error("map is not an automorphism: {0}")]
    NotAutomorphism(String),

    #[error("pair is not an exact solution: {0}")]
    NotExactSolution(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    DivergedLoss { step: usize, loss: f64 },

    #[error("a seed sweep needs at least 2 seeds, got {0}")]
    MinSeeds(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
