use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("sample points are all collinear")]
    AllCollinear,
    #[error("duplicate sample point {0} with differing values")]
    DuplicatePoint(String),
    #[error("point {0} lies outside the function domain")]
    OutOfDomain(String),
    #[error("rotation to the segment frame is not rational")]
    IrrationalFrame,
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("scale must be positive")]
    InvalidScale,
    #[error("invalid measure: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("total masses differ: {0} vs {1}")]
    MassMismatch(String, String),
    #[error("empty measure")]
    EmptyMeasure,
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HallError {
    #[error("support matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("Hall condition violated by source set {witness:?}")]
    HallViolation { witness: Vec<usize> },
    #[error("total masses differ: {0} vs {1}")]
    MassMismatch(String, String),
    #[error("expanded instance too large ({0} unit atoms)")]
    TooLarge(usize),
    #[error("invalid support graph: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("K must be positive")]
    ZeroK,
    #[error("gamma must be positive")]
    NonPositiveGamma,
    #[error("gamma is below eps/K")]
    PreconditionGamma,
    #[error("length condition violated: {0}")]
    PreconditionEll(String),
    #[error("scale condition violated: {0}")]
    PreconditionScale(String),
    #[error("angle condition violated: {0}")]
    PreconditionAngle(String),
    #[error("gap must be nonnegative")]
    NegativeGap,
    #[error("not a subgradient: {0}")]
    InvalidSubgradient(String),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AppendixError {
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("invalid dimensions n={0}, d={1}")]
    InvalidDims(usize, usize),
    #[error("d < n/2: bound is vacuous")]
    DimensionBranch,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}
