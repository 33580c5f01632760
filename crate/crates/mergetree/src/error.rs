use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("empty record set")]
    Empty,
    #[error("duplicate vertex id {0}")]
    DuplicateId(String),
    #[error("vertex {child} names unknown parent {parent}")]
    UnknownParent { child: String, parent: String },
    #[error("no root (every vertex has a parent)")]
    NoRoot,
    #[error("multiple roots {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("cycle detected through {0:?}")]
    Cycle(Vec<String>),
    #[error("non-finite height at {0}")]
    NonFinite(String),
    #[error("non-increasing height on edge ({child},{parent})")]
    NonIncreasing { child: String, parent: String },
    #[error("duplicate heights {0:?}")]
    DuplicateHeights(Vec<String>),
    #[error("root {root} has {children} child(ren), strict mode needs at least 2")]
    RootOrder { root: String, children: usize },
    #[error("unknown vertex id {0}")]
    UnknownVertex(String),
    #[error("perturbation scale must be positive")]
    BadScale,
    #[error("perturbation scale too large: edge ({child},{parent}) would stop increasing")]
    ScaleTooLarge { child: String, parent: String },
    #[error("malformed tree file: {0}")]
    Format(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("empty coupling")]
    Empty,
    #[error("C1 violated: maximal pairs {0:?}")]
    C1(Vec<(String, String)>),
    #[error("C2 violated: vertex {0} coupled more than once")]
    C2(String),
    #[error("C3 violated: pairs ({0},{1}) and ({2},{3}) disagree on order")]
    C3(String, String, String, String),
    #[error("C4 violated at {vertex}: single coupled descendant {witness}")]
    C4 { vertex: String, witness: String },
    #[error("coupling violations: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Many(Vec<CouplingError>),
    #[error("malformed coupling file: {0}")]
    Format(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("negative shift k = {0}")]
    NegativeShift(f64),
    #[error("epsilon {eps} is below the coupling norm {norm}")]
    EpsilonBelowNorm { eps: f64, norm: f64 },
    #[error("point not on tree: {0}")]
    InvalidPoint(String),
    #[error("map fails height law at {vertex}: residual {residual}")]
    HeightLaw { vertex: String, residual: f64 },
    #[error("map is not monotone between {0} and {1}")]
    NotMonotone(String, String),
    #[error("extracted set is not a coupling: {0}")]
    Extraction(#[from] CouplingError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("enumeration cap exceeded: {leaves_t}x{leaves_g} leaves, cap {cap}")]
    CapExceeded { leaves_t: usize, leaves_g: usize, cap: usize },
    #[error("oracle timed out after {0:.1}s")]
    Timeout(f64),
    #[error("decomposition check failed: {0}")]
    Decomposition(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("program is infeasible")]
    Infeasible,
    #[error("missing cost table entry for ({0},{1})")]
    MissingCost(String, String),
    #[error("solver timed out")]
    Timeout,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite value at row {0}")]
    NonFinite(usize),
    #[error("distance matrix is not square/symmetric/zero-diagonal/nonnegative at ({0},{1})")]
    BadMatrix(usize, usize),
    #[error("malformed point cloud: {0}")]
    Format(String),
}
