use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("zero conformal factor: no node carries positive weight")]
    ZeroConformalFactor,

    #[error("factor is not in the admissible domain: node {node} has u = {value}")]
    NotInDomain { node: usize, value: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("kernel warning: eigenvalue {eigenvalue:e} lies within {null_tol:e} of zero")]
    KernelWarning { eigenvalue: f64, null_tol: f64 },

    #[error("first eigenvalue is not simple (gap {gap:e}); support is likely disconnected")]
    FirstNotSimple { gap: f64 },

    #[error("lambda2 cluster collides with lambda1 (gap {gap:e}): nu or connectivity violated")]
    ClusterCollision { gap: f64 },

    #[error("cluster of dimension {dim} exceeds the negative count {nu}; cluster_tol too loose")]
    ClusterTooLarge { dim: usize, nu: usize },

    #[error("need at least two negative eigenvalues, found {nu}")]
    TooFewNegative { nu: usize },

    #[error("root finder failed for target {target:e}")]
    RootFinder { target: f64 },

    #[error("deformation parameter t = {t} outside [-{t_max}, {t_max}]")]
    OutOfRange { t: f64, t_max: f64 },

    #[error("instance has {nodes} support nodes, above the dense limit {limit}")]
    TooLarge { nodes: usize, limit: usize },

    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
