use thiserror::Error;

/// Errors raised by model construction, program compilation and the solvers.
///
/// Vertex numbers carried in messages are 1-based, matching the labels callers
/// use when building graphs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph contains a directed cycle: {}", format_cycle(.0))]
    CycleDetected(Vec<usize>),
    #[error("invalid vertex {vertex} (graph has {n} vertices)")]
    InvalidVertex { vertex: usize, n: usize },
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("coordinate subset is empty")]
    EmptySubset,
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid structural causal model: {0}")]
    InvalidScm(String),
    #[error("mechanism of vertex {vertex} is undefined at input {input}")]
    MechanismUndefined { vertex: usize, input: String },
    #[error("pushforward needs {combinations} noise combinations, cap is {cap}")]
    SupportExplosion { combinations: u128, cap: u128 },
    #[error("cost matrix has no entry for pair {0}")]
    MissingPair(String),
    #[error("matrix is not symmetric at ({i}, {j})")]
    AsymmetricInput { i: usize, j: usize },
    #[error("matrix has a negative entry at ({i}, {j})")]
    NegativeEntry { i: usize, j: usize },
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("source measure is not compatible with the graph (vertex {vertex})")]
    MuNotCompatible { vertex: usize },
    #[error("{which} marginal is not compatible with the graph (vertex {vertex})")]
    MarginalNotCompatible { which: &'static str, vertex: usize },
    #[error("kernel for block {block} is not a coupling of its conditional rows")]
    InfeasibleKernel { block: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("transportation polytope {rows}x{cols} exceeds the enumeration cap {cap}x{cap}")]
    DimensionCap { rows: usize, cols: usize, cap: usize },
    #[error("too many vertices in transportation polytope (more than {0})")]
    VertexCap(usize),
    #[error("kernel-vertex enumeration exceeds the cap of {0} selections")]
    EnumerationCap(u64),
    #[error("edge set of the first graph is not contained in the second")]
    NotASubgraph,
    #[error("distance between measures {0} and {1} is not certified globally optimal")]
    NonGlobalStatus(usize, usize),
    #[error("parent tuple {0} lacks a treatment arm; interventional mean undefined")]
    MissingArm(String),
    #[error("measure is not compatible with the graph (vertex {vertex})")]
    NotCompatible { vertex: usize },
    #[error("pair {pair} is outside the propensity band [{delta}, 1 - {delta}]")]
    GateFailed { pair: usize, delta: f64 },
    #[error("models are defined on different graphs")]
    DagMismatch,
    #[error("coordinate {0} carries no real embedding")]
    NoEmbedding(usize),
    #[error("invalid treatment/outcome specification: {0}")]
    InvalidAteSpec(String),
    #[error("parse error: {0}")]
    Parse(String),
}

fn format_cycle(cycle: &[usize]) -> String {
    cycle
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" -> ")
}

pub type Result<T> = std::result::Result<T, Error>;
