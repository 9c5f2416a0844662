use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // graph construction
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("node index {index} out of range for a graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("node {0} listed twice in the leader set")]
    DuplicateLeader(usize),
    #[error("leader set is empty")]
    EmptyLeaderSet,
    #[error("follower set is empty")]
    EmptyFollowerSet,
    #[error("partition covers {partition} nodes but the graph has {graph}")]
    PartitionMismatch { partition: usize, graph: usize },

    // spectral
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),
    #[error("Jacobi eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("Fiedler value {0} is outside (0, 1): graph disconnected or partition invalid")]
    FiedlerOutOfRange(f64),
    #[error("Fiedler eigenvector has mixed signs (most negative entry {0:e})")]
    SignIndefinite(f64),
    #[error("semi-normalized scaling is not positive at node {node} ({value})")]
    SingularScaling { node: usize, value: f64 },

    // identifiability
    #[error("leader {0} has no neighbors")]
    IsolatedLeader(usize),
    #[error("vector length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    // sequence generation
    #[error("infeasible sequence config: {0}")]
    InfeasibleConfig(String),

    // dynamics
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("external input does not match the leader set: {0}")]
    InputMismatch(String),
    #[error("RK4 step {dt} exceeds the stability bound {bound} (2.785 / lambda_max)")]
    UnstableStep { dt: f64, bound: f64 },
    #[error("non-finite state at t = {0}")]
    NonFiniteState(f64),
    #[error("grounded Laplacian is singular: some component has no leader")]
    SingularSystem,
    #[error("time {t} is outside the recorded horizon [0, {t_final}]")]
    TimeOutOfRange { t: f64, t_final: f64 },

    // tempo
    #[error("reference agent {0} has zero velocity")]
    ZeroReferenceVelocity(usize),
    #[error("all agent velocities are zero: nothing to estimate")]
    AllVelocitiesZero,
    #[error("estimate has no gap: all entries equal")]
    DegenerateEstimate,
    #[error("estimate contains a non-finite entry at node {0}")]
    NonFiniteEstimate(usize),
}
