//! MCMC sampling of balanced, connected graph partitions.
//!
//! A partition of a graph into `d` connected, population-balanced districts is
//! represented by a spanning forest with one tree per district.  The sampler
//! walks on that forest space with two reversible kernels: a 1-tree walk that
//! rewires a single district's tree in place, and a Metropolized 2-tree walk
//! that merges two adjacent districts through a temporary cycle and re-splits
//! them.  A tunable exponent `gamma` interpolates the target distribution
//! between "uniform over spanning forests" (`gamma = 0`) and "uniform over
//! partitions" (`gamma = 1`), optionally tilted by population and compactness
//! scores and by edge weights.
//!
//! The crate also ships an exact enumerator for small instances, used to
//! validate the sampler end to end, and convergence diagnostics for multi-chain
//! runs.

pub mod chain;
pub mod diagnostics;
pub mod energy;
pub mod enumerate;
pub mod forest;
pub mod graph;
pub mod state;
pub mod walks;

pub use chain::{
    chain_rng, read_log, run_to_writer, ChainConfig, ChainError, LogRecord, Observable,
    RunHeader, RunSummary, SampleRecord, VoteShareSet,
};
pub use diagnostics::{
    ess_steps, gelman_rubin, max_pairwise_ranked_tv, proposal_profile, tv_distance, GelmanRubin,
    Histogram, HistogramSpec, ProposalProfile,
};
pub use energy::{DistrictStats, MeasureSpec, PopScore, ScoreBreakdown};
pub use enumerate::{enumerate_partitions, exact_partition_distribution, PartitionTable};
pub use forest::DynamicForest;
pub use graph::{Edge, Graph, GraphKeys, LatticeKind, Vertex};
pub use state::{ForestState, PopBounds};
pub use walks::{KernelKind, StepOutcome};
