//! Optimal transport between discrete measures and between ensembles of
//! measures, Dirichlet and hierarchical Dirichlet sampling, finite-mixture
//! demixing, and seeded Monte Carlo checks of the resulting bounds.
//!
//! All randomness flows from explicit [`Seed`] values, so every estimate and
//! experiment record is reproducible bit for bit under any thread count.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod deconv;
pub mod error;
pub mod experiments;
pub mod hierarchy;
pub mod kernels;
pub mod measures;
pub mod parallel;
pub mod quad;
pub mod regularity;
pub mod rng;
pub mod sparse;
pub mod stats;
pub mod transport;

pub use deconv::{DemixConfig, DemixResult};
pub use error::{Error, Result};
pub use experiments::{
    run_experiment, write_outputs, ExperimentConfig, ExperimentKind, ExperimentRecord, Status, Verdict,
};
pub use hierarchy::{MeasureEnsemble, NestedTransportResult};
pub use kernels::{KernelFamily, KernelModel};
pub use measures::{BaseMeasure, DPSample, HierarchySample, StickBreakingTruncation};
pub use rng::Seed;
pub use transport::{
    coupling_cost, validate_coupling, wasserstein, wasserstein_distance, Atom, BoundedDomain,
    Coupling, CouplingReport, DiscreteMeasure, TransportResult,
};
