//! Locally differentially private estimation of 2-D spatial distributions.
//!
//! Users hold points in a square domain; each point is bucketized to a grid
//! cell and randomized through a reporting mechanism whose output density is
//! high inside a disk around the true cell and low outside it. The collector
//! aggregates the noisy reports and inverts the reporting kernel with
//! expectation-maximization to recover the spatial histogram. Estimation
//! quality is measured with Wasserstein distances (exact transportation LP,
//! Sinkhorn approximation, and sliced 1-D projections).
//!
//! Modules:
//!
//! - [`grid`] — discrete disk geometry: cell classification around an input
//!   cell, shrunken-rectangle areas, strict-quarter enumeration, and the
//!   discrete high/low reporting densities.
//! - [`mechanism`] — the disk-area and hybrid uniform-exponential reporting
//!   mechanisms, a categorical randomized-response baseline, radius
//!   selection, kernel construction, and samplers.
//! - [`estimate`] — report collection and EM reconstruction.
//! - [`transport`] — exact, Sinkhorn, 1-D, and sliced Wasserstein distances.
//! - [`privacy`] — LDP ratio certification and the expected-inference-error
//!   local privacy metric.
//! - [`data`] — synthetic dataset generators, CSV ingestion, bucketizing.
//!
//! The crate is data-parallel via rayon by default; build with
//! `--no-default-features` for the sequential fallback. Both builds produce
//! bit-identical results for the same seeds.

pub mod data;
pub mod error;
pub mod estimate;
mod exec;
pub mod grid;
pub mod mechanism;
pub mod privacy;
pub mod transport;

pub use data::{bucketize, generate, load_points_csv, BoundingBox, DatasetSpec};
pub use error::{Error, Result};
pub use estimate::{
    collect, em_estimate, run_pipeline, EmConfig, Histogram, NoisyCounts, PipelineResult,
    Smoothing,
};
pub use grid::{build_disk_partition, CellClass, CellIndex, DiskPartition, GridSpec};
pub use mechanism::{
    build_kernel, dam_params, huem_q, optimal_b, sample_continuous, Epsilon, GridSampler, Kernel,
    MechanismKind, ReportingMechanism,
};
pub use privacy::{certify_ldp, local_privacy, privacy_report, PrivacyReport};
pub use transport::{
    sinkhorn, sinkhorn_default, sliced_wasserstein, wasserstein_1d, wasserstein_exact,
    SinkhornOutcome, TransportPlan,
};
