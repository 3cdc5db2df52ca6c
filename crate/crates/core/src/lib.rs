//! Temporal cluster discovery in dynamic networks.
//!
//! A dynamic network is stored as a sparse, symmetric `node x node x time`
//! count tensor ([`tensor::DynTensor`]). A non-negative symmetric CP
//! decomposition ([`decomp::cp_als`]) factors it into generative models:
//! per-node memberships plus a per-step rate series. Memberships are split
//! into clusters with similarity-guided K-means ([`cluster`]), cluster rate
//! series are reduced to piecewise-linear form ([`lifetime::segment_series`]),
//! and each cluster's lifetime is the set of steps where its fitted rate
//! exceeds a network-wide activity threshold.
//!
//! The remaining modules support controlled experiments: [`synth`] plants
//! ground-truth clusters and samples Poisson edge counts, [`eval`] maps
//! detected clusters onto planted ones and scores them, and [`baseline`]
//! provides the binary-thresholding (BC) and evolutionary spectral (EC)
//! reference methods. [`pipeline`] wires the stages into reproducible,
//! file-backed runs driven by a single seed.

pub mod baseline;
pub mod cluster;
pub mod decomp;
pub mod error;
pub mod eval;
pub mod lifetime;
pub mod pipeline;
pub mod seed;
pub mod synth;
pub mod tensor;

mod kmeans;
mod linalg;

pub use error::{Error, Result};

pub use cluster::{ClusterOptions, ClusterRecord};
pub use decomp::{CpModel, CpOptions, GenerativeModel};
pub use eval::{DetectedView, MetricsReport, TruthView};
pub use lifetime::{LifetimeSet, PiecewiseRate};
pub use synth::{GroundTruth, SynthSpec};
pub use tensor::{DynTensor, EdgeEvent};
