//! Linear multiset canonical correlation analysis (MCCA) and its deep,
//! mini-batch-trained extension (dMCCA).
//!
//! The numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the double-precision types most callers want.

pub mod binio;
pub mod dmcca;
pub mod error;
pub mod linalg;
pub mod mcca;
pub mod metrics;
pub mod scalar;
pub mod synthgen;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type Dataset64 = mcca::MultimodalDataset<f64>;
pub type Dataset32 = mcca::MultimodalDataset<f32>;
pub type Bundle64 = mcca::CovarianceBundle<f64>;
pub type Solution64 = mcca::IscSolution<f64>;
pub type Branch64 = dmcca::BranchNetwork<f64>;
pub type Branch32 = dmcca::BranchNetwork<f32>;
pub type TrainConfig64 = dmcca::TrainConfig<f64>;
pub type TrainRun64 = dmcca::TrainRun<f64>;
pub type SynthData64 = synthgen::SynthDataset<f64>;
