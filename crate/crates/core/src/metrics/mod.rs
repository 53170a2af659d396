//! Evaluation: subspace affinity, R_a / R_s, k-means, NMI and completeness.

mod affinity;
mod cluster;

pub use affinity::{affinity_report, subspace_affinity, AffinityReport, Centering};
pub use cluster::{
    cluster_report, kmeans, kmeans_with_restarts, nmi_and_completeness, same_partition, ClusterReport, KMeansResult,
    DEFAULT_RESTARTS,
};
