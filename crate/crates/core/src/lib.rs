//! Fission clustering.
//!
//! A dataset is split recursively at the maximal crack of its distance
//! matrix (the widest gap between adjacent entries of any sorted row) until
//! every piece is tighter than its nearest-neighbour radius. The KNN variant
//! first strips sparse points by local density, clusters the dense remainder,
//! and then attaches the stripped points to their nearest cluster.
//!
//! ```
//! use fission::{distance_matrix, fission_cluster, Dataset, Metric, StopRule};
//!
//! let ds = Dataset::new("line", vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]]).unwrap();
//! let dm = distance_matrix(&ds, Metric::Euclidean).unwrap();
//! let partition = fission_cluster(&dm, StopRule::Global).unwrap();
//! assert_eq!(partition.labels, vec![0, 0, 1, 1]);
//! ```

pub mod cli;
pub mod datagen;
pub mod density;
pub mod error;
pub mod evaluation;
pub mod fission_core;
pub mod metricspace;
pub mod rng;

pub use error::{Error, ErrorCategory, Result};
pub use fission_core::{
    d_zero, fission_cluster, fission_subset, gap_table, maximal_crack, split_at_crack,
    subset_max_crack, CrackLocation, GapTable, Partition, SplitRecord, StopRule, Subset,
    ThresholdMode,
};
pub use metricspace::{distance, distance_matrix, validate_triangle, Dataset, DistanceMatrix, Metric};
pub use density::{
    assign_remainder, denoise, fc_knn, knn_density, DenoiseResult, DensityVector, FcKnnOutcome,
    FcParams, NeighborCount,
};
pub use datagen::{generate, load_csv, load_labels, save_csv, save_labels, GenSpec};
pub use evaluation::{accuracy, evaluate, f_score, EvalReport};
