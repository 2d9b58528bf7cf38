//! Random projection trees and forests for approximate k-nearest-neighbor
//! search, with four split-direction strategies and a harness that
//! measures them against an exact oracle.
//!
//! ```
//! use rpforest::{build_forest, gen_gaussian_blobs, Method, StrategyConfig, TreeConfig};
//!
//! let data = gen_gaussian_blobs(500, 3, &[vec![0.0; 3], vec![5.0; 3]], 1.0, 7).unwrap();
//! let cfg = TreeConfig::new(StrategyConfig::new(Method::MaxDispersion));
//! let forest = build_forest(&data, &cfg, 10, 42).unwrap();
//! let hits = forest.query_knn(&data, data.point(0), 5, Some(0)).unwrap();
//! assert_eq!(hits.len(), 5);
//! ```

pub mod data;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod metrics;
pub mod oracle;
pub mod primitives;
pub mod rng;
pub mod stats;
pub mod strategy;
pub mod tree;

pub use data::{gen_concentric_rings, gen_gaussian_blobs, load_csv, DatasetSpec};
pub use error::{Error, Result};
pub use experiment::{run_experiment, run_experiment_grid, ExperimentConfig, ResultRow};
pub use forest::{build_forest, Neighbor, NeighborList, RpForest};
pub use metrics::{distance_error, missing_rate, EvalReport};
pub use oracle::{all_true_neighbors, exact_knn};
pub use primitives::{Dataset, DirectionVector, PointId};
pub use rng::SeedStream;
pub use stats::{two_sample_ttest, TTestResult};
pub use strategy::{choose_direction, DirectionChoice, Method, StrategyConfig};
pub use tree::{build_tree, RpNode, RpTree, TreeConfig};
