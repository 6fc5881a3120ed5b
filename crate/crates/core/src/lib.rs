//! Batch decompositions and similarity-bounded subsets of random datasets
//! with corrupted entries.
//!
//! A dataset is a sequence of points with a continuous part (possibly
//! corrupted, i.e. missing) and a categorical part. Points are similar when
//! their categories agree and either one is corrupted or both lie within
//! distance `r_n`. The crate provides:
//!
//! - [`dataset`]: the random model,
//! - [`io`]: CSV and TOML file formats,
//! - [`similarity`]: the similarity graph with a brute-force oracle,
//! - [`decomposition`]: k-good batch decompositions (greedy, local-lemma
//!   resampling, exact search, lower bounds),
//! - [`subsets`]: maximum subsets with similarity at most `k - 1`,
//! - [`theory`]: closed-form scales and bounds,
//! - [`harness`]: reproducible Monte Carlo experiments and reports.

pub mod dataset;
pub mod decomposition;
pub mod error;
pub mod harness;
pub mod io;
pub mod order;
pub mod rng;
pub mod similarity;
pub mod subsets;
pub mod theory;

pub use dataset::{generate, CategoricalSpec, DataPoint, Dataset, DensitySpec, GeneratorConfig, P0Means};
pub use error::{Error, ParseIssue, Result};
pub use similarity::{is_similar, DegreeStats, SimilarityGraph};
pub use decomposition::{BatchDecomposition, ValidityReport};
pub use order::Order;
pub use subsets::{SubsetMethod, SubsetResult};
