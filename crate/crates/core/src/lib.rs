//! Cross-domain transfer of anomaly detectors between graph ensembles.
//!
//! The pipeline characterises every graph by twelve topological
//! descriptors, ranks descriptors by how *little* they help a classifier
//! tell domains apart (importance inversion), keeps the eight most
//! transferable "anchors" per source/target pair, aligns both domains in a
//! shared SVD basis and finally measures how much an Isolation Forest
//! trained on source + scarce, noisy target data gains over a target-only
//! baseline.

pub mod align;
pub mod anomaly;
pub mod classify;
pub mod error;
pub mod features;
pub mod fmt;
pub mod graph;
pub mod grid;
pub mod iit;
pub mod linalg;
pub mod louvain;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use features::{Feature, FeatureMatrix, FeatureVector, NUM_FEATURES};
pub use graph::{Domain, DomainEnsemble, Graph};
