//! Label propagation for learning with label proportions (LP-LLP).
//!
//! Recovers per-instance binary (or multiclass) labels when only the class
//! proportions of disjoint bags of instances are known. The solver builds a
//! Gaussian similarity graph over all instances, propagates soft labels with
//! the resolvent `(I - alpha S)^-1`, and after each propagation step pulls the
//! soft labels back onto the bag-mass constraints with alternating
//! projections.

pub mod bags;
pub mod dataset;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod projections;
pub mod propagation;
pub mod rng;

pub use bags::{make_bag_structure, BagConstraintSystem, BagStructure};
pub use dataset::{load_dataset_csv, Dataset};
pub use error::{LlpError, Result};
pub use graph::{compute_similarity, row_normalize, RowStochasticGraph};
pub use projections::{
    alternating_projections, project_bag_mass, project_box, project_row_simplex, SoftLabelMatrix,
    SoftLabelVector,
};
pub use propagation::{
    decide_labels, decide_labels_multiclass, lp_llp, lp_llp_multiclass, PropagationConfig,
    PropagationDiagnostics,
};
pub use rng::RngSeed;
