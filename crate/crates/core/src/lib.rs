//! Modality-dependent cross-media retrieval (MDCR).
//!
//! Learns linear projections that map image features and text features into
//! a shared label-dimensional subspace, then ranks one modality against the
//! other by Euclidean distance. Two projection pairs are trained, one per
//! retrieval direction: image query against a text gallery (I2T) and text
//! query against an image gallery (T2I). A single "unified" pair carrying
//! both regression terms is available for comparison.
//!
//! The numerical core is generic over [`Scalar`] (`f32` and `f64`); the
//! `*64` / `*32` aliases below name the concrete instantiations.

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod objective;
pub mod optimizer;
pub mod retrieval;
mod scalar;

pub use data::{
    build_semantic_matrix, load_label_file, load_matrix, make_synthetic, save_label_file,
    save_matrix, split, split_indices, zscore, ColumnStats, FeatureMatrix, LabelMap, LabelVector,
    MatrixFormat, PairedDataset, SemanticMatrix, SyntheticSpec,
};
pub use error::{MdcrError, Result};
pub use eval::{average_precision, mean_ap, pr_curve, EvalOptions, EvalReport, PrPoint};
pub use model::Model;
pub use objective::{task_symmetry_check, Hyperparams, ProjectionPair, Task, TaskObjective};
pub use optimizer::{
    default_config, step_block, train, Block, DatasetPreset, Init, StepPolicy, StopReason,
    TraceEntry, TrainConfig, TrainReport,
};
pub use retrieval::{cross_retrieve, project, rank, Direction, EmbeddedSet, Modality, RankedResult};
pub use scalar::Scalar;

pub type FeatureMatrix64 = FeatureMatrix<f64>;
pub type FeatureMatrix32 = FeatureMatrix<f32>;
pub type SemanticMatrix64 = SemanticMatrix<f64>;
pub type SemanticMatrix32 = SemanticMatrix<f32>;
pub type PairedDataset64 = PairedDataset<f64>;
pub type PairedDataset32 = PairedDataset<f32>;
pub type ColumnStats64 = ColumnStats<f64>;
pub type ColumnStats32 = ColumnStats<f32>;
pub type Hyperparams64 = Hyperparams<f64>;
pub type Hyperparams32 = Hyperparams<f32>;
pub type ProjectionPair64 = ProjectionPair<f64>;
pub type ProjectionPair32 = ProjectionPair<f32>;
pub type TrainConfig64 = TrainConfig<f64>;
pub type TrainConfig32 = TrainConfig<f32>;
pub type TrainReport64 = TrainReport<f64>;
pub type TrainReport32 = TrainReport<f32>;
pub type EmbeddedSet64 = EmbeddedSet<f64>;
pub type EmbeddedSet32 = EmbeddedSet<f32>;
pub type RankedResult64 = RankedResult<f64>;
pub type RankedResult32 = RankedResult<f32>;
pub type Model64 = Model<f64>;
pub type Model32 = Model<f32>;
