//! Paired image/text feature data: matrix files, labels, the one-hot
//! semantic matrix, optional z-scoring, synthetic generation and
//! stratified splitting.

mod labels;
mod matrix;
mod normalize;
mod synthetic;

pub use labels::{
    build_semantic_matrix, load_label_file, save_label_file, LabelMap, LabelVector, SemanticMatrix,
};
pub use matrix::{
    format_text, load_matrix, parse_text, read_binary, save_matrix, write_binary, FeatureMatrix,
    MatrixFormat, BINARY_MAGIC,
};
pub use normalize::{zscore, ColumnStats};
pub use synthetic::{make_synthetic, split, split_indices, SyntheticSpec};

use crate::error::{MdcrError, Result};
use crate::scalar::Scalar;

/// Co-occurring image/text pairs: row `i` of both matrices describes the
/// same instance, labelled `labels[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset<F> {
    images: FeatureMatrix<F>,
    texts: FeatureMatrix<F>,
    labels: LabelVector,
}

impl<F: Scalar> PairedDataset<F> {
    pub fn new(images: FeatureMatrix<F>, texts: FeatureMatrix<F>, labels: LabelVector) -> Result<Self> {
        if images.rows() != texts.rows() || images.rows() != labels.len() {
            return Err(MdcrError::DimensionMismatch(format!(
                "{} image rows, {} text rows, {} labels",
                images.rows(),
                texts.rows(),
                labels.len()
            )));
        }
        Ok(Self {
            images,
            texts,
            labels,
        })
    }

    pub fn images(&self) -> &FeatureMatrix<F> {
        &self.images
    }

    pub fn texts(&self) -> &FeatureMatrix<F> {
        &self.texts
    }

    pub fn labels(&self) -> &LabelVector {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.labels.class_count()
    }

    pub fn semantic_matrix(&self) -> SemanticMatrix<F> {
        build_semantic_matrix(self.labels.as_slice(), self.labels.class_count())
            .expect("labels validated at construction")
    }

    /// Subset in the given row order; `indices` must be nonempty and in range.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(MdcrError::Empty("row selection"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(MdcrError::InvalidArgument(format!(
                "row index {bad} out of range for {} instances",
                self.len()
            )));
        }
        Ok(Self {
            images: self.images.select_rows(indices),
            texts: self.texts.select_rows(indices),
            labels: self.labels.select(indices),
        })
    }

    pub fn into_parts(self) -> (FeatureMatrix<F>, FeatureMatrix<F>, LabelVector) {
        (self.images, self.texts, self.labels)
    }
}
