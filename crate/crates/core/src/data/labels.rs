use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{MdcrError, Result};
use crate::scalar::Scalar;

/// 0-based class id per instance, together with the number of classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    class_count: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(MdcrError::Empty("label vector"));
        }
        if class_count == 0 {
            return Err(MdcrError::InvalidArgument("class count must be >= 1".into()));
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count)
        {
            return Err(MdcrError::LabelOutOfRange {
                index,
                label,
                classes: class_count,
            });
        }
        Ok(Self {
            labels,
            class_count,
        })
    }

    /// Class count taken as `max(label) + 1`; every class must occur.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let class_count = labels.iter().max().map_or(0, |m| m + 1);
        let v = Self::new(labels, class_count)?;
        v.ensure_all_classes_present()?;
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Training data must reference every class at least once.
    pub fn ensure_all_classes_present(&self) -> Result<()> {
        match self.histogram().iter().position(|&c| c == 0) {
            Some(class) => Err(MdcrError::EmptyClass(class)),
            None => Ok(()),
        }
    }

    pub(crate) fn select(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }
}

/// Maps raw integer labels (e.g. 1-based category ids) onto contiguous
/// 0-based class ids, ordered by raw value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    raw_values: Vec<i64>,
}

impl LabelMap {
    pub fn fit(raw: &[i64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(MdcrError::Empty("label file"));
        }
        let raw_values: Vec<i64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        Ok(Self { raw_values })
    }

    pub fn class_count(&self) -> usize {
        self.raw_values.len()
    }

    pub fn raw_values(&self) -> &[i64] {
        &self.raw_values
    }

    /// True when the mapping is the identity on `0..c`.
    pub fn is_identity(&self) -> bool {
        self.raw_values
            .iter()
            .enumerate()
            .all(|(i, &r)| i64::try_from(i) == Ok(r))
    }

    pub fn apply(&self, raw: &[i64]) -> Result<LabelVector> {
        let labels = raw
            .iter()
            .enumerate()
            .map(|(i, r)| {
                self.raw_values.binary_search(r).map_err(|_| {
                    MdcrError::InvalidArgument(format!(
                        "label {r} at line {} was not seen in the training labels",
                        i + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LabelVector::new(labels, self.class_count())
    }
}

/// One ASCII integer per line; blank lines are ignored.
pub fn load_label_file(path: &Path) -> Result<Vec<i64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim().parse::<i64>().map_err(|_| {
                MdcrError::Format(format!("label file line {}: invalid integer {l:?}", n + 1))
            })
        })
        .collect()
}

pub fn save_label_file(path: &Path, labels: &[usize]) -> Result<()> {
    let mut text = String::with_capacity(labels.len() * 3);
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// One-hot label indicator matrix, `n × c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMatrix<F> {
    values: Array2<F>,
}

impl<F: Scalar> SemanticMatrix<F> {
    pub fn view(&self) -> ArrayView2<'_, F> {
        self.values.view()
    }

    pub fn as_array(&self) -> &Array2<F> {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn classes(&self) -> usize {
        self.values.ncols()
    }
}

/// Row `i` is the standard basis vector `e_{labels[i]}` of length `classes`.
pub fn build_semantic_matrix<F: Scalar>(labels: &[usize], classes: usize) -> Result<SemanticMatrix<F>> {
    let mut values = Array2::zeros((labels.len(), classes));
    for (index, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(MdcrError::LabelOutOfRange {
                index,
                label,
                classes,
            });
        }
        values[[index, label]] = F::one();
    }
    Ok(SemanticMatrix { values })
}
