//! Projection into the label space and brute-force Euclidean ranking.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabelVector};
use crate::error::{MdcrError, Result};
use crate::objective::ProjectionPair;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    Image,
    Text,
}

/// Retrieval direction: which modality issues the queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Image queries against a text gallery.
    I2T,
    /// Text queries against an image gallery.
    T2I,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::I2T => "i2t",
            Direction::T2I => "t2i",
        }
    }

    pub fn query_modality(self) -> Modality {
        match self {
            Direction::I2T => Modality::Image,
            Direction::T2I => Modality::Text,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = MdcrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i2t" => Ok(Direction::I2T),
            "t2i" => Ok(Direction::T2I),
            other => Err(MdcrError::InvalidArgument(format!(
                "unknown direction {other:?}, expected i2t or t2i"
            ))),
        }
    }
}

/// Instances of one modality mapped into the c-dimensional common space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSet<F> {
    pub points: Array2<F>,
    pub source: Modality,
    pub labels: Option<LabelVector>,
}

impl<F: Scalar> EmbeddedSet<F> {
    pub fn with_labels(mut self, labels: LabelVector) -> Result<Self> {
        if labels.len() != self.points.nrows() {
            return Err(MdcrError::DimensionMismatch(format!(
                "{} labels for {} embedded points",
                labels.len(),
                self.points.nrows()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

/// `features · projectionᵀ`: row `i` is `projection · features[i]`.
pub fn project<F: Scalar>(
    features: &FeatureMatrix<F>,
    projection: ArrayView2<'_, F>,
    source: Modality,
) -> Result<EmbeddedSet<F>> {
    if features.cols() != projection.ncols() {
        return Err(MdcrError::DimensionMismatch(format!(
            "features have {} columns, projection expects {}",
            features.cols(),
            projection.ncols()
        )));
    }
    Ok(EmbeddedSet {
        points: features.view().dot(&projection.t()),
        source,
        labels: None,
    })
}

/// The full gallery ordered by distance to one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankedResult<F> {
    pub query_index: usize,
    pub query_label: usize,
    /// Gallery indices, nearest first; ties in ascending index order.
    pub ordering: Vec<usize>,
    /// Euclidean distances, nondecreasing, aligned with `ordering`.
    pub distances: Vec<F>,
    /// 1 where the gallery item at that rank shares the query's label.
    pub relevance: Vec<u8>,
}

fn squared_euclidean<F: Scalar>(a: ArrayView1<'_, F>, b: ArrayView1<'_, F>) -> F {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Ranks every gallery point by Euclidean distance to `query`.
pub fn rank<F: Scalar>(
    query: ArrayView1<'_, F>,
    query_index: usize,
    query_label: usize,
    gallery: &EmbeddedSet<F>,
) -> Result<RankedResult<F>> {
    if gallery.is_empty() {
        return Err(MdcrError::Empty("gallery"));
    }
    if query.len() != gallery.dim() {
        return Err(MdcrError::DimensionMismatch(format!(
            "query has dimension {}, gallery points {}",
            query.len(),
            gallery.dim()
        )));
    }
    let labels = gallery
        .labels
        .as_ref()
        .ok_or_else(|| MdcrError::InvalidArgument("gallery has no labels to judge relevance".into()))?;

    let mut scored: Vec<(F, usize)> = gallery
        .points
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, p)| (squared_euclidean(query, p), i))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));

    let label_of = labels.as_slice();
    Ok(RankedResult {
        query_index,
        query_label,
        ordering: scored.iter().map(|&(_, i)| i).collect(),
        distances: scored.iter().map(|&(d, _)| d.sqrt()).collect(),
        relevance: scored
            .iter()
            .map(|&(_, i)| u8::from(label_of[i] == query_label))
            .collect(),
    })
}

/// Cross-modal retrieval with one projection pair. I2T maps queries with `V`
/// and the gallery with `W`; T2I the other way round.
pub fn cross_retrieve<F: Scalar>(
    pair: &ProjectionPair<F>,
    queries: (&FeatureMatrix<F>, &LabelVector),
    gallery: (&FeatureMatrix<F>, &LabelVector),
    direction: Direction,
) -> Result<Vec<RankedResult<F>>> {
    let (query_proj, query_src, gallery_proj, gallery_src) = match direction {
        Direction::I2T => (pair.v.view(), Modality::Image, pair.w.view(), Modality::Text),
        Direction::T2I => (pair.w.view(), Modality::Text, pair.v.view(), Modality::Image),
    };
    if queries.0.rows() != queries.1.len() {
        return Err(MdcrError::DimensionMismatch(format!(
            "{} query rows, {} query labels",
            queries.0.rows(),
            queries.1.len()
        )));
    }
    let embedded_queries = project(queries.0, query_proj, query_src)?;
    let embedded_gallery = project(gallery.0, gallery_proj, gallery_src)?.with_labels(gallery.1.clone())?;
    let query_labels = queries.1.as_slice();

    (0..embedded_queries.len())
        .into_par_iter()
        .map(|i| rank(embedded_queries.points.row(i), i, query_labels[i], &embedded_gallery))
        .collect()
}

/// One JSON object per line: `{queryIndex, queryLabel, ordering, distances, relevance}`.
pub fn write_rankings_jsonl<F: Scalar, W: Write>(out: &mut W, results: &[RankedResult<F>]) -> Result<()> {
    for r in results {
        serde_json::to_writer(&mut *out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn labelled(points: Array2<f64>, labels: Vec<usize>, classes: usize) -> EmbeddedSet<f64> {
        EmbeddedSet {
            points,
            source: Modality::Text,
            labels: Some(LabelVector::new(labels, classes).unwrap()),
        }
    }

    #[test]
    fn collinear_gallery() {
        let gallery = labelled(array![[1.0, 0.0], [3.0, 0.0], [2.0, 0.0]], vec![0, 1, 0], 2);
        let r = rank(array![0.0, 0.0].view(), 0, 0, &gallery).unwrap();
        assert_eq!(r.ordering, vec![0, 2, 1]);
        assert_eq!(r.distances, vec![1.0, 2.0, 3.0]);
        assert_eq!(r.relevance, vec![1, 1, 0]);
    }

    #[test]
    fn ties_break_by_index() {
        let gallery = labelled(array![[5.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![0, 0, 0], 1);
        let r = rank(array![0.0, 0.0].view(), 0, 0, &gallery).unwrap();
        assert_eq!(r.ordering, vec![1, 2, 0]);
    }

    #[test]
    fn rank_errors() {
        let empty = EmbeddedSet::<f64> {
            points: Array2::zeros((0, 2)),
            source: Modality::Image,
            labels: None,
        };
        assert!(matches!(
            rank(array![0.0, 0.0].view(), 0, 0, &empty),
            Err(MdcrError::Empty(_))
        ));
        let gallery = labelled(array![[1.0, 0.0]], vec![0], 1);
        assert!(rank(array![0.0].view(), 0, 0, &gallery).is_err());
        let unlabelled = EmbeddedSet { labels: None, ..gallery };
        assert!(rank(array![0.0, 0.0].view(), 0, 0, &unlabelled).is_err());
    }

    #[test]
    fn projection_examples() {
        let f = FeatureMatrix::new(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let id = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(project(&f, id.view(), Modality::Image).unwrap().points, f.as_array().clone());
        let zero = Array2::<f64>::zeros((3, 2));
        assert!(project(&f, zero.view(), Modality::Image).unwrap().points.iter().all(|&v| v == 0.0));
        assert!(project(&f, Array2::<f64>::zeros((3, 5)).view(), Modality::Image).is_err());
    }

    #[test]
    fn single_pair_relevance() {
        let pair = ProjectionPair::new(array![[1.0]], array![[1.0]], crate::objective::Task::I2T).unwrap();
        let q = FeatureMatrix::new(array![[0.3]]).unwrap();
        let g = FeatureMatrix::new(array![[0.7]]).unwrap();
        let labels = LabelVector::new(vec![0], 1).unwrap();
        let results = cross_retrieve(&pair, (&q, &labels), (&g, &labels), Direction::I2T).unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].relevance, vec![1]);
    }

    #[test]
    fn jsonl_uses_camel_case() {
        let gallery = labelled(array![[1.0], [2.0]], vec![0, 1], 2);
        let r = rank(array![0.0].view(), 4, 1, &gallery).unwrap();
        let mut buf = Vec::new();
        write_rankings_jsonl(&mut buf, &[r]).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(
            line,
            "{\"queryIndex\":4,\"queryLabel\":1,\"ordering\":[0,1],\"distances\":[1.0,2.0],\"relevance\":[0,1]}\n"
        );
    }
}
