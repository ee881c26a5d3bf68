//! Average precision, mAP and interpolated precision–recall curves.
//!
//! AP over a ranking of length R with binary relevance `rel(k)` is
//! `Σ P(k)·rel(k) / Σ rel(k)` where `P(k)` is the precision of the top k.
//! A query with no relevant gallery item scores 0 and still counts in mAP.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{MdcrError, Result};
use crate::retrieval::RankedResult;

pub const DEFAULT_PR_POINTS: usize = 11;

pub fn average_precision(relevance: &[u8]) -> f64 {
    average_precision_at(relevance, None)
}

/// AP restricted to the first `top_k` ranks (`None` = full ranking).
pub fn average_precision_at(relevance: &[u8], top_k: Option<usize>) -> f64 {
    let cutoff = top_k.map_or(relevance.len(), |k| k.min(relevance.len()));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &rel) in relevance[..cutoff].iter().enumerate() {
        if rel != 0 {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Max-interpolated precision at `points` evenly spaced recall levels
/// `0, 1/(points-1), …, 1` for one ranking.
fn interpolated_precision(relevance: &[u8], points: usize) -> Vec<f64> {
    let total = relevance.iter().filter(|&&r| r != 0).count();
    let mut out = vec![0.0; points];
    if total == 0 {
        return out;
    }
    // (recall, precision) after each rank
    let mut curve = Vec::with_capacity(relevance.len());
    let mut hits = 0usize;
    for (k, &rel) in relevance.iter().enumerate() {
        hits += usize::from(rel != 0);
        curve.push((hits as f64 / total as f64, hits as f64 / (k + 1) as f64));
    }
    // running max of precision from the tail
    let mut best_from = vec![0.0f64; curve.len() + 1];
    for i in (0..curve.len()).rev() {
        best_from[i] = best_from[i + 1].max(curve[i].1);
    }
    let mut cursor = 0;
    for (j, slot) in out.iter_mut().enumerate() {
        let level = j as f64 / (points - 1) as f64;
        while cursor < curve.len() && curve[cursor].0 < level - 1e-12 {
            cursor += 1;
        }
        *slot = best_from[cursor];
    }
    out
}

pub fn pr_curve<F>(results: &[RankedResult<F>], points: usize) -> Result<Vec<PrPoint>> {
    if points < 2 {
        return Err(MdcrError::InvalidArgument(format!(
            "a precision-recall curve needs at least 2 points, got {points}"
        )));
    }
    if results.is_empty() {
        return Err(MdcrError::Empty("ranked results"));
    }
    let mut sums = vec![0.0; points];
    for r in results {
        for (s, p) in sums.iter_mut().zip(interpolated_precision(&r.relevance, points)) {
            *s += p;
        }
    }
    let n = results.len() as f64;
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(j, s)| PrPoint {
            recall: j as f64 / (points - 1) as f64,
            precision: s / n,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub pr_points: usize,
    /// Truncate AP at this rank; `None` evaluates the whole ranking.
    pub top_k: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            pr_points: DEFAULT_PR_POINTS,
            top_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "perQueryAP")]
    pub per_query_ap: Vec<f64>,
    /// Mean AP over queries of each class, keyed by query label.
    #[serde(rename = "perClassMAP")]
    pub per_class_map: BTreeMap<usize, f64>,
    #[serde(rename = "prCurve")]
    pub pr_curve: Vec<PrPoint>,
}

impl EvalReport {
    /// `recall,precision` CSV with a header line.
    pub fn write_pr_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "recall,precision")?;
        for p in &self.pr_curve {
            writeln!(out, "{:?},{:?}", p.recall, p.precision)?;
        }
        Ok(())
    }
}

pub fn evaluate<F>(results: &[RankedResult<F>], opts: &EvalOptions) -> Result<EvalReport> {
    if results.is_empty() {
        return Err(MdcrError::Empty("ranked results"));
    }
    let per_query_ap: Vec<f64> = results
        .iter()
        .map(|r| average_precision_at(&r.relevance, opts.top_k))
        .collect();
    let map = per_query_ap.iter().sum::<f64>() / per_query_ap.len() as f64;

    let mut by_class: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (r, ap) in results.iter().zip(&per_query_ap) {
        let e = by_class.entry(r.query_label).or_insert((0.0, 0));
        e.0 += ap;
        e.1 += 1;
    }
    let per_class_map = by_class
        .into_iter()
        .map(|(c, (sum, n))| (c, sum / n as f64))
        .collect();

    Ok(EvalReport {
        map,
        per_query_ap,
        per_class_map,
        pr_curve: pr_curve(results, opts.pr_points)?,
    })
}

pub fn mean_ap<F>(results: &[RankedResult<F>]) -> Result<EvalReport> {
    evaluate(results, &EvalOptions::default())
}
