//! Ranking accuracy, mean reciprocal rank and Jensen-Shannon divergence.
//!
//! Ranks break probability ties toward the lower class index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcompute::Tensor;

const ROW_SUM_TOLERANCE: f64 = 1e-9;
const JSD_NORMALIZATION_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_LATENT_BINS: usize = 32;

/// Predicted class probabilities (`N x C`) with the true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBatch {
    probs: Tensor,
    labels: Vec<u32>,
}

impl PredictionBatch {
    pub fn new(probs: Tensor, labels: Vec<u32>) -> Result<Self> {
        if probs.rank() != 2 {
            return Err(Error::InvalidTensor(format!("probabilities must be N x C, got {:?}", probs.shape())));
        }
        if probs.rows() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} probability rows for {} labels",
                probs.rows(),
                labels.len()
            )));
        }
        let c = probs.cols();
        for (i, &y) in labels.iter().enumerate() {
            if y as usize >= c {
                return Err(Error::LabelOutOfRange { label: y as usize, classes: c });
            }
            let sum: f64 = probs.row(i).iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::NotNormalized { sum });
            }
        }
        Ok(Self { probs, labels })
    }

    pub fn probs(&self) -> &Tensor {
        &self.probs
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.probs.cols()
    }

    /// 1-based rank of the true label in row `i`.
    pub fn rank(&self, i: usize) -> usize {
        let row = self.probs.row(i);
        let y = self.labels[i] as usize;
        let py = row[y];
        1 + row
            .iter()
            .enumerate()
            .filter(|&(j, &p)| p > py || (p == py && j < y))
            .count()
    }

    /// Arg-max class per row (lowest index on ties).
    pub fn predicted(&self) -> Vec<u32> {
        (0..self.len()).map(|i| argmax(self.probs.row(i)) as u32).collect()
    }
}

/// Index of the largest entry (lowest index on ties).
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = j;
        }
    }
    best
}

/// Percentage of rows whose label is among the `k` top-ranked classes.
pub fn top_k_accuracy(batch: &PredictionBatch, k: usize) -> Result<f64> {
    if k == 0 || k > batch.classes() {
        return Err(Error::InvalidArgument(format!("k = {k} outside [1, {}]", batch.classes())));
    }
    if batch.is_empty() {
        return Err(Error::Empty("prediction batch"));
    }
    let hits = (0..batch.len()).filter(|&i| batch.rank(i) <= k).count();
    Ok(100.0 * hits as f64 / batch.len() as f64)
}

/// Mean reciprocal rank over the full ranking, as a percentage.
pub fn mrr(batch: &PredictionBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("prediction batch"));
    }
    let total: f64 = (0..batch.len()).map(|i| 1.0 / batch.rank(i) as f64).sum();
    Ok(100.0 * total / batch.len() as f64)
}

/// Fraction (not percentage) of matching labels.
pub fn accuracy(predicted: &[u32], truth: &[u32]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

fn kl_base2(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen-Shannon divergence with base-2 logs, in `[0, 1]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidArgument(format!("supports of size {} and {}", p.len(), q.len())));
    }
    if p.is_empty() {
        return Err(Error::Empty("distribution"));
    }
    for d in [p, q] {
        if d.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::InvalidArgument("negative or NaN probability".into()));
        }
        let sum: f64 = d.iter().sum();
        if (sum - 1.0).abs() > JSD_NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
    }
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let v = 0.5 * kl_base2(p, &m) + 0.5 * kl_base2(q, &m);
    Ok(v.clamp(0.0, 1.0))
}

/// Histogram JSD between two point clouds (rows are points), averaged over
/// dimensions. Each dimension is binned over the pooled min-max range with
/// one pseudo-count per bin; a constant dimension contributes 0.
pub fn jsd_latent(a: &Tensor, b: &Tensor, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("bins = {bins} (need >= 2)")));
    }
    if a.rank() != 2 || b.rank() != 2 {
        return Err(Error::InvalidTensor("latent batches must be N x d".into()));
    }
    if a.cols() != b.cols() {
        return Err(Error::InvalidArgument(format!("latent widths {} and {}", a.cols(), b.cols())));
    }
    if a.rows() == 0 || b.rows() == 0 || a.cols() == 0 {
        return Err(Error::Empty("latent batch"));
    }
    let d = a.cols();
    let mut total = 0.0;
    for j in 0..d {
        let col = |t: &Tensor| -> Vec<f64> { (0..t.rows()).map(|i| t.row(i)[j]).collect() };
        let (xa, xb) = (col(a), col(b));
        let lo = xa.iter().chain(&xb).cloned().fold(f64::INFINITY, f64::min);
        let hi = xa.iter().chain(&xb).cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
            continue;
        }
        let hist = |xs: &[f64]| -> Vec<f64> {
            let mut h = vec![1.0; bins];
            for &x in xs {
                let k = (((x - lo) / (hi - lo)) * bins as f64) as usize;
                h[k.min(bins - 1)] += 1.0;
            }
            let s: f64 = h.iter().sum();
            h.iter().map(|c| c / s).collect()
        };
        total += jsd(&hist(&xa), &hist(&xb))?;
    }
    Ok(total / d as f64)
}

/// Acc@k and MRR as percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc_at: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub n: usize,
}

impl MetricsReport {
    /// Ks larger than the class count are clamped to it.
    pub fn compute(batch: &PredictionBatch, ks: &[usize]) -> Result<Self> {
        let mut acc_at = BTreeMap::new();
        for &k in ks {
            acc_at.insert(k, top_k_accuracy(batch, k.min(batch.classes()))?);
        }
        Ok(Self {
            acc_at,
            mrr: mrr(batch)?,
            n: batch.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(row: Vec<f64>, y: u32) -> PredictionBatch {
        PredictionBatch::new(Tensor::from_rows(&[row]).unwrap(), vec![y]).unwrap()
    }

    #[test]
    fn ranking_examples() {
        let b = single(vec![0.1, 0.7, 0.2], 0);
        assert_eq!(top_k_accuracy(&b, 1).unwrap(), 0.0);
        assert_eq!(top_k_accuracy(&b, 2).unwrap(), 0.0);
        assert_eq!(top_k_accuracy(&b, 3).unwrap(), 100.0);
        let b2 = single(vec![0.1, 0.7, 0.2], 2);
        assert_eq!(top_k_accuracy(&b2, 2).unwrap(), 100.0);
        assert_eq!(mrr(&b2).unwrap(), 50.0);
        assert!(top_k_accuracy(&b, 0).is_err());
        assert!(top_k_accuracy(&b, 4).is_err());
    }

    #[test]
    fn ties_go_to_lower_index() {
        let b = single(vec![0.4, 0.4, 0.2], 1);
        assert_eq!(b.rank(0), 2);
        assert_eq!(b.predicted(), vec![0]);
    }

    #[test]
    fn batch_validation() {
        assert!(PredictionBatch::new(Tensor::from_rows(&[vec![0.5, 0.6]]).unwrap(), vec![0]).is_err());
        assert!(PredictionBatch::new(Tensor::from_rows(&[vec![0.5, 0.5]]).unwrap(), vec![2]).is_err());
    }

    #[test]
    fn jsd_extremes() {
        assert_eq!(jsd(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(jsd(&[0.5, 0.6], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn plain_accuracy() {
        assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 1, 1, 0]).unwrap(), 0.5);
        assert!(accuracy(&[], &[]).is_err());
    }
}
