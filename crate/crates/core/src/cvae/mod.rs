//! Conditional variational autoencoder with a binary head (tabular data) and
//! a next-location head (windowed trajectories).
//!
//! The encoder sees `[target, conditioning]` and emits a Gaussian posterior
//! over `z`; the decoder maps `[z, conditioning]` to a distribution over the
//! target. Training minimizes `reconstruction + kl_weight(epoch) * KL`.

mod check;
mod encoding;
mod model;
mod persist;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PredictionBatch;
use crate::ndcompute::{Tensor, PROB_CLAMP};
use crate::seqdata::SEQUENCE_FEATURES;

pub use check::{binary_instance, gradcheck_suite, sequence_instance, CheckEntry, SuiteReport, CHECKED_OPS, GRADCHECK_TOLERANCE};
pub use model::{CvaeModel, LossProbe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Binary,
    CategoricalSequence,
}

/// Everything that fixes the parameter shapes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvaeArchitecture {
    pub task: TaskKind,
    /// Target column for the binary task; unused for sequences (the target
    /// is the record's next location).
    #[serde(default)]
    pub target: String,
    pub conditioning: Vec<String>,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    /// Output vocabulary size of the sequence head.
    #[serde(default)]
    pub c_max: usize,
    #[serde(default)]
    pub max_sequence_length: usize,
    #[serde(default)]
    pub recurrent_hidden: usize,
}

impl CvaeArchitecture {
    /// MLP with one 16-unit hidden layer per side and a 2-d latent.
    pub fn binary(target: &str, conditioning: &[&str]) -> Self {
        Self {
            task: TaskKind::Binary,
            target: target.to_string(),
            conditioning: conditioning.iter().map(|s| s.to_string()).collect(),
            encoder_hidden: vec![16],
            decoder_hidden: vec![16],
            latent_dim: 2,
            c_max: 0,
            max_sequence_length: 0,
            recurrent_hidden: 0,
        }
    }

    pub fn sequence(conditioning: &[&str], c_max: usize, max_sequence_length: usize) -> Self {
        Self {
            task: TaskKind::CategoricalSequence,
            target: String::new(),
            conditioning: conditioning.iter().map(|s| s.to_string()).collect(),
            encoder_hidden: vec![32],
            decoder_hidden: vec![32],
            latent_dim: 8,
            c_max,
            max_sequence_length,
            recurrent_hidden: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArchitecture(m));
        if self.latent_dim == 0 {
            return bad("latent_dim must be at least 1".into());
        }
        if self.encoder_hidden.iter().chain(&self.decoder_hidden).any(|&w| w == 0) {
            return bad("hidden widths must be at least 1".into());
        }
        for (i, f) in self.conditioning.iter().enumerate() {
            if self.conditioning[..i].contains(f) {
                return bad(format!("duplicate conditioning feature `{f}`"));
            }
        }
        match self.task {
            TaskKind::Binary => {
                if self.target.is_empty() {
                    return bad("binary task needs a target column".into());
                }
                if self.conditioning.contains(&self.target) {
                    return bad(format!("target `{}` is also a conditioning feature", self.target));
                }
            }
            TaskKind::CategoricalSequence => {
                if self.c_max < 2 {
                    return bad(format!("c_max = {} (need >= 2)", self.c_max));
                }
                if self.max_sequence_length == 0 {
                    return bad("max_sequence_length must be at least 1".into());
                }
                if self.recurrent_hidden == 0 {
                    return bad("recurrent_hidden must be at least 1".into());
                }
                if self.conditioning.is_empty() {
                    return bad("sequence task needs at least one conditioning feature".into());
                }
                if let Some(f) = self.conditioning.iter().find(|f| !SEQUENCE_FEATURES.contains(&f.as_str())) {
                    return bad(format!("unknown sequence feature `{f}`"));
                }
            }
        }
        Ok(())
    }

    /// Number of output classes (2 for the binary head).
    pub fn classes(&self) -> usize {
        match self.task {
            TaskKind::Binary => 2,
            TaskKind::CategoricalSequence => self.c_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Rows per optimizer step; 0 means the full training set.
    pub batch_size: usize,
    pub kl_start_epoch: usize,
    pub kl_anneal_time: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 400,
            learning_rate: 1e-3,
            batch_size: 32,
            kl_start_epoch: 10,
            kl_anneal_time: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.kl_anneal_time == 0 {
            return bad("kl_anneal_time must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }

    /// 0 before `kl_start_epoch`, then a linear ramp reaching 1 after
    /// `kl_anneal_time` epochs.
    pub fn kl_weight(&self, epoch: usize) -> f64 {
        kl_weight(epoch, self.kl_start_epoch, self.kl_anneal_time)
    }
}

pub fn kl_weight(epoch: usize, start: usize, anneal_time: usize) -> f64 {
    if epoch <= start {
        return 0.0;
    }
    ((epoch - start) as f64 / anneal_time.max(1) as f64).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentProvenance {
    Factual,
    Interventional,
    Counterfactual,
    Prior,
    Provided,
}

/// Latent codes, one row per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    pub z: Tensor,
    pub provenance: LatentProvenance,
}

impl LatentBatch {
    pub fn new(z: Tensor, provenance: LatentProvenance) -> Result<Self> {
        if z.rank() != 2 {
            return Err(Error::InvalidTensor(format!("latent batch must be N x d, got {:?}", z.shape())));
        }
        Ok(Self { z, provenance })
    }

    pub fn zeros(rows: usize, latent_dim: usize) -> Self {
        Self {
            z: Tensor::zeros(&[rows, latent_dim]),
            provenance: LatentProvenance::Provided,
        }
    }

    pub fn len(&self) -> usize {
        self.z.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.z.cols()
    }
}

/// Where prediction latents come from.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentMode {
    /// Posterior mean given the observed target (needs targets).
    EncodeWithTarget,
    /// Standard-normal draws from a seeded stream.
    PriorSample { seed: u64 },
    Provided(LatentBatch),
}

/// How best-of-n picks among generations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    /// Largest probability on the realized label (evaluation).
    RealizedLabel,
    /// Largest top-class probability (deployment).
    MaxConfidence,
}

/// Per-instance class distributions with hard labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    /// `N x classes`; binary rows are `[1 - p, p]`.
    pub probs: Tensor,
    pub labels: Vec<u32>,
    pub latent: LatentBatch,
    /// Observed targets, when the data had them.
    pub targets: Option<Vec<u32>>,
}

impl Predictions {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Fraction of correct hard labels.
    pub fn accuracy(&self) -> Result<f64> {
        let t = self.targets.as_ref().ok_or(Error::Empty("targets"))?;
        crate::metrics::accuracy(&self.labels, t)
    }

    pub fn batch(&self) -> Result<PredictionBatch> {
        let t = self.targets.clone().ok_or(Error::Empty("targets"))?;
        PredictionBatch::new(self.probs.clone(), t)
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub reconstruction: f64,
    pub kl: f64,
    pub kl_weight: f64,
    pub total: f64,
}

/// `mu + exp(0.5 * logvar) * eps`.
pub fn reparameterize(mu: &Tensor, logvar: &Tensor, eps: &Tensor) -> Result<Tensor> {
    if mu.shape() != logvar.shape() || mu.shape() != eps.shape() {
        return Err(Error::InvalidTensor(format!(
            "reparameterize: mu {:?}, logvar {:?}, eps {:?}",
            mu.shape(),
            logvar.shape(),
            eps.shape()
        )));
    }
    let data = mu
        .data()
        .iter()
        .zip(logvar.data())
        .zip(eps.data())
        .map(|((&m, &lv), &e)| m + (0.5 * lv).exp() * e)
        .collect();
    Tensor::new(mu.shape().to_vec(), data)
}

/// Mean binary cross-entropy of probabilities against 0/1 labels, with
/// probabilities clamped away from 0 and 1.
pub fn loss_binary(p: &[f64], y: &[u32]) -> Result<f64> {
    if p.len() != y.len() {
        return Err(Error::InvalidArgument(format!("{} probabilities for {} labels", p.len(), y.len())));
    }
    if p.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut total = 0.0;
    for (&pi, &yi) in p.iter().zip(y) {
        if yi > 1 {
            return Err(Error::LabelOutOfRange { label: yi as usize, classes: 2 });
        }
        let pc = pi.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        total -= if yi == 1 { pc.ln() } else { (1.0 - pc).ln() };
    }
    Ok(total / p.len() as f64)
}

/// Mean `-ln dist[y]` over rows.
pub fn loss_sparse_categorical(dist: &Tensor, y: &[u32]) -> Result<f64> {
    if dist.rank() != 2 || dist.rows() != y.len() {
        return Err(Error::InvalidTensor(format!(
            "distribution {:?} for {} labels",
            dist.shape(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = dist.row(i);
        let p = *row.get(yi as usize).ok_or(Error::LabelOutOfRange {
            label: yi as usize,
            classes: row.len(),
        })?;
        total -= p.max(PROB_CLAMP).ln();
    }
    Ok(total / y.len() as f64)
}

/// Batch mean of `-0.5 * sum(1 + logvar - mu^2 - exp(logvar))`.
pub fn kl_term(mu: &Tensor, logvar: &Tensor) -> Result<f64> {
    if mu.shape() != logvar.shape() || mu.rank() != 2 {
        return Err(Error::InvalidTensor(format!("mu {:?}, logvar {:?}", mu.shape(), logvar.shape())));
    }
    let total: f64 = mu
        .data()
        .iter()
        .zip(logvar.data())
        .map(|(&m, &lv)| -0.5 * (1.0 + lv - m * m - lv.exp()))
        .sum();
    Ok(total / mu.rows().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_schedule() {
        assert_eq!(kl_weight(5, 10, 20), 0.0);
        assert_eq!(kl_weight(10, 10, 20), 0.0);
        assert_eq!(kl_weight(20, 10, 20), 0.5);
        assert_eq!(kl_weight(40, 10, 20), 1.0);
        assert_eq!(kl_weight(100, 10, 20), 1.0);
        assert_eq!(kl_weight(1, 0, 1), 1.0);
    }

    #[test]
    fn reparameterization_examples() {
        let mu = Tensor::matrix(1, 2, vec![0.5, -1.0]).unwrap();
        let eps = Tensor::matrix(1, 2, vec![0.3, 2.0]).unwrap();
        let z = reparameterize(&mu, &Tensor::zeros(&[1, 2]), &eps).unwrap();
        assert_eq!(z.data(), &[0.8, 1.0]);
        let z = reparameterize(&mu, &Tensor::full(&[1, 2], 3.0), &Tensor::zeros(&[1, 2])).unwrap();
        assert_eq!(z, mu);
        let z = reparameterize(
            &Tensor::zeros(&[1, 1]),
            &Tensor::full(&[1, 1], 2.0 * 3f64.ln()),
            &Tensor::full(&[1, 1], 1.0),
        )
        .unwrap();
        assert!((z.item() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn binary_loss_examples() {
        assert!(loss_binary(&[1.0], &[1]).unwrap() < 1e-11);
        assert!((loss_binary(&[0.5], &[0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let v = loss_binary(&[0.9, 0.2], &[1, 0]).unwrap();
        assert!((v + (0.9f64.ln() + 0.8f64.ln()) / 2.0).abs() < 1e-15);
        assert!((v - 0.1643).abs() < 1e-4);
        assert!(loss_binary(&[0.0], &[1]).unwrap().is_finite());
    }

    #[test]
    fn categorical_loss_examples() {
        let d = Tensor::from_rows(&[vec![0.1, 0.7, 0.2]]).unwrap();
        assert!((loss_sparse_categorical(&d, &[1]).unwrap() - 0.3567).abs() < 1e-4);
        let uniform = Tensor::full(&[2, 8], 0.125);
        assert!((loss_sparse_categorical(&uniform, &[0, 7]).unwrap() - 8f64.ln()).abs() < 1e-12);
        let onehot = Tensor::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(loss_sparse_categorical(&onehot, &[1]).unwrap(), 0.0);
        assert!(matches!(loss_sparse_categorical(&d, &[3]), Err(Error::LabelOutOfRange { .. })));
    }

    #[test]
    fn kl_examples() {
        let z = Tensor::zeros(&[3, 2]);
        assert_eq!(kl_term(&z, &z).unwrap(), 0.0);
        let one = Tensor::full(&[1, 1], 1.0);
        assert_eq!(kl_term(&one, &Tensor::zeros(&[1, 1])).unwrap(), 0.5);
        let v = kl_term(&Tensor::zeros(&[1, 1]), &Tensor::full(&[1, 1], 4f64.ln())).unwrap();
        assert!((v - 0.5 * (4.0 - 4f64.ln() - 1.0)).abs() < 1e-12);
        assert!((v - 0.8069).abs() < 1e-4);
    }

    #[test]
    fn architecture_validation() {
        assert!(CvaeArchitecture::binary("dysp", &["either", "bronc"]).validate().is_ok());
        assert!(CvaeArchitecture::binary("dysp", &["dysp"]).validate().is_err());
        let mut a = CvaeArchitecture::binary("dysp", &["either"]);
        a.latent_dim = 0;
        assert!(a.validate().is_err());
        assert!(CvaeArchitecture::sequence(&["ls"], 1, 5).validate().is_err());
        assert!(CvaeArchitecture::sequence(&["ls", "speed"], 8, 5).validate().is_err());
        assert!(CvaeArchitecture::sequence(&["ls", "smin"], 8, 5).validate().is_ok());
    }
}
