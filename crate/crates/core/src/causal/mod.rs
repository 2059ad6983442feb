//! Causal sensitivity identification by retraining on intervened data,
//! counterfactual decoding with abducted latents, and causally sensitive
//! prediction (GCSP).

mod alteration;

use serde::{Deserialize, Serialize};

pub use alteration::{apply_alteration, AlterationContext, AlterationRule, InterventionSpec, Split};

use crate::cvae::{CvaeArchitecture, CvaeModel, LatentBatch, LatentMode, LatentProvenance, Predictions, Scorer, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{jsd_latent, MetricsReport, DEFAULT_LATENT_BINS};

/// How an accuracy difference becomes a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DecisionRule {
    /// Sensitive iff delta > threshold; causal path iff delta < -threshold.
    Margin { threshold: f64 },
    /// Sign only (threshold 0).
    StrictSign,
}

impl Default for DecisionRule {
    fn default() -> Self {
        DecisionRule::Margin { threshold: 0.02 }
    }
}

impl DecisionRule {
    pub fn threshold(&self) -> f64 {
        match self {
            DecisionRule::Margin { threshold } => *threshold,
            DecisionRule::StrictSign => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.threshold();
        if t.is_finite() && t >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("decision threshold {t} must be finite and >= 0")))
        }
    }

    pub fn is_sensitive(&self, delta: f64) -> bool {
        delta > self.threshold()
    }

    pub fn causal_path(&self, delta: f64) -> bool {
        delta < -self.threshold()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityVerdict {
    /// Conditioning of the factual model.
    pub conditioning_set: Vec<String>,
    /// Conditioning of the interventional model.
    pub interventional_conditioning: Vec<String>,
    pub intervention: InterventionSpec,
    pub acc_factual: f64,
    pub acc_interventional: f64,
    pub delta_acc: f64,
    pub is_sensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualVerdict {
    pub altered_feature: String,
    pub alteration: InterventionSpec,
    pub acc_factual: f64,
    pub acc_counterfactual: f64,
    pub delta_acc: f64,
    pub causal_path_inferred: bool,
}

#[derive(Debug, Clone, Default)]
pub struct IdentifyOptions<'a> {
    pub decision: DecisionRule,
    /// Conditioning of the interventional model when it differs from the
    /// factual one (a candidate feature added on top of the baseline).
    pub interventional_conditioning: Option<Vec<String>>,
    pub context: AlterationContext<'a>,
}

#[derive(Debug, Clone)]
pub struct SensitivityOutcome {
    pub verdict: SensitivityVerdict,
    pub factual: CvaeModel,
    pub interventional: CvaeModel,
}

/// Factual accuracy on `test` with latents from the encoder (posterior mean
/// given features and the observed target).
pub fn factual_accuracy(model: &CvaeModel, test: &Dataset) -> Result<f64> {
    model.predict(test, &LatentMode::EncodeWithTarget)?.accuracy()
}

/// Trains the factual model on `train` and the interventional model on the
/// altered training data (same config and seed), evaluates both on the
/// factual `test` set, and compares accuracies.
pub fn identify_sensitivity(
    train: &Dataset,
    test: &Dataset,
    arch: &CvaeArchitecture,
    config: &TrainConfig,
    intervention: &InterventionSpec,
    options: &IdentifyOptions,
) -> Result<SensitivityOutcome> {
    check_intervention(intervention, options)?;
    let factual = CvaeModel::train(train, arch, config)?;
    identify_with_factual(factual, train, test, config, intervention, options)
}

fn check_intervention(intervention: &InterventionSpec, options: &IdentifyOptions) -> Result<()> {
    options.decision.validate()?;
    if intervention.applies_to != Split::Train {
        return Err(Error::InvalidArgument("interventions for identification apply to the training split".into()));
    }
    intervention.rule.validate()
}

/// As [`identify_sensitivity`] with an already trained factual model, so a
/// baseline can be shared between candidates.
pub fn identify_with_factual(
    factual: CvaeModel,
    train: &Dataset,
    test: &Dataset,
    config: &TrainConfig,
    intervention: &InterventionSpec,
    options: &IdentifyOptions,
) -> Result<SensitivityOutcome> {
    check_intervention(intervention, options)?;
    let mut arch_i = factual.architecture().clone();
    if let Some(c) = &options.interventional_conditioning {
        arch_i.conditioning = c.clone();
    }
    let altered = apply_alteration(train, intervention, &options.context)?;
    let interventional = CvaeModel::train(&altered, &arch_i, config)?;
    let acc_factual = factual_accuracy(&factual, test)?;
    let acc_interventional = factual_accuracy(&interventional, test)?;
    let delta_acc = acc_interventional - acc_factual;
    let verdict = SensitivityVerdict {
        conditioning_set: factual.architecture().conditioning.clone(),
        interventional_conditioning: arch_i.conditioning,
        intervention: intervention.clone(),
        acc_factual,
        acc_interventional,
        delta_acc,
        is_sensitive: options.decision.is_sensitive(delta_acc),
    };
    Ok(SensitivityOutcome {
        verdict,
        factual,
        interventional,
    })
}

/// Which target the counterfactual encoder sees and predictions are scored
/// against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfTarget {
    /// Abduction on the observed outcome: encode the altered features with
    /// the factual target.
    #[default]
    Factual,
    /// Use the target carried by the altered data (differs from the factual
    /// one only when the alteration resamples descendants).
    Altered,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CounterfactualOptions<'a> {
    pub decision: DecisionRule,
    pub target: CfTarget,
    pub context: AlterationContext<'a>,
}

#[derive(Debug, Clone)]
pub struct CounterfactualOutcome {
    pub verdict: CounterfactualVerdict,
    pub factual: Predictions,
    pub counterfactual: Predictions,
    /// JSD between the factual and counterfactual latent batches.
    pub latent_jsd: f64,
}

fn with_factual_target(altered: Dataset, test: &Dataset, target: &str) -> Result<Dataset> {
    match (altered, test) {
        (Dataset::Tabular(a), Dataset::Tabular(t)) => match t.column(target) {
            Some(y) => Ok(a.with_column(target, y.to_vec())?.into()),
            None => Ok(a.into()),
        },
        // Sequence alterations never touch the targets.
        (altered, _) => Ok(altered),
    }
}

/// Decodes the factual model under an altered test set with latents
/// abducted from the altered features and the outcome.
pub fn counterfactual_analysis(
    gp_f: &CvaeModel,
    test: &Dataset,
    alteration: &InterventionSpec,
    options: &CounterfactualOptions,
) -> Result<CounterfactualOutcome> {
    options.decision.validate()?;
    if alteration.applies_to != Split::Test {
        return Err(Error::InvalidArgument("counterfactual alterations apply to the test split".into()));
    }
    let arch = gp_f.architecture();
    if alteration.target_feature == arch.target {
        return Err(Error::InvalidArgument("the target itself cannot be altered".into()));
    }
    let altered = apply_alteration(test, alteration, &options.context)?;
    let cf_data = match options.target {
        CfTarget::Factual => with_factual_target(altered, test, &arch.target)?,
        CfTarget::Altered => altered,
    };
    let factual = gp_f.predict(test, &LatentMode::EncodeWithTarget)?;
    let (mu, _) = gp_f.encode(&cf_data)?;
    let z_cf = LatentBatch::new(mu, LatentProvenance::Counterfactual)?;
    let counterfactual = gp_f.predict(&cf_data, &LatentMode::Provided(z_cf))?;
    let acc_factual = factual.accuracy()?;
    let acc_counterfactual = counterfactual.accuracy()?;
    let delta_acc = acc_counterfactual - acc_factual;
    let latent_jsd = latent_divergence(&factual.latent, &counterfactual.latent)?;
    Ok(CounterfactualOutcome {
        verdict: CounterfactualVerdict {
            altered_feature: alteration.target_feature.clone(),
            alteration: alteration.clone(),
            acc_factual,
            acc_counterfactual,
            delta_acc,
            causal_path_inferred: options.decision.causal_path(delta_acc),
        },
        factual,
        counterfactual,
        latent_jsd,
    })
}

/// Histogram JSD (base 2) between two latent batches.
pub fn latent_divergence(a: &LatentBatch, b: &LatentBatch) -> Result<f64> {
    jsd_latent(&a.z, &b.z, DEFAULT_LATENT_BINS)
}

/// How final predictions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Generation {
    /// Decode the encoder's posterior mean.
    #[default]
    Factual,
    /// Decode `n` prior draws per instance and keep the best.
    BestOfN { n: usize, scorer: Scorer, seed: u64 },
}

pub fn generate(model: &CvaeModel, data: &Dataset, generation: Generation) -> Result<Predictions> {
    match generation {
        Generation::Factual => model.predict(data, &LatentMode::EncodeWithTarget),
        Generation::BestOfN { n, scorer, seed } => model.generate_best_of_n(data, n, scorer, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcspCandidate {
    pub feature: String,
    pub intervention: InterventionSpec,
}

#[derive(Debug, Clone)]
pub struct GcspOptions<'a> {
    pub decision: DecisionRule,
    pub context: AlterationContext<'a>,
    pub generation: Generation,
    pub ks: Vec<usize>,
}

impl Default for GcspOptions<'_> {
    fn default() -> Self {
        Self {
            decision: DecisionRule::default(),
            context: AlterationContext::default(),
            generation: Generation::Factual,
            ks: vec![1, 5, 10],
        }
    }
}

#[derive(Debug, Clone)]
pub struct GcspOutcome {
    pub verdicts: Vec<SensitivityVerdict>,
    /// Candidates flagged sensitive, in candidate order.
    pub selected: Vec<String>,
    pub conditioning_used: Vec<String>,
    /// True when no candidate was selected and the baseline is returned.
    pub fallback: bool,
    pub model: CvaeModel,
    pub predictions: Predictions,
    pub report: MetricsReport,
}

/// Tests each candidate against the baseline conditioning of `base_arch`,
/// then retrains with the baseline plus every selected feature.
pub fn gcsp(
    train: &Dataset,
    test: &Dataset,
    base_arch: &CvaeArchitecture,
    config: &TrainConfig,
    candidates: &[GcspCandidate],
    options: &GcspOptions,
) -> Result<GcspOutcome> {
    options.decision.validate()?;
    let baseline = CvaeModel::train(train, base_arch, config)?;
    let mut verdicts = Vec::with_capacity(candidates.len());
    let mut selected = Vec::new();
    for c in candidates {
        let mut conditioning = base_arch.conditioning.clone();
        if !conditioning.contains(&c.feature) {
            conditioning.push(c.feature.clone());
        }
        let id_options = IdentifyOptions {
            decision: options.decision,
            interventional_conditioning: Some(conditioning),
            context: options.context,
        };
        let outcome = identify_with_factual(baseline.clone(), train, test, config, &c.intervention, &id_options)?;
        if outcome.verdict.is_sensitive && !selected.contains(&c.feature) {
            selected.push(c.feature.clone());
        }
        verdicts.push(outcome.verdict);
    }
    let mut conditioning_used = base_arch.conditioning.clone();
    for f in &selected {
        if !conditioning_used.contains(f) {
            conditioning_used.push(f.clone());
        }
    }
    let fallback = selected.is_empty();
    let model = if conditioning_used == base_arch.conditioning {
        baseline
    } else {
        let mut arch = base_arch.clone();
        arch.conditioning = conditioning_used.clone();
        CvaeModel::train(train, &arch, config)?
    };
    let predictions = generate(&model, test, options.generation)?;
    let report = MetricsReport::compute(&predictions.batch()?, &options.ks)?;
    Ok(GcspOutcome {
        verdicts,
        selected,
        conditioning_used,
        fallback,
        model,
        predictions,
        report,
    })
}
