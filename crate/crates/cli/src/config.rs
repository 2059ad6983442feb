use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use causens_core::causal::{CfTarget, DecisionRule, GcspCandidate, Generation, InterventionSpec, Split};
use causens_core::cvae::{CvaeArchitecture, TrainConfig};
use causens_core::seqdata::SyntheticScm;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Samples from a Bayesian network (the bundled Asia network by default).
    Asia,
    SyntheticSequence,
    /// Train and test CSV files of 0/1 columns.
    CustomTabular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Network spec file; the bundled Asia network when absent.
    pub network: Option<PathBuf>,
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    /// Records generated for the synthetic task (split 80/20 per user).
    pub n_records: usize,
    pub scm: SyntheticScm,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n_train: 5000,
            n_test: 2000,
            network: None,
            train_csv: None,
            test_csv: None,
            n_records: 2000,
            scm: SyntheticScm::default(),
        }
    }
}

/// Architecture settings shared by every model of a run; the conditioning
/// set varies per model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Target column of tabular tasks (`dysp` for Asia).
    pub target: Option<String>,
    pub encoder_hidden: Option<Vec<usize>>,
    pub decoder_hidden: Option<Vec<usize>>,
    pub latent_dim: Option<usize>,
    pub recurrent_hidden: Option<usize>,
    /// Output vocabulary; `max(train targets) + 1` when absent.
    pub c_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifyConfig {
    pub conditioning_sets: Vec<Vec<String>>,
    pub intervention: InterventionSpec,
    /// Each candidate is added to the conditioning of the interventional
    /// model only, one row pair per (set, candidate). Empty: same
    /// conditioning for both models.
    #[serde(default)]
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualConfig {
    pub conditioning: Vec<String>,
    pub alterations: Vec<InterventionSpec>,
    #[serde(default)]
    pub target_mode: CfTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcspConfig {
    pub baseline: Vec<String>,
    pub candidates: Vec<GcspCandidate>,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    /// Also report one row per candidate conditioned unconditionally.
    #[serde(default)]
    pub ablation: bool,
}

fn default_ks() -> Vec<usize> {
    vec![1, 5, 10]
}

/// `Generation` without the seed, which comes from the run's seed streams.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GenerationConfig {
    #[default]
    Factual,
    BestOfN {
        n: usize,
        scorer: causens_core::cvae::Scorer,
    },
}

impl GenerationConfig {
    pub fn with_seed(self, seed: u64) -> Generation {
        match self {
            GenerationConfig::Factual => Generation::Factual,
            GenerationConfig::BestOfN { n, scorer } => Generation::BestOfN { n, scorer, seed },
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub decision: DecisionRule,
    pub identify: Option<IdentifyConfig>,
    pub counterfactual: Option<CounterfactualConfig>,
    pub gcsp: Option<GcspConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.network, &mut cfg.data.train_csv, &mut cfg.data.test_csv]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn target(&self) -> String {
        match (&self.model.target, self.task) {
            (Some(t), _) => t.clone(),
            (None, Task::Asia) => "dysp".into(),
            (None, _) => String::new(),
        }
    }

    /// Architecture for one conditioning set.
    pub fn architecture(&self, conditioning: &[String], c_max: usize, max_len: usize) -> CvaeArchitecture {
        let cond: Vec<&str> = conditioning.iter().map(String::as_str).collect();
        let mut arch = match self.task {
            Task::SyntheticSequence => CvaeArchitecture::sequence(&cond, c_max, max_len),
            _ => CvaeArchitecture::binary(&self.target(), &cond),
        };
        let m = &self.model;
        if let Some(h) = &m.encoder_hidden {
            arch.encoder_hidden = h.clone();
        }
        if let Some(h) = &m.decoder_hidden {
            arch.decoder_hidden = h.clone();
        }
        if let Some(l) = m.latent_dim {
            arch.latent_dim = l;
        }
        if let (Some(r), Task::SyntheticSequence) = (m.recurrent_hidden, self.task) {
            arch.recurrent_hidden = r;
        }
        arch
    }

    /// Checks that every referenced feature is in `schema` (the dataset's
    /// conditioning features, target excluded) and that section contents
    /// are usable.
    pub fn validate(&self, schema: &[String]) -> CliResult<()> {
        let known: BTreeSet<&str> = schema.iter().map(String::as_str).collect();
        let check = |what: &str, names: &[String]| -> CliResult<()> {
            match names.iter().find(|n| !known.contains(n.as_str())) {
                Some(n) => Err(CliError::Config(format!("{what}: unknown feature `{n}`"))),
                None => Ok(()),
            }
        };
        let check_spec = |what: &str, spec: &InterventionSpec, split: Split| -> CliResult<()> {
            check(what, std::slice::from_ref(&spec.target_feature))?;
            if spec.applies_to != split {
                return Err(CliError::Config(format!("{what}: applies_to must be {split:?}").to_lowercase()));
            }
            spec.rule.validate().map_err(|e| CliError::Config(format!("{what}: {e}")))
        };
        self.decision.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(id) = &self.identify {
            if id.conditioning_sets.is_empty() {
                return Err(CliError::Config("identify.conditioning_sets is empty".into()));
            }
            for set in &id.conditioning_sets {
                check("identify.conditioning_sets", set)?;
            }
            check("identify.candidates", &id.candidates)?;
            check_spec("identify.intervention", &id.intervention, Split::Train)?;
        }
        if let Some(cf) = &self.counterfactual {
            check("counterfactual.conditioning", &cf.conditioning)?;
            if cf.alterations.is_empty() {
                return Err(CliError::Config("counterfactual.alterations is empty".into()));
            }
            for a in &cf.alterations {
                check_spec("counterfactual.alterations", a, Split::Test)?;
            }
        }
        if let Some(g) = &self.gcsp {
            check("gcsp.baseline", &g.baseline)?;
            for c in &g.candidates {
                check("gcsp.candidates", std::slice::from_ref(&c.feature))?;
                check_spec("gcsp.candidates", &c.intervention, Split::Train)?;
            }
            if g.ks.is_empty() || g.ks.contains(&0) {
                return Err(CliError::Config("gcsp.ks must be non-empty and positive".into()));
            }
            if let GenerationConfig::BestOfN { n: 0, .. } = g.generation {
                return Err(CliError::Config("gcsp.generation.n must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASIA: &str = r#"
task = "asia"
seed = 3

[train]
epochs = 10
batch_size = 0

[identify]
conditioning_sets = [["either", "bronc"]]
intervention = { target_feature = "either", rule = { kind = "mutilate_bn_node", value = 1 }, applies_to = "train" }
"#;

    fn schema() -> Vec<String> {
        ["asia", "tub", "smoke", "lung", "bronc", "either", "xray"].map(String::from).to_vec()
    }

    #[test]
    fn parses_nested_sections() {
        let cfg = ExperimentConfig::from_toml(ASIA).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.train.epochs, 10);
        assert_eq!(cfg.train.learning_rate, 1e-3);
        assert_eq!(cfg.target(), "dysp");
        cfg.validate(&schema()).unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        let empty = ASIA.replace(r#"[["either", "bronc"]]"#, "[]");
        let cfg = ExperimentConfig::from_toml(&empty).unwrap();
        assert!(cfg.validate(&schema()).is_err());
        let unknown = ASIA.replace(r#""bronc"]]"#, r#""nope"]]"#);
        assert!(ExperimentConfig::from_toml(&unknown).unwrap().validate(&schema()).is_err());
        let wrong_split = ASIA.replace(r#"applies_to = "train""#, r#"applies_to = "test""#);
        assert!(ExperimentConfig::from_toml(&wrong_split).unwrap().validate(&schema()).is_err());
        assert!(ExperimentConfig::from_toml("task = \"asia\"\nbogus = 1").is_err());
    }
}
