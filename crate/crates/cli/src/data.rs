use std::collections::BTreeMap;

use causens_core::bayesnet::{load_network, BayesNet};
use causens_core::causal::AlterationContext;
use causens_core::data::{Dataset, TabularData};
use causens_core::rng::SeedStream;
use causens_core::seqdata::{c_max, generate, SEQUENCE_FEATURES};

use crate::config::{ExperimentConfig, Task};
use crate::error::{CliError, CliResult, StageExt};

/// Named seeds of one run, all derived from the root seed.
#[derive(Debug, Clone)]
pub struct RunSeeds {
    pub root: u64,
    pub data_train: u64,
    pub data_test: u64,
    pub init: u64,
    pub prior: u64,
}

impl RunSeeds {
    pub fn new(root: u64) -> Self {
        let s = SeedStream::new(root);
        let data = s.child("data");
        Self {
            root,
            data_train: data.seed_for("train"),
            data_test: data.seed_for("test"),
            init: s.seed_for("init"),
            prior: s.seed_for("prior"),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let m: BTreeMap<&str, u64> = [
            ("root", self.root),
            ("data_train", self.data_train),
            ("data_test", self.data_test),
            ("init", self.init),
            ("prior", self.prior),
        ]
        .into_iter()
        .collect();
        serde_json::to_value(m).expect("seed map serializes")
    }
}

/// Train/test data of a run plus what alterations may need.
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub network: Option<BayesNet>,
    pub c_max: usize,
    pub max_len: usize,
    /// Features a model may condition on.
    pub schema: Vec<String>,
}

impl Prepared {
    /// Context for training-split alterations (mutilation resamples with the
    /// training seed, so rows stay coupled to the factual sample).
    pub fn train_context<'a>(&'a self, seeds: &RunSeeds) -> AlterationContext<'a> {
        AlterationContext {
            network: self.network.as_ref().map(|n| (n, seeds.data_train)),
            frequency_reference: Some(&self.train),
        }
    }

    pub fn test_context<'a>(&'a self, seeds: &RunSeeds) -> AlterationContext<'a> {
        AlterationContext {
            network: self.network.as_ref().map(|n| (n, seeds.data_test)),
            frequency_reference: Some(&self.train),
        }
    }
}

pub fn read_network(path: Option<&std::path::Path>) -> CliResult<BayesNet> {
    match path {
        None => Ok(BayesNet::asia()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            load_network(&text).stage("data")
        }
    }
}

fn read_csv(path: Option<&std::path::Path>, what: &str) -> CliResult<TabularData> {
    let p = path.ok_or_else(|| CliError::Config(format!("custom_tabular needs data.{what}")))?;
    let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    TabularData::from_csv(&text).stage("data")
}

pub fn prepare(cfg: &ExperimentConfig, seeds: &RunSeeds) -> CliResult<Prepared> {
    let target = cfg.target();
    let tabular_schema = |t: &TabularData| -> CliResult<Vec<String>> {
        if t.column(&target).is_none() {
            return Err(CliError::Config(format!("target `{target}` is not a data column")));
        }
        Ok(t.names().iter().filter(|n| **n != target).cloned().collect())
    };
    match cfg.task {
        Task::Asia => {
            let net = read_network(cfg.data.network.as_deref())?;
            let train = net.ancestral_sample(cfg.data.n_train, seeds.data_train).stage("data")?;
            let test = net.ancestral_sample(cfg.data.n_test, seeds.data_test).stage("data")?;
            let schema = tabular_schema(&train)?;
            Ok(Prepared {
                train: train.into(),
                test: test.into(),
                network: Some(net),
                c_max: 2,
                max_len: 0,
                schema,
            })
        }
        Task::CustomTabular => {
            let train = read_csv(cfg.data.train_csv.as_deref(), "train_csv")?;
            let test = read_csv(cfg.data.test_csv.as_deref(), "test_csv")?;
            if train.names() != test.names() {
                return Err(CliError::Config("train and test CSV headers differ".into()));
            }
            if cfg.model.target.is_none() {
                return Err(CliError::Config("custom_tabular needs model.target".into()));
            }
            let schema = tabular_schema(&train)?;
            Ok(Prepared {
                train: train.into(),
                test: test.into(),
                network: None,
                c_max: 2,
                max_len: 0,
                schema,
            })
        }
        Task::SyntheticSequence => {
            let mut scm = cfg.data.scm.clone();
            scm.seed = seeds.data_train;
            let (train, test) = generate(&scm, cfg.data.n_records).stage("data")?;
            let c = match cfg.model.c_max {
                Some(c) => c,
                None => c_max(&train.targets()).stage("data")?,
            };
            let max_len = train.max_len().max(test.max_len());
            Ok(Prepared {
                train: train.into(),
                test: test.into(),
                network: None,
                c_max: c,
                max_len,
                schema: SEQUENCE_FEATURES.iter().map(|s| s.to_string()).collect(),
            })
        }
    }
}
