pub mod counterfactual;
pub mod gcsp;
pub mod gradcheck;
pub mod identify;
pub mod report;
pub mod sample_bn;

use causens_core::cvae::{CvaeArchitecture, TrainConfig};
use causens_core::ndcompute::Tensor;

use crate::config::ExperimentConfig;
use crate::data::{prepare, Prepared, RunSeeds};
use crate::error::CliResult;
use crate::output::csv_line;

/// A validated config with its data generated.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub seeds: RunSeeds,
    pub data: Prepared,
}

impl Run {
    pub fn new(cfg: ExperimentConfig) -> CliResult<Self> {
        let seeds = RunSeeds::new(cfg.seed);
        let data = prepare(&cfg, &seeds)?;
        cfg.validate(&data.schema)?;
        Ok(Self { cfg, seeds, data })
    }

    /// Training settings with the run's `init` seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seeds.init,
            ..self.cfg.train.clone()
        }
    }

    pub fn arch(&self, conditioning: &[String]) -> CvaeArchitecture {
        self.cfg.architecture(conditioning, self.data.c_max, self.data.max_len)
    }

    pub fn config_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.cfg).expect("config serializes")
    }
}

/// `base` followed by `extra` when it is not already present.
pub fn with_feature(base: &[String], extra: &str) -> Vec<String> {
    let mut v = base.to_vec();
    if !v.iter().any(|f| f == extra) {
        v.push(extra.to_string());
    }
    v
}

/// Latent batch as CSV with columns `z0..z{d-1}`.
pub fn latent_csv(z: &Tensor) -> String {
    let header: Vec<String> = (0..z.cols()).map(|j| format!("z{j}")).collect();
    let mut out = csv_line(&header);
    for i in 0..z.rows() {
        let row: Vec<String> = z.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&csv_line(&row));
    }
    out
}
