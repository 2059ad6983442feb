use causens_core::causal::{counterfactual_analysis, CounterfactualOptions, CounterfactualOutcome};
use causens_core::cvae::CvaeModel;
use rayon::prelude::*;

use super::{latent_csv, Run};
use crate::error::{CliError, CliResult, StageExt};
use crate::output::{csv_line, fmt3, RunOutput};

pub struct CounterfactualResult {
    pub gp_f: CvaeModel,
    pub outcomes: Vec<CounterfactualOutcome>,
}

pub fn run_counterfactual(run: &Run) -> CliResult<CounterfactualResult> {
    let cf = run
        .cfg
        .counterfactual
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [counterfactual] section".into()))?;
    let gp_f = CvaeModel::train(&run.data.train, &run.arch(&cf.conditioning), &run.train_config()).stage("factual training")?;
    let options = CounterfactualOptions {
        decision: run.cfg.decision,
        target: cf.target_mode,
        context: run.data.test_context(&run.seeds),
    };
    let outcomes = cf
        .alterations
        .par_iter()
        .map(|a| counterfactual_analysis(&gp_f, &run.data.test, a, &options).stage("counterfactual"))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(CounterfactualResult { gp_f, outcomes })
}

pub fn table_csv(outcomes: &[CounterfactualOutcome]) -> String {
    let mut out = csv_line(&["feature", "factual_acc", "cf_acc", "delta"].map(String::from));
    for o in outcomes {
        let v = &o.verdict;
        out.push_str(&csv_line(&[
            v.altered_feature.clone(),
            fmt3(v.acc_factual),
            fmt3(v.acc_counterfactual),
            fmt3(v.delta_acc),
        ]));
    }
    out
}

pub fn cmd_counterfactual(run: &Run, out: &mut RunOutput) -> CliResult<()> {
    let result = out.timed("counterfactual", |_| run_counterfactual(run))?;
    out.timed("write", |out| {
        out.write("counterfactual.csv", table_csv(&result.outcomes).as_bytes())?;
        out.write("models/gp_f.model", &result.gp_f.to_bytes())?;
        if let Some(first) = result.outcomes.first() {
            out.write("latent/z_factual.csv", latent_csv(&first.factual.latent.z).as_bytes())?;
        }
        let mut entries = Vec::new();
        for (i, o) in result.outcomes.iter().enumerate() {
            let name = format!("latent/z_cf{i}_{}.csv", o.verdict.altered_feature);
            out.write(&name, latent_csv(&o.counterfactual.latent.z).as_bytes())?;
            entries.push(serde_json::json!({
                "verdict": o.verdict,
                "latent_jsd": o.latent_jsd,
                "latent_dump": name,
            }));
        }
        let summary = serde_json::json!({
            "counterfactuals": entries,
            "config": run.config_json(),
        });
        out.write_json("counterfactual.json", &summary)
    })
}
