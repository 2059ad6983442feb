use causens_core::causal::{identify_with_factual, IdentifyOptions, SensitivityOutcome, SensitivityVerdict};
use causens_core::cvae::CvaeModel;
use rayon::prelude::*;
use serde::Serialize;

use super::{with_feature, Run};
use crate::error::{CliResult, StageExt};
use crate::output::{csv_line, fmt3, set_label, RunOutput};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub conditioning_set: String,
    pub scenario: String,
    pub accuracy: f64,
}

/// One factual model and the interventional comparisons made against it.
pub struct SetResult {
    pub conditioning: Vec<String>,
    pub factual: CvaeModel,
    pub acc_factual: f64,
    pub interventional: Vec<SensitivityOutcome>,
}

pub struct IdentifyResult {
    pub sets: Vec<SetResult>,
}

impl IdentifyResult {
    /// Factual row then interventional row(s) per set.
    pub fn rows(&self) -> Vec<TableRow> {
        let mut rows = Vec::new();
        for s in &self.sets {
            rows.push(TableRow {
                conditioning_set: set_label(&s.conditioning),
                scenario: "Factual".into(),
                accuracy: s.acc_factual,
            });
            for o in &s.interventional {
                rows.push(TableRow {
                    conditioning_set: set_label(&o.verdict.interventional_conditioning),
                    scenario: "Intv".into(),
                    accuracy: o.verdict.acc_interventional,
                });
            }
        }
        rows
    }

    pub fn verdicts(&self) -> Vec<&SensitivityVerdict> {
        self.sets.iter().flat_map(|s| s.interventional.iter().map(|o| &o.verdict)).collect()
    }

    /// Interventional row with the highest accuracy (first on ties).
    pub fn best_interventional(&self) -> Option<&SensitivityVerdict> {
        self.verdicts()
            .into_iter()
            .fold(None, |best: Option<&SensitivityVerdict>, v| match best {
                Some(b) if b.acc_interventional >= v.acc_interventional => Some(b),
                _ => Some(v),
            })
    }
}

pub fn run_identify(run: &Run) -> CliResult<IdentifyResult> {
    let id = run.cfg.identify.as_ref().ok_or_else(|| crate::CliError::Config("missing [identify] section".into()))?;
    let tc = run.train_config();
    let ctx = run.data.train_context(&run.seeds);
    let sets = id
        .conditioning_sets
        .par_iter()
        .map(|set| -> CliResult<SetResult> {
            let factual = CvaeModel::train(&run.data.train, &run.arch(set), &tc).stage("factual training")?;
            let candidates: Vec<Option<&String>> = if id.candidates.is_empty() {
                vec![None]
            } else {
                id.candidates.iter().map(Some).collect()
            };
            let mut interventional = Vec::with_capacity(candidates.len());
            for c in candidates {
                let options = IdentifyOptions {
                    decision: run.cfg.decision,
                    interventional_conditioning: c.map(|c| with_feature(set, c)),
                    context: ctx,
                };
                let out = identify_with_factual(factual.clone(), &run.data.train, &run.data.test, &tc, &id.intervention, &options)
                    .stage("interventional training")?;
                interventional.push(out);
            }
            let acc_factual = interventional[0].verdict.acc_factual;
            Ok(SetResult {
                conditioning: set.clone(),
                factual,
                acc_factual,
                interventional,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(IdentifyResult { sets })
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = csv_line(&["conditioning_set".into(), "scenario".into(), "accuracy".into()]);
    for r in rows {
        out.push_str(&csv_line(&[r.conditioning_set.clone(), r.scenario.clone(), fmt3(r.accuracy)]));
    }
    out
}

pub fn cmd_identify(run: &Run, out: &mut RunOutput) -> CliResult<()> {
    let result = out.timed("identify", |_| run_identify(run))?;
    out.timed("write", |out| {
        out.write("identify.csv", table_csv(&result.rows()).as_bytes())?;
        for (i, s) in result.sets.iter().enumerate() {
            out.write(&format!("models/set{i}_factual.model"), &s.factual.to_bytes())?;
            for (j, o) in s.interventional.iter().enumerate() {
                out.write(&format!("models/set{i}_intv{j}.model"), &o.interventional.to_bytes())?;
            }
        }
        let summary = serde_json::json!({
            "verdicts": result.verdicts(),
            "best_interventional": result.best_interventional().map(|v| set_label(&v.interventional_conditioning)),
            "config": run.config_json(),
        });
        out.write_json("identify.json", &summary)
    })
}
