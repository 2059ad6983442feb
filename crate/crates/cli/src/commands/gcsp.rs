use causens_core::causal::{gcsp, generate, GcspOptions, GcspOutcome};
use causens_core::cvae::{CvaeModel, Predictions};
use causens_core::metrics::{argmax, MetricsReport};
use rayon::prelude::*;

use super::{with_feature, Run};
use crate::error::{CliError, CliResult, StageExt};
use crate::output::{csv_line, fmt3, set_label, RunOutput};

pub struct MetricsRow {
    pub model: String,
    pub conditioning: Vec<String>,
    pub report: MetricsReport,
}

pub struct GcspResult {
    pub outcome: GcspOutcome,
    /// Baseline, one row per candidate (ablation only) and the final model.
    pub rows: Vec<MetricsRow>,
}

fn evaluate(run: &Run, conditioning: &[String], options: &GcspOptions) -> CliResult<MetricsReport> {
    let model = CvaeModel::train(&run.data.train, &run.arch(conditioning), &run.train_config()).stage("ablation training")?;
    let preds = generate(&model, &run.data.test, options.generation).stage("generation")?;
    MetricsReport::compute(&preds.batch().stage("metrics")?, &options.ks).stage("metrics")
}

pub fn run_gcsp(run: &Run) -> CliResult<GcspResult> {
    let g = run.cfg.gcsp.as_ref().ok_or_else(|| CliError::Config("missing [gcsp] section".into()))?;
    let options = GcspOptions {
        decision: run.cfg.decision,
        context: run.data.train_context(&run.seeds),
        generation: g.generation.with_seed(run.seeds.prior),
        ks: g.ks.clone(),
    };
    let outcome = gcsp(
        &run.data.train,
        &run.data.test,
        &run.arch(&g.baseline),
        &run.train_config(),
        &g.candidates,
        &options,
    )
    .stage("gcsp")?;
    let mut rows = Vec::new();
    if g.ablation {
        let mut sets = vec![("Baseline".to_string(), g.baseline.clone())];
        for c in &g.candidates {
            sets.push((format!("+{}", c.feature), with_feature(&g.baseline, &c.feature)));
        }
        let reports = sets
            .par_iter()
            .map(|(_, cond)| evaluate(run, cond, &options))
            .collect::<CliResult<Vec<_>>>()?;
        for ((model, conditioning), report) in sets.into_iter().zip(reports) {
            rows.push(MetricsRow {
                model,
                conditioning,
                report,
            });
        }
    }
    rows.push(MetricsRow {
        model: if outcome.fallback { "GCSP (baseline fallback)" } else { "GCSP" }.to_string(),
        conditioning: outcome.conditioning_used.clone(),
        report: outcome.report.clone(),
    });
    Ok(GcspResult { outcome, rows })
}

pub fn metrics_csv(rows: &[MetricsRow], ks: &[usize]) -> String {
    let mut header = vec!["model".to_string(), "conditioning".to_string()];
    header.extend(ks.iter().map(|k| format!("acc@{k}")));
    header.push("mrr".into());
    let mut out = csv_line(&header);
    for r in rows {
        let mut line = vec![r.model.clone(), set_label(&r.conditioning)];
        line.extend(ks.iter().map(|k| fmt3(r.report.acc_at[k])));
        line.push(fmt3(r.report.mrr));
        out.push_str(&csv_line(&line));
    }
    out
}

pub fn predictions_csv(p: &Predictions) -> String {
    let mut out = csv_line(&["row", "target", "predicted", "probability"].map(String::from));
    for i in 0..p.len() {
        let row = p.probs.row(i);
        let target = p.targets.as_ref().map(|t| t[i].to_string()).unwrap_or_default();
        out.push_str(&csv_line(&[
            i.to_string(),
            target,
            p.labels[i].to_string(),
            fmt3(row[argmax(row)]),
        ]));
    }
    out
}

pub fn cmd_gcsp(run: &Run, out: &mut RunOutput) -> CliResult<()> {
    let result = out.timed("gcsp", |_| run_gcsp(run))?;
    let ks = run.cfg.gcsp.as_ref().map(|g| g.ks.clone()).unwrap_or_default();
    out.timed("write", |out| {
        out.write("gcsp.csv", metrics_csv(&result.rows, &ks).as_bytes())?;
        out.write("predictions.csv", predictions_csv(&result.outcome.predictions).as_bytes())?;
        out.write("models/gcsp.model", &result.outcome.model.to_bytes())?;
        let o = &result.outcome;
        let summary = serde_json::json!({
            "verdicts": o.verdicts,
            "selected": o.selected,
            "conditioning_used": o.conditioning_used,
            "fallback": o.fallback,
            "report": o.report,
            "config": run.config_json(),
        });
        out.write_json("gcsp.json", &summary)
    })
}
