//! One function per subcommand. Each reads its inputs under the workdir,
//! writes its outputs to `out` and archives the resolved configuration there
//! as `<command>.config.json`.

use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;
use scenopt::instances::io::{instances_to_csv, read_instances, write_instances, InstanceRecord};
use scenopt::instances::ProblemKind;
use scenopt::jsonl::{read_records, write_record};
use scenopt::pipeline::{
    generate_family, make_dataset, metrics_from_csv, metrics_to_csv, predict, reference_solve, run_pipeline,
    strip_timing, summarize, MetricsRow, OptimumRecord, PipelineReport, Reference, RunStatus,
    SolveTiming,
};
use scenopt::seqmodel::{from_checkpoint, to_checkpoint, train, FeatureScaling, SeqModel, TrainingSample};
use scenopt::solver::MipStatus;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::workdir::{join, Timing, Workdir};

pub const INSTANCES: &str = "instances.jsonl";
pub const INSTANCES_CSV: &str = "instances.csv";
pub const DATASET: &str = "dataset.jsonl";
pub const OPTIMA: &str = "optima.jsonl";
pub const EXCLUDED: &str = "excluded.jsonl";
pub const SOLVE_TIMING: &str = "solve_timing.jsonl";
pub const MODEL: &str = "model.jsonl";
pub const TRAIN_LOG: &str = "train_log.json";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const METRICS: &str = "metrics.csv";
pub const SOLUTIONS: &str = "solutions.jsonl";
pub const EVALUATE_TIMING: &str = "evaluate_timing.jsonl";
pub const SUMMARY: &str = "summary.json";

fn jsonl<T: Serialize>(records: &[T]) -> Result<String, CliError> {
    let mut buf = Vec::new();
    for r in records {
        write_record(&mut buf, r)?;
    }
    String::from_utf8(buf).map_err(|e| CliError::runtime(e.to_string()))
}

fn parse_jsonl<T: serde::de::DeserializeOwned>(text: &str, path: &str) -> Result<Vec<T>, CliError> {
    read_records(text.as_bytes()).map_err(|e| CliError::validation(format!("{path}: {e}")))
}

fn pretty(value: &impl Serialize) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn out_dir(cfg: &RunConfig) -> String {
    cfg.out.clone().unwrap_or_else(|| ".".into())
}

fn archive(ws: &mut Workdir, out: &str, command: &str, resolved: Value) -> Result<(), CliError> {
    ws.write(&join(out, &format!("{command}.config.json")), &pretty(&resolved)?, Timing::None)
}

fn load_instances(ws: &Workdir, rel: &str) -> Result<Vec<InstanceRecord>, CliError> {
    let text = ws.read(rel, "instance file")?;
    read_instances(text.as_bytes()).map_err(|e| CliError::validation(format!("{rel}: {e}")))
}

fn load_model(ws: &Workdir, rel: &str) -> Result<SeqModel, CliError> {
    let text = ws.read(rel, "model checkpoint")?;
    from_checkpoint(&text).map_err(|e| CliError::validation(format!("{rel}: {e}")))
}

/// Directory part of a workdir-relative path.
fn parent(rel: &str) -> String {
    match rel.rfind('/') {
        Some(k) => rel[..k].to_string(),
        None => ".".into(),
    }
}

fn scaling_for(kind: ProblemKind, cfg: &RunConfig) -> FeatureScaling {
    let family = cfg.family();
    match kind {
        ProblemKind::Mclsp => FeatureScaling::mclsp(&family.mclsp),
        ProblemKind::Msmk => FeatureScaling::msmk(&family.msmk),
    }
}

pub fn generate(ws: &mut Workdir, cfg: &RunConfig, csv: bool) -> Result<(), CliError> {
    let spec = cfg.family();
    let records = generate_family(&spec)?;
    let out = out_dir(cfg);
    let mut buf = Vec::new();
    write_instances(&mut buf, &records)?;
    ws.write(&join(&out, INSTANCES), &String::from_utf8_lossy(&buf), Timing::None)?;
    if csv {
        ws.write(&join(&out, INSTANCES_CSV), &instances_to_csv(&records), Timing::None)?;
    }
    info!("generated {} instances", records.len());
    archive(ws, &out, "generate", json!({ "command": "generate", "family": spec, "out": out, "csv": csv }))
}

pub fn solve(ws: &mut Workdir, cfg: &RunConfig) -> Result<(), CliError> {
    let input = cfg.instances.clone().unwrap_or_else(|| INSTANCES.into());
    let records = load_instances(ws, &input)?;
    let budget = cfg.budget();
    let ds = make_dataset(&records, &budget)?;
    let out = out_dir(cfg);
    ws.write(&join(&out, DATASET), &jsonl(&ds.samples)?, Timing::None)?;
    ws.write(&join(&out, OPTIMA), &jsonl(&ds.optima)?, Timing::None)?;
    ws.write(&join(&out, EXCLUDED), &jsonl(&ds.excluded)?, Timing::None)?;
    ws.write(&join(&out, SOLVE_TIMING), &jsonl(&ds.timings)?, Timing::All)?;
    archive(
        ws,
        &out,
        "solve",
        json!({ "command": "solve", "instances": input, "budget": budget, "out": out }),
    )
}

pub fn train_cmd(ws: &mut Workdir, cfg: &RunConfig) -> Result<(), CliError> {
    let input = cfg.dataset.clone().unwrap_or_else(|| DATASET.into());
    let samples: Vec<TrainingSample> = parse_jsonl(&ws.read(&input, "dataset")?, &input)?;
    let Some(first) = samples.first() else {
        return Err(CliError::validation(format!("dataset {input} is empty")));
    };
    let (kind, items) = (first.instance.kind(), first.instance.items());
    if let Some(bad) = samples.iter().find(|s| s.instance.kind() != kind || s.instance.items() != items) {
        return Err(CliError::validation(format!(
            "sample {} differs in kind or item count from the first sample",
            bad.id
        )));
    }
    let scaling = scaling_for(kind, cfg);
    let tc = cfg.train();
    let (model, log) = train(&samples, &scaling, &tc)?;
    let out = out_dir(cfg);
    ws.write(&join(&out, MODEL), &to_checkpoint(&model)?, Timing::None)?;
    ws.write(&join(&out, TRAIN_LOG), &pretty(&log)?, Timing::None)?;
    archive(
        ws,
        &out,
        "train",
        json!({ "command": "train", "dataset": input, "train": tc, "scaling": scaling, "out": out }),
    )
}

#[derive(Serialize)]
struct PredictionRecord {
    id: u64,
    /// `[item][node]`
    probs: Vec<Vec<f64>>,
}

pub fn predict_cmd(ws: &mut Workdir, cfg: &RunConfig) -> Result<(), CliError> {
    let model_path = cfg.model.clone().unwrap_or_else(|| MODEL.into());
    let model = load_model(ws, &model_path)?;
    let input = cfg.instances.clone().unwrap_or_else(|| INSTANCES.into());
    let records = load_instances(ws, &input)?;
    let expand = cfg.expand();
    let preds = records
        .par_iter()
        .map(|r| {
            Ok(PredictionRecord {
                id: r.id,
                probs: predict(&model, &r.instance, &expand)?,
            })
        })
        .collect::<scenopt::Result<Vec<_>>>()?;
    let out = out_dir(cfg);
    ws.write(&join(&out, PREDICTIONS), &jsonl(&preds)?, Timing::None)?;
    archive(
        ws,
        &out,
        "predict",
        json!({ "command": "predict", "model": model_path, "instances": input, "expand": expand, "out": out }),
    )
}

#[derive(Serialize)]
struct SolutionRecord {
    id: u64,
    status: RunStatus,
    objective: f64,
    solution: Option<scenopt::instances::SolutionVector>,
}

#[derive(Serialize)]
struct EvaluateTiming {
    id: u64,
    reference_seconds: f64,
    pipeline_seconds: f64,
}

fn references(
    ws: &Workdir,
    records: &[InstanceRecord],
    optima_path: &str,
    time_limit: Option<f64>,
) -> Result<Vec<Reference>, CliError> {
    let mut archived: BTreeMap<u64, OptimumRecord> = BTreeMap::new();
    let mut seconds: BTreeMap<u64, f64> = BTreeMap::new();
    if ws.exists(optima_path) {
        for o in parse_jsonl::<OptimumRecord>(&ws.read(optima_path, "optima file")?, optima_path)? {
            archived.insert(o.id, o);
        }
        let timing_path = join(&parent(optima_path), SOLVE_TIMING);
        if ws.exists(&timing_path) {
            for t in parse_jsonl::<SolveTiming>(&ws.read(&timing_path, "timing file")?, &timing_path)? {
                seconds.insert(t.id, t.seconds);
            }
        }
    } else {
        info!("no archived optima at {optima_path}, solving references");
    }
    records
        .par_iter()
        .map(|r| match (archived.get(&r.id), seconds.get(&r.id)) {
            (Some(o), Some(&s)) => Ok(Reference::from_optimum(o, s)),
            _ => {
                let reference = reference_solve(&r.instance, time_limit)?;
                if reference.status != MipStatus::Optimal {
                    warn!("instance {}: reference solve ended {:?}", r.id, reference.status);
                }
                Ok(reference)
            }
        })
        .collect::<scenopt::Result<Vec<_>>>()
        .map_err(CliError::from)
}

pub fn evaluate(ws: &mut Workdir, cfg: &RunConfig) -> Result<(), CliError> {
    let model_path = cfg.model.clone().unwrap_or_else(|| MODEL.into());
    let model = load_model(ws, &model_path)?;
    let input = cfg.instances.clone().unwrap_or_else(|| INSTANCES.into());
    let records = load_instances(ws, &input)?;
    let optima_path = cfg.optima.clone().unwrap_or_else(|| join(&parent(&input), OPTIMA));
    let pcfg = cfg.pipeline();
    pcfg.validate()?;
    let refs = references(ws, &records, &optima_path, pcfg.time_limit)?;

    let outcomes = records
        .par_iter()
        .zip(&refs)
        .map(|(r, reference)| run_pipeline(r.id, &r.instance, &model, &pcfg, reference))
        .collect::<scenopt::Result<Vec<_>>>()?;
    let reports: Vec<&PipelineReport> = outcomes.iter().map(|o| &o.report).collect();
    let failed = reports.iter().filter(|r| r.status == RunStatus::Failed).count();
    if failed > 0 {
        warn!("{failed} of {} pipeline runs found no feasible solution", reports.len());
    }

    let rows: Vec<MetricsRow> = reports.iter().map(|&r| MetricsRow::from(r)).collect();
    let csv = metrics_to_csv(&rows)?;
    let stable = strip_timing(&csv)?;
    let solutions: Vec<SolutionRecord> = outcomes
        .iter()
        .map(|o| SolutionRecord {
            id: o.report.id,
            status: o.report.status,
            objective: o.report.objective,
            solution: o.solution.clone(),
        })
        .collect();
    let timing: Vec<EvaluateTiming> = reports
        .iter()
        .map(|r| EvaluateTiming {
            id: r.id,
            reference_seconds: r.reference_seconds,
            pipeline_seconds: r.pipeline_seconds,
        })
        .collect();
    let out = out_dir(cfg);
    ws.write(&join(&out, METRICS), &csv, Timing::Stripped(stable))?;
    ws.write(&join(&out, SOLUTIONS), &jsonl(&solutions)?, Timing::None)?;
    ws.write(&join(&out, EVALUATE_TIMING), &jsonl(&timing)?, Timing::All)?;
    archive(
        ws,
        &out,
        "evaluate",
        json!({
            "command": "evaluate",
            "model": model_path,
            "instances": input,
            "optima": optima_path,
            "pipeline": pcfg,
            "out": out,
        }),
    )
}

pub fn report(ws: &mut Workdir, cfg: &RunConfig) -> Result<(), CliError> {
    let input = cfg.metrics.clone().unwrap_or_else(|| METRICS.into());
    let rows = metrics_from_csv(&ws.read(&input, "metrics file")?)
        .map_err(|e| CliError::validation(format!("{input}: {e}")))?;
    let summary = summarize(&rows);
    let text = pretty(&summary)?;
    let mut value = serde_json::to_value(&summary).map_err(|e| CliError::runtime(e.to_string()))?;
    if let Value::Object(m) = &mut value {
        m.remove("timing");
    }
    let out = out_dir(cfg);
    ws.write(&join(&out, SUMMARY), &text, Timing::Stripped(pretty(&value)?))?;
    archive(ws, &out, "report", json!({ "command": "report", "metrics": input, "out": out }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_of_relative_paths() {
        assert_eq!(parent("instances.jsonl"), ".");
        assert_eq!(parent("test/instances.jsonl"), "test");
    }
}
