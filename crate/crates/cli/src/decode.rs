use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::info;
use rayon::prelude::*;
use repdecode::decoder::{nested_cv_decode, FoldScore, RidgeConfig};
use repdecode::matrixio::{read_matrix, EntryKind, RunManifest};
use repdecode::rng::derive_seed;
use repdecode::stats::{bootstrap_ci, mean};
use repdecode::{Error, Matrix};
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{CliError, CliResult};
use crate::output::{cell, ensure_dir, write_csv, write_text};

pub const RESULTS_FILE: &str = "decode_results.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRecord {
    pub subject: String,
    pub task: String,
    pub run: u32,
    pub step: u32,
    pub mse: f64,
    pub average_rank: f64,
    pub per_fold: Vec<FoldScore>,
    pub ranks: Vec<usize>,
    pub folds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutput {
    pub baseline_task: Option<String>,
    pub ridge: RidgeConfig,
    pub records: Vec<DecodeRecord>,
}

impl DecodeOutput {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Decodes every sentence-representation entry from every subject.
pub fn run(cfg: &AnalysisConfig) -> CliResult<DecodeOutput> {
    let manifest = RunManifest::load(cfg.require_manifest()?)?;

    let mut brains: Vec<(String, Matrix)> = Vec::new();
    for e in manifest.brains() {
        let subject = e.subject.clone().unwrap_or_default();
        brains.push((subject, read_matrix(manifest.resolve(e))?));
    }
    brains.sort_by(|a, b| a.0.cmp(&b.0));

    let mut models: Vec<_> = manifest.of_kind(EntryKind::SentenceReps).collect();
    models.sort_by(|a, b| (&a.task, a.run, a.step).cmp(&(&b.task, b.run, b.step)));
    let reps = models
        .iter()
        .map(|e| read_matrix(manifest.resolve(e)))
        .collect::<repdecode::Result<Vec<_>>>()?;

    if brains.is_empty() || models.is_empty() {
        return Err(Error::Manifest("need at least one brain and one sentence-reps entry".into()).into());
    }
    let n = brains[0].1.rows();
    for (label, rows) in brains
        .iter()
        .map(|(s, m)| (format!("subject {s}"), m.rows()))
        .chain(models.iter().zip(&reps).map(|(e, m)| (e.path.display().to_string(), m.rows())))
    {
        if rows != n {
            return Err(Error::DimensionMismatch(format!(
                "{label} has {rows} sentences, expected {n}"
            ))
            .into());
        }
    }

    let jobs: Vec<(usize, usize)> = (0..brains.len())
        .flat_map(|b| (0..models.len()).map(move |m| (b, m)))
        .collect();
    info!("{} decoding jobs over {n} sentences", jobs.len());
    let results: Vec<repdecode::Result<DecodeRecord>> = cfg.in_pool(|| {
        jobs.par_iter()
            .map(|&(b, m)| {
                let res = nested_cv_decode(&brains[b].1, &reps[m], &cfg.ridge)?;
                let e = models[m];
                Ok(DecodeRecord {
                    subject: brains[b].0.clone(),
                    task: e.task.clone(),
                    run: e.run,
                    step: e.step,
                    mse: res.mse,
                    average_rank: res.average_rank,
                    per_fold: res.per_fold,
                    ranks: res.per_sentence_rank,
                    folds: res.folds,
                })
            })
            .collect()
    })?;
    let records = results.into_iter().collect::<repdecode::Result<Vec<_>>>()?;

    let output = DecodeOutput {
        baseline_task: manifest.baseline_task.clone(),
        ridge: cfg.ridge.clone(),
        records,
    };
    ensure_dir(&cfg.out)?;
    write_text(
        &cfg.out.join(RESULTS_FILE),
        &serde_json::to_string_pretty(&output)?,
    )?;
    let rows = trajectory(&output.records, output.baseline_task.as_deref(), cfg)?;
    write_trajectory(&cfg.out.join(TRAJECTORY_FILE), &rows)?;
    Ok(output)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub task: String,
    pub step: u32,
    pub n: usize,
    pub mean_average_rank: f64,
    pub mean_mse: f64,
    pub ar_ci: (f64, f64),
    pub delta_average_rank: Option<f64>,
    pub delta_mse: Option<f64>,
    pub delta_ar_ci: Option<(f64, f64)>,
}

/// Mean `(average_rank, mse)` per subject.
pub type SubjectScores = BTreeMap<String, (f64, f64)>;

/// Per-subject mean scores of `task` at its last recorded step.
pub fn baseline_scores(
    records: &[DecodeRecord],
    task: &str,
) -> CliResult<(u32, SubjectScores)> {
    let step = records
        .iter()
        .filter(|r| r.task == task)
        .map(|r| r.step)
        .max()
        .ok_or_else(|| CliError::Core(Error::Manifest(format!("baseline task {task:?} has no results"))))?;
    let mut acc: BTreeMap<String, Vec<&DecodeRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.task == task && r.step == step) {
        acc.entry(r.subject.clone()).or_default().push(r);
    }
    let scores = acc
        .into_iter()
        .map(|(s, rs)| {
            let ar = mean(&rs.iter().map(|r| r.average_rank).collect::<Vec<_>>());
            let mse = mean(&rs.iter().map(|r| r.mse).collect::<Vec<_>>());
            (s, (ar, mse))
        })
        .collect();
    Ok((step, scores))
}

/// Mean scores per `(task, step)` over subjects and runs, with deltas against
/// each subject's baseline score and bootstrap intervals.
pub fn trajectory(
    records: &[DecodeRecord],
    baseline: Option<&str>,
    cfg: &AnalysisConfig,
) -> CliResult<Vec<TrajectoryRow>> {
    let base = baseline.map(|t| baseline_scores(records, t)).transpose()?;
    let mut groups: BTreeMap<(&str, u32), Vec<&DecodeRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((&r.task, r.step)).or_default().push(r);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (i, ((task, step), rs)) in groups.into_iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64);
        let ars: Vec<f64> = rs.iter().map(|r| r.average_rank).collect();
        let mses: Vec<f64> = rs.iter().map(|r| r.mse).collect();
        let ar_ci = bootstrap_ci(&ars, cfg.confidence, cfg.bootstrap_resamples, seed)?;
        let (mut delta_average_rank, mut delta_mse, mut delta_ar_ci) = (None, None, None);
        if let Some((_, scores)) = &base {
            let mut d_ar = Vec::with_capacity(rs.len());
            let mut d_mse = Vec::with_capacity(rs.len());
            for r in &rs {
                let (b_ar, b_mse) = scores.get(&r.subject).ok_or_else(|| {
                    CliError::Core(Error::Manifest(format!(
                        "subject {} has no baseline result",
                        r.subject
                    )))
                })?;
                d_ar.push(r.average_rank - b_ar);
                d_mse.push(r.mse - b_mse);
            }
            delta_average_rank = Some(mean(&d_ar));
            delta_mse = Some(mean(&d_mse));
            delta_ar_ci = Some(bootstrap_ci(
                &d_ar,
                cfg.confidence,
                cfg.bootstrap_resamples,
                derive_seed(seed, 1),
            )?);
        }
        rows.push(TrajectoryRow {
            task: task.to_string(),
            step,
            n: rs.len(),
            mean_average_rank: mean(&ars),
            mean_mse: mean(&mses),
            ar_ci,
            delta_average_rank,
            delta_mse,
            delta_ar_ci,
        });
    }
    Ok(rows)
}

fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> CliResult<()> {
    let header = [
        "task",
        "step",
        "n",
        "mean_average_rank",
        "mean_mse",
        "ar_ci_low",
        "ar_ci_high",
        "delta_average_rank",
        "delta_mse",
        "delta_ar_ci_low",
        "delta_ar_ci_high",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.task.clone(),
                r.step.to_string(),
                r.n.to_string(),
                r.mean_average_rank.to_string(),
                r.mean_mse.to_string(),
                r.ar_ci.0.to_string(),
                r.ar_ci.1.to_string(),
                cell(r.delta_average_rank),
                cell(r.delta_mse),
                cell(r.delta_ar_ci.map(|c| c.0)),
                cell(r.delta_ar_ci.map(|c| c.1)),
            ]
        })
        .collect();
    write_csv(path, &header, &body)
}
