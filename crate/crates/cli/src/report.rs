use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use repdecode::rng::derive_seed;
use repdecode::stats::{bootstrap_ci, mean, paired_t, PairedSample};
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::decode::{DecodeOutput, DecodeRecord, RESULTS_FILE};
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, write_text};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub comparison: String,
    pub task: String,
    pub metric: String,
    pub baseline_step: u32,
    pub step: u32,
    pub n: usize,
    pub baseline_mean: f64,
    pub treatment_mean: f64,
    pub mean_diff: f64,
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub significant: bool,
    /// Bootstrap interval for the mean of `treatment - baseline`.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub baseline_task: String,
    pub alpha: f64,
    pub confidence: f64,
    pub bootstrap_resamples: usize,
    pub comparisons: Vec<Comparison>,
}

type Metric = fn(&DecodeRecord) -> f64;

const METRICS: [(&str, Metric); 2] = [
    ("average_rank", |r| r.average_rank),
    ("mse", |r| r.mse),
];

/// Paired tests of every task's final step against the baseline task, pooled
/// over `(subject, run)`. A pair uses the baseline result of the same run
/// when there is one, else the subject's mean baseline result.
pub fn build(output: &DecodeOutput, baseline: &str, cfg: &AnalysisConfig) -> CliResult<Report> {
    let records = &output.records;
    let base_step = records
        .iter()
        .filter(|r| r.task == baseline)
        .map(|r| r.step)
        .max()
        .ok_or_else(|| CliError::usage(format!("baseline task {baseline:?} has no results")))?;
    let base: Vec<&DecodeRecord> = records
        .iter()
        .filter(|r| r.task == baseline && r.step == base_step)
        .collect();

    let mut finals: BTreeMap<&str, u32> = BTreeMap::new();
    for r in records.iter().filter(|r| r.task != baseline) {
        let s = finals.entry(&r.task).or_insert(r.step);
        *s = (*s).max(r.step);
    }

    let mut comparisons = Vec::new();
    for (task, step) in finals {
        let mut treated: Vec<&DecodeRecord> = records
            .iter()
            .filter(|r| r.task == task && r.step == step)
            .collect();
        treated.sort_by(|a, b| (&a.subject, a.run).cmp(&(&b.subject, b.run)));
        let subjects: BTreeSet<&str> = treated.iter().map(|r| r.subject.as_str()).collect();
        for (metric, value) in METRICS {
            let mut b = Vec::with_capacity(treated.len());
            let mut t = Vec::with_capacity(treated.len());
            for r in &treated {
                b.push(baseline_value(&base, r, value)?);
                t.push(value(r));
            }
            let sample = PairedSample::new(b, t)?;
            let test = paired_t(&sample)?;
            let diffs: Vec<f64> = sample
                .treatment()
                .iter()
                .zip(sample.baseline())
                .map(|(t, b)| t - b)
                .collect();
            let seed = derive_seed(cfg.seed, comparisons.len() as u64);
            let (ci_low, ci_high) = bootstrap_ci(&diffs, cfg.confidence, cfg.bootstrap_resamples, seed)?;
            comparisons.push(Comparison {
                comparison: format!("{task}@{step} vs {baseline}@{base_step}"),
                task: task.to_string(),
                metric: metric.to_string(),
                baseline_step: base_step,
                step,
                n: sample.len(),
                baseline_mean: mean(sample.baseline()),
                treatment_mean: mean(sample.treatment()),
                mean_diff: test.mean_diff,
                t: test.t,
                df: test.df,
                p: test.p,
                significant: test.significant(cfg.alpha),
                ci_low,
                ci_high,
            });
        }
        log::info!("{task}: {} pairs over {} subjects", treated.len(), subjects.len());
    }
    if comparisons.is_empty() {
        return Err(CliError::usage("no task besides the baseline to compare"));
    }
    Ok(Report {
        baseline_task: baseline.to_string(),
        alpha: cfg.alpha,
        confidence: cfg.confidence,
        bootstrap_resamples: cfg.bootstrap_resamples,
        comparisons,
    })
}

fn baseline_value(
    base: &[&DecodeRecord],
    r: &DecodeRecord,
    value: Metric,
) -> CliResult<f64> {
    if let Some(b) = base.iter().find(|b| b.subject == r.subject && b.run == r.run) {
        return Ok(value(b));
    }
    let own: Vec<f64> = base
        .iter()
        .filter(|b| b.subject == r.subject)
        .map(|b| value(b))
        .collect();
    if own.is_empty() {
        return Err(CliError::Core(repdecode::Error::Manifest(format!(
            "subject {} has no baseline result",
            r.subject
        ))));
    }
    Ok(mean(&own))
}

pub fn markdown(report: &Report, generated: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Decoding report\n");
    let _ = writeln!(s, "Generated {generated}.\n");
    let _ = writeln!(
        s,
        "Baseline task `{}`; paired t-tests at alpha {}, {}% bootstrap intervals ({} resamples).\n",
        report.baseline_task,
        report.alpha,
        100.0 * report.confidence,
        report.bootstrap_resamples
    );
    let _ = writeln!(s, "| comparison | metric | n | baseline | treatment | diff | CI | t | df | p | sig. |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|");
    for c in &report.comparisons {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.4} | {:.4} | {:.4} | [{:.4}, {:.4}] | {:.3} | {} | {:.3e} | {} |",
            c.comparison,
            c.metric,
            c.n,
            c.baseline_mean,
            c.treatment_mean,
            c.mean_diff,
            c.ci_low,
            c.ci_high,
            c.t,
            c.df,
            c.p,
            if c.significant { "yes" } else { "no" }
        );
    }
    s
}

/// Reads `<results>/decode_results.json` and writes the JSON and Markdown
/// reports to the output directory.
pub fn run(results: &Path, baseline: Option<&str>, cfg: &AnalysisConfig) -> CliResult<Report> {
    let output = DecodeOutput::load(&results.join(RESULTS_FILE))?;
    let baseline = baseline
        .or(output.baseline_task.as_deref())
        .ok_or_else(|| CliError::usage("no baseline task recorded; pass --baseline"))?
        .to_string();
    let report = build(&output, &baseline, cfg)?;
    ensure_dir(&cfg.out)?;
    write_text(&cfg.out.join(REPORT_JSON), &serde_json::to_string_pretty(&report)?)?;
    let stamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    write_text(&cfg.out.join(REPORT_MD), &markdown(&report, &stamp))?;
    Ok(report)
}
