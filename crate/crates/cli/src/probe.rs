use std::collections::BTreeMap;
use std::path::PathBuf;

use log::info;
use rayon::prelude::*;
use repdecode::matrixio::{read_sequences, EntryKind, RunManifest};
use repdecode::probe::{evaluate_uas, prepare_examples, probe_loss, probe_train, read_conllu, ParsedSentence};
use repdecode::rng::permutation;
use repdecode::Error;

use crate::config::AnalysisConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, file_stem, write_csv};

pub const UAS_FILE: &str = "probe_uas.csv";
pub const TRAJECTORY_FILE: &str = "probe_trajectory.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub task: String,
    pub run: u32,
    pub step: u32,
    pub uas: f64,
    pub test_loss: f64,
    pub train_loss: Option<f64>,
}

/// Seeded split of sentence indices into (train, test), each sorted.
pub fn split(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let order = permutation(seed, n);
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

/// Trains one probe per token-representation entry on a shared train split
/// of the treebank sentences and scores it on the held-out rest.
pub fn run(conllu: &[PathBuf], cfg: &AnalysisConfig) -> CliResult<Vec<ProbeRow>> {
    if conllu.is_empty() {
        return Err(CliError::usage("no CoNLL-U file given (--conllu)"));
    }
    let manifest = RunManifest::load(cfg.require_manifest()?)?;
    let mut sentences = Vec::new();
    for p in conllu {
        sentences.extend(read_conllu(p)?);
    }
    let n = sentences.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least two treebank sentences, got {n}")).into());
    }
    let (train_idx, test_idx) = split(n, cfg.probe_test_fraction, cfg.seed);
    info!("{} train / {} test sentences", train_idx.len(), test_idx.len());

    let mut entries: Vec<_> = manifest.of_kind(EntryKind::TokenReps).collect();
    if entries.is_empty() {
        return Err(Error::Manifest("no token-reps entries listed".into()).into());
    }
    entries.sort_by(|a, b| (&a.task, a.run, a.step).cmp(&(&b.task, b.run, b.step)));
    let model_dir = cfg.out.join("probe");
    ensure_dir(&model_dir)?;

    let results: Vec<repdecode::Result<ProbeRow>> = cfg.in_pool(|| {
        entries
            .par_iter()
            .map(|e| {
                let set = read_sequences(manifest.resolve(e))?;
                if set.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "{} holds {} sentences, treebank has {n}",
                        e.path.display(),
                        set.len()
                    )));
                }
                let reps = set.into_sentences();
                let attach = |idx: &[usize]| -> repdecode::Result<Vec<ParsedSentence>> {
                    idx.iter()
                        .map(|&i| sentences[i].clone().with_reps(reps[i].clone()))
                        .collect()
                };
                let train = attach(&train_idx)?;
                let test = attach(&test_idx)?;
                let model = probe_train(&train, &cfg.probe)?;
                model.save(&model_dir, &file_stem(&[&e.task, &format!("run{}", e.run), &format!("step{}", e.step)]))?;
                Ok(ProbeRow {
                    task: e.task.clone(),
                    run: e.run,
                    step: e.step,
                    uas: evaluate_uas(&model, &test)?,
                    test_loss: probe_loss(&model, &prepare_examples(&test)?),
                    train_loss: model.training_log.last().copied(),
                })
            })
            .collect()
    })?;
    let rows = results.into_iter().collect::<repdecode::Result<Vec<_>>>()?;

    write_csv(
        &cfg.out.join(UAS_FILE),
        &["task", "run", "step", "uas", "test_loss", "train_loss"],
        &rows
            .iter()
            .map(|r| {
                vec![
                    r.task.clone(),
                    r.run.to_string(),
                    r.step.to_string(),
                    r.uas.to_string(),
                    r.test_loss.to_string(),
                    crate::output::cell(r.train_loss),
                ]
            })
            .collect::<Vec<_>>(),
    )?;

    let mut by_step: BTreeMap<(&str, u32), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        by_step.entry((&r.task, r.step)).or_default().push(r.uas);
    }
    write_csv(
        &cfg.out.join(TRAJECTORY_FILE),
        &["task", "step", "runs", "mean_uas"],
        &by_step
            .into_iter()
            .map(|((task, step), v)| {
                vec![
                    task.to_string(),
                    step.to_string(),
                    v.len().to_string(),
                    repdecode::stats::mean(&v).to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    Ok(rows)
}
