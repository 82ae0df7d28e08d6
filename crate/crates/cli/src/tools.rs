//! Smaller commands: similarity heatmaps, corpus generation and word-vector
//! sentence baselines.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use repdecode::corpusgen::{build_dataset, Dataset, MaskConfig, SplitSizes, Task};
use repdecode::embed::{load_vectors, sentence_matrix, tokenize};
use repdecode::matrixio::{write_matrix, RunManifest};
use repdecode::rsa::{rsa_heatmap, Heatmap};

use crate::config::AnalysisConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, write_text};

pub fn rsa(cfg: &AnalysisConfig) -> CliResult<Heatmap> {
    let manifest = RunManifest::load(cfg.require_manifest()?)?;
    let map = cfg.in_pool(|| rsa_heatmap(&manifest))??;
    ensure_dir(&cfg.out)?;
    write_text(&cfg.out.join("rsa_heatmap.csv"), &map.to_csv())?;
    write_text(&cfg.out.join("rsa_heatmap.svg"), &map.to_svg())?;
    Ok(map)
}

pub fn corpus(
    input: &Path,
    task: Task,
    sizes: SplitSizes,
    mask: &MaskConfig,
    cfg: &AnalysisConfig,
) -> CliResult<Dataset> {
    mask.validate().map_err(|e| CliError::usage(e.to_string()))?;
    ensure_dir(&cfg.out)?;
    let data = build_dataset(input, task, sizes, cfg.seed, mask, &cfg.out)?;
    info!(
        "{task}: {} train, {} dev, {} test examples",
        data.train.len(),
        data.dev.len(),
        data.test.len()
    );
    Ok(data)
}

/// Averages word vectors over each line of `sentences` and writes the rows
/// to `<out>/<name>.matx`.
pub fn embed(
    vectors: &Path,
    sentences: &Path,
    lowercase: bool,
    name: &str,
    cfg: &AnalysisConfig,
) -> CliResult<PathBuf> {
    let table = load_vectors(vectors)?;
    let text = fs::read_to_string(sentences).map_err(|e| CliError::io(sentences, e))?;
    let tokens: Vec<Vec<String>> = text.lines().map(|l| tokenize(l, lowercase)).collect();
    let (m, coverage) = sentence_matrix(&table, &tokens)?;
    let empty = coverage.iter().filter(|&&c| c == 0).count();
    if empty > 0 {
        warn!("{empty} sentences have no in-vocabulary token");
    }
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join(format!("{name}.matx"));
    write_matrix(&m, &path)?;
    Ok(path)
}
