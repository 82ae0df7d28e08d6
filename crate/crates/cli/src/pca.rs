use std::path::{Path, PathBuf};

use log::{info, warn};
use repdecode::matrixio::{read_matrix, write_matrix, EntryKind, ManifestEntry, RunManifest};
use repdecode::pca::{pca_fit, pca_transform, RETAINED_VARIANCE_WARNING};

use crate::config::AnalysisConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, file_stem};

pub struct Compressed {
    pub stem: String,
    pub path: PathBuf,
    pub retained_variance: f64,
}

/// Compresses one brain matrix, writing `<stem>.matx` and the model files.
pub fn compress(input: &Path, stem: &str, cfg: &AnalysisConfig) -> CliResult<Compressed> {
    let brain = read_matrix(input)?;
    let model = pca_fit(&brain, cfg.components)?;
    let reduced = pca_transform(&model, &brain)?;
    let path = cfg.out.join(format!("{stem}.matx"));
    if same_file(input, &path) {
        return Err(CliError::usage(format!(
            "output {} would overwrite its input; choose another --out",
            path.display()
        )));
    }
    write_matrix(&reduced, &path)?;
    model.save(&cfg.out, stem)?;
    let retained = model.retained_variance();
    if retained <= RETAINED_VARIANCE_WARNING {
        warn!(
            "{stem}: {} components retain only {:.2}% of the variance",
            cfg.components,
            100.0 * retained
        );
    }
    info!("{stem}: {} -> {} columns", brain.cols(), reduced.cols());
    Ok(Compressed {
        stem: stem.to_string(),
        path,
        retained_variance: retained,
    })
}

/// Compresses the listed files, or every brain entry of the manifest. With a
/// manifest, a copy pointing at the compressed files is written to
/// `<out>/manifest.json`.
pub fn run(inputs: &[PathBuf], cfg: &AnalysisConfig) -> CliResult<Vec<Compressed>> {
    ensure_dir(&cfg.out)?;
    if !inputs.is_empty() {
        let mut out = Vec::new();
        for p in inputs {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| CliError::usage(format!("{} has no file name", p.display())))?;
            out.push(compress(p, &file_stem(&[&stem]), cfg)?);
        }
        return Ok(out);
    }

    let manifest = RunManifest::load(cfg.require_manifest()?)?;
    let mut done = Vec::new();
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let src = std::path::absolute(manifest.resolve(e)).map_err(|err| CliError::io(&e.path, err))?;
        if e.kind == EntryKind::Brain {
            let subject = e.subject.as_deref().unwrap_or_default();
            let c = compress(&src, &file_stem(&[subject]), cfg)?;
            entries.push(ManifestEntry {
                path: PathBuf::from(format!("{}.matx", c.stem)),
                ..e.clone()
            });
            done.push(c);
        } else {
            entries.push(ManifestEntry { path: src, ..e.clone() });
        }
    }
    if done.is_empty() {
        return Err(CliError::Core(repdecode::Error::Manifest("no brain entries listed".into())));
    }
    let mut copy = RunManifest::new(entries, manifest.subject_ids.clone());
    copy.baseline_task = manifest.baseline_task.clone();
    copy.save(cfg.out.join("manifest.json"))?;
    Ok(done)
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}
