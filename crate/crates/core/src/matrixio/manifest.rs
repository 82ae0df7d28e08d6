use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    SentenceReps,
    TokenReps,
    Brain,
}

/// One file registered in a manifest.
///
/// Model entries are keyed by `(task, run, step, kind)`. Brain entries carry
/// a `subject` and are keyed by it; their task/run/step are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(default)]
    pub task: String,
    #[serde(default)]
    pub run: u32,
    #[serde(default)]
    pub step: u32,
    pub kind: EntryKind,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(default)]
    pub subject_ids: Vec<String>,
    /// Task whose representations count as the pre-trained reference for
    /// trajectory deltas and paired tests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_task: Option<String>,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunManifest {
    pub fn new(entries: Vec<ManifestEntry>, subject_ids: Vec<String>) -> Self {
        RunManifest {
            subject_ids,
            baseline_task: None,
            entries,
            base_dir: PathBuf::new(),
        }
    }

    /// Parses the JSON text; relative paths resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: RunManifest = serde_json::from_str(text)?;
        m.base_dir = base_dir.into();
        m.check_keys()?;
        Ok(m)
    }

    /// Loads and validates a manifest file, including that every referenced
    /// file exists and carries the header of its declared kind.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self::from_json(&text, base)?;
        m.check_files()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    pub fn brains(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.kind == EntryKind::Brain)
    }

    pub fn of_kind(&self, kind: EntryKind) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }

    /// Highest step recorded for each task among entries of `kind`.
    pub fn final_steps(&self, kind: EntryKind) -> BTreeMap<String, u32> {
        let mut out = BTreeMap::new();
        for e in self.of_kind(kind) {
            let s = out.entry(e.task.clone()).or_insert(e.step);
            *s = (*s).max(e.step);
        }
        out
    }

    fn check_keys(&self) -> Result<()> {
        let mut model_keys = HashSet::new();
        let mut subjects = HashSet::new();
        for e in &self.entries {
            if e.kind == EntryKind::Brain {
                let subject = e.subject.as_ref().ok_or_else(|| {
                    Error::Manifest(format!("brain entry {} has no subject", e.path.display()))
                })?;
                if !subjects.insert((subject.clone(), e.kind)) {
                    return Err(Error::Manifest(format!("duplicate brain entry for {subject}")));
                }
                if !self.subject_ids.is_empty() && !self.subject_ids.contains(subject) {
                    return Err(Error::Manifest(format!("unknown subject {subject}")));
                }
            } else {
                if e.task.is_empty() {
                    return Err(Error::Manifest(format!(
                        "entry {} has no task",
                        e.path.display()
                    )));
                }
                if !model_keys.insert((e.task.clone(), e.run, e.step, e.kind)) {
                    return Err(Error::Manifest(format!(
                        "duplicate entry (task {}, run {}, step {}, {:?})",
                        e.task, e.run, e.step, e.kind
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_files(&self) -> Result<()> {
        for e in &self.entries {
            let path = self.resolve(e);
            let bytes = fs::read(&path).map_err(|err| Error::io(&path, err))?;
            let want: &[u8] = match e.kind {
                EntryKind::TokenReps => b"SEQX",
                _ => b"MATX",
            };
            let is_csv = e.kind != EntryKind::TokenReps
                && path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv"));
            if !is_csv && !bytes.starts_with(want) {
                return Err(Error::Manifest(format!(
                    "{} is not a {} file",
                    path.display(),
                    String::from_utf8_lossy(want)
                )));
            }
        }
        Ok(())
    }
}
