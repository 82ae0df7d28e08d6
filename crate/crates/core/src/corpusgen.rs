//! Cloze-task corpora: plain, sentence-scrambled, paragraph-scrambled and
//! part-of-speech variants, each paired with a next-sentence target.
//!
//! Input corpora hold one whitespace-tokenized sentence per line, an optional
//! tab-separated column of per-token tags, one blank line between paragraphs
//! and two or more between documents.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{below_usize, derive_seed, seeded, shuffle, unit_f64, Pcg64};

pub const MASK_TOKEN: &str = "[MASK]";
pub const DEFAULT_MASK_RATE: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub tags: Option<Vec<String>>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Self {
        Sentence { tokens, tags: None }
    }

    pub fn tagged(tokens: Vec<String>, tags: Vec<String>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} tokens, {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        Ok(Sentence {
            tokens,
            tags: Some(tags),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub paragraphs: Vec<Vec<Sentence>>,
}

impl Document {
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.paragraphs.iter().flatten()
    }

    pub fn sentence_count(&self) -> usize {
        self.paragraphs.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NspTarget {
    pub b: Vec<String>,
    pub adjacent: bool,
}

/// One training example. `positions[i]` indexes `input`, and `targets[i]` is
/// the original word (or its tag) at that position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeExample {
    pub input: Vec<String>,
    pub targets: Vec<String>,
    pub positions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nsp: Option<NspTarget>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Lm,
    LmScrambled,
    LmScrambledPara,
    LmPos,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Lm, Task::LmScrambled, Task::LmScrambledPara, Task::LmPos];

    pub fn name(self) -> &'static str {
        match self {
            Task::Lm => "lm",
            Task::LmScrambled => "lm-scrambled",
            Task::LmScrambledPara => "lm-scrambled-para",
            Task::LmPos => "lm-pos",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown task {s:?}")))
    }
}

/// Selection rate and what happens to selected tokens: a `mask` share is
/// replaced by [`MASK_TOKEN`], a `random` share by a uniformly drawn
/// vocabulary word, and the rest is left in place.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskConfig {
    pub rate: f64,
    pub mask: f64,
    pub random: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            rate: DEFAULT_MASK_RATE,
            mask: 0.8,
            random: 0.1,
        }
    }
}

impl MaskConfig {
    /// Every selected token becomes [`MASK_TOKEN`].
    pub fn mask_only(rate: f64) -> Self {
        MaskConfig {
            rate,
            mask: 1.0,
            random: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mask rate must be in (0, 1), got {}",
                self.rate
            )));
        }
        if self.mask < 0.0 || self.random < 0.0 || self.mask + self.random > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "replacement shares {} + {} must be non-negative and sum to at most 1",
                self.mask, self.random
            )));
        }
        Ok(())
    }
}

pub fn scramble_sentence(tokens: &[String], seed: u64) -> Vec<String> {
    scramble_with(tokens, &mut seeded(seed))
}

fn scramble_with(tokens: &[String], rng: &mut Pcg64) -> Vec<String> {
    let mut out = tokens.to_vec();
    shuffle(rng, &mut out);
    out
}

/// Pools the paragraph's tokens, shuffles them, and cuts the result back into
/// sentences of the original lengths.
pub fn scramble_paragraph(sentences: &[Vec<String>], seed: u64) -> Vec<Vec<String>> {
    scramble_paragraph_with(sentences, &mut seeded(seed))
}

fn scramble_paragraph_with(sentences: &[Vec<String>], rng: &mut Pcg64) -> Vec<Vec<String>> {
    let mut pool: Vec<String> = sentences.iter().flatten().cloned().collect();
    shuffle(rng, &mut pool);
    let mut rest = pool.into_iter();
    sentences
        .iter()
        .map(|s| rest.by_ref().take(s.len()).collect())
        .collect()
}

/// Each of `n` positions is selected independently with probability `rate`;
/// if none is, one uniformly drawn position is forced.
pub fn select_positions(n: usize, rate: f64, rng: &mut Pcg64) -> Vec<usize> {
    let mut picked: Vec<usize> = (0..n).filter(|_| unit_f64(rng) < rate).collect();
    if picked.is_empty() && n > 0 {
        picked.push(below_usize(rng, n));
    }
    picked
}

fn apply_masks(
    tokens: &[String],
    positions: &[usize],
    cfg: &MaskConfig,
    vocab: &[String],
    rng: &mut Pcg64,
) -> Vec<String> {
    let mut input = tokens.to_vec();
    for &p in positions {
        let u = unit_f64(rng);
        if u < cfg.mask {
            input[p] = MASK_TOKEN.to_string();
        } else if u < cfg.mask + cfg.random && !vocab.is_empty() {
            input[p] = vocab[below_usize(rng, vocab.len())].clone();
        }
    }
    input
}

/// Word-level cloze example. `vocab` supplies random replacements.
pub fn mask_cloze(
    tokens: &[String],
    seed: u64,
    cfg: &MaskConfig,
    vocab: &[String],
) -> Result<ClozeExample> {
    mask_cloze_with(tokens, &mut seeded(seed), cfg, vocab)
}

fn mask_cloze_with(
    tokens: &[String],
    rng: &mut Pcg64,
    cfg: &MaskConfig,
    vocab: &[String],
) -> Result<ClozeExample> {
    cfg.validate()?;
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("cannot mask an empty sentence".into()));
    }
    let positions = select_positions(tokens.len(), cfg.rate, rng);
    let targets = positions.iter().map(|&p| tokens[p].clone()).collect();
    let input = apply_masks(tokens, &positions, cfg, vocab, rng);
    Ok(ClozeExample {
        input,
        targets,
        positions,
        nsp: None,
    })
}

/// Same selection as [`mask_cloze`], but the targets are the tags of the
/// selected tokens.
pub fn pos_targets(
    tokens: &[String],
    tags: &[String],
    seed: u64,
    cfg: &MaskConfig,
    vocab: &[String],
) -> Result<ClozeExample> {
    pos_targets_with(tokens, tags, &mut seeded(seed), cfg, vocab)
}

fn pos_targets_with(
    tokens: &[String],
    tags: &[String],
    rng: &mut Pcg64,
    cfg: &MaskConfig,
    vocab: &[String],
) -> Result<ClozeExample> {
    let mut ex = mask_cloze_with(tokens, rng, cfg, vocab)?;
    ex.targets = ex
        .positions
        .iter()
        .map(|&p| {
            tags.get(p).cloned().ok_or_else(|| {
                Error::InvalidArgument(format!("no tag for selected position {p}"))
            })
        })
        .collect::<Result<_>>()?;
    Ok(ex)
}

/// A sentence pair drawn for next-sentence prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NspPair<'a> {
    pub a: &'a Sentence,
    pub b: &'a Sentence,
    pub adjacent: bool,
}

/// Endless seeded stream of sentence pairs. The first sentence is uniform
/// over sentences that have a successor in their document; with probability
/// 1/2 the second is that successor, otherwise it is uniform over sentences
/// of the other documents.
pub struct NspPairs<'a> {
    sentences: Vec<(usize, &'a Sentence)>,
    anchors: Vec<usize>,
    doc_ranges: Vec<(usize, usize)>,
    rng: Pcg64,
}

pub fn nsp_pairs(docs: &[Document], seed: u64) -> Result<NspPairs<'_>> {
    if docs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "next-sentence pairs need at least 2 documents, got {}",
            docs.len()
        )));
    }
    let mut sentences = Vec::new();
    let mut anchors = Vec::new();
    let mut doc_ranges = Vec::with_capacity(docs.len());
    for (d, doc) in docs.iter().enumerate() {
        let start = sentences.len();
        sentences.extend(doc.sentences().map(|s| (d, s)));
        let end = sentences.len();
        anchors.extend(start..end.saturating_sub(1).max(start));
        doc_ranges.push((start, end));
    }
    if anchors.is_empty() {
        return Err(Error::InvalidArgument(
            "no document has two sentences to pair".into(),
        ));
    }
    Ok(NspPairs {
        sentences,
        anchors,
        doc_ranges,
        rng: seeded(seed),
    })
}

impl<'a> Iterator for NspPairs<'a> {
    type Item = NspPair<'a>;

    fn next(&mut self) -> Option<NspPair<'a>> {
        let i = self.anchors[below_usize(&mut self.rng, self.anchors.len())];
        let (doc, a) = self.sentences[i];
        if unit_f64(&mut self.rng) < 0.5 {
            return Some(NspPair {
                a,
                b: self.sentences[i + 1].1,
                adjacent: true,
            });
        }
        let (start, end) = self.doc_ranges[doc];
        let others = self.sentences.len() - (end - start);
        let mut k = below_usize(&mut self.rng, others);
        if k >= start {
            k += end - start;
        }
        Some(NspPair {
            a,
            b: self.sentences[k].1,
            adjacent: false,
        })
    }
}

pub fn parse_corpus(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut paragraphs: Vec<Vec<Sentence>> = Vec::new();
    let mut current: Vec<Sentence> = Vec::new();
    let mut blanks = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            blanks += 1;
            continue;
        }
        if blanks > 0 {
            if !current.is_empty() {
                paragraphs.push(std::mem::take(&mut current));
            }
            if blanks >= 2 && !paragraphs.is_empty() {
                docs.push(Document {
                    paragraphs: std::mem::take(&mut paragraphs),
                });
            }
            blanks = 0;
        }
        current.push(parse_line(line, i + 1)?);
    }
    if !current.is_empty() {
        paragraphs.push(current);
    }
    if !paragraphs.is_empty() {
        docs.push(Document { paragraphs });
    }
    Ok(docs)
}

fn parse_line(line: &str, lineno: usize) -> Result<Sentence> {
    let (text, tags) = match line.split_once('\t') {
        Some((t, g)) => (t, Some(g)),
        None => (line, None),
    };
    let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if tokens.is_empty() {
        return Err(Error::Parse {
            line: lineno,
            message: "tag column without tokens".into(),
        });
    }
    match tags {
        None => Ok(Sentence::new(tokens)),
        Some(tags) => {
            let tags: Vec<String> = tags.split_whitespace().map(str::to_string).collect();
            Sentence::tagged(tokens, tags).map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })
        }
    }
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes {
            train: 1_000_000,
            dev: 100_000,
            test: 100_000,
        }
    }
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }
}

/// Flattened sentence after scrambling, remembering its document.
struct Row {
    doc: usize,
    tokens: Vec<String>,
    tags: Option<Vec<String>>,
}

/// Example streams for each split, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<ClozeExample>,
    pub dev: Vec<ClozeExample>,
    pub test: Vec<ClozeExample>,
}

impl Dataset {
    pub fn splits(&self) -> [(&'static str, &[ClozeExample]); 3] {
        [
            ("train", &self.train),
            ("dev", &self.dev),
            ("test", &self.test),
        ]
    }

    /// Writes `train.jsonl`, `dev.jsonl` and `test.jsonl` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, examples) in self.splits() {
            let path = dir.join(format!("{name}.jsonl"));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut out = BufWriter::new(file);
            for ex in examples {
                serde_json::to_writer(&mut out, ex)?;
                out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
            }
            out.flush().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Builds the three splits from parsed documents.
///
/// Documents are shuffled, scrambled according to `task` (each document from
/// its own derived seed), flattened, and cut into consecutive train/dev/test
/// runs. Each sentence then gets a partner (its successor within the same
/// document and split with probability 1/2 when one exists, otherwise a
/// random sentence of another document in the split, falling back to the
/// whole corpus when the split holds a single document) and is masked.
pub fn build_examples(
    docs: &[Document],
    task: Task,
    sizes: SplitSizes,
    seed: u64,
    mask: &MaskConfig,
) -> Result<Dataset> {
    mask.validate()?;
    let available: usize = docs.iter().map(Document::sentence_count).sum();
    if available < sizes.total() {
        return Err(Error::InvalidArgument(format!(
            "corpus has {available} sentences, {} requested",
            sizes.total()
        )));
    }

    let mut order: Vec<usize> = (0..docs.len()).collect();
    shuffle(&mut seeded(derive_seed(seed, 0)), &mut order);
    let scramble_seed = derive_seed(seed, 1);
    let shards: Vec<Vec<Row>> = order
        .par_iter()
        .enumerate()
        .map(|(d, &src)| scramble_document(&docs[src], d, task, derive_seed(scramble_seed, d as u64)))
        .collect();
    let rows: Vec<Row> = shards.into_iter().flatten().take(sizes.total()).collect();

    if task == Task::LmPos {
        if let Some(i) = rows.iter().position(|r| r.tags.is_none()) {
            return Err(Error::InvalidArgument(format!(
                "part-of-speech task needs tags; sentence {i} has none"
            )));
        }
    }
    let vocab: Vec<String> = rows
        .iter()
        .flat_map(|r| r.tokens.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let ranges = [
        0..sizes.train,
        sizes.train..sizes.train + sizes.dev,
        sizes.train + sizes.dev..sizes.total(),
    ];
    let pair_seed = derive_seed(seed, 2);
    let mask_seed = derive_seed(seed, 3);
    let mut splits = Vec::with_capacity(3);
    for range in ranges {
        let split = &rows[range.clone()];
        let examples: Vec<ClozeExample> = (0..split.len())
            .into_par_iter()
            .map(|k| {
                let global = (range.start + k) as u64;
                let nsp = pick_partner(split, &rows, k, derive_seed(pair_seed, global));
                let row = &split[k];
                let mut rng = seeded(derive_seed(mask_seed, global));
                let mut ex = match task {
                    Task::LmPos => pos_targets_with(
                        &row.tokens,
                        row.tags.as_deref().unwrap_or_default(),
                        &mut rng,
                        mask,
                        &vocab,
                    )?,
                    _ => mask_cloze_with(&row.tokens, &mut rng, mask, &vocab)?,
                };
                ex.nsp = Some(nsp);
                Ok(ex)
            })
            .collect::<Result<_>>()?;
        splits.push(examples);
    }
    let test = splits.pop().unwrap_or_default();
    let dev = splits.pop().unwrap_or_default();
    let train = splits.pop().unwrap_or_default();
    Ok(Dataset { train, dev, test })
}

fn scramble_document(doc: &Document, d: usize, task: Task, seed: u64) -> Vec<Row> {
    let mut rng = seeded(seed);
    let mut rows = Vec::with_capacity(doc.sentence_count());
    for para in &doc.paragraphs {
        match task {
            Task::Lm | Task::LmPos => rows.extend(para.iter().map(|s| Row {
                doc: d,
                tokens: s.tokens.clone(),
                tags: s.tags.clone(),
            })),
            Task::LmScrambled => rows.extend(para.iter().map(|s| Row {
                doc: d,
                tokens: scramble_with(&s.tokens, &mut rng),
                tags: None,
            })),
            Task::LmScrambledPara => {
                let tokens: Vec<Vec<String>> = para.iter().map(|s| s.tokens.clone()).collect();
                rows.extend(
                    scramble_paragraph_with(&tokens, &mut rng)
                        .into_iter()
                        .map(|tokens| Row {
                            doc: d,
                            tokens,
                            tags: None,
                        }),
                );
            }
        }
    }
    rows
}

fn pick_partner(split: &[Row], all: &[Row], k: usize, seed: u64) -> NspTarget {
    let mut rng = seeded(seed);
    let doc = split[k].doc;
    let has_next = split.get(k + 1).is_some_and(|r| r.doc == doc);
    if unit_f64(&mut rng) < 0.5 && has_next {
        return NspTarget {
            b: split[k + 1].tokens.clone(),
            adjacent: true,
        };
    }
    let pool = if split.iter().any(|r| r.doc != doc) {
        split
    } else {
        all
    };
    let others: Vec<&Row> = pool.iter().filter(|r| r.doc != doc).collect();
    match others.len() {
        0 => NspTarget {
            // single-document corpus: nothing to contrast with
            b: split[k].tokens.clone(),
            adjacent: false,
        },
        n => NspTarget {
            b: others[below_usize(&mut rng, n)].tokens.clone(),
            adjacent: false,
        },
    }
}

/// Reads `corpus`, builds the splits and writes them under `out_dir`.
pub fn build_dataset(
    corpus: impl AsRef<Path>,
    task: Task,
    sizes: SplitSizes,
    seed: u64,
    mask: &MaskConfig,
    out_dir: impl AsRef<Path>,
) -> Result<Dataset> {
    let docs = read_corpus(corpus)?;
    let data = build_examples(&docs, task, sizes, seed, mask)?;
    data.write(out_dir)?;
    Ok(data)
}
