//! Sentence baseline built by averaging context-free word vectors.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::matrixio::Matrix;

#[derive(Debug, Clone, Default)]
pub struct WordVectorTable {
    dims: usize,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    duplicates: Vec<String>,
}

impl WordVectorTable {
    pub fn new(dims: usize) -> Self {
        WordVectorTable {
            dims,
            ..Default::default()
        }
    }

    /// Inserts or replaces the vector for `word`. Returns true when the word
    /// was already present.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dims {
            return Err(Error::DimensionMismatch(format!(
                "vector for {word:?} has {} dims, table has {}",
                vector.len(),
                self.dims
            )));
        }
        if let Some(&slot) = self.index.get(word) {
            self.vectors[slot * self.dims..(slot + 1) * self.dims].copy_from_slice(vector);
            return Ok(true);
        }
        self.index.insert(word.to_string(), self.index.len());
        self.vectors.extend_from_slice(vector);
        Ok(false)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&slot| &self.vectors[slot * self.dims..(slot + 1) * self.dims])
    }

    /// Words that appeared more than once while loading (the last line won).
    pub fn duplicates(&self) -> &[String] {
        &self.duplicates
    }
}

/// Reads `word v1 ... vd` lines. A leading `count dims` header line, as
/// written by some exporters, is skipped.
pub fn read_vectors(reader: impl BufRead) -> Result<WordVectorTable> {
    let mut table: Option<WordVectorTable> = None;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let word = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        if lineno == 1 && values.len() == 1 && word.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
            continue;
        }
        let vector = values
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                message: format!("bad value: {e}"),
            })?;
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: lineno,
                message: "non-finite value".into(),
            });
        }
        let t = table.get_or_insert_with(|| WordVectorTable::new(vector.len()));
        if vector.is_empty() || vector.len() != t.dims {
            return Err(Error::Parse {
                line: lineno,
                message: format!("{} values, expected {}", vector.len(), t.dims.max(1)),
            });
        }
        if t.insert(word, &vector)? {
            warn!("duplicate word {word:?} on line {lineno}; keeping the later vector");
            t.duplicates.push(word.to_string());
        }
    }
    table.ok_or_else(|| Error::Format("no word vectors found".into()))
}

pub fn load_vectors(path: impl AsRef<Path>) -> Result<WordVectorTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_vectors(BufReader::new(file))
}

/// Splits on whitespace, then separates every punctuation character into its
/// own token.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if c.is_alphanumeric() {
                word.push(c);
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(c.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    if lowercase {
        out.iter_mut().for_each(|t| *t = t.to_lowercase());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceAverage {
    pub vector: Vec<f64>,
    pub in_vocab: usize,
    pub out_of_vocab: usize,
}

/// Mean of the vectors of in-vocabulary tokens; unknown tokens are skipped.
/// A sentence with no known token averages to the zero vector.
pub fn average_sentence<S: AsRef<str>>(table: &WordVectorTable, tokens: &[S]) -> Result<SentenceAverage> {
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("empty token list".into()));
    }
    let mut vector = vec![0.0; table.dims()];
    let mut in_vocab = 0;
    for t in tokens {
        if let Some(v) = table.get(t.as_ref()) {
            vector.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            in_vocab += 1;
        }
    }
    if in_vocab == 0 {
        warn!("no token of the sentence is in the vocabulary; using the zero vector");
    } else {
        vector.iter_mut().for_each(|a| *a /= in_vocab as f64);
    }
    Ok(SentenceAverage {
        vector,
        in_vocab,
        out_of_vocab: tokens.len() - in_vocab,
    })
}

/// One averaged row per sentence, plus per-sentence in-vocabulary counts.
pub fn sentence_matrix<S: AsRef<str>>(
    table: &WordVectorTable,
    sentences: &[Vec<S>],
) -> Result<(Matrix, Vec<usize>)> {
    let mut rows = Vec::with_capacity(sentences.len());
    let mut coverage = Vec::with_capacity(sentences.len());
    for (i, s) in sentences.iter().enumerate() {
        let avg = average_sentence(table, s).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("sentence {i}: {m}")),
            other => other,
        })?;
        coverage.push(avg.in_vocab);
        rows.push(avg.vector);
    }
    let m = if rows.is_empty() {
        Matrix::zeros(0, table.dims())
    } else {
        Matrix::from_rows(&rows)?
    };
    Ok((m, coverage))
}
