//! On-disk formats and in-memory containers for representation matrices.

mod binary;
mod csv;
mod manifest;
mod matrix;

use std::path::Path;

pub use self::binary::{
    decode_matrix, decode_sequences, encode_matrix, encode_sequences, read_matx, read_sequences,
    write_matrix, write_sequences, FORMAT_VERSION, MATX_MAGIC, SEQX_MAGIC,
};
pub use self::csv::{parse_csv_matrix, read_csv_matrix, write_csv_matrix};
pub use self::manifest::{EntryKind, ManifestEntry, RunManifest};
pub use self::matrix::Matrix;
pub(crate) use self::matrix::{dot, unit_rows};

use crate::error::{Error, Result};

/// Reads a MATX file, or a CSV fixture when the file does not start with the
/// MATX magic and has a `.csv` extension.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if !bytes.starts_with(MATX_MAGIC) {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
            return parse_csv_matrix(&text);
        }
    }
    read_matx(path)
}

/// Per-sentence token representation matrices sharing one column count.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSet {
    cols: usize,
    sentences: Vec<Matrix>,
}

impl SequenceSet {
    pub fn new(cols: usize, sentences: Vec<Matrix>) -> Result<Self> {
        for (i, m) in sentences.iter().enumerate() {
            if m.cols() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "sentence {i} has {} columns, expected {cols}",
                    m.cols()
                )));
            }
            if m.rows() == 0 {
                return Err(Error::InvalidArgument(format!("sentence {i} has no tokens")));
            }
        }
        Ok(SequenceSet { cols, sentences })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentences(&self) -> &[Matrix] {
        &self.sentences
    }

    pub fn into_sentences(self) -> Vec<Matrix> {
        self.sentences
    }
}
