//! Minimal CoNLL-U reader: word forms and heads only.

use std::fs;
use std::path::Path;

use super::{validate_heads, ParsedSentence};
use crate::error::{Error, Result};

const COLUMNS: usize = 10;
const ID: usize = 0;
const FORM: usize = 1;
const HEAD: usize = 6;

/// Parses CoNLL-U text. Comments, multiword-token ranges (`3-4`) and empty
/// nodes (`5.1`) are skipped.
pub fn parse_conllu(text: &str) -> Result<Vec<ParsedSentence>> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut heads: Vec<Option<usize>> = Vec::new();
    let mut start_line = 0;

    let mut flush = |tokens: &mut Vec<String>,
                     heads: &mut Vec<Option<usize>>,
                     start_line: usize|
     -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        validate_heads(heads).map_err(|e| Error::Parse {
            line: start_line,
            message: format!("sentence starting here: {e}"),
        })?;
        sentences.push(ParsedSentence {
            tokens: std::mem::take(tokens),
            heads: std::mem::take(heads),
            reps: None,
        });
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, &mut heads, start_line)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != COLUMNS {
            return Err(Error::Parse {
                line: lineno,
                message: format!("{} columns, expected {COLUMNS}", cols.len()),
            });
        }
        let id = cols[ID];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad token id {id:?}"),
        })?;
        if id != tokens.len() + 1 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("token id {id} out of sequence"),
            });
        }
        if tokens.is_empty() {
            start_line = lineno;
        }
        let head = cols[HEAD];
        let head: usize = head.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad head {head:?}"),
        })?;
        tokens.push(cols[FORM].to_string());
        heads.push(head.checked_sub(1));
    }
    flush(&mut tokens, &mut heads, start_line)?;
    Ok(sentences)
}

pub fn read_conllu(path: impl AsRef<Path>) -> Result<Vec<ParsedSentence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conllu(&text)
}
