//! Structural probe: a linear map under which squared distances between word
//! representations approximate dependency-tree path lengths, with undirected
//! parses induced by minimum spanning tree and scored by attachment.

mod conllu;
mod mst;
mod train;
mod tree;

pub use self::conllu::{parse_conllu, read_conllu};
pub use self::mst::{induce_parse, uas};
pub use self::train::{
    batch_loss_and_gradient, initial_projection, prepare_examples, probe_distance, probe_loss,
    probe_train, probe_train_examples, sentence_loss_and_gradient, ProbeConfig, ProbeExample,
    ProbeModel, MAX_PROBE_RANK,
};
pub use self::tree::{gold_edges, tree_distances, validate_heads};

use crate::error::{Error, Result};
use crate::matrixio::Matrix;

/// Undirected edge stored as `(min, max)` token indices.
pub type Edge = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSentence {
    pub tokens: Vec<String>,
    /// 0-based head of each token; `None` marks the root.
    pub heads: Vec<Option<usize>>,
    pub reps: Option<Matrix>,
}

impl ParsedSentence {
    pub fn new(tokens: Vec<String>, heads: Vec<Option<usize>>) -> Result<Self> {
        if tokens.len() != heads.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} tokens, {} heads",
                tokens.len(),
                heads.len()
            )));
        }
        validate_heads(&heads)?;
        Ok(ParsedSentence {
            tokens,
            heads,
            reps: None,
        })
    }

    pub fn with_reps(mut self, reps: Matrix) -> Result<Self> {
        if reps.rows() != self.tokens.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} representation rows for {} tokens",
                reps.rows(),
                self.tokens.len()
            )));
        }
        self.reps = Some(reps);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Symmetric, zero-diagonal, non-negative `T x T` distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n}x{n} distance matrix",
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at {i}")));
            }
            for j in i + 1..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "distance ({i}, {j}) = {a} is not a finite non-negative value"
                    )));
                }
                if (a - b).abs() > 1e-10 {
                    return Err(Error::InvalidArgument(format!(
                        "asymmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(DistMatrix { n, values })
    }

    /// Builds from the upper triangle of `f`, mirrored. `f` is called row by
    /// row for `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        DistMatrix { n, values }
    }

    pub(crate) fn from_raw(n: usize, values: Vec<f64>) -> Self {
        DistMatrix { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Parses each sentence with the probe metric and returns the mean UAS over
/// sentences of at least two tokens.
pub fn evaluate_uas(model: &ProbeModel, data: &[ParsedSentence]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for s in data.iter().filter(|s| s.len() >= 2) {
        let reps = s.reps.as_ref().ok_or_else(|| {
            Error::InvalidArgument("sentence has no representations attached".into())
        })?;
        let pred = induce_parse(&probe_distance(model, reps)?)?;
        total += uas(&pred, s)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument(
            "no sentence with at least two tokens to evaluate".into(),
        ));
    }
    Ok(total / count as f64)
}
