use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{tree_distances, DistMatrix, ParsedSentence};
use crate::error::{Error, Result};
use crate::matrixio::{read_matx, write_matrix, Matrix};
use crate::rng::{derive_seed, seeded, shuffle, unit_f64};

pub const MAX_PROBE_RANK: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub rank: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Initial entries are uniform on `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            rank: MAX_PROBE_RANK,
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 20,
            seed: 0,
            init_scale: 0.05,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 || self.rank > MAX_PROBE_RANK {
            return Err(Error::InvalidArgument(format!(
                "probe rank must be in 1..={MAX_PROBE_RANK}, got {}",
                self.rank
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Learned projection `b` (`rank x d_model`); the probe metric is `bᵀb`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub b: Matrix,
    /// Training-set loss after each epoch.
    pub training_log: Vec<f64>,
    pub config: ProbeConfig,
}

#[derive(Serialize, Deserialize)]
struct ProbeLog {
    config: ProbeConfig,
    training_log: Vec<f64>,
}

impl ProbeModel {
    pub fn rank(&self) -> usize {
        self.b.rows()
    }

    pub fn dims(&self) -> usize {
        self.b.cols()
    }

    /// Writes `<stem>.probe.matx` and `<stem>.probe.json`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        write_matrix(&self.b, dir.join(format!("{stem}.probe.matx")))?;
        let json = dir.join(format!("{stem}.probe.json"));
        let log = ProbeLog {
            config: self.config.clone(),
            training_log: self.training_log.clone(),
        };
        fs::write(&json, serde_json::to_string_pretty(&log)?).map_err(|e| Error::io(&json, e))
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let b = read_matx(dir.join(format!("{stem}.probe.matx")))?;
        let json = dir.join(format!("{stem}.probe.json"));
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let log: ProbeLog = serde_json::from_str(&text)?;
        Ok(ProbeModel {
            b,
            training_log: log.training_log,
            config: log.config,
        })
    }
}

/// Squared distances `‖b(h_i - h_j)‖²` between all token pairs.
pub fn probe_distance(model: &ProbeModel, reps: &Matrix) -> Result<DistMatrix> {
    if reps.cols() != model.dims() {
        return Err(Error::DimensionMismatch(format!(
            "representations have {} dims, probe expects {}",
            reps.cols(),
            model.dims()
        )));
    }
    let projected = reps.to_dmatrix() * model.b.to_dmatrix().transpose();
    Ok(squared_distances(&projected))
}

fn squared_distances(projected: &DMatrix<f64>) -> DistMatrix {
    let n = projected.nrows();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = (projected.row(i) - projected.row(j)).norm_squared();
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistMatrix::from_raw(n, values)
}

/// A sentence ready for training: representations plus gold distances.
#[derive(Debug, Clone)]
pub struct ProbeExample {
    pub reps: DMatrix<f64>,
    pub gold: DistMatrix,
}

impl ProbeExample {
    pub fn from_sentence(s: &ParsedSentence) -> Result<Self> {
        let reps = s.reps.as_ref().ok_or_else(|| {
            Error::InvalidArgument("sentence has no representations attached".into())
        })?;
        if reps.rows() != s.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} representation rows for {} tokens",
                reps.rows(),
                s.len()
            )));
        }
        Ok(ProbeExample {
            reps: reps.to_dmatrix(),
            gold: tree_distances(s)?,
        })
    }
}

pub fn prepare_examples(data: &[ParsedSentence]) -> Result<Vec<ProbeExample>> {
    data.iter().map(ProbeExample::from_sentence).collect()
}

/// `(1/T²) Σ_ij |d_ij - gold_ij|` for one sentence, and its gradient with
/// respect to `b`.
///
/// With `P = H bᵀ`, `S_ij = sign(d_ij - gold_ij)` and the Laplacian
/// `L = diag(S·1) - S`, the gradient is `(4/T²) Pᵀ L H`.
pub fn sentence_loss_and_gradient(b: &DMatrix<f64>, ex: &ProbeExample) -> (f64, DMatrix<f64>) {
    let t = ex.reps.nrows();
    let p = &ex.reps * b.transpose();
    let pred = squared_distances(&p);
    let mut lap = DMatrix::<f64>::zeros(t, t);
    let mut loss = 0.0;
    for i in 0..t {
        for j in 0..t {
            if i == j {
                continue;
            }
            let r = pred.get(i, j) - ex.gold.get(i, j);
            loss += r.abs();
            let s = if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            };
            lap[(i, j)] -= s;
            lap[(i, i)] += s;
        }
    }
    let scale = 1.0 / (t * t) as f64;
    let grad = (p.transpose() * lap * &ex.reps) * (4.0 * scale);
    (loss * scale, grad)
}

/// Mean per-sentence loss and gradient over `batch`, reduced in order.
pub fn batch_loss_and_gradient(b: &DMatrix<f64>, batch: &[&ProbeExample]) -> (f64, DMatrix<f64>) {
    let parts: Vec<(f64, DMatrix<f64>)> = batch
        .par_iter()
        .map(|ex| sentence_loss_and_gradient(b, ex))
        .collect();
    let mut loss = 0.0;
    let mut grad = DMatrix::zeros(b.nrows(), b.ncols());
    for (l, g) in parts {
        loss += l;
        grad += g;
    }
    let n = batch.len().max(1) as f64;
    (loss / n, grad / n)
}

/// Mean normalized L1 loss of `model` over `data`.
pub fn probe_loss(model: &ProbeModel, data: &[ProbeExample]) -> f64 {
    let b = model.b.to_dmatrix();
    dataset_loss(&b, data)
}

fn dataset_loss(b: &DMatrix<f64>, data: &[ProbeExample]) -> f64 {
    let losses: Vec<f64> = data
        .par_iter()
        .map(|ex| {
            let p = &ex.reps * b.transpose();
            let pred = squared_distances(&p);
            let t = ex.reps.nrows();
            let sum: f64 = pred
                .values()
                .iter()
                .zip(ex.gold.values())
                .map(|(a, g)| (a - g).abs())
                .sum();
            sum / (t * t) as f64
        })
        .collect();
    losses.iter().sum::<f64>() / data.len().max(1) as f64
}

pub fn initial_projection(rank: usize, dims: usize, scale: f64, seed: u64) -> Matrix {
    let mut rng = seeded(seed);
    Matrix::from_fn(rank, dims, |_, _| scale * (2.0 * unit_f64(&mut rng) - 1.0))
}

/// Adam moment estimates for one parameter matrix.
struct Adam {
    lr: f64,
    m: DMatrix<f64>,
    v: DMatrix<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, rows: usize, cols: usize) -> Self {
        Adam {
            lr,
            m: DMatrix::zeros(rows, cols),
            v: DMatrix::zeros(rows, cols),
            t: 0,
        }
    }

    fn step(&mut self, param: &mut DMatrix<f64>, grad: &DMatrix<f64>) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for ((p, g), (m, v)) in param
            .iter_mut()
            .zip(grad.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

pub fn probe_train(data: &[ParsedSentence], cfg: &ProbeConfig) -> Result<ProbeModel> {
    let examples = prepare_examples(data)?;
    probe_train_examples(&examples, cfg)
}

/// Minibatch Adam on the normalized L1 loss. Sentence order is reshuffled
/// each epoch from a seed derived from `cfg.seed` and the epoch index.
pub fn probe_train_examples(data: &[ProbeExample], cfg: &ProbeConfig) -> Result<ProbeModel> {
    cfg.validate()?;
    let dims = data
        .first()
        .map(|e| e.reps.ncols())
        .ok_or_else(|| Error::InvalidArgument("no training sentences".into()))?;
    if let Some(bad) = data.iter().position(|e| e.reps.ncols() != dims) {
        return Err(Error::DimensionMismatch(format!(
            "sentence {bad} has {} dims, expected {dims}",
            data[bad].reps.ncols()
        )));
    }

    let mut b = initial_projection(cfg.rank, dims, cfg.init_scale, cfg.seed).to_dmatrix();
    let mut adam = Adam::new(cfg.learning_rate, cfg.rank, dims);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        shuffle(&mut seeded(derive_seed(cfg.seed, epoch as u64)), &mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&ProbeExample> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grad) = batch_loss_and_gradient(&b, &batch);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            adam.step(&mut b, &grad);
        }
        let loss = dataset_loss(&b, data);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        log.push(loss);
    }
    Ok(ProbeModel {
        b: Matrix::from_dmatrix(&b),
        training_log: log,
        config: cfg.clone(),
    })
}
