//! Ridge decoders from brain activations to model sentence representations,
//! evaluated under nested cross-validation.
//!
//! Orientation: rows are sentences, so a decoder `G` (`d_brain x d_model`)
//! predicts `brain · G`. The ridge strength for each outer fold is chosen by
//! pooled inner-fold MSE on that fold's training split only.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixio::{unit_rows, Matrix};
use crate::rng::{derive_seed, permutation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    pub beta_grid: Vec<f64>,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig {
            beta_grid: default_beta_grid(),
            outer_folds: 8,
            inner_folds: 7,
            seed: 0,
        }
    }
}

/// `1e-3, 1e-2, ..., 1e5`.
pub fn default_beta_grid() -> Vec<f64> {
    (-3..=5).map(|e| 10f64.powi(e)).collect()
}

impl RidgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta_grid.is_empty() {
            return Err(Error::InvalidArgument("beta grid is empty".into()));
        }
        if self.beta_grid.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidArgument(
                "beta grid values must be finite and non-negative".into(),
            ));
        }
        if self.beta_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(
                "beta grid must be sorted ascending".into(),
            ));
        }
        if self.outer_folds < 2 || self.inner_folds < 2 {
            return Err(Error::InvalidArgument("fold counts must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub chosen_beta: f64,
    pub test_mse: f64,
    /// Pooled inner-CV MSE for each grid value, in grid order.
    pub inner_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub per_fold: Vec<FoldScore>,
    /// 1-indexed rank of each sentence's true representation.
    pub per_sentence_rank: Vec<usize>,
    pub mse: f64,
    pub average_rank: f64,
    /// Outer test fold of each sentence.
    pub folds: Vec<usize>,
}

/// Assignment of sentences to outer folds, and of each outer-training split
/// to inner folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    outer: Vec<usize>,
    /// `inner[f][i]` is the inner fold of sentence `i` within outer fold `f`'s
    /// training split, or `None` when `i` is in outer fold `f`.
    inner: Vec<Vec<Option<usize>>>,
    outer_folds: usize,
    inner_folds: usize,
}

impl FoldPlan {
    /// Seeded shuffle of the indices, cut into contiguous near-equal blocks.
    /// Each outer-training split is shuffled again with a seed derived from
    /// the fold index and cut the same way.
    pub fn from_seed(n: usize, outer_folds: usize, inner_folds: usize, seed: u64) -> Result<Self> {
        if outer_folds < 2 || inner_folds < 2 {
            return Err(Error::InvalidArgument("fold counts must be at least 2".into()));
        }
        if n < outer_folds {
            return Err(Error::InvalidArgument(format!(
                "{n} sentences cannot fill {outer_folds} outer folds"
            )));
        }
        let mut outer = vec![0; n];
        for (pos, &i) in permutation(seed, n).iter().enumerate() {
            outer[i] = block_of(pos, n, outer_folds);
        }

        let mut inner = Vec::with_capacity(outer_folds);
        for f in 0..outer_folds {
            let train: Vec<usize> = (0..n).filter(|&i| outer[i] != f).collect();
            if train.len() < inner_folds {
                return Err(Error::InvalidArgument(format!(
                    "outer-training split of {} sentences cannot fill {inner_folds} inner folds",
                    train.len()
                )));
            }
            let order = permutation(derive_seed(seed, f as u64), train.len());
            let mut labels = vec![None; n];
            for (pos, &k) in order.iter().enumerate() {
                labels[train[k]] = Some(block_of(pos, train.len(), inner_folds));
            }
            inner.push(labels);
        }
        Ok(FoldPlan {
            outer,
            inner,
            outer_folds,
            inner_folds,
        })
    }

    pub fn len(&self) -> usize {
        self.outer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outer.is_empty()
    }

    pub fn outer_labels(&self) -> &[usize] {
        &self.outer
    }

    pub fn outer_folds(&self) -> usize {
        self.outer_folds
    }

    pub fn inner_folds(&self) -> usize {
        self.inner_folds
    }

    /// Training and test indices of outer fold `f`.
    pub fn outer_split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.len()).partition(|&i| self.outer[i] != f)
    }

    /// Training and test indices of inner fold `g` within outer fold `f`.
    pub fn inner_split(&self, f: usize, g: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, label) in self.inner[f].iter().enumerate() {
            match label {
                Some(l) if *l == g => test.push(i),
                Some(_) => train.push(i),
                None => {}
            }
        }
        (train, test)
    }

    /// The same assignment after reordering sentences so that new position
    /// `p` holds old sentence `order[p]`.
    pub fn reindexed(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "reorder of {} indices for {} sentences",
                order.len(),
                self.len()
            )));
        }
        Ok(FoldPlan {
            outer: order.iter().map(|&i| self.outer[i]).collect(),
            inner: self
                .inner
                .iter()
                .map(|labels| order.iter().map(|&i| labels[i]).collect())
                .collect(),
            outer_folds: self.outer_folds,
            inner_folds: self.inner_folds,
        })
    }
}

fn block_of(pos: usize, n: usize, k: usize) -> usize {
    // block b covers positions [b*n/k, (b+1)*n/k)
    let mut b = pos * k / n;
    while b + 1 < k && (b + 1) * n / k <= pos {
        b += 1;
    }
    while b * n / k > pos {
        b -= 1;
    }
    b
}

/// Closed-form ridge solution `G = (xᵀx + βI)⁻¹ xᵀy`, so that `x·G ≈ y`.
pub fn ridge_fit(x: &Matrix, y: &Matrix, beta: f64) -> Result<Matrix> {
    if x.rows() != y.rows() || x.rows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, target has {}",
            x.rows(),
            y.rows()
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
    }
    let xd = x.to_dmatrix();
    let system = RidgeSystem::new(&xd, &y.to_dmatrix(), beta == 0.0);
    Ok(Matrix::from_dmatrix(&system.solve(beta)?))
}

/// Normal equations for one design, reused across ridge strengths. Uses the
/// `d x d` primal system when `d <= n` and the `n x n` kernel system
/// otherwise; `β = 0` always goes through the primal system.
struct RidgeSystem<'a> {
    x: &'a DMatrix<f64>,
    gram: DMatrix<f64>,
    rhs: DMatrix<f64>,
    dual: bool,
}

impl<'a> RidgeSystem<'a> {
    fn new(x: &'a DMatrix<f64>, y: &DMatrix<f64>, force_primal: bool) -> Self {
        let dual = !force_primal && x.ncols() > x.nrows();
        let (gram, rhs) = if dual {
            (x * x.transpose(), y.clone())
        } else {
            (x.tr_mul(x), x.tr_mul(y))
        };
        RidgeSystem { x, gram, rhs, dual }
    }

    fn solve(&self, beta: f64) -> Result<DMatrix<f64>> {
        if beta == 0.0 && self.dual {
            // rhs holds y in the kernel form
            return RidgeSystem::new(self.x, &self.rhs, true).solve(0.0);
        }
        let mut a = self.gram.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += beta;
        }
        let chol = Cholesky::new(a).ok_or_else(|| {
            Error::Singular(format!(
                "xᵀx + {beta}·I is not positive definite"
            ))
        })?;
        let sol = chol.solve(&self.rhs);
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular(format!("non-finite solution at beta {beta}")));
        }
        Ok(if self.dual { self.x.tr_mul(&sol) } else { sol })
    }
}

/// Mean squared error over every entry.
pub fn mse_metric(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let n = pred.data().len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrices".into()));
    }
    let sse: f64 = pred
        .data()
        .iter()
        .zip(truth.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sse / n as f64)
}

/// Rank of each `truth[k]` among all truth rows ordered by increasing cosine
/// distance to `pred[k]`. Ranks are 1-indexed; equal distances go to the
/// lower row index first. Returns `(mean rank, ranks)`.
pub fn average_rank(pred: &Matrix, truth: &Matrix) -> Result<(f64, Vec<usize>)> {
    if pred.shape() != truth.shape() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    if pred.rows() == 0 {
        return Err(Error::InvalidArgument("no sentences to rank".into()));
    }
    let p = unit_rows(pred)?.to_dmatrix();
    let t = unit_rows(truth)?.to_dmatrix();
    let sims = &p * t.transpose();
    let n = pred.rows();
    let ranks: Vec<usize> = (0..n)
        .map(|k| {
            let own = sims[(k, k)];
            1 + (0..n)
                .filter(|&m| {
                    let s = sims[(k, m)];
                    s > own || (s == own && m < k)
                })
                .count()
        })
        .collect();
    let mean = ranks.iter().sum::<usize>() as f64 / n as f64;
    Ok((mean, ranks))
}

pub fn nested_cv_decode(brain: &Matrix, target: &Matrix, cfg: &RidgeConfig) -> Result<DecodeResult> {
    cfg.validate()?;
    let plan = FoldPlan::from_seed(brain.rows(), cfg.outer_folds, cfg.inner_folds, cfg.seed)?;
    nested_cv_decode_with_plan(brain, target, cfg, &plan)
}

/// Nested cross-validation with an explicit fold assignment.
pub fn nested_cv_decode_with_plan(
    brain: &Matrix,
    target: &Matrix,
    cfg: &RidgeConfig,
    plan: &FoldPlan,
) -> Result<DecodeResult> {
    cfg.validate()?;
    if brain.rows() != target.rows() {
        return Err(Error::DimensionMismatch(format!(
            "brain has {} sentences, target has {}",
            brain.rows(),
            target.rows()
        )));
    }
    if plan.len() != brain.rows() {
        return Err(Error::DimensionMismatch(format!(
            "fold plan covers {} sentences, data has {}",
            plan.len(),
            brain.rows()
        )));
    }
    let n = brain.rows();
    let outcomes: Vec<(FoldScore, Vec<usize>, Matrix)> = (0..plan.outer_folds())
        .into_par_iter()
        .map(|f| decode_outer_fold(brain, target, cfg, plan, f))
        .collect::<Result<_>>()?;

    let mut pred = Matrix::zeros(n, target.cols());
    let mut per_fold = Vec::with_capacity(outcomes.len());
    for (score, test, fold_pred) in outcomes {
        for (row, &i) in test.iter().enumerate() {
            pred.row_mut(i).copy_from_slice(fold_pred.row(row));
        }
        per_fold.push(score);
    }
    let mse = mse_metric(&pred, target)?;
    let (average_rank, per_sentence_rank) = average_rank(&pred, target)?;
    Ok(DecodeResult {
        per_fold,
        per_sentence_rank,
        mse,
        average_rank,
        folds: plan.outer_labels().to_vec(),
    })
}

fn decode_outer_fold(
    brain: &Matrix,
    target: &Matrix,
    cfg: &RidgeConfig,
    plan: &FoldPlan,
    f: usize,
) -> Result<(FoldScore, Vec<usize>, Matrix)> {
    let (train, test) = plan.outer_split(f);
    if test.is_empty() || train.is_empty() {
        return Err(Error::InvalidArgument(format!("outer fold {f} is empty")));
    }

    let mut sse = vec![0.0; cfg.beta_grid.len()];
    let mut count = 0usize;
    for g in 0..plan.inner_folds() {
        let (itrain, itest) = plan.inner_split(f, g);
        if itrain.is_empty() || itest.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "inner fold {g} of outer fold {f} is empty"
            )));
        }
        let x = brain.select_rows(&itrain).to_dmatrix();
        let y = target.select_rows(&itrain).to_dmatrix();
        let xt = brain.select_rows(&itest).to_dmatrix();
        let yt = target.select_rows(&itest).to_dmatrix();
        let system = RidgeSystem::new(&x, &y, false);
        for (b, &beta) in cfg.beta_grid.iter().enumerate() {
            let resid = &xt * system.solve(beta)? - &yt;
            sse[b] += resid.iter().map(|v| v * v).sum::<f64>();
        }
        count += yt.len();
    }
    let inner_mse: Vec<f64> = sse.iter().map(|s| s / count as f64).collect();
    let best = inner_mse
        .iter()
        .enumerate()
        .fold(0, |best, (b, v)| if *v < inner_mse[best] { b } else { best });
    let chosen_beta = cfg.beta_grid[best];

    let g = ridge_fit(
        &brain.select_rows(&train),
        &target.select_rows(&train),
        chosen_beta,
    )?;
    let pred = brain.select_rows(&test).matmul(&g)?;
    let test_mse = mse_metric(&pred, &target.select_rows(&test))?;
    Ok((
        FoldScore {
            fold: f,
            chosen_beta,
            test_mse,
            inner_mse,
        },
        test,
        pred,
    ))
}
