//! Principal component compression of subject brain images.
//!
//! Columns are mean-centered (no scaling) and the principal axes are the top
//! right singular vectors of the centered data. Each axis is signed so that
//! its largest-magnitude entry is positive.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixio::{read_matx, write_matrix, Matrix};

/// Retained-variance level below which a compression is flagged.
pub const RETAINED_VARIANCE_WARNING: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    components: Matrix,
    explained_variance_ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSidecar {
    pub n_components: usize,
    pub input_dims: usize,
    pub explained_variance_ratio: Vec<f64>,
    pub retained_variance: f64,
}

impl PcaModel {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `n_components x input_dims`, orthonormal rows.
    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn explained_variance_ratio(&self) -> &[f64] {
        &self.explained_variance_ratio
    }

    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn input_dims(&self) -> usize {
        self.mean.len()
    }

    pub fn retained_variance(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }

    /// Maps projected coordinates back to the input space.
    pub fn inverse_transform(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.n_components() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for a {}-component model",
                z.cols(),
                self.n_components()
            )));
        }
        let mut out = z.matmul(&self.components)?;
        for r in 0..out.rows() {
            for (v, m) in out.row_mut(r).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }

    pub fn sidecar(&self) -> PcaSidecar {
        PcaSidecar {
            n_components: self.n_components(),
            input_dims: self.input_dims(),
            explained_variance_ratio: self.explained_variance_ratio.clone(),
            retained_variance: self.retained_variance(),
        }
    }

    /// Writes `<stem>.mean.matx`, `<stem>.components.matx` and
    /// `<stem>.pca.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let (mean, comps, json) = model_paths(dir.as_ref(), stem);
        write_matrix(&Matrix::new(1, self.mean.len(), self.mean.clone())?, mean)?;
        write_matrix(&self.components, comps)?;
        let text = serde_json::to_string_pretty(&self.sidecar())?;
        fs::write(&json, text).map_err(|e| Error::io(&json, e))
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let (mean, comps, json) = model_paths(dir.as_ref(), stem);
        let mean = read_matx(mean)?.into_data();
        let components = read_matx(comps)?;
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let sidecar: PcaSidecar = serde_json::from_str(&text)?;
        if components.cols() != mean.len()
            || components.rows() != sidecar.explained_variance_ratio.len()
        {
            return Err(Error::DimensionMismatch(
                "PCA model files disagree on shape".into(),
            ));
        }
        Ok(PcaModel {
            mean,
            components,
            explained_variance_ratio: sidecar.explained_variance_ratio,
        })
    }
}

fn model_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("{stem}.mean.matx")),
        dir.join(format!("{stem}.components.matx")),
        dir.join(format!("{stem}.pca.json")),
    )
}

pub fn pca_fit(x: &Matrix, n_components: usize) -> Result<PcaModel> {
    let (rows, cols) = x.shape();
    if rows < 2 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 rows, got {rows}"
        )));
    }
    if n_components == 0 || n_components > rows.min(cols) {
        return Err(Error::InvalidArgument(format!(
            "n_components must be in 1..={}, got {n_components}",
            rows.min(cols)
        )));
    }

    let mean = column_means(x);
    let centered = DMatrix::from_fn(rows, cols, |r, c| x.get(r, c) - mean[c]);
    let total: f64 = centered.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(Error::Degenerate(
            "all columns are constant (zero total variance)".into(),
        ));
    }

    let axes = principal_axes(&centered, n_components);
    let mut components = Matrix::zeros(n_components, cols);
    let mut ratios = Vec::with_capacity(n_components);
    for (k, (variance, axis)) in axes.into_iter().enumerate() {
        ratios.push(variance / total);
        let pivot = axis
            .iter()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { *v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (c, v) in axis.iter().enumerate() {
            components.set(k, c, sign * v);
        }
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance_ratio: ratios,
    })
}

/// Projects `(x - mean)` onto the principal axes.
pub fn pca_transform(model: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != model.input_dims() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} columns, model expects {}",
            x.cols(),
            model.input_dims()
        )));
    }
    let centered = DMatrix::from_fn(x.rows(), x.cols(), |r, c| x.get(r, c) - model.mean[c]);
    let projected = centered * model.components.to_dmatrix().transpose();
    let out = Matrix::from_dmatrix(&projected);
    match x.row_labels() {
        Some(l) => out.with_row_labels(l.to_vec()),
        None => Ok(out),
    }
}

/// Leading `k` eigenpairs of `xᵀx` as (eigenvalue, unit axis), largest first.
///
/// The eigenproblem is solved on whichever Gram matrix is smaller: `xᵀx`
/// directly, or `x xᵀ` with axes recovered as `xᵀu / ‖xᵀu‖`. Axes are then
/// re-orthonormalized, which only matters for directions with (numerically)
/// zero variance.
fn principal_axes(x: &DMatrix<f64>, k: usize) -> Vec<(f64, Vec<f64>)> {
    let (rows, cols) = x.shape();
    let dual = cols > rows;
    let gram = if dual { x * x.transpose() } else { x.tr_mul(x) };
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(k);

    let mut basis = DMatrix::<f64>::zeros(cols, k);
    for (j, &idx) in order.iter().enumerate() {
        let u = eig.eigenvectors.column(idx);
        if dual {
            basis.set_column(j, &(x.transpose() * u));
        } else {
            basis.set_column(j, &u);
        }
    }
    let q = basis.qr().q();
    order
        .iter()
        .enumerate()
        .map(|(j, &idx)| {
            (
                eig.eigenvalues[idx].max(0.0),
                q.column(j).iter().copied().collect(),
            )
        })
        .collect()
}

fn column_means(x: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = x.rows() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}
