//! Representational similarity analysis.
//!
//! Each run is summarised by the cosine similarities of all sentence pairs
//! `(a, b)`, `a < b`, in lexicographic order. Runs are compared by Spearman
//! correlation of these vectors, and a task-by-task heatmap averages the
//! correlations over run pairs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrixio::{dot, read_matrix, unit_rows, EntryKind, Matrix, RunManifest};

#[derive(Debug, Clone, PartialEq)]
pub struct RsaVector {
    values: Vec<f64>,
    n: usize,
}

impl RsaVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of sentences the pairs were drawn from.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Position of pair `(a, b)`, `a < b`, in the vector.
    pub fn pair_index(n: usize, a: usize, b: usize) -> usize {
        debug_assert!(a < b && b < n);
        a * n - a * (a + 1) / 2 + (b - a - 1)
    }
}

pub fn rsa_vector(reps: &Matrix) -> Result<RsaVector> {
    let n = reps.rows();
    let unit = unit_rows(reps)?;
    let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            values.push(dot(unit.row(a), unit.row(b)).clamp(-1.0, 1.0));
        }
    }
    Ok(RsaVector { values, n })
}

/// Average (fractional) ranks, 1-indexed.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("need at least two values".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average-tie ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    pearson(&fractional_ranks(a), &fractional_ranks(b))
}

/// Task-by-task mean Spearman correlation of RSA vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub tasks: Vec<String>,
    /// Row-major; `None` where no run pair exists (a single-run task on the
    /// diagonal).
    pub cells: Vec<Option<f64>>,
}

impl Heatmap {
    pub fn get(&self, a: usize, b: usize) -> Option<f64> {
        self.cells[a * self.tasks.len() + b]
    }

    /// Missing cells become NaN.
    pub fn to_matrix(&self) -> Matrix {
        let n = self.tasks.len();
        Matrix::from_fn(n, n, |a, b| self.get(a, b).unwrap_or(f64::NAN))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("task");
        for t in &self.tasks {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        for (a, t) in self.tasks.iter().enumerate() {
            out.push_str(t);
            for b in 0..self.tasks.len() {
                match self.get(a, b) {
                    Some(v) => write!(out, ",{v:.6}").unwrap(),
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Standalone SVG with a blue-white-red scale over [-1, 1].
    pub fn to_svg(&self) -> String {
        let n = self.tasks.len();
        let cell = 48.0;
        let margin = 160.0;
        let size = margin + cell * n as f64 + 20.0;
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#,
            w = size + 80.0,
            h = size
        )
        .unwrap();
        for (a, label) in self.tasks.iter().enumerate() {
            let y = margin + cell * a as f64 + cell / 2.0;
            writeln!(
                s,
                r#"<text x="{x}" y="{y}" text-anchor="end" dominant-baseline="middle">{label}</text>"#,
                x = margin - 6.0,
                label = xml_escape(label)
            )
            .unwrap();
            let x = margin + cell * a as f64 + cell / 2.0;
            writeln!(
                s,
                r#"<text x="{x}" y="{y}" text-anchor="start" transform="rotate(-60 {x} {y})">{label}</text>"#,
                y = margin - 6.0,
                label = xml_escape(label)
            )
            .unwrap();
        }
        for a in 0..n {
            for b in 0..n {
                let x = margin + cell * b as f64;
                let y = margin + cell * a as f64;
                let (fill, text) = match self.get(a, b) {
                    Some(v) => (diverging_color(v), format!("{v:.2}")),
                    None => ("#cccccc".to_string(), "NA".to_string()),
                };
                writeln!(
                    s,
                    r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="#ffffff"/><text x="{tx}" y="{ty}" text-anchor="middle" dominant-baseline="middle">{text}</text>"##,
                    tx = x + cell / 2.0,
                    ty = y + cell / 2.0
                )
                .unwrap();
            }
        }
        // legend
        let lx = margin + cell * n as f64 + 30.0;
        for i in 0..=20 {
            let v = 1.0 - i as f64 / 10.0;
            writeln!(
                s,
                r#"<rect x="{lx}" y="{y}" width="16" height="8" fill="{fill}"/>"#,
                y = margin + 8.0 * i as f64,
                fill = diverging_color(v)
            )
            .unwrap();
        }
        writeln!(s, r#"<text x="{x}" y="{y}">1</text>"#, x = lx + 20.0, y = margin + 8.0).unwrap();
        writeln!(s, r#"<text x="{x}" y="{y}">-1</text>"#, x = lx + 20.0, y = margin + 168.0).unwrap();
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Blue at -1, white at 0, red at +1.
fn diverging_color(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        let t = v;
        (255.0, 255.0 * (1.0 - t) + 40.0 * t, 255.0 * (1.0 - t) + 40.0 * t)
    } else {
        let t = -v;
        (255.0 * (1.0 - t) + 40.0 * t, 255.0 * (1.0 - t) + 90.0 * t, 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Heatmap over tasks given each task's per-run RSA vectors. Cell `(j, j')`
/// averages rho over all run pairs; on the diagonal a run is never paired
/// with itself.
pub fn heatmap_from_vectors(tasks: &[(String, Vec<RsaVector>)]) -> Result<Heatmap> {
    let n = tasks.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let upper: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for (i, va) in tasks[a].1.iter().enumerate() {
                for (k, vb) in tasks[b].1.iter().enumerate() {
                    if a == b && k <= i {
                        continue;
                    }
                    sum += spearman(va.values(), vb.values())?;
                    count += 1;
                }
            }
            Ok((count > 0).then(|| sum / count as f64))
        })
        .collect::<Result<_>>()?;

    let mut cells = vec![None; n * n];
    for (&(a, b), v) in pairs.iter().zip(upper) {
        cells[a * n + b] = v;
        cells[b * n + a] = v;
    }
    Ok(Heatmap {
        tasks: tasks.iter().map(|(t, _)| t.clone()).collect(),
        cells,
    })
}

/// Heatmap from the sentence representations each task reaches at its final
/// recorded step.
pub fn rsa_heatmap(manifest: &RunManifest) -> Result<Heatmap> {
    let finals = manifest.final_steps(EntryKind::SentenceReps);
    let mut by_task: BTreeMap<String, Vec<(u32, RsaVector)>> = BTreeMap::new();
    for e in manifest.of_kind(EntryKind::SentenceReps) {
        if finals.get(&e.task) != Some(&e.step) {
            continue;
        }
        let reps = read_matrix(manifest.resolve(e))?;
        by_task
            .entry(e.task.clone())
            .or_default()
            .push((e.run, rsa_vector(&reps)?));
    }
    if by_task.is_empty() {
        return Err(Error::Manifest("no sentence representations listed".into()));
    }
    let mut tasks = Vec::with_capacity(by_task.len());
    let mut len = None;
    for (task, mut runs) in by_task {
        runs.sort_by_key(|(r, _)| *r);
        for (_, v) in &runs {
            if *len.get_or_insert(v.values().len()) != v.values().len() {
                return Err(Error::DimensionMismatch(format!(
                    "task {task} has a different sentence count"
                )));
            }
        }
        tasks.push((task, runs.into_iter().map(|(_, v)| v).collect()));
    }
    heatmap_from_vectors(&tasks)
}
