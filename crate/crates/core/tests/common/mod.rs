//! Seeded fixtures shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

pub mod oracle;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use repdecode::matrixio::Matrix;
use repdecode::probe::ParsedSentence;
use repdecode::rng::{below_usize, seeded, shuffle};

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = seeded(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Random labelled tree: token `k` attaches to a random earlier token in a
/// shuffled order, so any shape and any root position can occur.
pub fn random_heads<R: Rng>(rng: &mut R, n: usize) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut order);
    let mut heads = vec![None; n];
    for k in 1..n {
        heads[order[k]] = Some(order[below_usize(rng, k)]);
    }
    heads
}

/// Random matrix with orthonormal columns.
pub fn orthonormal_columns<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Sentences whose representations carry an exact tree metric under a known
/// projection `b_star` (`k x dims`, orthonormal rows): each node sits at the
/// sum of mutually orthogonal unit edge vectors on its path from the root, so
/// squared distances equal path lengths. Components outside the row space of
/// `b_star` are Gaussian noise the probe has to ignore.
pub struct TreeMetricFixture {
    pub b_star: DMatrix<f64>,
    pub k: usize,
    pub dims: usize,
}

impl TreeMetricFixture {
    pub fn new(k: usize, dims: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let b_star = orthonormal_columns(&mut rng, dims, k).transpose();
        TreeMetricFixture { b_star, k, dims }
    }

    pub fn sentences(&self, count: usize, min_len: usize, max_len: usize, seed: u64) -> Vec<ParsedSentence> {
        assert!(max_len <= self.k, "one edge direction per token");
        let mut rng = seeded(seed);
        let null_proj =
            DMatrix::<f64>::identity(self.dims, self.dims) - self.b_star.transpose() * &self.b_star;
        (0..count)
            .map(|_| {
                let n = min_len + below_usize(&mut rng, max_len - min_len + 1);
                let heads = random_heads(&mut rng, n);
                let edges = orthonormal_columns(&mut rng, self.k, self.k);
                // edge vector for token i's arc is column i of `edges`
                let mut pos = vec![None::<nalgebra::DVector<f64>>; n];
                fn place(
                    i: usize,
                    heads: &[Option<usize>],
                    edges: &DMatrix<f64>,
                    pos: &mut Vec<Option<nalgebra::DVector<f64>>>,
                ) -> nalgebra::DVector<f64> {
                    if let Some(p) = &pos[i] {
                        return p.clone();
                    }
                    let p = match heads[i] {
                        None => nalgebra::DVector::zeros(edges.nrows()),
                        Some(h) => place(h, heads, edges, pos) + edges.column(i),
                    };
                    pos[i] = Some(p.clone());
                    p
                }
                let mut reps = DMatrix::zeros(n, self.dims);
                for i in 0..n {
                    let x = place(i, &heads, &edges, &mut pos);
                    let noise = nalgebra::DVector::from_fn(self.dims, |_, _| {
                        rng.sample::<f64, _>(StandardNormal)
                    });
                    let h = self.b_star.transpose() * x + &null_proj * noise;
                    reps.set_row(i, &h.transpose());
                }
                let tokens = (0..n).map(|i| format!("w{i}")).collect();
                ParsedSentence::new(tokens, heads)
                    .unwrap()
                    .with_reps(Matrix::from_dmatrix(&reps))
                    .unwrap()
            })
            .collect()
    }
}

/// "I won a golf lesson certificate with Adz through a charity auction ."
/// with its gold tree and the probe parse drawn above it in the example
/// figure (1-indexed arcs). Five drawn arcs are correct; the figure omits the
/// final punctuation, whose arc to the verb the fixture predicts correctly.
pub struct Fig6 {
    pub sentence: ParsedSentence,
    pub predicted: Vec<(usize, usize)>,
}

pub fn fig6() -> Fig6 {
    let tokens: Vec<String> = "I won a golf lesson certificate with Adz through a charity auction ."
        .split(' ')
        .map(str::to_string)
        .collect();
    let heads_1: [usize; 13] = [2, 0, 6, 5, 6, 2, 8, 2, 12, 12, 12, 2, 2];
    let heads = heads_1.iter().map(|&h| h.checked_sub(1)).collect();
    let drawn = [
        (10, 3),
        (6, 5),
        (12, 6),
        (9, 7),
        (12, 11),
        (6, 2),
        (2, 1),
        (10, 9),
        (3, 1),
        (8, 7),
        (6, 4),
        (13, 2),
    ];
    Fig6 {
        sentence: ParsedSentence::new(tokens, heads).unwrap(),
        predicted: drawn.iter().map(|&(a, b)| (a - 1, b - 1)).collect(),
    }
}

/// Paired sample (n = 30) and its t statistic and two-sided p value computed
/// at 50 significant digits.
pub mod paired_reference {
    pub const BASELINE: [f64; 30] = [
        174.615078, 195.814046, 188.308149, 192.448807, 201.754697, 184.780516, 188.923654,
        190.194436, 193.528917, 192.83047, 200.359994, 187.380081, 176.665908, 210.094496,
        190.278748, 203.184905, 205.837383, 171.755579, 191.676484, 179.032241, 189.826253,
        170.063284, 175.747833, 189.758438, 176.411932, 178.777053, 168.729006, 196.193028,
        184.969763, 191.733603,
    ];
    pub const TREATMENT: [f64; 30] = [
        177.265321, 198.198296, 178.141124, 190.504757, 200.674605, 183.312854, 173.143419,
        190.672414, 194.005824, 178.502228, 198.111266, 185.664969, 179.483033, 200.496874,
        185.394835, 189.283912, 188.213758, 166.83271, 196.454559, 183.845588, 186.061019,
        165.497412, 175.153639, 183.949788, 171.043902, 167.595929, 158.797045, 195.816565,
        175.461651, 185.992251,
    ];
    pub const T: f64 = -4.106572581147533554645064;
    pub const P: f64 = 0.000299317472522794704858337;
    pub const MEAN_DIFF: f64 = -4.603441166666666666666667;
}
