use std::cmp::Ordering;
use std::collections::HashSet;

use super::{gold_edges, DistMatrix, Edge, ParsedSentence};
use crate::error::{Error, Result};

/// Undirected parse from a distance matrix: Prim's algorithm grown from token
/// 0. Among equal weights the edge with the smallest `(min, max)` index pair
/// wins. Returns `T - 1` normalized edges in the order they were added.
pub fn induce_parse(d: &DistMatrix) -> Result<Vec<Edge>> {
    let n = d.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "parse induction needs at least 2 tokens, got {n}"
        )));
    }
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    let mut best: Vec<(f64, Edge)> = (0..n).map(|v| (d.get(0, v), (0, v))).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let v = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| cmp_candidate(&best[a], &best[b]))
            .expect("a vertex remains outside the tree");
        in_tree[v] = true;
        edges.push(best[v].1);
        for u in 0..n {
            if in_tree[u] {
                continue;
            }
            let cand = (d.get(v, u), (v.min(u), v.max(u)));
            if cmp_candidate(&cand, &best[u]) == Ordering::Less {
                best[u] = cand;
            }
        }
    }
    Ok(edges)
}

fn cmp_candidate(a: &(f64, Edge), b: &(f64, Edge)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Fraction of gold undirected edges present in `pred`; edge direction is
/// ignored.
pub fn uas(pred: &[Edge], gold: &ParsedSentence) -> Result<f64> {
    let n = gold.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "attachment score needs at least 2 tokens".into(),
        ));
    }
    if pred.len() != n - 1 {
        return Err(Error::InvalidArgument(format!(
            "{} predicted edges for {n} tokens",
            pred.len()
        )));
    }
    let gold: HashSet<Edge> = gold_edges(&gold.heads).into_iter().collect();
    let mut hits = 0;
    for &(a, b) in pred {
        if a >= n || b >= n {
            return Err(Error::InvalidArgument(format!(
                "edge ({a}, {b}) references a token outside 0..{n}"
            )));
        }
        if gold.contains(&(a.min(b), a.max(b))) {
            hits += 1;
        }
    }
    Ok(hits as f64 / (n - 1) as f64)
}
