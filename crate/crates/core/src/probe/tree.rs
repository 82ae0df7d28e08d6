use std::collections::VecDeque;

use super::{DistMatrix, Edge, ParsedSentence};
use crate::error::{Error, Result};

/// Checks that `heads` describe one tree: a single root, in-range heads, and
/// every token reaching the root.
pub fn validate_heads(heads: &[Option<usize>]) -> Result<()> {
    let n = heads.len();
    if n == 0 {
        return Err(Error::InvalidTree("no tokens".into()));
    }
    let roots = heads.iter().filter(|h| h.is_none()).count();
    if roots != 1 {
        return Err(Error::InvalidTree(format!("{roots} roots, expected 1")));
    }
    for (i, h) in heads.iter().enumerate() {
        if let Some(h) = *h {
            if h >= n {
                return Err(Error::InvalidTree(format!(
                    "token {i} has head {h} outside 0..{n}"
                )));
            }
            if h == i {
                return Err(Error::InvalidTree(format!("token {i} heads itself")));
            }
        }
    }
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while let Some(h) = heads[cur] {
            cur = h;
            steps += 1;
            if steps > n {
                return Err(Error::InvalidTree(format!(
                    "cycle through token {start}"
                )));
            }
        }
    }
    Ok(())
}

/// Undirected gold edges `(min, max)`, sorted.
pub fn gold_edges(heads: &[Option<usize>]) -> Vec<Edge> {
    let mut edges: Vec<Edge> = heads
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.map(|h| (i.min(h), i.max(h))))
        .collect();
    edges.sort_unstable();
    edges
}

/// Path lengths between all token pairs in the undirected gold tree.
pub fn tree_distances(sentence: &ParsedSentence) -> Result<DistMatrix> {
    validate_heads(&sentence.heads)?;
    let n = sentence.heads.len();
    let mut adj = vec![Vec::new(); n];
    for (a, b) in gold_edges(&sentence.heads) {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut values = vec![0.0; n * n];
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (dst, d) in dist.iter().enumerate() {
            values[src * n + dst] = *d as f64;
        }
    }
    DistMatrix::new(n, values)
}
