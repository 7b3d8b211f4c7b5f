//! Shortest-path and spectral scores on the alive adjacency.

use std::collections::VecDeque;

use super::{EdgeId, NodeId, SocialGraph};
use crate::error::{Error, Result};

/// Hop distances along alive out-edges; `None` for unreachable nodes.
pub fn bfs_distances(g: &SocialGraph, root: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    let mut queue = VecDeque::new();
    dist[root] = Some(0);
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v].unwrap();
        for w in g.out_neighbors(v) {
            if dist[w].is_none() {
                dist[w] = Some(dv + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Roots {
    All,
    /// Only shortest paths starting at this node contribute.
    Single(NodeId),
}

#[derive(Clone, Debug)]
pub struct Betweenness {
    /// Per-node score; path endpoints are excluded.
    pub node: Vec<f64>,
    /// Per-edge score indexed by edge id; dead edges score 0.
    pub edge: Vec<f64>,
}

/// Brandes accumulation of shortest-path dependencies over directed paths.
///
/// Scores are unnormalized counts over ordered pairs, so a symmetrized
/// undirected graph reports twice the undirected value.
pub fn betweenness(g: &SocialGraph, roots: Roots) -> Betweenness {
    let n = g.node_count();
    let mut node = vec![0.0; n];
    let mut edge = vec![0.0; g.edge_slots()];

    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<EdgeId>> = vec![Vec::new(); n];
    let mut stack = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);

    let sources: Box<dyn Iterator<Item = NodeId>> = match roots {
        Roots::All => Box::new(0..n),
        Roots::Single(s) => Box::new(std::iter::once(s)),
    };

    for s in sources {
        for v in 0..n {
            sigma[v] = 0.0;
            dist[v] = usize::MAX;
            delta[v] = 0.0;
            preds[v].clear();
        }
        stack.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &e in g.out_edges(v) {
                let w = g.edge(e).1;
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(e);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &e in &preds[w] {
                let v = g.edge(e).0;
                let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                edge[e] += c;
                delta[v] += c;
            }
            if w != s {
                node[w] += delta[w];
            }
        }
    }
    Betweenness { node, edge }
}

/// Harmonic closeness on alive out-edges: mean over other nodes of `1 / d`,
/// with unreachable nodes contributing zero.
pub fn closeness(g: &SocialGraph) -> Vec<f64> {
    let n = g.node_count();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::with_capacity(n);
    (0..n)
        .map(|root| {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[root] = 0;
            queue.push_back(root);
            let mut sum = 0.0;
            while let Some(v) = queue.pop_front() {
                for w in g.out_neighbors(v) {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        sum += 1.0 / dist[w] as f64;
                        queue.push_back(w);
                    }
                }
            }
            sum / (n - 1) as f64
        })
        .collect()
}

const PAGERANK_MAX_ITERS: usize = 10_000;

/// PageRank by power iteration. Mass of dangling nodes is spread uniformly.
/// Stops once successive iterates differ by less than `tol` in L1.
pub fn pagerank(g: &SocialGraph, damping: f64, tol: f64) -> Result<Vec<f64>> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Contract("pagerank on an empty graph".into()));
    }
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut diff = f64::INFINITY;
    for _ in 0..PAGERANK_MAX_ITERS {
        let dangling: f64 = (0..n).filter(|&v| g.out_degree(v) == 0).map(|v| rank[v]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        next.iter_mut().for_each(|x| *x = base);
        for v in 0..n {
            let deg = g.out_degree(v);
            if deg > 0 {
                let share = damping * rank[v] / deg as f64;
                for w in g.out_neighbors(v) {
                    next[w] += share;
                }
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        diff = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if diff < tol {
            return Ok(rank);
        }
    }
    Err(Error::NoConvergence { iterations: PAGERANK_MAX_ITERS, residual: diff })
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    /// Left eigenvector (`uᵀA = λuᵀ`), unit L2 norm.
    pub left: Vec<f64>,
    /// Right eigenvector (`Av = λv`), unit L2 norm.
    pub right: Vec<f64>,
    pub value: f64,
}

const POWER_MAX_ITERS: usize = 200_000;
const POWER_TOL: f64 = 1e-10;

/// Dominant eigenpair of the alive adjacency matrix (`A[i][j] = 1` for edge
/// `i → j`). Iterates on `A + I`, which has the same eigenvectors but no
/// periodic oscillation on cycles.
pub fn dominant_eigenvectors(g: &SocialGraph) -> Result<EigenPair> {
    if g.node_count() == 0 {
        return Err(Error::Contract("eigenvectors of an empty graph".into()));
    }
    eigenpair_capped(g, POWER_MAX_ITERS)
}

pub(crate) fn eigenpair_capped(g: &SocialGraph, max_iters: usize) -> Result<EigenPair> {
    let (right, value) = power_iterate(g, false, max_iters)?;
    let (left, _) = power_iterate(g, true, max_iters)?;
    Ok(EigenPair { left, right, value })
}

fn multiply(g: &SocialGraph, x: &[f64], transpose: bool, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for e in g.alive_edges() {
        let (i, j) = g.edge(e);
        if transpose {
            out[j] += x[i];
        } else {
            out[i] += x[j];
        }
    }
}

fn power_iterate(g: &SocialGraph, transpose: bool, max_iters: usize) -> Result<(Vec<f64>, f64)> {
    let n = g.node_count();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut av = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        multiply(g, &v, transpose, &mut av);
        let lambda: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        residual = av.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        if residual < POWER_TOL {
            return Ok((v, lambda));
        }
        // shifted step: v <- (A + I) v / ||(A + I) v||
        let mut norm = 0.0;
        for (a, b) in av.iter_mut().zip(&v) {
            *a += b;
            norm += *a * *a;
        }
        let norm = norm.sqrt();
        for (x, a) in v.iter_mut().zip(&av) {
            *x = a / norm;
        }
    }
    Err(Error::NoConvergence { iterations: max_iters, residual })
}
