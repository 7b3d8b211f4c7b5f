//! Hand-crafted node and edge inputs, recomputed on the current graph after
//! every deletion.
//!
//! Node columns: total degree, harmonic closeness, betweenness, hop distance
//! from the source (unreachable = node count), source indicator.
//! Edge columns: endpoint degree sum, diffusion importance, edge betweenness.
//! Every column is z-scored over the current alive rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{betweenness, bfs_distances, closeness, EdgeId, NodeId, Roots, SocialGraph};
use crate::neural::Tensor;

pub const NODE_FEATURES: usize = 5;
pub const EDGE_FEATURES: usize = 3;

pub const NODE_FEATURE_NAMES: [&str; NODE_FEATURES] =
    ["fn1_degree", "fn2_closeness", "fn3_betweenness", "fn4_distance", "fn5_is_source"];
pub const EDGE_FEATURE_NAMES: [&str; EDGE_FEATURES] =
    ["fe6_degree", "fe7_diffusion", "fe8_betweenness"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetweennessMode {
    Global,
    #[default]
    SourceRooted,
}

impl BetweennessMode {
    pub fn roots(self, source: NodeId) -> Roots {
        match self {
            Self::Global => Roots::All,
            Self::SourceRooted => Roots::Single(source),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    pub node_raw: Tensor,
    pub edge_raw: Tensor,
    pub node: Tensor,
    pub edge: Tensor,
    pub node_stats: Vec<ColumnStats>,
    pub edge_stats: Vec<ColumnStats>,
    /// Primal edge id of each edge row, increasing.
    pub edge_ids: Vec<EdgeId>,
}

/// Columns zeroed after normalization, used by ablation runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub node: [bool; NODE_FEATURES],
    pub edge: [bool; EDGE_FEATURES],
}

impl FeatureMask {
    pub fn is_empty(&self) -> bool {
        !self.node.iter().chain(&self.edge).any(|&m| m)
    }
}

impl FeatureMatrix {
    pub fn apply_mask(&mut self, mask: &FeatureMask) {
        for (col, _) in mask.node.iter().enumerate().filter(|(_, &m)| m) {
            (0..self.node.rows()).for_each(|r| self.node.set(r, col, 0.0));
        }
        for (col, _) in mask.edge.iter().enumerate().filter(|(_, &m)| m) {
            (0..self.edge.rows()).for_each(|r| self.edge.set(r, col, 0.0));
        }
    }
}

pub fn compute_features(
    g: &SocialGraph,
    s: NodeId,
    mode: BetweennessMode,
) -> Result<FeatureMatrix> {
    let n = g.node_count();
    if s >= n {
        return Err(Error::NodeOutOfRange { node: s, node_count: n });
    }
    if g.alive_edge_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let between = betweenness(g, mode.roots(s));
    let close = closeness(g);
    let dist = bfs_distances(g, s);

    let mut node_raw = Tensor::zeros(n, NODE_FEATURES);
    for v in 0..n {
        let row = node_raw.row_mut(v);
        row[0] = g.degree(v) as f64;
        row[1] = close[v];
        row[2] = between.node[v];
        row[3] = dist[v].unwrap_or(n) as f64;
        row[4] = if v == s { 1.0 } else { 0.0 };
    }

    let edge_ids: Vec<EdgeId> = g.alive_edges().collect();
    let diffusion = diffusion_importance_all(g);
    let mut edge_raw = Tensor::zeros(edge_ids.len(), EDGE_FEATURES);
    for (r, &e) in edge_ids.iter().enumerate() {
        let (i, j) = g.edge(e);
        let row = edge_raw.row_mut(r);
        row[0] = (g.degree(i) + g.degree(j)) as f64;
        row[1] = diffusion[e];
        row[2] = between.edge[e];
    }

    let (node, node_stats) = zscore(&node_raw);
    let (edge, edge_stats) = zscore(&edge_raw);
    Ok(FeatureMatrix { node_raw, edge_raw, node, edge, node_stats, edge_stats, edge_ids })
}

/// Out-neighbors of `j` that `i` does not already reach in one hop, for the
/// alive edge `e = (i, j)`.
pub fn diffusion_importance(g: &SocialGraph, e: EdgeId) -> Result<f64> {
    if !g.is_alive(e) {
        return Err(Error::DeadEdge(e));
    }
    let (i, j) = g.edge(e);
    let count = g
        .out_neighbors(j)
        .filter(|&k| k != i && g.find_edge(i, k).is_none())
        .count();
    Ok(count as f64)
}

fn diffusion_importance_all(g: &SocialGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut out = vec![0.0; g.edge_slots()];
    let mut mark = vec![usize::MAX; n];
    for i in 0..n {
        mark[i] = i;
        for k in g.out_neighbors(i) {
            mark[k] = i;
        }
        for &e in g.out_edges(i) {
            let j = g.edge(e).1;
            out[e] = g.out_neighbors(j).filter(|&k| mark[k] != i).count() as f64;
        }
    }
    out
}

const MIN_STD: f64 = 1e-12;

fn zscore(raw: &Tensor) -> (Tensor, Vec<ColumnStats>) {
    let (rows, cols) = raw.shape();
    let mut out = Tensor::zeros(rows, cols);
    let mut stats = Vec::with_capacity(cols);
    for c in 0..cols {
        let mean = (0..rows).map(|r| raw.get(r, c)).sum::<f64>() / rows.max(1) as f64;
        let var = (0..rows).map(|r| (raw.get(r, c) - mean).powi(2)).sum::<f64>() / rows.max(1) as f64;
        let std = var.sqrt();
        if std > MIN_STD {
            (0..rows).for_each(|r| out.set(r, c, (raw.get(r, c) - mean) / std));
        }
        stats.push(ColumnStats { mean, std });
    }
    (out, stats)
}
