//! Directed social graph with per-edge liveness.
//!
//! Edges keep their ids for the lifetime of the graph; deleting an edge only
//! flips its alive bit and drops it from the adjacency views. Original in- and
//! out-degrees are frozen at construction so retention constraints can be
//! checked against them after any number of deletions.

mod centrality;
mod community;
mod line;

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

pub use centrality::{
    betweenness, bfs_distances, closeness, dominant_eigenvectors, pagerank, Betweenness,
    EigenPair, Roots,
};
pub use community::{detect_communities, CommunityAssignment};
pub use line::{build_line_graph, LineGraph};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Clone, Debug)]
pub struct SocialGraph {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    alive: Vec<bool>,
    alive_count: usize,
    out_adj: Vec<Vec<EdgeId>>,
    in_adj: Vec<Vec<EdgeId>>,
    original_out: Vec<usize>,
    original_in: Vec<usize>,
    raw_ids: Vec<u64>,
}

impl SocialGraph {
    /// Builds a graph over `node_count` dense ids. Self-loops are dropped and
    /// repeated pairs collapse onto the first occurrence.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let raw_ids = (0..node_count as u64).collect();
        Self::build(node_count, edges, raw_ids)
    }

    fn build<I>(node_count: usize, edges: I, raw_ids: Vec<u64>) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        for (u, v) in edges {
            for node in [u, v] {
                if node >= node_count {
                    return Err(Error::NodeOutOfRange { node, node_count });
                }
            }
            if u != v && seen.insert((u, v)) {
                kept.push((u, v));
            }
        }
        let mut out_adj = vec![Vec::new(); node_count];
        let mut in_adj = vec![Vec::new(); node_count];
        for (id, &(u, v)) in kept.iter().enumerate() {
            out_adj[u].push(id);
            in_adj[v].push(id);
        }
        let original_out = out_adj.iter().map(Vec::len).collect();
        let original_in = in_adj.iter().map(Vec::len).collect();
        Ok(Self {
            node_count,
            alive: vec![true; kept.len()],
            alive_count: kept.len(),
            edges: kept,
            out_adj,
            in_adj,
            original_out,
            original_in,
            raw_ids,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of edge slots, dead ones included. Edge ids range over `0..edge_slots()`.
    pub fn edge_slots(&self) -> usize {
        self.edges.len()
    }

    pub fn alive_edge_count(&self) -> usize {
        self.alive_count
    }

    pub fn edge(&self, e: EdgeId) -> (NodeId, NodeId) {
        self.edges[e]
    }

    pub fn is_alive(&self, e: EdgeId) -> bool {
        self.alive[e]
    }

    /// Alive edge ids in increasing order.
    pub fn alive_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.alive.iter().enumerate().filter(|(_, &a)| a).map(|(e, _)| e)
    }

    pub fn out_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.out_adj[v]
    }

    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_adj[v]
    }

    pub fn out_neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_adj[v].iter().map(move |&e| self.edges[e].1)
    }

    pub fn in_neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_adj[v].iter().map(move |&e| self.edges[e].0)
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_adj[v].len()
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_adj[v].len()
    }

    /// Total alive degree (in + out).
    pub fn degree(&self, v: NodeId) -> usize {
        self.out_adj[v].len() + self.in_adj[v].len()
    }

    pub fn original_out_degree(&self, v: NodeId) -> usize {
        self.original_out[v]
    }

    pub fn original_in_degree(&self, v: NodeId) -> usize {
        self.original_in[v]
    }

    pub fn raw_id(&self, v: NodeId) -> u64 {
        self.raw_ids[v]
    }

    pub fn raw_ids(&self) -> &[u64] {
        &self.raw_ids
    }

    pub fn node_of_raw(&self, raw: u64) -> Option<NodeId> {
        self.raw_ids.iter().position(|&r| r == raw)
    }

    /// Alive edge from `u` to `v`, if any.
    pub fn find_edge(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.out_adj[u].iter().copied().find(|&e| self.edges[e].1 == v)
    }

    pub fn remove_edge(&mut self, e: EdgeId) -> Result<()> {
        if e >= self.edges.len() || !self.alive[e] {
            return Err(Error::DeadEdge(e));
        }
        let (u, v) = self.edges[e];
        self.alive[e] = false;
        self.alive_count -= 1;
        self.out_adj[u].retain(|&x| x != e);
        self.in_adj[v].retain(|&x| x != e);
        Ok(())
    }

    /// Sorted distinct neighbors ignoring direction.
    pub fn undirected_neighbors(&self, v: NodeId) -> Vec<NodeId> {
        let mut nbrs: Vec<NodeId> = self.out_neighbors(v).chain(self.in_neighbors(v)).collect();
        nbrs.sort_unstable();
        nbrs.dedup();
        nbrs
    }

    /// FNV-1a digest of the original edge list, used to tie plans to the graph
    /// they were computed on.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        eat(self.node_count as u64);
        for &(u, v) in &self.edges {
            eat(self.raw_ids[u]);
            eat(self.raw_ids[v]);
        }
        h
    }

    /// Subgraph induced by `nodes`, keeping only alive edges. Node order in the
    /// result follows `nodes`; raw ids carry over.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> Result<Self> {
        let index: HashMap<NodeId, NodeId> =
            nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let edges: Vec<_> = self
            .alive_edges()
            .filter_map(|e| {
                let (u, v) = self.edges[e];
                Some((*index.get(&u)?, *index.get(&v)?))
            })
            .collect();
        let raw = nodes.iter().map(|&v| self.raw_ids[v]).collect();
        Self::build(nodes.len(), edges, raw)
    }
}

/// Reads a SNAP-style edge list: two integer ids per line, `#` comments.
/// Raw ids are remapped to dense ids in order of first appearance. With
/// `directed == false` every pair contributes both directions.
pub fn load_edge_list<R: BufRead>(reader: R, directed: bool) -> Result<SocialGraph> {
    let mut index: HashMap<u64, NodeId> = HashMap::new();
    let mut raw_ids = Vec::new();
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let mut next_id = || -> Result<u64> {
            let tok = tokens.next().ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: "expected two node ids".into(),
            })?;
            tok.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("invalid node id {tok:?}"),
            })
        };
        let (a, b) = (next_id()?, next_id()?);
        if tokens.next().is_some() {
            return Err(Error::Parse {
                line: lineno + 1,
                message: "expected exactly two node ids".into(),
            });
        }
        let mut dense = |raw: u64| {
            *index.entry(raw).or_insert_with(|| {
                raw_ids.push(raw);
                raw_ids.len() - 1
            })
        };
        let (u, v) = (dense(a), dense(b));
        pairs.push((u, v));
        if !directed {
            pairs.push((v, u));
        }
    }
    let graph = SocialGraph::build(raw_ids.len(), pairs, raw_ids)?;
    if graph.alive_edge_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(graph)
}

pub fn parse_edge_list(text: &str, directed: bool) -> Result<SocialGraph> {
    load_edge_list(text.as_bytes(), directed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> SocialGraph {
        SocialGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn directed_literal_read() {
        let g = parse_edge_list("0 1\n1 2\n", true).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.alive_edges().map(|e| g.edge(e)).collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn undirected_symmetrizes_and_remaps() {
        let g = parse_edge_list("# c\n5 7\n", false).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.alive_edges().map(|e| g.edge(e)).collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        assert_eq!(g.raw_ids(), &[5, 7]);
    }

    #[test]
    fn crlf_duplicates_and_self_loops() {
        let g = parse_edge_list("1 2\r\n1 2\r\n3 3\r\n2 1\r\n", true).unwrap();
        assert_eq!(g.alive_edge_count(), 2);
        assert_eq!(g.node_count(), 3);
    }

    #[test]
    fn malformed_line_names_line_number() {
        match parse_edge_list("0 1\n# x\n1 x\n", true) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_edge_list("0\n", true), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_edge_list("0 1 2\n", true), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse_edge_list("# nothing\n", true), Err(Error::EmptyGraph)));
        assert!(matches!(parse_edge_list("4 4\n", true), Err(Error::EmptyGraph)));
    }

    #[test]
    fn remove_edge_updates_views_only() {
        let mut g = path3();
        g.remove_edge(0).unwrap();
        assert_eq!(g.alive_edge_count(), 1);
        assert_eq!(g.out_degree(0), 0);
        assert_eq!(g.original_out_degree(0), 1);
        let d = bfs_distances(&g, 0);
        assert_eq!(d, vec![Some(0), None, None]);
        assert!(matches!(g.remove_edge(0), Err(Error::DeadEdge(0))));
        assert!(matches!(g.remove_edge(9), Err(Error::DeadEdge(9))));
    }

    #[test]
    fn replaying_removals_matches_fresh_removal() {
        let edges = [(0, 1), (1, 2), (2, 0), (0, 2), (2, 1), (1, 3), (3, 0)];
        let mut a = SocialGraph::from_edges(4, edges).unwrap();
        for e in [3, 0, 5] {
            a.remove_edge(e).unwrap();
        }
        let mut b = SocialGraph::from_edges(4, edges).unwrap();
        for e in [5, 3, 0] {
            b.remove_edge(e).unwrap();
        }
        for v in 0..4 {
            assert_eq!(a.out_edges(v), b.out_edges(v));
            assert_eq!(a.in_edges(v), b.in_edges(v));
        }
    }

    #[test]
    fn induced_subgraph_keeps_raw_ids() {
        let g = parse_edge_list("10 20\n20 30\n30 10\n", true).unwrap();
        let sub = g.induced_subgraph(&[2, 0]).unwrap();
        assert_eq!(sub.raw_ids(), &[30, 10]);
        assert_eq!(sub.alive_edges().map(|e| sub.edge(e)).collect::<Vec<_>>(), vec![(0, 1)]);
    }
}
