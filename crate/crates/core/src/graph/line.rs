use super::{EdgeId, SocialGraph};
use crate::error::{Error, Result};

/// Directed line graph over the alive edges of a [`SocialGraph`].
///
/// Line node `q` stands for primal edge `primal_edge(q)`; line nodes are
/// numbered in increasing primal edge id. There is a line edge `(p, q)`
/// whenever the head of `p` is the tail of `q`.
#[derive(Clone, Debug)]
pub struct LineGraph {
    primal_edge_of: Vec<EdgeId>,
    line_node_of: Vec<Option<usize>>,
    line_edges: Vec<(usize, usize)>,
    // CSR of incoming line edges, grouped by target line node.
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
}

pub fn build_line_graph(g: &SocialGraph) -> Result<LineGraph> {
    if g.alive_edge_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let primal_edge_of: Vec<EdgeId> = g.alive_edges().collect();
    let mut line_node_of = vec![None; g.edge_slots()];
    for (q, &e) in primal_edge_of.iter().enumerate() {
        line_node_of[e] = Some(q);
    }
    let mut line_edges = Vec::new();
    for (p, &e) in primal_edge_of.iter().enumerate() {
        let (_, head) = g.edge(e);
        for &next in g.out_edges(head) {
            let q = line_node_of[next].expect("adjacency holds only alive edges");
            line_edges.push((p, q));
        }
    }

    let n = primal_edge_of.len();
    let mut in_offsets = vec![0usize; n + 1];
    for &(_, q) in &line_edges {
        in_offsets[q + 1] += 1;
    }
    for q in 0..n {
        in_offsets[q + 1] += in_offsets[q];
    }
    let mut fill = in_offsets.clone();
    let mut in_sources = vec![0; line_edges.len()];
    for &(p, q) in &line_edges {
        in_sources[fill[q]] = p;
        fill[q] += 1;
    }

    Ok(LineGraph { primal_edge_of, line_node_of, line_edges, in_offsets, in_sources })
}

impl LineGraph {
    pub fn node_count(&self) -> usize {
        self.primal_edge_of.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.line_edges
    }

    pub fn primal_edge(&self, q: usize) -> EdgeId {
        self.primal_edge_of[q]
    }

    pub fn primal_edges(&self) -> &[EdgeId] {
        &self.primal_edge_of
    }

    pub fn line_node(&self, e: EdgeId) -> Option<usize> {
        self.line_node_of.get(e).copied().flatten()
    }

    /// Line nodes `p` with a line edge `(p, q)`.
    pub fn predecessors(&self, q: usize) -> &[usize] {
        &self.in_sources[self.in_offsets[q]..self.in_offsets[q + 1]]
    }

    /// Whether this line graph was built from exactly the alive edges of `g`.
    pub fn matches(&self, g: &SocialGraph) -> bool {
        self.primal_edge_of.len() == g.alive_edge_count()
            && self.primal_edge_of.iter().all(|&e| e < g.edge_slots() && g.is_alive(e))
    }
}
