use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot, Tensor};
use super::{Gradients, Parameters};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, EDGE_FEATURES, NODE_FEATURES};
use crate::graph::{CommunityAssignment, LineGraph, NodeId, SocialGraph};

/// Architecture switches used by ablation runs. Everything is on by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSwitches {
    /// Message passing over user links on the primal graph.
    pub node_passing: bool,
    /// Message passing over propagation routes on the line graph.
    pub edge_passing: bool,
    pub community: bool,
    pub source: bool,
}

impl Default for ModelSwitches {
    fn default() -> Self {
        Self { node_passing: true, edge_passing: true, community: true, source: true }
    }
}

static NEXT_CACHE_ID: AtomicU64 = AtomicU64::new(1);

/// Compressed adjacency: `targets[offsets[v]..offsets[v + 1]]`.
#[derive(Clone, Debug)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Csr {
    fn from_lists<I, J>(lists: I) -> Self
    where
        I: IntoIterator<Item = J>,
        J: IntoIterator<Item = usize>,
    {
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        for list in lists {
            targets.extend(list);
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    fn of(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Activations of one forward pass through the message-passing layers.
#[derive(Clone, Debug)]
pub struct EmbeddingCache {
    id: u64,
    switches: ModelSwitches,
    node_inputs: Tensor,
    edge_inputs: Tensor,
    /// `node_layers[l]` holds every node's embedding after layer `l`.
    node_layers: Vec<Tensor>,
    node_acts: Vec<Tensor>,
    /// Line-node embeddings, row `q` belonging to primal edge `primal_edge(q)`.
    edge_layers: Vec<Tensor>,
    edge_acts: Vec<Tensor>,
    node_neighbors: Csr,
    line_predecessors: Csr,
    endpoints: Vec<(NodeId, NodeId)>,
}

impl EmbeddingCache {
    pub fn switches(&self) -> ModelSwitches {
        self.switches
    }

    pub fn layer_count(&self) -> usize {
        self.node_layers.len()
    }

    pub fn node_layer(&self, l: usize) -> &Tensor {
        &self.node_layers[l]
    }

    pub fn edge_layer(&self, l: usize) -> &Tensor {
        &self.edge_layers[l]
    }

    pub fn node_embeddings(&self) -> &Tensor {
        self.node_layers.last().expect("at least layer 0")
    }

    pub fn edge_embeddings(&self) -> &Tensor {
        self.edge_layers.last().expect("at least layer 0")
    }

    /// Tail and head of the primal edge behind each line node.
    pub fn endpoints(&self) -> &[(NodeId, NodeId)] {
        &self.endpoints
    }

    /// `[n_i^L ‖ n_j^L ‖ e_ij^L]` for every line node, one row each.
    pub fn final_edge_embeddings(&self) -> Tensor {
        let (nl, el) = (self.node_embeddings(), self.edge_embeddings());
        let h = nl.cols();
        let mut out = Tensor::zeros(self.endpoints.len(), 3 * h);
        for (q, &(i, j)) in self.endpoints.iter().enumerate() {
            let row = out.row_mut(q);
            row[..h].copy_from_slice(nl.row(i));
            row[h..2 * h].copy_from_slice(nl.row(j));
            row[2 * h..].copy_from_slice(el.row(q));
        }
        out
    }
}

pub fn gnn_forward(
    g: &SocialGraph,
    lg: &LineGraph,
    feats: &FeatureMatrix,
    params: &Parameters,
    switches: ModelSwitches,
) -> Result<EmbeddingCache> {
    params.check_shapes()?;
    let n = g.node_count();
    if !lg.matches(g) {
        return Err(Error::Contract("line graph is stale for this graph".into()));
    }
    if feats.node.shape() != (n, NODE_FEATURES)
        || feats.edge.shape() != (lg.node_count(), EDGE_FEATURES)
        || feats.edge_ids.as_slice() != lg.primal_edges()
    {
        return Err(Error::Contract("feature matrix does not match the graph".into()));
    }
    let node_neighbors = Csr::from_lists((0..n).map(|v| g.undirected_neighbors(v)));
    let line_predecessors =
        Csr::from_lists((0..lg.node_count()).map(|q| lg.predecessors(q).iter().copied()));
    let layers = params.config().layers;

    let (node_layers, node_acts) = propagate(
        feats.node.matmul_t(&params.node_weights[0]),
        &params.node_weights[1..],
        &node_neighbors,
        switches.node_passing,
    );
    let (edge_layers, edge_acts) = propagate(
        feats.edge.matmul_t(&params.edge_weights[0]),
        &params.edge_weights[1..],
        &line_predecessors,
        switches.edge_passing,
    );
    debug_assert_eq!(node_layers.len(), layers + 1);

    Ok(EmbeddingCache {
        id: NEXT_CACHE_ID.fetch_add(1, Ordering::Relaxed),
        switches,
        node_inputs: feats.node.clone(),
        edge_inputs: feats.edge.clone(),
        node_layers,
        node_acts,
        edge_layers,
        edge_acts,
        node_neighbors,
        line_predecessors,
        endpoints: lg.primal_edges().iter().map(|&e| g.edge(e)).collect(),
    })
}

/// Residual layers `X_{l+1} = X_l + tanh(Σ_{u ∈ in(v)} W X_l[u])`. With
/// passing disabled the layer-0 embedding is carried through unchanged.
fn propagate(
    x0: Tensor,
    weights: &[Tensor],
    inbound: &Csr,
    enabled: bool,
) -> (Vec<Tensor>, Vec<Tensor>) {
    let mut layers = vec![x0];
    let mut acts = Vec::with_capacity(weights.len());
    for w in weights {
        let prev = layers.last().expect("layer 0 present");
        if !enabled {
            acts.push(Tensor::zeros(prev.rows(), prev.cols()));
            layers.push(prev.clone());
            continue;
        }
        let msg = prev.matmul_t(w);
        let mut act = Tensor::zeros(prev.rows(), w.rows());
        for v in 0..prev.rows() {
            let row = act.row_mut(v);
            for &u in inbound.of(v) {
                axpy(row, 1.0, msg.row(u));
            }
            row.iter_mut().for_each(|x| *x = x.tanh());
        }
        let mut next = prev.clone();
        next.add_scaled(&act, 1.0);
        acts.push(act);
        layers.push(next);
    }
    (layers, acts)
}

fn propagate_backward(
    layers: &[Tensor],
    acts: &[Tensor],
    weights: &[Tensor],
    inbound: &Csr,
    mut grad: Tensor,
    weight_grads: &mut [Tensor],
) -> Tensor {
    for l in (0..weights.len()).rev() {
        let act = &acts[l];
        let mut d_agg = grad.clone();
        for (d, a) in d_agg.data_mut().iter_mut().zip(act.data()) {
            *d *= 1.0 - a * a;
        }
        let mut d_msg = Tensor::zeros(grad.rows(), grad.cols());
        for v in 0..grad.rows() {
            for &u in inbound.of(v) {
                axpy(d_msg.row_mut(u), 1.0, d_agg.row(v));
            }
        }
        weight_grads[l].add_outer(&d_msg, &layers[l]);
        grad.add_scaled(&d_msg.matmul(&weights[l]), 1.0);
    }
    grad
}

/// Mean of the final node embeddings inside each community.
pub(crate) fn community_means(nodes: &Tensor, communities: &CommunityAssignment) -> Tensor {
    let mut out = Tensor::zeros(communities.count(), nodes.cols());
    for c in 0..communities.count() {
        let members = communities.members(c);
        let row = out.row_mut(c);
        for &v in members {
            axpy(row, 1.0, nodes.row(v));
        }
        let k = 1.0 / members.len() as f64;
        row.iter_mut().for_each(|x| *x *= k);
    }
    out
}

/// Intermediates of the edge-scoring MLP for one forward pass.
#[derive(Clone, Debug)]
pub struct ScoreCache {
    embedding_id: u64,
    source: NodeId,
    community_of: Vec<usize>,
    community_sizes: Vec<usize>,
    community_emb: Tensor,
    source_emb: Tensor,
    hidden: Tensor,
    logits: Vec<f64>,
}

impl ScoreCache {
    /// One score per line node, i.e. per alive edge in increasing edge id.
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn community_embeddings(&self) -> &Tensor {
        &self.community_emb
    }
}

/// Column block `[k·h, (k+1)·h)` of the first MLP weight.
fn w1_block(w1: &Tensor, k: usize, h: usize) -> Tensor {
    let mut out = Tensor::zeros(w1.rows(), h);
    for r in 0..w1.rows() {
        out.row_mut(r).copy_from_slice(&w1.row(r)[k * h..(k + 1) * h]);
    }
    out
}

fn add_w1_block(w1: &mut Tensor, block: &Tensor, k: usize) {
    let h = block.cols();
    for r in 0..w1.rows() {
        axpy(&mut w1.row_mut(r)[k * h..(k + 1) * h], 1.0, block.row(r));
    }
}

/// Scores every alive edge from `[e^f ‖ C_c(i) ‖ C_c(j) ‖ n_s]` through a
/// one-hidden-layer tanh MLP. The first layer is applied blockwise so each
/// node, community and the source are projected once rather than per edge.
pub fn score_forward(
    cache: &EmbeddingCache,
    communities: &CommunityAssignment,
    source: NodeId,
    params: &Parameters,
) -> Result<ScoreCache> {
    params.check_shapes()?;
    let nodes = cache.node_embeddings();
    let edges = cache.edge_embeddings();
    let (n, h) = nodes.shape();
    if h != params.config().hidden_dim {
        return Err(Error::Contract("embedding width does not match parameters".into()));
    }
    if communities.labels().len() != n {
        return Err(Error::Contract("community assignment does not cover the graph".into()));
    }
    if source >= n {
        return Err(Error::NodeOutOfRange { node: source, node_count: n });
    }
    let switches = cache.switches;
    let mut community_emb = community_means(nodes, communities);
    if !switches.community {
        community_emb.fill(0.0);
    }
    let mut source_emb = Tensor::from_vec(1, h, nodes.row(source).to_vec());
    if !switches.source {
        source_emb.fill(0.0);
    }

    let w1 = &params.mlp_w1;
    let p_tail = nodes.matmul_t(&w1_block(w1, 0, h));
    let p_head = nodes.matmul_t(&w1_block(w1, 1, h));
    let p_edge = edges.matmul_t(&w1_block(w1, 2, h));
    let p_ctail = community_emb.matmul_t(&w1_block(w1, 3, h));
    let p_chead = community_emb.matmul_t(&w1_block(w1, 4, h));
    let mut p_shared = source_emb.matmul_t(&w1_block(w1, 5, h));
    p_shared.add_scaled(&params.mlp_b1, 1.0);

    let community_of = communities.labels().to_vec();
    let mh = w1.rows();
    let mut hidden = Tensor::zeros(edges.rows(), mh);
    let mut logits = Vec::with_capacity(edges.rows());
    let (w2, b2) = (params.mlp_w2.row(0), params.mlp_b2.get(0, 0));
    for (q, &(i, j)) in cache.endpoints.iter().enumerate() {
        let row = hidden.row_mut(q);
        row.copy_from_slice(p_shared.row(0));
        axpy(row, 1.0, p_tail.row(i));
        axpy(row, 1.0, p_head.row(j));
        axpy(row, 1.0, p_edge.row(q));
        axpy(row, 1.0, p_ctail.row(community_of[i]));
        axpy(row, 1.0, p_chead.row(community_of[j]));
        row.iter_mut().for_each(|x| *x = x.tanh());
        logits.push(dot(w2, row) + b2);
    }

    Ok(ScoreCache {
        embedding_id: cache.id,
        source,
        community_sizes: (0..communities.count()).map(|c| communities.members(c).len()).collect(),
        community_of,
        community_emb,
        source_emb,
        hidden,
        logits,
    })
}

/// Gradients of `Σ_q upstream[q] · logit[q]` with respect to every parameter.
///
/// `params` must be the parameters both caches were produced with.
pub fn backward(
    cache: &EmbeddingCache,
    scores: &ScoreCache,
    params: &Parameters,
    upstream: &[f64],
) -> Result<Gradients> {
    if scores.embedding_id != cache.id {
        return Err(Error::Contract("score cache belongs to a different forward pass".into()));
    }
    if upstream.len() != scores.logits.len() {
        return Err(Error::Contract(format!(
            "{} upstream gradients for {} edges",
            upstream.len(),
            scores.logits.len()
        )));
    }
    params.check_shapes()?;
    let config = params.config();
    let (h, mh) = (config.hidden_dim, config.mlp_hidden);
    let nodes = cache.node_embeddings();
    let edges = cache.edge_embeddings();
    let n = nodes.rows();
    let nc = scores.community_sizes.len();
    let mut grads = Parameters::zeros(config)?;

    let mut d_hidden = Tensor::zeros(upstream.len(), mh);
    let w2 = params.mlp_w2.row(0);
    for (q, &g) in upstream.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        axpy(grads.mlp_w2.row_mut(0), g, scores.hidden.row(q));
        grads.mlp_b2.data_mut()[0] += g;
        let hrow = scores.hidden.row(q);
        for ((d, &w), &a) in d_hidden.row_mut(q).iter_mut().zip(w2).zip(hrow) {
            *d = g * w * (1.0 - a * a);
        }
    }

    let mut by_tail = Tensor::zeros(n, mh);
    let mut by_head = Tensor::zeros(n, mh);
    let mut by_ctail = Tensor::zeros(nc, mh);
    let mut by_chead = Tensor::zeros(nc, mh);
    let mut total = Tensor::zeros(1, mh);
    for (q, &(i, j)) in cache.endpoints.iter().enumerate() {
        let d = d_hidden.row(q);
        axpy(by_tail.row_mut(i), 1.0, d);
        axpy(by_head.row_mut(j), 1.0, d);
        axpy(by_ctail.row_mut(scores.community_of[i]), 1.0, d);
        axpy(by_chead.row_mut(scores.community_of[j]), 1.0, d);
        axpy(total.row_mut(0), 1.0, d);
    }
    grads.mlp_b1.add_scaled(&total, 1.0);

    let inputs: [(&Tensor, &Tensor); 6] = [
        (&by_tail, nodes),
        (&by_head, nodes),
        (&d_hidden, edges),
        (&by_ctail, &scores.community_emb),
        (&by_chead, &scores.community_emb),
        (&total, &scores.source_emb),
    ];
    let mut blocks = Vec::with_capacity(6);
    for (k, (dy, x)) in inputs.into_iter().enumerate() {
        let mut block = Tensor::zeros(mh, h);
        block.add_outer(dy, x);
        add_w1_block(&mut grads.mlp_w1, &block, k);
        blocks.push(w1_block(&params.mlp_w1, k, h));
    }

    let mut d_nodes = by_tail.matmul(&blocks[0]);
    d_nodes.add_scaled(&by_head.matmul(&blocks[1]), 1.0);
    if cache.switches.community {
        let mut d_comm = by_ctail.matmul(&blocks[3]);
        d_comm.add_scaled(&by_chead.matmul(&blocks[4]), 1.0);
        for v in 0..n {
            let c = scores.community_of[v];
            let k = 1.0 / scores.community_sizes[c] as f64;
            axpy(d_nodes.row_mut(v), k, d_comm.row(c));
        }
    }
    if cache.switches.source {
        let d_src = total.matmul(&blocks[5]);
        axpy(d_nodes.row_mut(scores.source), 1.0, d_src.row(0));
    }
    let d_edges = d_hidden.matmul(&blocks[2]);

    let layers = config.layers;
    let d_node0 = if cache.switches.node_passing {
        let (w0, rest) = grads.node_weights.split_at_mut(1);
        let d0 = propagate_backward(
            &cache.node_layers,
            &cache.node_acts,
            &params.node_weights[1..],
            &cache.node_neighbors,
            d_nodes,
            rest,
        );
        w0[0].add_outer(&d0, &cache.node_inputs);
        d0
    } else {
        grads.node_weights[0].add_outer(&d_nodes, &cache.node_inputs);
        d_nodes
    };
    let d_edge0 = if cache.switches.edge_passing {
        let (w0, rest) = grads.edge_weights.split_at_mut(1);
        let d0 = propagate_backward(
            &cache.edge_layers,
            &cache.edge_acts,
            &params.edge_weights[1..],
            &cache.line_predecessors,
            d_edges,
            rest,
        );
        w0[0].add_outer(&d0, &cache.edge_inputs);
        d0
    } else {
        grads.edge_weights[0].add_outer(&d_edges, &cache.edge_inputs);
        d_edges
    };
    debug_assert_eq!(grads.node_weights.len(), layers + 1);
    debug_assert!(d_node0.is_finite() && d_edge0.is_finite());
    Ok(grads)
}
