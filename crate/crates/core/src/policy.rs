//! Edge scoring, the degree-retention feasibility mask, and action selection
//! from the masked softmax over feasible edges.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{CommunityAssignment, EdgeId, NodeId, SocialGraph};
use crate::neural::{self, EmbeddingCache, Parameters, ScoreCache, Tensor};

pub const DEFAULT_RETENTION: f64 = 0.6;

const RETENTION_EPS: f64 = 1e-9;

/// Mean-pooled node embeddings per community, one row each.
pub fn community_embeddings(nodes: &Tensor, communities: &CommunityAssignment) -> Result<Tensor> {
    if communities.labels().len() != nodes.rows() {
        return Err(Error::Contract("community assignment does not cover the embeddings".into()));
    }
    Ok(neural::community_means(nodes, communities))
}

/// Scores every alive edge; the returned cache also feeds the backward pass.
pub fn score_edges(
    cache: &EmbeddingCache,
    communities: &CommunityAssignment,
    s: NodeId,
    params: &Parameters,
) -> Result<ScoreCache> {
    neural::score_forward(cache, communities, s, params)
}

pub fn validate_retention(retention: f64) -> Result<()> {
    if retention > 0.0 && retention <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("retention must be in (0, 1], got {retention}")))
    }
}

/// Whether deleting alive edge `e` keeps both endpoints at or above the
/// retention fraction of their original out- and in-degree respectively.
pub fn is_feasible(g: &SocialGraph, e: EdgeId, retention: f64) -> bool {
    if !g.is_alive(e) {
        return false;
    }
    let (i, j) = g.edge(e);
    let keeps = |current: usize, original: usize| {
        current as f64 - 1.0 + RETENTION_EPS >= retention * original as f64
    };
    keeps(g.out_degree(i), g.original_out_degree(i)) && keeps(g.in_degree(j), g.original_in_degree(j))
}

/// Feasibility of every edge slot; dead edges are infeasible.
pub fn feasible_mask(g: &SocialGraph, retention: f64) -> Result<Vec<bool>> {
    validate_retention(retention)?;
    Ok((0..g.edge_slots()).map(|e| is_feasible(g, e, retention)).collect())
}

/// Masked categorical distribution over the alive edges.
#[derive(Clone, Debug)]
pub struct PolicyOutput {
    /// Alive edges in increasing id; all other vectors are aligned with it.
    pub edge_ids: Vec<EdgeId>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub feasible: Vec<bool>,
}

impl PolicyOutput {
    pub fn new(edge_ids: Vec<EdgeId>, logits: Vec<f64>, feasible: Vec<bool>) -> Result<Self> {
        if edge_ids.len() != logits.len() || edge_ids.len() != feasible.len() {
            return Err(Error::Contract("policy vectors differ in length".into()));
        }
        let max = logits
            .iter()
            .zip(&feasible)
            .filter(|(_, &f)| f)
            .map(|(&l, _)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probabilities: Vec<f64> = logits
            .iter()
            .zip(&feasible)
            .map(|(&l, &f)| if f { (l - max).exp() } else { 0.0 })
            .collect();
        let total: f64 = probabilities.iter().sum();
        if total > 0.0 {
            probabilities.iter_mut().for_each(|p| *p /= total);
        }
        Ok(Self { edge_ids, logits, probabilities, feasible })
    }

    /// Builds the distribution for the current graph from a scoring pass.
    pub fn from_scores(g: &SocialGraph, scores: &ScoreCache, retention: f64) -> Result<Self> {
        validate_retention(retention)?;
        let edge_ids: Vec<EdgeId> = g.alive_edges().collect();
        let feasible = edge_ids.iter().map(|&e| is_feasible(g, e, retention)).collect();
        Self::new(edge_ids, scores.logits().to_vec(), feasible)
    }

    pub fn is_terminal(&self) -> bool {
        !self.feasible.iter().any(|&f| f)
    }

    pub fn feasible_count(&self) -> usize {
        self.feasible.iter().filter(|&&f| f).count()
    }

    pub fn position(&self, e: EdgeId) -> Option<usize> {
        self.edge_ids.binary_search(&e).ok()
    }

    pub fn entropy(&self) -> f64 {
        -self.probabilities.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    /// Natural log of the probability of the edge at `position`.
    pub fn log_prob(&self, position: usize) -> f64 {
        self.probabilities[position].ln()
    }
}

/// Draws an edge from the masked softmax; `None` when nothing is feasible.
pub fn sample_action<R: Rng + ?Sized>(output: &PolicyOutput, rng: &mut R) -> Option<EdgeId> {
    if output.is_terminal() {
        return None;
    }
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (k, &p) in output.probabilities.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(output.edge_ids[k]);
        if u < acc {
            return last;
        }
    }
    last
}

/// Highest-logit feasible edge, ties to the smallest edge id.
pub fn greedy_action(output: &PolicyOutput) -> Option<EdgeId> {
    let mut best: Option<(f64, EdgeId)> = None;
    for ((&e, &l), &f) in output.edge_ids.iter().zip(&output.logits).zip(&output.feasible) {
        if f && best.is_none_or(|(b, _)| l > b) {
            best = Some((l, e));
        }
    }
    best.map(|(_, e)| e)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn star_out(k: usize) -> SocialGraph {
        SocialGraph::from_edges(k + 1, (1..=k).map(|l| (0, l))).unwrap()
    }

    #[test]
    fn retention_boundary() {
        // Hub with ten out-edges; leaves get a second in-edge so the head side never binds.
        let mut edges: Vec<(usize, usize)> = (1..=10).map(|l| (0, l)).collect();
        for l in 1..=10 {
            edges.extend([(11, l), (12, l), (13, l)]);
        }
        let mut g = SocialGraph::from_edges(14, edges).unwrap();
        for e in 0..3 {
            g.remove_edge(e).unwrap();
        }
        assert_eq!(g.out_degree(0), 7);
        assert!(is_feasible(&g, 3, 0.6));
        g.remove_edge(3).unwrap();
        assert!(!is_feasible(&g, 4, 0.6));
    }

    #[test]
    fn single_relationship_is_protected() {
        let g = star_out(3);
        assert!(feasible_mask(&g, 0.6).unwrap().iter().all(|&f| !f));
        assert!(feasible_mask(&g, 0.0).is_err());
        assert!(feasible_mask(&g, 1.5).is_err());
    }

    #[test]
    fn masked_softmax_and_shift_invariance() {
        let out = PolicyOutput::new(vec![2, 5, 7], vec![1.0, 3.0, 2.0], vec![true, false, true]).unwrap();
        assert_eq!(out.probabilities[1], 0.0);
        assert!((out.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(greedy_action(&out), Some(7));
        let shifted = PolicyOutput::new(vec![2, 5, 7], vec![101.0, 103.0, 102.0], vec![true, false, true]).unwrap();
        for (a, b) in out.probabilities.iter().zip(&shifted.probabilities) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(greedy_action(&shifted), Some(7));
    }

    #[test]
    fn greedy_ties_take_smallest_id() {
        let out = PolicyOutput::new(vec![1, 4, 9], vec![0.5, 0.5, 0.5], vec![true; 3]).unwrap();
        assert_eq!(greedy_action(&out), Some(1));
    }

    #[test]
    fn terminal_when_nothing_feasible() {
        let out = PolicyOutput::new(vec![0, 1], vec![0.0, 1.0], vec![false, false]).unwrap();
        assert!(out.is_terminal());
        assert_eq!(sample_action(&out, &mut ChaCha8Rng::seed_from_u64(0)), None);
        assert_eq!(greedy_action(&out), None);
    }

    #[test]
    fn single_feasible_edge_is_always_sampled() {
        let out = PolicyOutput::new(vec![0, 1, 2], vec![9.0, -3.0, 4.0], vec![false, true, false]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!((0..100).all(|_| sample_action(&out, &mut rng) == Some(1)));
    }

    #[test]
    fn entropy_of_uniform() {
        let out = PolicyOutput::new(vec![0, 1, 2, 3], vec![0.0; 4], vec![true; 4]).unwrap();
        assert!((out.entropy() - 4f64.ln()).abs() < 1e-12);
    }
}
