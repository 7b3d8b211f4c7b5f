use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rank_edges, Task};
use crate::environment::DeletionPlan;
use crate::error::{Error, Result};
use crate::features::BetweennessMode;
use crate::graph::{betweenness, EdgeId, NodeId, SocialGraph};
use crate::policy::is_feasible;
use crate::propagation::{bond_percolation_sample, exact_expected_spread};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbpConfig {
    /// Percolation samples shared by all candidates of one step.
    pub samples: usize,
    /// Candidate pool per step, the top edges by betweenness; 0 means all.
    pub candidates: usize,
    pub betweenness: BetweennessMode,
    /// Score candidates with the exact oracle instead of samples.
    pub exact: bool,
}

impl Default for GbpConfig {
    fn default() -> Self {
        Self { samples: 200, candidates: 20, betweenness: BetweennessMode::default(), exact: false }
    }
}

impl GbpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 && !self.exact {
            return Err(Error::Config("percolation needs at least one sample".into()));
        }
        Ok(())
    }
}

/// Greedy deletion: each step removes the candidate edge whose absence
/// minimizes the spread from the source over a shared set of percolation
/// samples of the current graph.
pub fn gbp(task: &Task<'_>, cfg: &GbpConfig, seed: u64) -> Result<DeletionPlan> {
    cfg.validate()?;
    let mut g = task.graph.clone();
    let s = task.source;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(task.budget);
    let mut reach = Reach::new(g.node_count());

    while edges.len() < task.budget {
        let between = betweenness(&g, cfg.betweenness.roots(s));
        let mut pool: Vec<EdgeId> = rank_edges(&g, |e| between.edge[e])
            .into_iter()
            .filter(|&e| is_feasible(&g, e, task.retention))
            .collect();
        if pool.is_empty() {
            break;
        }
        if cfg.candidates > 0 {
            pool.truncate(cfg.candidates);
        }
        pool.sort_unstable();

        let scores: Vec<f64> = if cfg.exact {
            pool.iter()
                .map(|&c| {
                    let mut h = g.clone();
                    h.remove_edge(c)?;
                    exact_expected_spread(&h, s, task.sir)
                })
                .collect::<Result<_>>()?
        } else {
            let mut totals = vec![0u64; pool.len()];
            let mut open = vec![false; g.edge_slots()];
            for _ in 0..cfg.samples {
                open.iter_mut().for_each(|o| *o = false);
                for e in bond_percolation_sample(&g, task.sir, &mut rng) {
                    open[e] = true;
                }
                let base = reach.count(&g, s, &open, None);
                let reached = reach.snapshot();
                for (k, &c) in pool.iter().enumerate() {
                    let tail = g.edge(c).0;
                    totals[k] += if open[c] && reached[tail] {
                        reach.count(&g, s, &open, Some(c)) as u64
                    } else {
                        base as u64
                    };
                }
            }
            totals.into_iter().map(|t| t as f64).collect()
        };

        let mut best = 0;
        for k in 1..pool.len() {
            if scores[k] < scores[best] {
                best = k;
            }
        }
        g.remove_edge(pool[best])?;
        edges.push(pool[best]);
    }
    Ok(DeletionPlan { source: s, graph_fingerprint: task.graph.fingerprint(), edges, budget: task.budget })
}

struct Reach {
    seen: Vec<bool>,
    stack: Vec<NodeId>,
}

impl Reach {
    fn new(n: usize) -> Self {
        Self { seen: vec![false; n], stack: Vec::new() }
    }

    /// Nodes reachable from `s` over open edges, optionally with `skip` closed.
    fn count(&mut self, g: &SocialGraph, s: NodeId, open: &[bool], skip: Option<EdgeId>) -> usize {
        self.seen.iter_mut().for_each(|x| *x = false);
        self.seen[s] = true;
        self.stack.push(s);
        let mut count = 1;
        while let Some(v) = self.stack.pop() {
            for &e in g.out_edges(v) {
                let j = g.edge(e).1;
                if open[e] && Some(e) != skip && !self.seen[j] {
                    self.seen[j] = true;
                    self.stack.push(j);
                    count += 1;
                }
            }
        }
        count
    }

    fn snapshot(&self) -> Vec<bool> {
        self.seen.clone()
    }
}
