//! The edge-deletion MDP and the random graph families it is trained on.
//!
//! One step deletes one feasible edge, rebuilds the line graph and features,
//! and pays the drop in estimated impact as reward. Every estimate within an
//! episode reuses the same simulation seed, so rewards telescope to the total
//! reduction and compare graphs under common random numbers.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{compute_features, BetweennessMode, FeatureMatrix};
use crate::graph::{
    build_line_graph, detect_communities, CommunityAssignment, EdgeId, LineGraph, NodeId, SocialGraph,
};
use crate::policy::{is_feasible, validate_retention, DEFAULT_RETENTION};
use crate::propagation::{estimate_impact, SirParams};

pub const DEFAULT_BUDGET_FRACTION: f64 = 0.10;

const MAX_REGENERATIONS: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFamily {
    #[default]
    PreferentialAttachment,
    SmallWorld,
    DatasetSubsample,
}

/// Random training topologies. `min_m..=max_m` is the number of out-edges
/// each new node attaches (preferential attachment) or the forward lattice
/// degree (small world).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub family: GraphFamily,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub min_m: usize,
    pub max_m: usize,
    /// Probability that each generated edge also gets its reverse.
    pub reciprocity: f64,
    pub rewire: f64,
    /// Hop radius of the undirected ball cut from the dataset graph.
    pub radius: usize,
    /// When false every generated edge is symmetrized.
    pub directed: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            family: GraphFamily::PreferentialAttachment,
            min_nodes: 60,
            max_nodes: 250,
            min_m: 2,
            max_m: 6,
            reciprocity: 0.3,
            rewire: 0.1,
            radius: 2,
            directed: true,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.min_nodes > self.max_nodes || self.min_m > self.max_m {
            return fail(format!("empty range in generator config {self:?}"));
        }
        if !(0.0..=1.0).contains(&self.reciprocity) || !(0.0..=1.0).contains(&self.rewire) {
            return fail("reciprocity and rewire must be probabilities".into());
        }
        match self.family {
            GraphFamily::PreferentialAttachment if self.min_m == 0 || self.min_nodes <= self.max_m => {
                fail(format!("preferential attachment needs 1 <= m < nodes, got {self:?}"))
            }
            GraphFamily::SmallWorld if self.min_m == 0 || self.min_nodes <= 2 * self.max_m => {
                fail(format!("small world needs 1 <= m and nodes > 2m, got {self:?}"))
            }
            _ => Ok(()),
        }
    }
}

/// Draws one graph. `dataset` is required by the subsample family and ignored
/// by the others.
pub fn random_graph<R: Rng + ?Sized>(
    gen: &GeneratorConfig,
    dataset: Option<&SocialGraph>,
    rng: &mut R,
) -> Result<SocialGraph> {
    gen.validate()?;
    let n = rng.gen_range(gen.min_nodes..=gen.max_nodes);
    let m = rng.gen_range(gen.min_m..=gen.max_m);
    let base = match gen.family {
        GraphFamily::PreferentialAttachment => preferential_attachment(n, m, rng),
        GraphFamily::SmallWorld => small_world(n, m, gen.rewire, rng),
        GraphFamily::DatasetSubsample => {
            let g = dataset.ok_or_else(|| Error::Config("subsample family needs a dataset graph".into()))?;
            if g.node_count() == 0 {
                return Err(Error::EmptyGraph);
            }
            let root = rng.gen_range(0..g.node_count());
            return g.induced_subgraph(&undirected_ball(g, root, gen.radius));
        }
    };
    let mut edges = Vec::with_capacity(base.len() * 2);
    for (a, b) in base {
        edges.push((a, b));
        if !gen.directed || rng.gen_bool(gen.reciprocity) {
            edges.push((b, a));
        }
    }
    SocialGraph::from_edges(n, edges)
}

/// Nodes `0..m` start unlinked; every later node links to `m` distinct older
/// nodes with probability proportional to their current total degree plus
/// one. Yields exactly `m (n - m)` edges.
fn preferential_attachment<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<(NodeId, NodeId)> {
    let mut degree = vec![0usize; n];
    let mut edges = Vec::with_capacity(m * n.saturating_sub(m));
    let mut chosen = Vec::with_capacity(m);
    for v in m..n {
        chosen.clear();
        let mut total: usize = (0..v).map(|u| degree[u] + 1).sum();
        while chosen.len() < m {
            let mut ticket = rng.gen_range(0..total);
            let mut pick = 0;
            for u in (0..v).filter(|u| !chosen.contains(u)) {
                let w = degree[u] + 1;
                if ticket < w {
                    pick = u;
                    break;
                }
                ticket -= w;
            }
            total -= degree[pick] + 1;
            chosen.push(pick);
        }
        for &u in &chosen {
            edges.push((v, u));
            degree[u] += 1;
            degree[v] += 1;
        }
    }
    edges
}

/// Directed ring lattice with each node pointing at its next `m` nodes; each
/// edge is then retargeted with probability `rewire` to a uniform node that
/// keeps the graph free of loops and duplicates.
fn small_world<R: Rng + ?Sized>(n: usize, m: usize, rewire: f64, rng: &mut R) -> Vec<(NodeId, NodeId)> {
    let mut present = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(n * m);
    for v in 0..n {
        for k in 1..=m {
            let e = (v, (v + k) % n);
            present.insert(e);
            edges.push(e);
        }
    }
    for e in edges.iter_mut() {
        if rewire > 0.0 && rng.gen_bool(rewire) {
            let (a, _) = *e;
            let options: Vec<NodeId> = (0..n).filter(|&b| b != a && !present.contains(&(a, b))).collect();
            if let Some(&b) = options.choose(rng) {
                present.remove(e);
                present.insert((a, b));
                *e = (a, b);
            }
        }
    }
    edges
}

fn undirected_ball(g: &SocialGraph, root: NodeId, radius: usize) -> Vec<NodeId> {
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut out = vec![root];
    while let Some(v) = queue.pop_front() {
        if dist[v] == radius {
            continue;
        }
        for u in g.undirected_neighbors(v) {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                out.push(u);
                queue.push_back(u);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Rules shared by every rollout, learned or heuristic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub sir: SirParams,
    /// Simulations per impact estimate.
    pub n_sims: usize,
    pub budget_fraction: f64,
    pub retention: f64,
    pub betweenness: BetweennessMode,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            sir: SirParams::default(),
            n_sims: 200,
            budget_fraction: DEFAULT_BUDGET_FRACTION,
            retention: DEFAULT_RETENTION,
            betweenness: BetweennessMode::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        self.sir.validate()?;
        validate_retention(self.retention)?;
        if self.n_sims == 0 {
            return Err(Error::Config("n_sims must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.budget_fraction) {
            return Err(Error::Config(format!("budget fraction {} outside [0, 1]", self.budget_fraction)));
        }
        Ok(())
    }

    pub fn budget(&self, g: &SocialGraph) -> usize {
        budget_for(g.alive_edge_count(), self.budget_fraction)
    }
}

/// `round(fraction · edges)`, halves rounding up.
pub fn budget_for(edges: usize, fraction: f64) -> usize {
    (fraction * edges as f64).round() as usize
}

/// An ordered edge deletion sequence for one graph and source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeletionPlan {
    pub source: NodeId,
    pub graph_fingerprint: u64,
    pub edges: Vec<EdgeId>,
    pub budget: usize,
}

impl DeletionPlan {
    /// Whether the plan stopped short of its budget for lack of feasible edges.
    pub fn is_short(&self) -> bool {
        self.edges.len() < self.budget
    }

    /// Replays the plan on `g`, checking identity, distinctness, budget and
    /// feasibility at every selection; returns the final graph.
    pub fn replay(&self, g: &SocialGraph, retention: f64) -> Result<SocialGraph> {
        if g.fingerprint() != self.graph_fingerprint {
            return Err(Error::Contract("plan was made for a different graph".into()));
        }
        if self.edges.len() > self.budget {
            return Err(Error::Contract(format!("plan has {} edges for budget {}", self.edges.len(), self.budget)));
        }
        let mut h = g.clone();
        for &e in &self.edges {
            if !is_feasible(&h, e, retention) {
                return Err(Error::InfeasibleEdge(e));
            }
            h.remove_edge(e)?;
        }
        Ok(h)
    }
}

/// Greedy plan completion used by ranking heuristics: takes edges in the
/// given order, skipping those infeasible at their turn.
pub fn plan_from_ranking(
    g: &SocialGraph,
    s: NodeId,
    budget: usize,
    retention: f64,
    ranking: impl IntoIterator<Item = EdgeId>,
) -> DeletionPlan {
    let mut h = g.clone();
    let mut edges = Vec::with_capacity(budget);
    for e in ranking {
        if edges.len() == budget {
            break;
        }
        if is_feasible(&h, e, retention) {
            h.remove_edge(e).expect("feasible edges are alive");
            edges.push(e);
        }
    }
    DeletionPlan { source: s, graph_fingerprint: g.fingerprint(), edges, budget }
}

/// Live state of one mitigation episode.
#[derive(Clone, Debug)]
pub struct EpisodeState {
    pub config: EpisodeConfig,
    pub graph: SocialGraph,
    pub line_graph: LineGraph,
    pub source: NodeId,
    /// Fixed at reset for the whole episode.
    pub communities: CommunityAssignment,
    pub features: FeatureMatrix,
    pub budget: usize,
    pub step: usize,
    pub eta_initial: f64,
    pub eta_prev: f64,
    /// Seed of the common random numbers behind every impact estimate.
    pub sim_seed: u64,
    initial_fingerprint: u64,
    deleted: Vec<EdgeId>,
    eta_after: Vec<f64>,
    done: bool,
}

impl EpisodeState {
    pub fn new(
        graph: SocialGraph,
        source: NodeId,
        config: EpisodeConfig,
        sim_seed: u64,
        community_seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if source >= graph.node_count() {
            return Err(Error::NodeOutOfRange { node: source, node_count: graph.node_count() });
        }
        let line_graph = build_line_graph(&graph)?;
        let features = compute_features(&graph, source, config.betweenness)?;
        let communities = detect_communities(&graph, community_seed);
        let eta = estimate_impact(&graph, source, config.sir, config.n_sims, sim_seed)?.mean_eta;
        let budget = config.budget(&graph);
        let mut state = Self {
            config,
            initial_fingerprint: graph.fingerprint(),
            graph,
            line_graph,
            source,
            communities,
            features,
            budget,
            step: 0,
            eta_initial: eta,
            eta_prev: eta,
            sim_seed,
            deleted: Vec::new(),
            eta_after: Vec::new(),
            done: false,
        };
        state.done = state.budget == 0 || !state.any_feasible();
        Ok(state)
    }

    /// Fresh episode on a generated graph (or the fixed `dataset` when
    /// `gen` is `None`), with a uniformly drawn source of positive out-degree.
    pub fn reset<R: Rng + ?Sized>(
        gen: Option<&GeneratorConfig>,
        dataset: Option<&SocialGraph>,
        config: EpisodeConfig,
        rng: &mut R,
    ) -> Result<Self> {
        for _ in 0..MAX_REGENERATIONS {
            let graph = match gen {
                Some(gen) => random_graph(gen, dataset, rng)?,
                None => dataset.ok_or_else(|| Error::Config("reset needs a generator or a graph".into()))?.clone(),
            };
            let sources: Vec<NodeId> = (0..graph.node_count()).filter(|&v| graph.out_degree(v) > 0).collect();
            let Some(&source) = sources.choose(rng) else {
                if gen.is_none() {
                    return Err(Error::EmptyGraph);
                }
                continue;
            };
            let sim_seed = rng.gen();
            let community_seed = rng.gen();
            return Self::new(graph, source, config, sim_seed, community_seed);
        }
        Err(Error::EmptyGraph)
    }

    fn any_feasible(&self) -> bool {
        self.graph.alive_edges().any(|e| is_feasible(&self.graph, e, self.config.retention))
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn deleted(&self) -> &[EdgeId] {
        &self.deleted
    }

    /// Impact estimate after each deletion so far.
    pub fn eta_after(&self) -> &[f64] {
        &self.eta_after
    }

    /// Deletes `e` and returns `(reward, done)`.
    pub fn step(&mut self, e: EdgeId) -> Result<(f64, bool)> {
        if self.done {
            return Err(Error::Contract("step on a finished episode".into()));
        }
        if !is_feasible(&self.graph, e, self.config.retention) {
            return Err(Error::InfeasibleEdge(e));
        }
        self.graph.remove_edge(e)?;
        self.line_graph = build_line_graph(&self.graph)?;
        self.features = compute_features(&self.graph, self.source, self.config.betweenness)?;
        let eta = estimate_impact(&self.graph, self.source, self.config.sir, self.config.n_sims, self.sim_seed)?
            .mean_eta;
        let reward = self.eta_prev - eta;
        self.eta_prev = eta;
        self.step += 1;
        self.deleted.push(e);
        self.eta_after.push(eta);
        self.done = self.step == self.budget || !self.any_feasible();
        Ok((reward, self.done))
    }

    pub fn plan(&self) -> DeletionPlan {
        DeletionPlan {
            source: self.source,
            graph_fingerprint: self.initial_fingerprint,
            edges: self.deleted.clone(),
            budget: self.budget,
        }
    }
}
