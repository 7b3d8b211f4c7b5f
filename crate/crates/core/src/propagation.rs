//! Discrete-time SIR rumor spreading.
//!
//! Step order: every infectious node tries each susceptible alive out-neighbor
//! once with probability `beta`, then recovers with probability `gamma`; nodes
//! infected during a step start spreading on the next one. A node that stays
//! infectious for `K` steps (`K ~ Geometric(gamma)` on 1, 2, ...) therefore
//! transmits along a given out-edge with probability `1 - (1 - beta)^K`, and the
//! set of ever-affected nodes equals the set reachable from the source in a
//! percolation where the out-edges of a node share that node's `K`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, NodeId, SocialGraph};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    pub beta: f64,
    pub gamma: f64,
}

impl Default for SirParams {
    fn default() -> Self {
        Self { beta: 0.08, gamma: 0.20 }
    }
}

impl SirParams {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        let p = Self { beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} outside [0, 1]", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        Ok(())
    }

    /// `E[(1 - beta)^(K m)]` for the geometric infectious period `K`.
    fn silent_moment(&self, m: u32) -> f64 {
        if m == 0 {
            return 1.0;
        }
        let qm = (1.0 - self.beta).powi(m as i32);
        self.gamma * qm / (1.0 - (1.0 - self.gamma) * qm)
    }

    /// Probability that an infectious node ever transmits along one out-edge.
    pub fn transmissibility(&self) -> f64 {
        1.0 - self.silent_moment(1)
    }

    /// Draws an infectious period from a uniform in (0, 1].
    fn duration_from_unit(&self, u: f64) -> u32 {
        if self.gamma >= 1.0 {
            return 1;
        }
        let k = 1.0 + (u.ln() / (1.0 - self.gamma).ln()).floor();
        k.min(u32::MAX as f64) as u32
    }

    fn open_threshold(&self, duration: u32) -> f64 {
        1.0 - (1.0 - self.beta).powi(duration.min(i32::MAX as u32) as i32)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PropagationTrace {
    /// Step 0 holds the source alone.
    pub newly_affected_per_step: Vec<usize>,
    /// Infectious count after each step; the last entry is 0.
    pub infectious_per_step: Vec<usize>,
    pub total_affected: usize,
}

impl PropagationTrace {
    pub fn steps(&self) -> usize {
        self.newly_affected_per_step.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpactEstimate {
    pub mean_eta: f64,
    pub std_error: f64,
    pub n_sims: usize,
}

fn step_cap(node_count: usize) -> usize {
    // A lone source with gamma = 0.2 outlives 10 steps one time in ten, so the
    // cap never drops below a level that geometric recovery cannot reach.
    (10 * node_count).max(1000)
}

fn check_node(g: &SocialGraph, s: NodeId) -> Result<()> {
    if s >= g.node_count() {
        return Err(Error::NodeOutOfRange { node: s, node_count: g.node_count() });
    }
    Ok(())
}

pub fn simulate_sir<R: Rng + ?Sized>(
    g: &SocialGraph,
    s: NodeId,
    params: SirParams,
    rng: &mut R,
) -> Result<PropagationTrace> {
    check_node(g, s)?;
    const SUSCEPTIBLE: u8 = 0;
    const AFFECTED: u8 = 1;
    let mut state = vec![SUSCEPTIBLE; g.node_count()];
    state[s] = AFFECTED;
    let mut infectious = vec![s];
    let mut fresh = Vec::new();
    let mut trace = PropagationTrace {
        newly_affected_per_step: vec![1],
        infectious_per_step: vec![1],
        total_affected: 1,
    };
    let cap = step_cap(g.node_count());
    while !infectious.is_empty() {
        if trace.steps() > cap {
            return Err(Error::SimulationDiverged { cap });
        }
        for &i in &infectious {
            for j in g.out_neighbors(i) {
                if state[j] == SUSCEPTIBLE && rng.gen::<f64>() < params.beta {
                    state[j] = AFFECTED;
                    fresh.push(j);
                }
            }
        }
        infectious.retain(|_| rng.gen::<f64>() >= params.gamma);
        trace.newly_affected_per_step.push(fresh.len());
        trace.total_affected += fresh.len();
        infectious.append(&mut fresh);
        trace.infectious_per_step.push(infectious.len());
    }
    Ok(trace)
}

// Counter-based randomness: each (seed, simulation, node|edge) triple maps to
// its own uniform, so deleting an edge leaves every other draw of a simulation
// untouched. Estimates before and after a deletion then share their noise.
const TAG_NODE: u64 = 0x6e6f_6465;
const TAG_EDGE: u64 = 0x6564_6765;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn keyed_bits(seed: u64, sim: u64, tag: u64, id: u64) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut h = mix(seed.wrapping_add(GOLDEN));
    h = mix(h ^ sim.wrapping_mul(GOLDEN));
    h = mix(h ^ tag);
    mix(h ^ id.wrapping_mul(GOLDEN))
}

/// Uniform in [0, 1).
fn keyed_unit(seed: u64, sim: u64, tag: u64, id: u64) -> f64 {
    (keyed_bits(seed, sim, tag, id) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in (0, 1].
fn keyed_unit_open(seed: u64, sim: u64, tag: u64, id: u64) -> f64 {
    ((keyed_bits(seed, sim, tag, id) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Default)]
struct ReachScratch {
    mark: Vec<u32>,
    stamp: u32,
    stack: Vec<NodeId>,
}

impl ReachScratch {
    fn reset(&mut self, n: usize) {
        if self.mark.len() != n || self.stamp == u32::MAX {
            self.mark = vec![0; n];
            self.stamp = 0;
        }
        self.stamp += 1;
        self.stack.clear();
    }
}

/// Final affected count of simulation `sim` under common random numbers `seed`.
fn realized_spread(
    g: &SocialGraph,
    s: NodeId,
    params: SirParams,
    seed: u64,
    sim: u64,
    scratch: &mut ReachScratch,
) -> usize {
    scratch.reset(g.node_count());
    let stamp = scratch.stamp;
    scratch.mark[s] = stamp;
    scratch.stack.push(s);
    let mut count = 1;
    while let Some(i) = scratch.stack.pop() {
        let duration = params.duration_from_unit(keyed_unit_open(seed, sim, TAG_NODE, i as u64));
        let threshold = params.open_threshold(duration);
        for &e in g.out_edges(i) {
            let j = g.edge(e).1;
            if scratch.mark[j] != stamp && keyed_unit(seed, sim, TAG_EDGE, e as u64) < threshold {
                scratch.mark[j] = stamp;
                scratch.stack.push(j);
                count += 1;
            }
        }
    }
    count
}

/// Monte Carlo estimate of the expected affected fraction.
///
/// Simulation `k` is driven by randomness keyed on `(seed, k)` and on node and
/// edge ids, so two graphs that differ by a few deleted edges are compared
/// under common random numbers when given the same seed.
pub fn estimate_impact(
    g: &SocialGraph,
    s: NodeId,
    params: SirParams,
    n_sims: usize,
    seed: u64,
) -> Result<ImpactEstimate> {
    check_node(g, s)?;
    params.validate()?;
    if n_sims == 0 {
        return Err(Error::Config("n_sims must be at least 1".into()));
    }
    let mut scratch = ReachScratch::default();
    // integer sums keep degenerate cases exact (beta = 0 gives exactly 1/n)
    let mut sum: u64 = 0;
    let mut sum_sq: u128 = 0;
    for k in 0..n_sims {
        let reached = realized_spread(g, s, params, seed, k as u64, &mut scratch) as u64;
        sum += reached;
        sum_sq += (reached as u128) * (reached as u128);
    }
    let n = g.node_count() as f64;
    let m = n_sims as f64;
    let mean_eta = sum as f64 / (m * n);
    let std_error = if n_sims > 1 {
        let spread = n_sims as u128 * sum_sq - (sum as u128) * (sum as u128);
        let var = spread as f64 / (m * (m - 1.0)) / (n * n);
        (var / m).sqrt()
    } else {
        0.0
    };
    Ok(ImpactEstimate { mean_eta, std_error, n_sims })
}

pub const EXACT_MAX_NODES: usize = 10;
pub const EXACT_MAX_EDGES: usize = 14;

/// Exact expected affected fraction by enumerating every open/closed pattern
/// of the alive edges. Out-edges of one node are weighted jointly through
/// the node's shared infectious period.
pub fn exact_expected_spread(g: &SocialGraph, s: NodeId, params: SirParams) -> Result<f64> {
    check_node(g, s)?;
    params.validate()?;
    let n = g.node_count();
    let edges: Vec<EdgeId> = g.alive_edges().collect();
    if n > EXACT_MAX_NODES || edges.len() > EXACT_MAX_EDGES {
        return Err(Error::TooLargeForExact { nodes: n, edges: edges.len() });
    }
    let max_deg = (0..n).map(|v| g.out_degree(v)).max().unwrap_or(0);
    // joint[a][b] = E[p^a (1 - p)^b] with p = 1 - (1 - beta)^K
    let mut joint = vec![vec![0.0; max_deg + 1]; max_deg + 1];
    for (a, row) in joint.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate().take(max_deg + 1 - a) {
            let mut binom = 1.0;
            let mut acc = 0.0;
            for c in 0..=a {
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * binom * params.silent_moment((b + c) as u32);
                binom = binom * (a - c) as f64 / (c + 1) as f64;
            }
            *cell = acc;
        }
    }

    let mut open_out = vec![0usize; n];
    let mut closed_out = vec![0usize; n];
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut seen = vec![false; n];
    let mut stack = Vec::with_capacity(n);
    let mut expected = 0.0;
    for pattern in 0u32..(1u32 << edges.len()) {
        open_out.iter_mut().for_each(|x| *x = 0);
        closed_out.iter_mut().for_each(|x| *x = 0);
        adj.iter_mut().for_each(Vec::clear);
        for (bit, &e) in edges.iter().enumerate() {
            let (u, v) = g.edge(e);
            if pattern >> bit & 1 == 1 {
                open_out[u] += 1;
                adj[u].push(v);
            } else {
                closed_out[u] += 1;
            }
        }
        let weight: f64 = (0..n).map(|v| joint[open_out[v]][closed_out[v]]).product();
        if weight == 0.0 {
            continue;
        }
        seen.iter_mut().for_each(|x| *x = false);
        seen[s] = true;
        stack.push(s);
        let mut reached = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    stack.push(v);
                }
            }
        }
        expected += weight * reached as f64;
    }
    Ok(expected / n as f64)
}

/// One percolation outcome: per node a shared infectious period, then each
/// alive out-edge open with `1 - (1 - beta)^K`. Every edge is open with
/// marginal probability `transmissibility()`. Returns open edge ids, sorted.
pub fn bond_percolation_sample<R: Rng + ?Sized>(
    g: &SocialGraph,
    params: SirParams,
    rng: &mut R,
) -> Vec<EdgeId> {
    let mut open = Vec::new();
    for v in 0..g.node_count() {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let threshold = params.open_threshold(params.duration_from_unit(u));
        for &e in g.out_edges(v) {
            if rng.gen::<f64>() < threshold {
                open.push(e);
            }
        }
    }
    open.sort_unstable();
    open
}

/// Per-step mean of many traces, padded after each trace ends.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanCurve {
    pub newly_affected: Vec<f64>,
    pub infectious: Vec<f64>,
    pub cumulative_fraction: Vec<f64>,
}

pub fn mean_curve(traces: &[PropagationTrace], node_count: usize) -> MeanCurve {
    let len = traces.iter().map(PropagationTrace::steps).max().unwrap_or(0);
    let m = traces.len().max(1) as f64;
    let mut newly = vec![0.0; len];
    let mut infectious = vec![0.0; len];
    for t in traces {
        for (step, (&a, &i)) in t.newly_affected_per_step.iter().zip(&t.infectious_per_step).enumerate() {
            newly[step] += a as f64;
            infectious[step] += i as f64;
        }
    }
    newly.iter_mut().for_each(|x| *x /= m);
    infectious.iter_mut().for_each(|x| *x /= m);
    let mut acc = 0.0;
    let cumulative_fraction = newly
        .iter()
        .map(|x| {
            acc += x;
            acc / node_count as f64
        })
        .collect();
    MeanCurve { newly_affected: newly, infectious, cumulative_fraction }
}
