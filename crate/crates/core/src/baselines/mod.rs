//! The non-learning comparison methods. Every method works under the same
//! budget and retention rule as the learned policy and returns a
//! [`DeletionPlan`].

mod gbp;
mod heuristics;
mod search;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gbp::{gbp, GbpConfig};
pub use heuristics::{hsc, hsd, ked, pagerank_removal};
pub use search::{exhaustive_best, ga, ga_with_population, sa, sa_run, GaConfig, SaConfig, SaOutcome};

use crate::environment::DeletionPlan;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, NodeId, SocialGraph};
use crate::propagation::{estimate_impact, exact_expected_spread, SirParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hsd,
    Hsc,
    Ga,
    Sa,
    #[serde(rename = "pr")]
    PageRank,
    Ked,
    Gbp,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Hsd, Method::Hsc, Method::Ga, Method::Sa, Method::PageRank, Method::Ked, Method::Gbp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hsd => "hsd",
            Method::Hsc => "hsc",
            Method::Ga => "ga",
            Method::Sa => "sa",
            Method::PageRank => "pr",
            Method::Ked => "ked",
            Method::Gbp => "gbp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown baseline method {s:?}")))
    }
}

/// How search baselines score a candidate graph: lower impact is better.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// Monte Carlo estimate under fixed common random numbers.
    MonteCarlo { n_sims: usize, seed: u64 },
    /// Exact enumeration; tiny graphs only.
    Exact,
}

impl Objective {
    pub fn impact(&self, g: &SocialGraph, s: NodeId, sir: SirParams) -> Result<f64> {
        match *self {
            Objective::MonteCarlo { n_sims, seed } => Ok(estimate_impact(g, s, sir, n_sims, seed)?.mean_eta),
            Objective::Exact => exact_expected_spread(g, s, sir),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub ga: GaConfig,
    pub sa: SaConfig,
    pub gbp: GbpConfig,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        self.ga.validate()?;
        self.sa.validate()?;
        self.gbp.validate()
    }
}

/// Everything a baseline needs besides its own configuration.
#[derive(Clone, Copy, Debug)]
pub struct Task<'a> {
    pub graph: &'a SocialGraph,
    pub source: NodeId,
    pub budget: usize,
    pub retention: f64,
    pub sir: SirParams,
}

pub fn run_baseline(method: Method, task: &Task<'_>, cfg: &BaselineConfig, objective: Objective) -> Result<DeletionPlan> {
    cfg.validate()?;
    if task.source >= task.graph.node_count() {
        return Err(Error::NodeOutOfRange { node: task.source, node_count: task.graph.node_count() });
    }
    match method {
        Method::Hsd => Ok(hsd(task)),
        Method::Hsc => Ok(hsc(task)),
        Method::PageRank => pagerank_removal(task),
        Method::Ked => ked(task),
        Method::Ga => ga(task, &cfg.ga, objective, cfg.seed),
        Method::Sa => sa(task, &cfg.sa, objective, cfg.seed),
        Method::Gbp => gbp(task, &cfg.gbp, cfg.seed),
    }
}

const CAPACITY_EPS: f64 = 1e-9;

/// Remaining deletions each node can absorb on its out- and in-side before
/// falling under the retention fraction of its original degree.
#[derive(Clone, Debug)]
pub(crate) struct Capacity {
    out_left: Vec<i64>,
    in_left: Vec<i64>,
}

impl Capacity {
    pub(crate) fn new(g: &SocialGraph, retention: f64) -> Self {
        let left = |cur: usize, orig: usize| (cur as f64 - retention * orig as f64 + CAPACITY_EPS).floor() as i64;
        let n = g.node_count();
        Self {
            out_left: (0..n).map(|v| left(g.out_degree(v), g.original_out_degree(v))).collect(),
            in_left: (0..n).map(|v| left(g.in_degree(v), g.original_in_degree(v))).collect(),
        }
    }

    pub(crate) fn allows(&self, g: &SocialGraph, e: EdgeId) -> bool {
        let (i, j) = g.edge(e);
        g.is_alive(e) && self.out_left[i] >= 1 && self.in_left[j] >= 1
    }

    pub(crate) fn take(&mut self, g: &SocialGraph, e: EdgeId) {
        let (i, j) = g.edge(e);
        self.out_left[i] -= 1;
        self.in_left[j] -= 1;
    }

    pub(crate) fn give_back(&mut self, g: &SocialGraph, e: EdgeId) {
        let (i, j) = g.edge(e);
        self.out_left[i] += 1;
        self.in_left[j] += 1;
    }
}

/// First alive edge maximizing `score` among those `allowed`; near-equal
/// scores count as ties and go to the smaller id.
pub(crate) fn argmax_edge(
    g: &SocialGraph,
    mut allowed: impl FnMut(EdgeId) -> bool,
    mut score: impl FnMut(EdgeId) -> f64,
) -> Option<EdgeId> {
    let mut best: Option<(f64, EdgeId)> = None;
    for e in g.alive_edges() {
        if !allowed(e) {
            continue;
        }
        let v = score(e);
        if best.is_none_or(|(b, _)| v > b + 1e-9 * b.abs().max(1.0)) {
            best = Some((v, e));
        }
    }
    best.map(|(_, e)| e)
}

/// Static ranking: descending score, ties by smaller edge id. Scores are
/// compared at nine significant digits of the largest score so that values
/// equal up to rounding noise tie.
pub(crate) fn rank_edges(g: &SocialGraph, score: impl Fn(EdgeId) -> f64) -> Vec<EdgeId> {
    let raw: Vec<(f64, EdgeId)> = g.alive_edges().map(|e| (score(e), e)).collect();
    let scale = raw.iter().map(|(v, _)| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut keyed: Vec<(i64, EdgeId)> = raw.into_iter().map(|(v, e)| ((v / scale * 1e9).round() as i64, e)).collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, e)| e).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("drln".parse::<Method>().is_err());
    }

    #[test]
    fn capacity_matches_feasibility() {
        let g = SocialGraph::from_edges(
            5,
            [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4), (4, 1), (1, 3), (2, 4)],
        )
        .unwrap();
        let cap = Capacity::new(&g, 0.6);
        for e in g.alive_edges() {
            assert_eq!(cap.allows(&g, e), crate::policy::is_feasible(&g, e, 0.6), "edge {e}");
        }
    }
}
