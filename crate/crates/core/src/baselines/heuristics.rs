use super::{argmax_edge, rank_edges, Task};
use crate::environment::{plan_from_ranking, DeletionPlan};
use crate::error::Result;
use crate::graph::{betweenness, dominant_eigenvectors, pagerank, Roots};
use crate::policy::is_feasible;

const PAGERANK_DAMPING: f64 = 0.85;
const PAGERANK_TOL: f64 = 1e-10;

/// Repeatedly deletes the feasible edge with the largest endpoint-degree
/// sum on the current graph.
pub fn hsd(task: &Task<'_>) -> DeletionPlan {
    iterative(task, |g| {
        argmax_edge(g, |e| is_feasible(g, e, task.retention), |e| {
            let (i, j) = g.edge(e);
            (g.degree(i) + g.degree(j)) as f64
        })
    })
}

/// Repeatedly deletes the feasible edge with the largest all-pairs edge
/// betweenness on the current graph.
pub fn hsc(task: &Task<'_>) -> DeletionPlan {
    iterative(task, |g| {
        let b = betweenness(g, Roots::All);
        argmax_edge(g, |e| is_feasible(g, e, task.retention), |e| b.edge[e])
    })
}

fn iterative(task: &Task<'_>, mut pick: impl FnMut(&crate::graph::SocialGraph) -> Option<usize>) -> DeletionPlan {
    let mut g = task.graph.clone();
    let mut edges = Vec::with_capacity(task.budget);
    while edges.len() < task.budget {
        let Some(e) = pick(&g) else { break };
        g.remove_edge(e).expect("picked edges are alive");
        edges.push(e);
    }
    DeletionPlan { source: task.source, graph_fingerprint: task.graph.fingerprint(), edges, budget: task.budget }
}

/// Static ranking by `PR(i) · PR(j)` from one PageRank computation.
pub fn pagerank_removal(task: &Task<'_>) -> Result<DeletionPlan> {
    let g = task.graph;
    let pr = pagerank(g, PAGERANK_DAMPING, PAGERANK_TOL)?;
    let ranking = rank_edges(g, |e| {
        let (i, j) = g.edge(e);
        pr[i] * pr[j]
    });
    Ok(plan_from_ranking(g, task.source, task.budget, task.retention, ranking))
}

/// Static ranking by `u(i) · v(j)` with `u`, `v` the dominant left and right
/// eigenvectors of the adjacency.
pub fn ked(task: &Task<'_>) -> Result<DeletionPlan> {
    let g = task.graph;
    let pair = dominant_eigenvectors(g)?;
    let ranking = rank_edges(g, |e| {
        let (i, j) = g.edge(e);
        pair.left[i] * pair.right[j]
    });
    Ok(plan_from_ranking(g, task.source, task.budget, task.retention, ranking))
}
