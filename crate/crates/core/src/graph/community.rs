//! Community detection by modularity local moving with aggregation (Louvain)
//! on the undirected projection of the alive graph.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{NodeId, SocialGraph};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommunityAssignment {
    community_of: Vec<usize>,
    members: Vec<Vec<NodeId>>,
}

impl CommunityAssignment {
    /// Builds the assignment from arbitrary labels, renumbering them densely in
    /// order of first appearance over node ids.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let mut members: Vec<Vec<NodeId>> = Vec::new();
        let community_of = labels
            .iter()
            .enumerate()
            .map(|(v, &l)| {
                let c = *remap.entry(l).or_insert_with(|| {
                    members.push(Vec::new());
                    members.len() - 1
                });
                members[c].push(v);
                c
            })
            .collect();
        Self { community_of, members }
    }

    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn community_of(&self, v: NodeId) -> usize {
        self.community_of[v]
    }

    pub fn labels(&self) -> &[usize] {
        &self.community_of
    }

    pub fn members(&self, c: usize) -> &[NodeId] {
        &self.members[c]
    }
}

const MAX_LEVELS: usize = 32;
const MAX_PASSES: usize = 100;
const GAIN_EPS: f64 = 1e-12;

pub fn detect_communities(g: &SocialGraph, seed: u64) -> CommunityAssignment {
    let n = g.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = Level {
        adj: (0..n).map(|v| g.undirected_neighbors(v).into_iter().map(|u| (u, 1.0)).collect()).collect(),
        self_weight: vec![0.0; n],
    };
    // community of each original node, in terms of current level's vertices
    let mut assignment: Vec<usize> = (0..n).collect();

    for _ in 0..MAX_LEVELS {
        let (labels, moved) = level.local_moving(&mut rng);
        if !moved {
            break;
        }
        let (dense, count) = densify(&labels);
        for a in assignment.iter_mut() {
            *a = dense[*a];
        }
        level = level.aggregate(&dense, count);
    }
    CommunityAssignment::from_labels(&assignment)
}

fn densify(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut remap = vec![usize::MAX; labels.len()];
    let mut next = 0;
    let dense = labels
        .iter()
        .map(|&l| {
            if remap[l] == usize::MAX {
                remap[l] = next;
                next += 1;
            }
            remap[l]
        })
        .collect();
    (dense, next)
}

struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    /// Twice the weight of edges collapsed inside each vertex.
    self_weight: Vec<f64>,
}

impl Level {
    fn local_moving(&self, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.adj.len();
        let strength: Vec<f64> = (0..n)
            .map(|v| self.adj[v].iter().map(|&(_, w)| w).sum::<f64>() + self.self_weight[v])
            .collect();
        let total: f64 = strength.iter().sum();
        let mut comm: Vec<usize> = (0..n).collect();
        if total == 0.0 {
            return (comm, false);
        }
        let mut tot = strength.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut weight_to = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut any_move = false;
        for _ in 0..MAX_PASSES {
            let mut moved = false;
            for &v in &order {
                let home = comm[v];
                for &(u, w) in &self.adj[v] {
                    let c = comm[u];
                    if weight_to[c] == 0.0 {
                        touched.push(c);
                    }
                    weight_to[c] += w;
                }
                tot[home] -= strength[v];
                let gain = |c: usize, wt: f64| wt - tot[c] * strength[v] / total;
                let mut best = home;
                let mut best_gain = gain(home, weight_to[home]);
                touched.sort_unstable();
                for &c in &touched {
                    let g = gain(c, weight_to[c]);
                    if g > best_gain + GAIN_EPS {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += strength[v];
                if best != home {
                    comm[v] = best;
                    moved = true;
                }
                for &c in &touched {
                    weight_to[c] = 0.0;
                }
                touched.clear();
            }
            any_move |= moved;
            if !moved {
                break;
            }
        }
        (comm, any_move)
    }

    fn aggregate(&self, dense: &[usize], count: usize) -> Level {
        let mut self_weight = vec![0.0; count];
        let mut maps: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); count];
        for (v, nbrs) in self.adj.iter().enumerate() {
            let cv = dense[v];
            self_weight[cv] += self.self_weight[v];
            for &(u, w) in nbrs {
                let cu = dense[u];
                if cu == cv {
                    self_weight[cv] += w;
                } else {
                    *maps[cv].entry(cu).or_insert(0.0) += w;
                }
            }
        }
        Level { adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(), self_weight }
    }
}
