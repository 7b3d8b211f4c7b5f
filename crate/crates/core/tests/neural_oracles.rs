use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rumorcut::features::{compute_features, BetweennessMode, FeatureMatrix};
use rumorcut::graph::{build_line_graph, detect_communities, CommunityAssignment, SocialGraph};
use rumorcut::neural::{
    backward, gnn_forward, init_parameters, score_forward, GnnConfig, ModelSwitches, Parameters,
};

fn random_graph(n: usize, edges: usize, seed: u64) -> SocialGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut list = Vec::new();
    while list.len() < edges {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !list.contains(&(a, b)) {
            list.push((a, b));
        }
    }
    SocialGraph::from_edges(n, list).unwrap()
}

fn logits(
    g: &SocialGraph,
    f: &FeatureMatrix,
    comm: &CommunityAssignment,
    p: &Parameters,
    sw: ModelSwitches,
) -> Vec<f64> {
    let lg = build_line_graph(g).unwrap();
    let c = gnn_forward(g, &lg, f, p, sw).unwrap();
    score_forward(&c, comm, 0, p).unwrap().logits().to_vec()
}

fn weighted(l: &[f64], u: &[f64]) -> f64 {
    l.iter().zip(u).map(|(a, b)| a * b).sum()
}

fn check_gradients(sw: ModelSwitches) {
    let g = random_graph(12, 30, 4);
    let f = compute_features(&g, 0, BetweennessMode::SourceRooted).unwrap();
    let comm = detect_communities(&g, 1);
    let cfg = GnnConfig { hidden_dim: 4, layers: 2, mlp_hidden: 5 };
    let mut p = init_parameters(cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let up: Vec<f64> = (0..g.alive_edge_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    p.mlp_b1.data_mut().iter_mut().for_each(|x| *x = rng.gen_range(-0.3..0.3));

    let lg = build_line_graph(&g).unwrap();
    let cache = gnn_forward(&g, &lg, &f, &p, sw).unwrap();
    let scores = score_forward(&cache, &comm, 0, &p).unwrap();
    let grads = backward(&cache, &scores, &p, &up).unwrap();

    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let count = p.tensors().len();
    for t in 0..count {
        for k in 0..p.tensors()[t].data().len() {
            let orig = p.tensors()[t].data()[k];
            p.tensors_mut()[t].data_mut()[k] = orig + eps;
            let plus = weighted(&logits(&g, &f, &comm, &p, sw), &up);
            p.tensors_mut()[t].data_mut()[k] = orig - eps;
            let minus = weighted(&logits(&g, &f, &comm, &p, sw), &up);
            p.tensors_mut()[t].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grads.tensors()[t].data()[k];
            let err = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-3);
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn gradients_match_finite_differences() {
    check_gradients(ModelSwitches::default());
}

#[test]
fn gradients_match_finite_differences_with_ablations() {
    check_gradients(ModelSwitches { node_passing: false, community: false, ..Default::default() });
    check_gradients(ModelSwitches { edge_passing: false, source: false, ..Default::default() });
}

#[test]
fn duplicated_upstream_doubles_gradients() {
    let g = random_graph(8, 16, 11);
    let f = compute_features(&g, 0, BetweennessMode::Global).unwrap();
    let comm = detect_communities(&g, 0);
    let p = init_parameters(GnnConfig { hidden_dim: 3, layers: 2, mlp_hidden: 4 }, &mut ChaCha8Rng::seed_from_u64(1))
        .unwrap();
    let lg = build_line_graph(&g).unwrap();
    let cache = gnn_forward(&g, &lg, &f, &p, ModelSwitches::default()).unwrap();
    let scores = score_forward(&cache, &comm, 0, &p).unwrap();
    let up: Vec<f64> = (0..lg.node_count()).map(|q| (q as f64 * 0.37).sin()).collect();
    let once = backward(&cache, &scores, &p, &up).unwrap();
    let mut twice = once.clone();
    twice.add_scaled(&backward(&cache, &scores, &p, &up).unwrap(), 1.0);
    let doubled: Vec<f64> = up.iter().map(|x| 2.0 * x).collect();
    let direct = backward(&cache, &scores, &p, &doubled).unwrap();
    for (a, b) in twice.tensors().iter().zip(direct.tensors()) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}

/// Straight-line recomputation of the whole model from nested loops.
fn naive_logits(
    g: &SocialGraph,
    f: &FeatureMatrix,
    comm: &CommunityAssignment,
    s: usize,
    p: &Parameters,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let cfg = p.config();
    let h = cfg.hidden_dim;
    let n = g.node_count();
    let edges: Vec<usize> = g.alive_edges().collect();
    let lin = |w: &rumorcut::neural::Tensor, x: &[f64]| -> Vec<f64> {
        (0..w.rows()).map(|r| (0..w.cols()).map(|c| w.get(r, c) * x[c]).sum()).collect()
    };
    let mut nodes: Vec<Vec<f64>> = (0..n).map(|v| lin(&p.node_weights[0], f.node.row(v))).collect();
    for l in 1..=cfg.layers {
        let prev = nodes.clone();
        for i in 0..n {
            let mut acc = vec![0.0; h];
            for j in 0..n {
                let linked = g.find_edge(i, j).is_some() || g.find_edge(j, i).is_some();
                if j != i && linked {
                    let m = lin(&p.node_weights[l], &prev[j]);
                    (0..h).for_each(|k| acc[k] += m[k]);
                }
            }
            (0..h).for_each(|k| nodes[i][k] = prev[i][k] + acc[k].tanh());
        }
    }
    let mut line: Vec<Vec<f64>> =
        (0..edges.len()).map(|q| lin(&p.edge_weights[0], f.edge.row(q))).collect();
    for l in 1..=cfg.layers {
        let prev = line.clone();
        for (q, &eq) in edges.iter().enumerate() {
            let mut acc = vec![0.0; h];
            for (r, &er) in edges.iter().enumerate() {
                if g.edge(er).1 == g.edge(eq).0 {
                    let m = lin(&p.edge_weights[l], &prev[r]);
                    (0..h).for_each(|k| acc[k] += m[k]);
                }
            }
            (0..h).for_each(|k| line[q][k] = prev[q][k] + acc[k].tanh());
        }
    }
    let mean = |c: usize| -> Vec<f64> {
        let members: Vec<usize> = (0..n).filter(|&v| comm.community_of(v) == c).collect();
        (0..h).map(|k| members.iter().map(|&v| nodes[v][k]).sum::<f64>() / members.len() as f64).collect()
    };
    let mut finals = Vec::new();
    let mut out = Vec::new();
    for (q, &e) in edges.iter().enumerate() {
        let (i, j) = g.edge(e);
        let ef: Vec<f64> = [nodes[i].clone(), nodes[j].clone(), line[q].clone()].concat();
        let x: Vec<f64> =
            [ef.clone(), mean(comm.community_of(i)), mean(comm.community_of(j)), nodes[s].clone()].concat();
        let hid: Vec<f64> = lin(&p.mlp_w1, &x)
            .iter()
            .zip(p.mlp_b1.data())
            .map(|(a, b)| (a + b).tanh())
            .collect();
        out.push(lin(&p.mlp_w2, &hid)[0] + p.mlp_b2.get(0, 0));
        finals.push(ef);
    }
    (finals, out)
}

#[test]
fn forward_matches_straight_line_oracle() {
    for seed in 0..4 {
        let g = if seed == 0 {
            SocialGraph::from_edges(4, [(0, 1), (1, 2), (2, 0), (1, 3), (3, 1)]).unwrap()
        } else {
            random_graph(9, 20, seed)
        };
        let f = compute_features(&g, 1, BetweennessMode::SourceRooted).unwrap();
        let comm = detect_communities(&g, seed);
        let mut p = init_parameters(GnnConfig { hidden_dim: 4, layers: 3, mlp_hidden: 6 }, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        p.mlp_b1.data_mut().iter_mut().enumerate().for_each(|(k, x)| *x = 0.1 * k as f64);
        p.mlp_b2.data_mut()[0] = -0.2;
        let lg = build_line_graph(&g).unwrap();
        let cache = gnn_forward(&g, &lg, &f, &p, ModelSwitches::default()).unwrap();
        let got = score_forward(&cache, &comm, 1, &p).unwrap();
        let (finals, want) = naive_logits(&g, &f, &comm, 1, &p);
        let ef = cache.final_edge_embeddings();
        for (q, row) in finals.iter().enumerate() {
            for (a, b) in ef.row(q).iter().zip(row) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        for (a, b) in got.logits().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn zero_parameters_give_bias_logits() {
    let g = random_graph(7, 12, 3);
    let f = compute_features(&g, 0, BetweennessMode::Global).unwrap();
    let comm = detect_communities(&g, 0);
    let mut p = Parameters::zeros(GnnConfig { hidden_dim: 2, layers: 1, mlp_hidden: 3 }).unwrap();
    p.mlp_b1.data_mut().copy_from_slice(&[0.5, -0.1, 0.2]);
    p.mlp_w2.data_mut().copy_from_slice(&[1.0, 2.0, -1.0]);
    p.mlp_b2.data_mut()[0] = 0.3;
    let want = 0.5f64.tanh() + 2.0 * (-0.1f64).tanh() - 0.2f64.tanh() + 0.3;
    for l in logits(&g, &f, &comm, &p, ModelSwitches::default()) {
        assert!((l - want).abs() < 1e-15);
    }
}

#[test]
fn relabeling_permutes_edge_embeddings() {
    let g = random_graph(10, 24, 6);
    let n = g.node_count();
    let perm: Vec<usize> = (0..n).map(|v| (v * 3 + 1) % n).collect();
    // Insert relabeled edges in the original edge order so line nodes line up.
    let h = SocialGraph::from_edges(n, g.alive_edges().map(|e| {
        let (a, b) = g.edge(e);
        (perm[a], perm[b])
    }))
    .unwrap();
    let p = init_parameters(GnnConfig { hidden_dim: 4, layers: 2, mlp_hidden: 4 }, &mut ChaCha8Rng::seed_from_u64(3))
        .unwrap();
    let fg = compute_features(&g, 0, BetweennessMode::Global).unwrap();
    let fh = compute_features(&h, perm[0], BetweennessMode::Global).unwrap();
    let cg = gnn_forward(&g, &build_line_graph(&g).unwrap(), &fg, &p, ModelSwitches::default()).unwrap();
    let ch = gnn_forward(&h, &build_line_graph(&h).unwrap(), &fh, &p, ModelSwitches::default()).unwrap();
    let (eg, eh) = (cg.final_edge_embeddings(), ch.final_edge_embeddings());
    for q in 0..eg.rows() {
        for (a, b) in eg.row(q).iter().zip(eh.row(q)) {
            assert!((a - b).abs() < 1e-9);
        }
    }
    for v in 0..n {
        for (a, b) in cg.node_embeddings().row(v).iter().zip(ch.node_embeddings().row(perm[v])) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
