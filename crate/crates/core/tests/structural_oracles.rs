use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rumorcut::graph::{
    betweenness, bfs_distances, build_line_graph, detect_communities, dominant_eigenvectors, pagerank, Roots,
    SocialGraph,
};

const INF: usize = usize::MAX / 4;

fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> SocialGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    SocialGraph::from_edges(n, edges).unwrap()
}

fn floyd_warshall(g: &SocialGraph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut d = vec![vec![INF; n]; n];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = 0;
    }
    for e in g.alive_edges() {
        let (a, b) = g.edge(e);
        d[a][b] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Every shortest path from `s` to `t`, as node sequences, by depth-limited
/// search over simple paths.
fn shortest_paths(g: &SocialGraph, s: usize, t: usize, len: usize) -> Vec<Vec<usize>> {
    fn walk(g: &SocialGraph, path: &mut Vec<usize>, t: usize, len: usize, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if path.len() - 1 == len {
            if v == t {
                out.push(path.clone());
            }
            return;
        }
        for w in g.out_neighbors(v).collect::<Vec<_>>() {
            if !path.contains(&w) {
                path.push(w);
                walk(g, path, t, len, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(g, &mut vec![s], t, len, &mut out);
    out
}

fn brute_betweenness(g: &SocialGraph, roots: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = g.node_count();
    let d = floyd_warshall(g);
    let mut node = vec![0.0; n];
    let mut edge = vec![0.0; g.edge_slots()];
    for &s in roots {
        for t in 0..n {
            if t == s || d[s][t] >= INF {
                continue;
            }
            let paths = shortest_paths(g, s, t, d[s][t]);
            let w = 1.0 / paths.len() as f64;
            for p in &paths {
                for &v in &p[1..p.len() - 1] {
                    node[v] += w;
                }
                for pair in p.windows(2) {
                    edge[g.find_edge(pair[0], pair[1]).unwrap()] += w;
                }
            }
        }
    }
    (node, edge)
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol, "index {k}: {x} vs {y}");
    }
}

#[test]
fn betweenness_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..60 {
        let n = rng.gen_range(2..=8);
        let g = random_graph(n, rng.gen_range(0.15..0.6), &mut rng);
        let all: Vec<usize> = (0..n).collect();
        let fast = betweenness(&g, Roots::All);
        let (node, edge) = brute_betweenness(&g, &all);
        assert_close(&fast.node, &node, 1e-9);
        assert_close(&fast.edge, &edge, 1e-9);

        let s = trial % n;
        let rooted = betweenness(&g, Roots::Single(s));
        let (node, edge) = brute_betweenness(&g, &[s]);
        assert_close(&rooted.node, &node, 1e-9);
        assert_close(&rooted.edge, &edge, 1e-9);
    }
}

#[test]
fn betweenness_ignores_deleted_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let mut g = random_graph(7, 0.4, &mut rng);
        let alive: Vec<usize> = g.alive_edges().collect();
        for &e in alive.iter().step_by(3) {
            g.remove_edge(e).unwrap();
        }
        let fast = betweenness(&g, Roots::All);
        let (node, edge) = brute_betweenness(&g, &(0..7).collect::<Vec<_>>());
        assert_close(&fast.node, &node, 1e-9);
        assert_close(&fast.edge, &edge, 1e-9);
        for &e in alive.iter().step_by(3) {
            assert_eq!(fast.edge[e], 0.0);
        }
    }
}

#[test]
fn line_graph_matches_pairwise_construction() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..25 {
        let n = rng.gen_range(5..=50);
        let mut g = random_graph(n, rng.gen_range(0.02..0.12), &mut rng);
        if g.alive_edge_count() == 0 || g.alive_edge_count() > 200 {
            continue;
        }
        if trial % 2 == 1 {
            let victim = g.alive_edges().nth(g.alive_edge_count() / 2).unwrap();
            g.remove_edge(victim).unwrap();
        }
        let lg = build_line_graph(&g).unwrap();
        assert!(lg.matches(&g));
        let alive: Vec<usize> = g.alive_edges().collect();
        assert_eq!(lg.node_count(), alive.len());

        let mut expected = BTreeSet::new();
        for &p in &alive {
            for &q in &alive {
                if p != q && g.edge(p).1 == g.edge(q).0 {
                    expected.insert((p, q));
                }
            }
        }
        let got: BTreeSet<(usize, usize)> =
            lg.edges().iter().map(|&(a, b)| (lg.primal_edge(a), lg.primal_edge(b))).collect();
        assert_eq!(got.len(), lg.edges().len(), "duplicate line edges");
        assert_eq!(got, expected);
        for q in 0..lg.node_count() {
            let mut preds: Vec<usize> = lg.predecessors(q).to_vec();
            preds.sort_unstable();
            let want: Vec<usize> =
                (0..lg.node_count()).filter(|&p| expected.contains(&(lg.primal_edge(p), lg.primal_edge(q)))).collect();
            assert_eq!(preds, want);
        }
    }
}

#[test]
fn bfs_matches_floyd_warshall_on_random_dags() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..30 {
        let n = rng.gen_range(2..=15);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(0.3) {
                    edges.push((a, b));
                }
            }
        }
        let g = SocialGraph::from_edges(n, edges).unwrap();
        let d = floyd_warshall(&g);
        for s in 0..n {
            let got = bfs_distances(&g, s);
            for t in 0..n {
                let want = (d[s][t] < INF).then_some(d[s][t]);
                assert_eq!(got[t], want, "{s} -> {t}");
            }
        }
    }
}

#[test]
fn pagerank_is_a_fixed_point() {
    let (damping, tol) = (0.85, 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..20 {
        let n = rng.gen_range(3..=30);
        let g = random_graph(n, 0.15, &mut rng);
        let pr = pagerank(&g, damping, tol).unwrap();
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let dangling: f64 = (0..n).filter(|&v| g.out_degree(v) == 0).map(|v| pr[v]).sum();
        let mut image = vec![(1.0 - damping) / n as f64 + damping * dangling / n as f64; n];
        for e in g.alive_edges() {
            let (a, b) = g.edge(e);
            image[b] += damping * pr[a] / g.out_degree(a) as f64;
        }
        let residual: f64 = image.iter().zip(&pr).map(|(x, y)| (x - y).abs()).sum();
        assert!(residual < 10.0 * tol, "residual {residual}");
    }
}

fn symmetric_random(n: usize, p: f64, rng: &mut impl Rng) -> SocialGraph {
    let mut edges: Vec<(usize, usize)> = (0..n - 1).flat_map(|v| [(v, v + 1), (v + 1, v)]).collect();
    for a in 0..n {
        for b in a + 2..n {
            if rng.gen_bool(p) {
                edges.extend([(a, b), (b, a)]);
            }
        }
    }
    SocialGraph::from_edges(n, edges).unwrap()
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let pivot = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        if m[pivot][c] == 0.0 {
            return 0.0;
        }
        if pivot != c {
            m.swap(pivot, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

#[test]
fn eigenpair_has_small_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for trial in 0..15 {
        let n = rng.gen_range(3..=25);
        let g = if trial % 2 == 0 {
            symmetric_random(n, 0.2, &mut rng)
        } else {
            // a directed cycle with chords is strongly connected and aperiodic
            let mut edges: Vec<(usize, usize)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
            edges.push((0, 2 % n));
            edges.retain(|&(a, b)| a != b);
            edges.sort_unstable();
            edges.dedup();
            SocialGraph::from_edges(n, edges).unwrap()
        };
        let pair = dominant_eigenvectors(&g).unwrap();
        let mut av = vec![0.0; n];
        let mut ua = vec![0.0; n];
        for e in g.alive_edges() {
            let (a, b) = g.edge(e);
            av[a] += pair.right[b];
            ua[b] += pair.left[a];
        }
        let right: f64 = av.iter().zip(&pair.right).map(|(x, v)| (x - pair.value * v).powi(2)).sum::<f64>().sqrt();
        let left: f64 = ua.iter().zip(&pair.left).map(|(x, u)| (x - pair.value * u).powi(2)).sum::<f64>().sqrt();
        assert!(right < 1e-8 && left < 1e-8, "residuals {right} {left}");
        assert!(pair.right.iter().chain(&pair.left).all(|&x| x > -1e-9), "Perron vectors are nonnegative");
    }
}

#[test]
fn dominant_eigenvalue_is_a_characteristic_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let g = symmetric_random(6, 0.4, &mut rng);
        let lambda = dominant_eigenvectors(&g).unwrap().value;
        let dense = |shift: f64| {
            let mut m = vec![vec![0.0; 6]; 6];
            for e in g.alive_edges() {
                let (a, b) = g.edge(e);
                m[a][b] = 1.0;
            }
            for (v, row) in m.iter_mut().enumerate() {
                row[v] -= shift;
            }
            determinant(m)
        };
        // bracket a root of det(A - xI) within 1e-6 of the reported value
        let (lo, hi) = (dense(lambda - 1e-6), dense(lambda + 1e-6));
        assert!(lo * hi <= 0.0 || dense(lambda).abs() < 1e-9, "no root near {lambda}");
        // and nothing larger: the characteristic polynomial has no sign change above it
        let mut prev = dense(lambda + 1e-6);
        let mut x = lambda + 1e-6;
        while x < 7.0 {
            x += 1e-3;
            let cur = dense(x);
            assert!(prev * cur > 0.0, "larger root near {x}");
            prev = cur;
        }
    }
}

#[test]
fn louvain_separates_bridged_cliques() {
    let mut pairs = Vec::new();
    for base in [0usize, 5] {
        for a in base..base + 5 {
            for b in base..base + 5 {
                if a != b {
                    pairs.push((a, b));
                }
            }
        }
    }
    pairs.extend([(4, 5), (5, 4)]);
    let g = SocialGraph::from_edges(10, pairs).unwrap();
    for seed in 0..5 {
        let comm = detect_communities(&g, seed);
        assert_eq!(comm.count(), 2, "seed {seed}");
        for v in 1..5 {
            assert_eq!(comm.community_of(v), comm.community_of(0));
            assert_eq!(comm.community_of(v + 5), comm.community_of(5));
        }
        assert_ne!(comm.community_of(0), comm.community_of(5));
    }
}

fn arb_graph(max_nodes: usize) -> impl Strategy<Value = SocialGraph> {
    (2..=max_nodes).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..n * 3).prop_map(move |mut pairs| {
            pairs.retain(|(a, b)| a != b);
            pairs.sort_unstable();
            pairs.dedup();
            SocialGraph::from_edges(n, pairs).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn betweenness_is_nonnegative_and_bounded(g in arb_graph(8)) {
        let n = g.node_count() as f64;
        let b = betweenness(&g, Roots::All);
        for &x in &b.node {
            prop_assert!((0.0..=(n - 1.0) * (n - 2.0) + 1e-9).contains(&x));
        }
        for e in g.alive_edges() {
            prop_assert!(b.edge[e] >= 1.0 - 1e-12, "every edge is a shortest path between its endpoints");
        }
    }

    #[test]
    fn communities_partition_the_nodes(g in arb_graph(12), seed in 0u64..4) {
        let comm = detect_communities(&g, seed);
        let mut seen = vec![false; g.node_count()];
        for c in 0..comm.count() {
            prop_assert!(!comm.members(c).is_empty());
            for &v in comm.members(c) {
                prop_assert!(!seen[v]);
                seen[v] = true;
                prop_assert_eq!(comm.community_of(v), c);
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
    }
}
