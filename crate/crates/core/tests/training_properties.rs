use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rumorcut::environment::{random_graph, EpisodeConfig, EpisodeState, GeneratorConfig, GraphFamily};
use rumorcut::neural::{init_parameters, load_parameters, save_parameters, GnnConfig};
use rumorcut::policy::{sample_action, PolicyOutput};
use rumorcut::training::{evaluate, logit_gradient, train, EvalConfig, PolicyModel, TrainConfig};

fn tiny() -> TrainConfig {
    TrainConfig {
        episodes: 6,
        learning_rate: 0.02,
        generator: GeneratorConfig {
            family: GraphFamily::PreferentialAttachment,
            min_nodes: 16,
            max_nodes: 22,
            min_m: 2,
            max_m: 3,
            ..Default::default()
        },
        episode: EpisodeConfig { n_sims: 30, ..Default::default() },
        gnn: GnnConfig { hidden_dim: 6, layers: 2, mlp_hidden: 6 },
        seed: 4,
        ..Default::default()
    }
}

fn checkpoint_bytes(cfg: &TrainConfig) -> Vec<u8> {
    let (params, log) = train(cfg, None, None, |_| {}).unwrap();
    assert_eq!(log.len(), cfg.episodes);
    let mut buf = Vec::new();
    save_parameters(&params, &mut buf).unwrap();
    buf
}

#[test]
fn training_twice_gives_identical_checkpoints() {
    let cfg = tiny();
    let a = checkpoint_bytes(&cfg);
    assert_eq!(a, checkpoint_bytes(&cfg));
    assert_ne!(a, checkpoint_bytes(&TrainConfig { seed: 5, ..cfg }));
    let params = load_parameters(a.as_slice(), Some(cfg.gnn)).unwrap();
    assert!(params.is_finite());
}

#[test]
fn resuming_continues_the_same_parameters() {
    let cfg = tiny();
    let (first, _) = train(&TrainConfig { episodes: 3, ..cfg.clone() }, None, None, |_| {}).unwrap();
    let (resumed, log) = train(&TrainConfig { episodes: 2, ..cfg.clone() }, None, Some(first.clone()), |_| {}).unwrap();
    assert_eq!(log.len(), 2);
    assert_ne!(resumed, first);
    let wrong = init_parameters(GnnConfig { hidden_dim: 5, ..cfg.gnn }, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(train(&cfg, None, Some(wrong), |_| {}).is_err());
}

#[test]
fn entropy_bonus_alone_flattens_the_policy() {
    let cfg = TrainConfig { entropy_coef: 50.0, learning_rate: 0.05, grad_clip: 1e9, episodes: 8, ..tiny() };
    let mut init = init_parameters(cfg.gnn, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    init.scale(4.0);
    let (trained, _) = train(&cfg, None, Some(init.clone()), |_| {}).unwrap();

    let g = random_graph(&cfg.generator, None, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
    let state = EpisodeState::new(g, 0, cfg.episode, 1, 0).unwrap();
    let before = PolicyModel::new(init).decide(&state).unwrap().output.entropy();
    let out = PolicyModel::new(trained).decide(&state).unwrap().output;
    let after = out.entropy();
    let feasible = out.feasible.iter().filter(|&&m| m).count() as f64;
    assert!(after > before, "entropy {before} -> {after}");
    assert!(after >= 0.95 * feasible.ln(), "entropy {after} vs uniform {}", feasible.ln());
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let cfg = TrainConfig { learning_rate: 0.0, ..tiny() };
    let init = init_parameters(cfg.gnn, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let (trained, log) = train(&cfg, None, Some(init.clone()), |_| {}).unwrap();
    assert_eq!(log.len(), cfg.episodes);
    assert_eq!(trained, init);
}

#[test]
fn baseline_keeps_the_bandit_gradient_direction() {
    // two arms with mean rewards 1.0 and 0.2; d J / d logit_0 = p0 p1 (r0 - r1)
    let logits = vec![0.3, -0.2];
    let out = PolicyOutput::new(vec![0, 1], logits, vec![true, true]).unwrap();
    let (p0, p1) = (out.probabilities[0], out.probabilities[1]);
    let exact = [p0 * p1 * 0.8, -p0 * p1 * 0.8];
    let means = [1.0, 0.2];
    let samples = 100_000;
    for baseline in [0.0, 0.6, 5.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut acc = [0.0; 2];
        for _ in 0..samples {
            let a = sample_action(&out, &mut rng).unwrap();
            let reward = means[a] + if rng.gen_bool(0.5) { 0.5 } else { -0.5 };
            let grad = logit_gradient(&out, a, reward - baseline, 0.0);
            for k in 0..2 {
                acc[k] -= grad[k] / samples as f64;
            }
        }
        for k in 0..2 {
            assert_eq!(acc[k].signum(), exact[k].signum(), "baseline {baseline}: {acc:?} vs {exact:?}");
            assert!((acc[k] - exact[k]).abs() < 0.1 * exact[k].abs() + 0.02, "baseline {baseline}: {acc:?}");
        }
    }
}

#[test]
fn zero_budget_evaluation_reports_no_mitigation() {
    let cfg = tiny();
    let params = init_parameters(cfg.gnn, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let g = random_graph(&cfg.generator, None, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let eval = EvalConfig { episode: EpisodeConfig { budget_fraction: 0.0, n_sims: 40, ..Default::default() }, ..Default::default() };
    let report = evaluate(&PolicyModel::new(params), &g, &[0, 1, 2], &eval).unwrap();
    assert!(!report.rows.is_empty());
    for row in &report.rows {
        assert_eq!(row.mitigation_pct, 0.0);
        assert_eq!(row.eta_original, row.eta_mitigated);
    }
}
