//! REINFORCE with a moving-average baseline and an entropy bonus over
//! randomized episodes, plus greedy evaluation of trained parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{EpisodeConfig, EpisodeState, GeneratorConfig};
use crate::error::{Error, Result};
use crate::features::FeatureMask;
use crate::graph::{NodeId, SocialGraph};
use crate::neural::{
    backward, gnn_forward, init_parameters, EmbeddingCache, GnnConfig, Gradients, ModelSwitches, Parameters,
    ScoreCache,
};
use crate::policy::{greedy_action, sample_action, score_edges, PolicyOutput};
use crate::report::{MitigationReport, ReportRow};

/// Parameters together with the evaluation-time ablations applied to them.
#[derive(Clone, Debug)]
pub struct PolicyModel {
    pub params: Parameters,
    pub switches: ModelSwitches,
    pub mask: FeatureMask,
}

/// One scoring pass, kept for the backward pass.
pub struct Decision {
    pub embeddings: EmbeddingCache,
    pub scores: ScoreCache,
    pub output: PolicyOutput,
}

impl PolicyModel {
    pub fn new(params: Parameters) -> Self {
        Self { params, switches: ModelSwitches::default(), mask: FeatureMask::default() }
    }

    pub fn decide(&self, state: &EpisodeState) -> Result<Decision> {
        let masked;
        let features = if self.mask.is_empty() {
            &state.features
        } else {
            let mut f = state.features.clone();
            f.apply_mask(&self.mask);
            masked = f;
            &masked
        };
        let embeddings = gnn_forward(&state.graph, &state.line_graph, features, &self.params, self.switches)?;
        let scores = score_edges(&embeddings, &state.communities, state.source, &self.params)?;
        let output = PolicyOutput::from_scores(&state.graph, &scores, state.config.retention)?;
        Ok(Decision { embeddings, scores, output })
    }

    /// Runs the episode to completion choosing argmax edges.
    pub fn rollout_greedy(&self, state: &mut EpisodeState) -> Result<()> {
        while !state.is_done() {
            let decision = self.decide(state)?;
            let Some(e) = greedy_action(&decision.output) else { break };
            state.step(e)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    /// Weight of the old value in the per-step return baseline.
    pub baseline_momentum: f64,
    pub grad_clip: f64,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub episode: EpisodeConfig,
    pub gnn: GnnConfig,
    pub switches: ModelSwitches,
    pub feature_mask: FeatureMask,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            learning_rate: 1e-3,
            entropy_coef: 0.01,
            baseline_momentum: 0.9,
            grad_clip: 5.0,
            seed: 0,
            generator: GeneratorConfig::default(),
            episode: EpisodeConfig::default(),
            gnn: GnnConfig::default(),
            switches: ModelSwitches::default(),
            feature_mask: FeatureMask::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.episode.validate()?;
        self.gnn.validate()?;
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return bad("entropy coefficient must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.baseline_momentum) {
            return bad("baseline momentum must be in [0, 1)");
        }
        if !(self.grad_clip > 0.0) {
            return bad("gradient clip must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Sum of rewards, equal to `eta_0 - eta_final`.
    pub episode_return: f64,
    pub loss: f64,
    /// Mean policy entropy over the episode's decisions.
    pub entropy: f64,
    pub eta_0: f64,
    pub eta_final: f64,
    pub steps: usize,
}

/// Per-decision record of a sampled episode.
struct StepRecord {
    decision: Decision,
    position: usize,
    reward: f64,
}

/// Gradient of `-A log p_a - c H(p)` with respect to the logits.
pub fn logit_gradient(output: &PolicyOutput, position: usize, advantage: f64, entropy_coef: f64) -> Vec<f64> {
    let h = output.entropy();
    output
        .probabilities
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            if p <= 0.0 {
                return 0.0;
            }
            let hit = if k == position { 1.0 } else { 0.0 };
            -advantage * (hit - p) + entropy_coef * p * (p.ln() + h)
        })
        .collect()
}

/// Trains from scratch, or continues from `initial` when given.
///
/// The random streams of episode `k` depend only on `(seed, k)`.
pub fn train(
    config: &TrainConfig,
    dataset: Option<&SocialGraph>,
    initial: Option<Parameters>,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<(Parameters, Vec<EpisodeLog>)> {
    config.validate()?;
    let params = match initial {
        Some(p) if p.config() != config.gnn => {
            return Err(Error::Config(format!(
                "checkpoint config {:?} differs from requested {:?}",
                p.config(),
                config.gnn
            )))
        }
        Some(p) => p,
        None => init_parameters(config.gnn, &mut ChaCha8Rng::seed_from_u64(config.seed))?,
    };
    let mut model = PolicyModel { params, switches: config.switches, mask: config.feature_mask };
    let mut baseline: Vec<Option<f64>> = Vec::new();
    let mut log = Vec::with_capacity(config.episodes);

    for episode in 0..config.episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(episode as u64 + 1);
        let mut state = EpisodeState::reset(Some(&config.generator), dataset, config.episode, &mut rng)?;
        let eta_0 = state.eta_initial;

        let mut records = Vec::new();
        while !state.is_done() {
            let decision = model.decide(&state)?;
            let Some(e) = sample_action(&decision.output, &mut rng) else { break };
            let position = decision.output.position(e).expect("sampled edge is alive");
            let (reward, _) = state.step(e)?;
            records.push(StepRecord { decision, position, reward });
        }

        let mut returns = vec![0.0; records.len()];
        let mut acc = 0.0;
        for (t, r) in records.iter().enumerate().rev() {
            acc += r.reward;
            returns[t] = acc;
        }
        if baseline.len() < returns.len() {
            baseline.resize(returns.len(), None);
        }

        let mut grads = Gradients::zeros(config.gnn)?;
        let mut loss = 0.0;
        let mut entropy_sum = 0.0;
        for (t, rec) in records.iter().enumerate() {
            let advantage = returns[t] - baseline[t].unwrap_or(returns[t]);
            let out = &rec.decision.output;
            let h = out.entropy();
            loss += -advantage * out.log_prob(rec.position) - config.entropy_coef * h;
            entropy_sum += h;
            let upstream = logit_gradient(out, rec.position, advantage, config.entropy_coef);
            let g = backward(&rec.decision.embeddings, &rec.decision.scores, &model.params, &upstream)?;
            grads.add_scaled(&g, 1.0);
        }
        for (t, &g) in returns.iter().enumerate() {
            let m = config.baseline_momentum;
            baseline[t] = Some(baseline[t].map_or(g, |b| m * b + (1.0 - m) * g));
        }

        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFinite {
                episode,
                detail: format!("loss {loss}, gradient norm {}, parameter norm {}", grads.norm(), model.params.norm()),
            });
        }
        let norm = grads.norm();
        if norm > config.grad_clip {
            grads.scale(config.grad_clip / norm);
        }
        model.params.add_scaled(&grads, -config.learning_rate);

        let entry = EpisodeLog {
            episode,
            episode_return: eta_0 - state.eta_prev,
            loss,
            entropy: if records.is_empty() { 0.0 } else { entropy_sum / records.len() as f64 },
            eta_0,
            eta_final: state.eta_prev,
            steps: records.len(),
        };
        on_episode(&entry);
        log.push(entry);
    }
    Ok((model.params, log))
}

/// Evaluation settings shared by the learned policy and the baselines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub episode: EpisodeConfig,
    /// Seed of the common random numbers used for every impact estimate.
    pub sim_seed: u64,
    pub community_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episode: EpisodeConfig::default(), sim_seed: 0x5eed, community_seed: 0 }
    }
}

/// Greedy rollout from every source; sources without out-edges are skipped
/// and listed in the report.
pub fn evaluate(
    model: &PolicyModel,
    g: &SocialGraph,
    sources: &[NodeId],
    eval: &EvalConfig,
) -> Result<MitigationReport> {
    let mut report = MitigationReport::new("drle");
    for &s in sources {
        if s >= g.node_count() {
            return Err(Error::NodeOutOfRange { node: s, node_count: g.node_count() });
        }
        if g.out_degree(s) == 0 {
            report.skipped.push(s);
            continue;
        }
        let mut state = EpisodeState::new(g.clone(), s, eval.episode, eval.sim_seed, eval.community_seed)?;
        model.rollout_greedy(&mut state)?;
        report.rows.push(ReportRow::from_state(g, &state));
    }
    Ok(report)
}
