//! Flat run configuration: a TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rumorcut::baselines::{BaselineConfig, GaConfig, GbpConfig, SaConfig};
use rumorcut::environment::{EpisodeConfig, GeneratorConfig, GraphFamily};
use rumorcut::features::{BetweennessMode, FeatureMask, EDGE_FEATURES, NODE_FEATURES};
use rumorcut::neural::{GnnConfig, ModelSwitches};
use rumorcut::propagation::SirParams;
use rumorcut::training::{EvalConfig, TrainConfig};
use serde::{Deserialize, Serialize};

/// Names accepted by `ablations` and reported by the `ablate` command, in
/// report order. `none` changes nothing.
pub const ABLATIONS: [&str; 14] = [
    "none", "fn1", "fn2", "fn3", "fn4", "fn5", "fe6", "fe7", "fe8", "link", "route", "community", "source",
    "all-features",
];

pub fn apply_ablation(name: &str, switches: &mut ModelSwitches, mask: &mut FeatureMask) -> Result<()> {
    match name {
        "none" => {}
        "link" => switches.node_passing = false,
        "route" => switches.edge_passing = false,
        "community" => switches.community = false,
        "source" => switches.source = false,
        "all-features" => {
            mask.node = [true; NODE_FEATURES];
            mask.edge = [true; EDGE_FEATURES];
        }
        _ => {
            let col = name.get(2..).and_then(|d| d.parse::<usize>().ok());
            match (name.get(..2), col) {
                (Some("fn"), Some(k @ 1..=5)) => mask.node[k - 1] = true,
                (Some("fe"), Some(k @ 6..=8)) => mask.edge[k - 6] = true,
                _ => anyhow::bail!("unknown ablation {name:?}; expected one of {}", ABLATIONS.join(", ")),
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Edge list to load; without one, commands work on a generated graph.
    pub dataset: Option<PathBuf>,
    pub undirected: bool,
    /// Raw node ids of the rumor sources; empty means sample `sample_k`.
    pub sources: Vec<u64>,
    pub sample_k: usize,

    pub beta: f64,
    pub gamma: f64,
    /// Simulations per impact estimate in simulation and evaluation.
    pub n_sims: usize,
    /// Simulations per impact estimate inside training episodes.
    pub n_sims_reward: usize,
    pub budget_fraction: f64,
    pub retention: f64,
    pub betweenness: BetweennessMode,

    pub episodes: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub baseline_momentum: f64,
    pub grad_clip: f64,
    pub hidden_dim: usize,
    pub layers: usize,
    pub mlp_hidden: usize,
    /// Ablation switches applied to training and evaluation, by name (see
    /// [`ABLATIONS`]).
    pub ablations: Vec<String>,

    pub generator_family: GraphFamily,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub min_m: usize,
    pub max_m: usize,
    pub reciprocity: f64,
    pub rewire: f64,
    pub radius: usize,
    pub directed_generator: bool,

    pub ga_population: usize,
    pub ga_generations: usize,
    pub ga_crossover: f64,
    pub ga_mutation: f64,
    pub ga_elitism: usize,
    pub ga_tournament: usize,
    pub sa_iterations: usize,
    pub sa_temperature: f64,
    pub sa_cooling: f64,
    pub gbp_samples: usize,
    pub gbp_candidates: usize,
    pub gbp_exact: bool,
    /// Search baselines score subsets with this many simulations.
    pub search_sims: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sir = SirParams::default();
        let ep = EpisodeConfig::default();
        let tr = TrainConfig::default();
        let gnn = GnnConfig::default();
        let gen = GeneratorConfig::default();
        let (ga, sa, gbp) = (GaConfig::default(), SaConfig::default(), GbpConfig::default());
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            dataset: None,
            undirected: false,
            sources: Vec::new(),
            sample_k: 10,
            beta: sir.beta,
            gamma: sir.gamma,
            n_sims: 2000,
            n_sims_reward: ep.n_sims,
            budget_fraction: ep.budget_fraction,
            retention: ep.retention,
            betweenness: ep.betweenness,
            episodes: tr.episodes,
            learning_rate: tr.learning_rate,
            entropy_coef: tr.entropy_coef,
            baseline_momentum: tr.baseline_momentum,
            grad_clip: tr.grad_clip,
            hidden_dim: gnn.hidden_dim,
            layers: gnn.layers,
            mlp_hidden: gnn.mlp_hidden,
            ablations: Vec::new(),
            generator_family: gen.family,
            min_nodes: gen.min_nodes,
            max_nodes: gen.max_nodes,
            min_m: gen.min_m,
            max_m: gen.max_m,
            reciprocity: gen.reciprocity,
            rewire: gen.rewire,
            radius: gen.radius,
            directed_generator: gen.directed,
            ga_population: ga.population,
            ga_generations: ga.generations,
            ga_crossover: ga.crossover_rate,
            ga_mutation: ga.mutation_rate,
            ga_elitism: ga.elitism,
            ga_tournament: ga.tournament,
            sa_iterations: sa.iterations,
            sa_temperature: sa.initial_temperature,
            sa_cooling: sa.cooling,
            gbp_samples: gbp.samples,
            gbp_candidates: gbp.candidates,
            gbp_exact: gbp.exact,
            search_sims: 200,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn sir(&self) -> SirParams {
        SirParams { beta: self.beta, gamma: self.gamma }
    }

    pub fn gnn(&self) -> GnnConfig {
        GnnConfig { hidden_dim: self.hidden_dim, layers: self.layers, mlp_hidden: self.mlp_hidden }
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            family: self.generator_family,
            min_nodes: self.min_nodes,
            max_nodes: self.max_nodes,
            min_m: self.min_m,
            max_m: self.max_m,
            reciprocity: self.reciprocity,
            rewire: self.rewire,
            radius: self.radius,
            directed: self.directed_generator,
        }
    }

    fn episode(&self, n_sims: usize) -> EpisodeConfig {
        EpisodeConfig {
            sir: self.sir(),
            n_sims,
            budget_fraction: self.budget_fraction,
            retention: self.retention,
            betweenness: self.betweenness,
        }
    }

    pub fn model_switches(&self) -> Result<(ModelSwitches, FeatureMask)> {
        let mut switches = ModelSwitches::default();
        let mut mask = FeatureMask::default();
        for name in &self.ablations {
            apply_ablation(name, &mut switches, &mut mask)?;
        }
        Ok((switches, mask))
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let (switches, feature_mask) = self.model_switches()?;
        Ok(TrainConfig {
            episodes: self.episodes,
            learning_rate: self.learning_rate,
            entropy_coef: self.entropy_coef,
            baseline_momentum: self.baseline_momentum,
            grad_clip: self.grad_clip,
            seed: self.seed,
            generator: self.generator(),
            episode: self.episode(self.n_sims_reward),
            gnn: self.gnn(),
            switches,
            feature_mask,
        })
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig { episode: self.episode(self.n_sims), sim_seed: self.seed, community_seed: self.seed }
    }

    pub fn baselines(&self) -> BaselineConfig {
        BaselineConfig {
            ga: GaConfig {
                population: self.ga_population,
                generations: self.ga_generations,
                crossover_rate: self.ga_crossover,
                mutation_rate: self.ga_mutation,
                elitism: self.ga_elitism,
                tournament: self.ga_tournament,
            },
            sa: SaConfig {
                iterations: self.sa_iterations,
                initial_temperature: self.sa_temperature,
                cooling: self.sa_cooling,
            },
            gbp: GbpConfig {
                samples: self.gbp_samples,
                candidates: self.gbp_candidates,
                betweenness: self.betweenness,
                exact: self.gbp_exact,
            },
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("seed = 3\nlearning_rat = 0.1\n").is_err());
        let cfg: RunConfig = toml::from_str("seed = 3\nbetweenness = \"global\"\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.betweenness, BetweennessMode::Global);
    }

    #[test]
    fn ablation_names_map_to_switches() {
        for name in ABLATIONS {
            let (mut sw, mut mask) = (ModelSwitches::default(), FeatureMask::default());
            apply_ablation(name, &mut sw, &mut mask).unwrap();
            let changed = sw != ModelSwitches::default() || mask != FeatureMask::default();
            assert_eq!(changed, name != "none", "{name}");
        }
        let (mut sw, mut mask) = (ModelSwitches::default(), FeatureMask::default());
        apply_ablation("fe8", &mut sw, &mut mask).unwrap();
        assert_eq!(mask.edge, [false, false, true]);
        assert!(apply_ablation("fe5", &mut sw, &mut mask).is_err());
        assert!(apply_ablation("fn0", &mut sw, &mut mask).is_err());
    }
}
