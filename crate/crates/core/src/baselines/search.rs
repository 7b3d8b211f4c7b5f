use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Capacity, Objective, Task};
use crate::environment::DeletionPlan;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, SocialGraph};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Best individuals copied unchanged into the next generation.
    pub elitism: usize,
    pub tournament: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self { population: 20, generations: 30, crossover_rate: 0.9, mutation_rate: 0.2, elitism: 2, tournament: 2 }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.population >= 2
            && self.generations >= 1
            && self.tournament >= 1
            && self.elitism < self.population
            && (0.0..=1.0).contains(&self.crossover_rate)
            && (0.0..=1.0).contains(&self.mutation_rate);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid genetic algorithm settings {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    pub iterations: usize,
    /// In units of impact (fraction of nodes).
    pub initial_temperature: f64,
    pub cooling: f64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self { iterations: 400, initial_temperature: 0.01, cooling: 0.99 }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.iterations >= 1
            && self.initial_temperature >= 0.0
            && self.initial_temperature.is_finite()
            && self.cooling > 0.0
            && self.cooling < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid annealing settings {self:?}")))
        }
    }
}

/// Memoized impact of deleting a (sorted) subset from the task graph.
struct Evaluator<'a> {
    task: &'a Task<'a>,
    objective: Objective,
    cache: HashMap<Vec<EdgeId>, f64>,
}

impl<'a> Evaluator<'a> {
    fn new(task: &'a Task<'a>, objective: Objective) -> Self {
        Self { task, objective, cache: HashMap::new() }
    }

    fn impact(&mut self, subset: &[EdgeId]) -> Result<f64> {
        if let Some(&v) = self.cache.get(subset) {
            return Ok(v);
        }
        let mut g = self.task.graph.clone();
        for &e in subset {
            g.remove_edge(e)?;
        }
        let v = self.objective.impact(&g, self.task.source, self.task.sir)?;
        self.cache.insert(subset.to_vec(), v);
        Ok(v)
    }
}

/// Lower impact first, then the lexicographically smaller subset.
fn better(a: (f64, &[EdgeId]), b: (f64, &[EdgeId])) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Keeps members while capacity allows (in random order), then tops up with
/// random feasible non-members up to `target`. Result is sorted.
fn repair<R: Rng + ?Sized>(g: &SocialGraph, retention: f64, mut set: Vec<EdgeId>, target: usize, rng: &mut R) -> Vec<EdgeId> {
    set.sort_unstable();
    set.dedup();
    set.shuffle(rng);
    let mut cap = Capacity::new(g, retention);
    let mut kept = Vec::with_capacity(target);
    for e in set {
        if kept.len() < target && cap.allows(g, e) {
            cap.take(g, e);
            kept.push(e);
        }
    }
    if kept.len() < target {
        let mut pool: Vec<EdgeId> = g.alive_edges().filter(|e| !kept.contains(e)).collect();
        pool.shuffle(rng);
        for e in pool {
            if kept.len() == target {
                break;
            }
            if cap.allows(g, e) {
                cap.take(g, e);
                kept.push(e);
            }
        }
    }
    kept.sort_unstable();
    kept
}

/// Size of the subsets searched: the budget, or less when even a greedy fill
/// in edge-id order cannot place that many deletions.
fn target_size(task: &Task<'_>) -> Result<usize> {
    let g = task.graph;
    let mut cap = Capacity::new(g, task.retention);
    let mut placed = 0;
    for e in g.alive_edges() {
        if placed == task.budget {
            break;
        }
        if cap.allows(g, e) {
            cap.take(g, e);
            placed += 1;
        }
    }
    if task.budget > 0 && placed == 0 {
        return Err(Error::NoFeasibleSubset(task.budget));
    }
    Ok(placed)
}

fn plan_of(task: &Task<'_>, edges: Vec<EdgeId>) -> DeletionPlan {
    DeletionPlan { source: task.source, graph_fingerprint: task.graph.fingerprint(), edges, budget: task.budget }
}

/// Best feasible subset of the target size by exhaustive enumeration.
pub fn exhaustive_best(task: &Task<'_>, objective: Objective) -> Result<DeletionPlan> {
    let target = target_size(task)?;
    let edges: Vec<EdgeId> = task.graph.alive_edges().collect();
    let mut eval = Evaluator::new(task, objective);
    let mut best: Option<(f64, Vec<EdgeId>)> = None;
    let mut chosen = Vec::with_capacity(target);
    let mut cap = Capacity::new(task.graph, task.retention);
    enumerate(task, &edges, 0, target, &mut chosen, &mut cap, &mut eval, &mut best)?;
    let (_, subset) = best.ok_or(Error::NoFeasibleSubset(task.budget))?;
    Ok(plan_of(task, subset))
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    task: &Task<'_>,
    edges: &[EdgeId],
    from: usize,
    target: usize,
    chosen: &mut Vec<EdgeId>,
    cap: &mut Capacity,
    eval: &mut Evaluator<'_>,
    best: &mut Option<(f64, Vec<EdgeId>)>,
) -> Result<()> {
    if chosen.len() == target {
        let v = eval.impact(chosen)?;
        if best.as_ref().is_none_or(|(b, s)| better((v, chosen), (*b, s))) {
            *best = Some((v, chosen.clone()));
        }
        return Ok(());
    }
    for k in from..edges.len() {
        let e = edges[k];
        if cap.allows(task.graph, e) {
            cap.take(task.graph, e);
            chosen.push(e);
            enumerate(task, edges, k + 1, target, chosen, cap, eval, best)?;
            chosen.pop();
            cap.give_back(task.graph, e);
        }
    }
    Ok(())
}

/// Genetic search over feasible deletion subsets.
pub fn ga(task: &Task<'_>, cfg: &GaConfig, objective: Objective, seed: u64) -> Result<DeletionPlan> {
    ga_with_population(task, cfg, objective, seed, None)
}

/// As [`ga`], starting from `initial` (repaired to feasibility) instead of a
/// random population.
pub fn ga_with_population(
    task: &Task<'_>,
    cfg: &GaConfig,
    objective: Objective,
    seed: u64,
    initial: Option<Vec<Vec<EdgeId>>>,
) -> Result<DeletionPlan> {
    cfg.validate()?;
    let target = target_size(task)?;
    if target == 0 {
        return Ok(plan_of(task, Vec::new()));
    }
    let (g, r) = (task.graph, task.retention);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval = Evaluator::new(task, objective);
    let mut pop: Vec<Vec<EdgeId>> = match initial {
        Some(p) if !p.is_empty() => p.into_iter().map(|s| repair(g, r, s, target, &mut rng)).collect(),
        _ => (0..cfg.population).map(|_| repair(g, r, Vec::new(), target, &mut rng)).collect(),
    };
    let mut best: Option<(f64, Vec<EdgeId>)> = None;

    for generation in 0..=cfg.generations {
        let mut scored = Vec::with_capacity(pop.len());
        for ind in pop {
            let v = eval.impact(&ind)?;
            scored.push((v, ind));
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let (v, s) = &scored[0];
        if best.as_ref().is_none_or(|(b, bs)| better((*v, s), (*b, bs))) {
            best = Some((*v, s.clone()));
        }
        if generation == cfg.generations {
            break;
        }
        let size = cfg.population.max(scored.len().min(cfg.population));
        let mut next: Vec<Vec<EdgeId>> = scored.iter().take(cfg.elitism).map(|(_, s)| s.clone()).collect();
        while next.len() < size {
            let a = tournament(&scored, cfg.tournament, &mut rng);
            let b = tournament(&scored, cfg.tournament, &mut rng);
            let mut child = if rng.gen_bool(cfg.crossover_rate) {
                uniform_crossover(a, b, &mut rng)
            } else {
                a.clone()
            };
            if rng.gen_bool(cfg.mutation_rate) {
                mutate(g, r, &mut child, &mut rng);
            }
            next.push(repair(g, r, child, target, &mut rng));
        }
        pop = next;
    }
    let (_, subset) = best.expect("at least one generation is scored");
    Ok(plan_of(task, subset))
}

fn tournament<'p, R: Rng + ?Sized>(scored: &'p [(f64, Vec<EdgeId>)], k: usize, rng: &mut R) -> &'p Vec<EdgeId> {
    // `scored` is sorted best first, so the smallest drawn index wins.
    let pick = (0..k).map(|_| rng.gen_range(0..scored.len())).min().expect("k >= 1");
    &scored[pick].1
}

fn uniform_crossover<R: Rng + ?Sized>(a: &[EdgeId], b: &[EdgeId], rng: &mut R) -> Vec<EdgeId> {
    let mut child: Vec<EdgeId> = a.iter().filter(|e| b.contains(e)).copied().collect();
    for &e in a.iter().chain(b) {
        if !(a.contains(&e) && b.contains(&e)) && rng.gen_bool(0.5) {
            child.push(e);
        }
    }
    child
}

/// Swaps one member for a random non-member that fits the freed capacity.
fn mutate<R: Rng + ?Sized>(g: &SocialGraph, retention: f64, set: &mut [EdgeId], rng: &mut R) -> bool {
    if set.is_empty() {
        return false;
    }
    let k = rng.gen_range(0..set.len());
    let mut cap = Capacity::new(g, retention);
    for (idx, &e) in set.iter().enumerate() {
        if idx != k {
            cap.take(g, e);
        }
    }
    let out = set[k];
    let options: Vec<EdgeId> = g.alive_edges().filter(|&e| e != out && !set.contains(&e) && cap.allows(g, e)).collect();
    match options.choose(rng) {
        Some(&e) => {
            set[k] = e;
            set.sort_unstable();
            true
        }
        None => false,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaOutcome {
    pub plan: DeletionPlan,
    pub best_impact: f64,
    /// Moves accepted although they increased impact.
    pub accepted_worse: usize,
    pub evaluations: usize,
}

/// Simulated annealing over feasible deletion subsets.
pub fn sa(task: &Task<'_>, cfg: &SaConfig, objective: Objective, seed: u64) -> Result<DeletionPlan> {
    Ok(sa_run(task, cfg, objective, seed)?.plan)
}

pub fn sa_run(task: &Task<'_>, cfg: &SaConfig, objective: Objective, seed: u64) -> Result<SaOutcome> {
    cfg.validate()?;
    let target = target_size(task)?;
    let (g, r) = (task.graph, task.retention);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval = Evaluator::new(task, objective);
    let mut current = repair(g, r, Vec::new(), target, &mut rng);
    let mut f_current = eval.impact(&current)?;
    let mut best = (f_current, current.clone());
    let mut accepted_worse = 0;
    let mut temperature = cfg.initial_temperature;

    if !current.is_empty() {
        for _ in 0..cfg.iterations {
            let mut candidate = current.clone();
            if mutate(g, r, &mut candidate, &mut rng) {
                let f = eval.impact(&candidate)?;
                let delta = f - f_current;
                let accept = delta <= 0.0
                    || (temperature > 0.0 && rng.gen::<f64>() < (-delta / temperature).exp());
                if accept {
                    if delta > 0.0 {
                        accepted_worse += 1;
                    }
                    current = candidate;
                    f_current = f;
                    if better((f, &current), (best.0, &best.1)) {
                        best = (f, current.clone());
                    }
                }
            }
            temperature *= cfg.cooling;
        }
    }
    Ok(SaOutcome {
        plan: plan_of(task, best.1),
        best_impact: best.0,
        accepted_worse,
        evaluations: eval.cache.len(),
    })
}
