use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rumorcut::baselines::{run_baseline, Method, Objective, Task};
use rumorcut::environment::random_graph;
use rumorcut::features::{compute_features, EDGE_FEATURE_NAMES, NODE_FEATURE_NAMES};
use rumorcut::graph::{load_edge_list, NodeId, SocialGraph};
use rumorcut::neural::{load_parameters, save_parameters, Parameters};
use rumorcut::propagation::{estimate_impact, mean_curve, simulate_sir};
use rumorcut::report::{
    write_ablations, write_plan, write_reports, write_trace, write_training_log, AblationRow, MitigationReport,
    ReportRow,
};
use rumorcut::training::{evaluate as evaluate_policy, train as train_policy, PolicyModel};
use serde_json::{json, Value};

use crate::config::{apply_ablation, RunConfig, ABLATIONS};

pub const IMPACT_HEADER: [&str; 5] = ["source_raw_id", "eta", "std_error", "n_sims", "sim_seed"];

const GRAPH_STREAM: u64 = 0x6772_6170_6800;
const SOURCE_STREAM: u64 = 0x736f_7572_6365;
const TRACE_STREAM: u64 = 0x7472_6163_6500;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The output directory of one command run.
pub struct Output {
    dir: PathBuf,
    command: &'static str,
    started: Instant,
}

impl Output {
    pub fn create(cfg: &RunConfig, command: &'static str) -> Result<Self> {
        let dir = cfg.out_dir.clone();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("resolved_config.toml"), cfg.to_toml()?)?;
        fs::write(dir.join("version.txt"), format!("rumorcut {}\n", env!("CARGO_PKG_VERSION")))?;
        Ok(Self { dir, command, started: Instant::now() })
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    fn summary(&self, mut body: Value) -> Result<()> {
        body["command"] = json!(self.command);
        body["version"] = json!(env!("CARGO_PKG_VERSION"));
        body["wall_clock_seconds"] = json!(self.started.elapsed().as_secs_f64());
        let mut f = self.file("summary.json")?;
        serde_json::to_writer_pretty(&mut f, &body)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<Option<SocialGraph>> {
    let Some(path) = &cfg.dataset else { return Ok(None) };
    let f = File::open(path).with_context(|| format!("opening dataset {}", path.display()))?;
    let g = load_edge_list(BufReader::new(f), !cfg.undirected)
        .with_context(|| format!("reading dataset {}", path.display()))?;
    Ok(Some(g))
}

/// The dataset when one is configured, otherwise one graph drawn from the
/// generator with the run seed.
fn target_graph(cfg: &RunConfig) -> Result<SocialGraph> {
    match load_dataset(cfg)? {
        Some(g) => Ok(g),
        None => Ok(random_graph(&cfg.generator(), None, &mut stream_rng(cfg.seed, GRAPH_STREAM))?),
    }
}

/// Listed sources by raw id, or `sample_k` nodes with out-edges drawn with
/// the run seed, in increasing node order.
fn select_sources(cfg: &RunConfig, g: &SocialGraph) -> Result<Vec<NodeId>> {
    if !cfg.sources.is_empty() {
        return cfg
            .sources
            .iter()
            .map(|&raw| g.node_of_raw(raw).with_context(|| format!("source {raw} is not a node of the graph")))
            .collect();
    }
    let pool: Vec<NodeId> = (0..g.node_count()).filter(|&v| g.out_degree(v) > 0).collect();
    if pool.is_empty() {
        bail!("graph has no node with out-edges to use as a source");
    }
    let k = cfg.sample_k.min(pool.len());
    let mut picked: Vec<NodeId> =
        rand::seq::index::sample(&mut stream_rng(cfg.seed, SOURCE_STREAM), pool.len(), k).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    Ok(picked)
}

fn raw_ids(g: &SocialGraph, nodes: &[NodeId]) -> Vec<u64> {
    nodes.iter().map(|&v| g.raw_id(v)).collect()
}

fn load_checkpoint(cfg: &RunConfig, path: &Path) -> Result<Parameters> {
    let f = File::open(path).with_context(|| format!("opening checkpoint {}", path.display()))?;
    load_parameters(BufReader::new(f), Some(cfg.gnn())).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn write_report_files(out: &Output, g: &SocialGraph, reports: &[MitigationReport], plans: bool) -> Result<()> {
    let mut f = out.file("report.csv")?;
    write_reports(reports, &mut f)?;
    f.flush()?;
    if plans {
        for report in reports {
            for row in &report.rows {
                let mut f = out.file(&format!("plans/{}_{}.csv", report.method, row.source_raw_id))?;
                write_plan(g, row, &mut f)?;
                f.flush()?;
            }
        }
    }
    Ok(())
}

fn report_summary(g: &SocialGraph, r: &MitigationReport) -> Value {
    json!({
        "method": r.method,
        "sources": r.rows.len(),
        "skipped_sources": raw_ids(g, &r.skipped),
        "mean_mitigation_pct": r.mean_mitigation(),
        "std_mitigation_pct": r.std_mitigation(),
    })
}

fn graph_summary(g: &SocialGraph) -> Value {
    json!({ "nodes": g.node_count(), "edges": g.alive_edge_count(), "fingerprint": format!("{:016x}", g.fingerprint()) })
}

pub fn simulate(cfg: &RunConfig, out: &Output) -> Result<()> {
    let g = target_graph(cfg)?;
    let sources = select_sources(cfg, &g)?;
    let sir = cfg.sir();
    sir.validate()?;
    if cfg.n_sims == 0 {
        bail!("n_sims must be positive");
    }
    let n = g.node_count();
    let mut impacts = csv::Writer::from_writer(out.file("impact.csv")?);
    impacts.write_record(IMPACT_HEADER)?;
    let mut rows = Vec::new();
    for &s in &sources {
        let raw = g.raw_id(s);
        let mut rng = stream_rng(cfg.seed, TRACE_STREAM);
        let traces = (0..cfg.n_sims).map(|_| simulate_sir(&g, s, sir, &mut rng)).collect::<rumorcut::Result<Vec<_>>>()?;
        let curve = mean_curve(&traces, n);
        let mut f = out.file(&format!("trace_{raw}.csv"))?;
        write_trace(&curve, n, &mut f)?;
        f.flush()?;
        let est = estimate_impact(&g, s, sir, cfg.n_sims, cfg.seed)?;
        impacts.write_record([
            raw.to_string(),
            est.mean_eta.to_string(),
            est.std_error.to_string(),
            cfg.n_sims.to_string(),
            cfg.seed.to_string(),
        ])?;
        rows.push(json!({ "source_raw_id": raw, "eta": est.mean_eta, "std_error": est.std_error, "steps": curve.newly_affected.len() }));
    }
    impacts.flush()?;
    out.summary(json!({ "graph": graph_summary(&g), "transmissibility": sir.transmissibility(), "impacts": rows }))
}

pub fn features(cfg: &RunConfig, out: &Output) -> Result<()> {
    let g = target_graph(cfg)?;
    let s = select_sources(cfg, &g)?[0];
    let fm = compute_features(&g, s, cfg.betweenness)?;

    let mut w = csv::Writer::from_writer(out.file("node_features.csv")?);
    let mut header = vec!["raw_id".to_string()];
    header.extend(NODE_FEATURE_NAMES.iter().map(|c| c.to_string()));
    header.extend(NODE_FEATURE_NAMES.iter().map(|c| format!("{c}_z")));
    w.write_record(&header)?;
    for v in 0..g.node_count() {
        let mut rec = vec![g.raw_id(v).to_string()];
        rec.extend(fm.node_raw.row(v).iter().chain(fm.node.row(v)).map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(out.file("edge_features.csv")?);
    let mut header = vec!["edge_src_raw_id".to_string(), "edge_dst_raw_id".to_string()];
    header.extend(EDGE_FEATURE_NAMES.iter().map(|c| c.to_string()));
    header.extend(EDGE_FEATURE_NAMES.iter().map(|c| format!("{c}_z")));
    w.write_record(&header)?;
    for (r, &e) in fm.edge_ids.iter().enumerate() {
        let (a, b) = g.edge(e);
        let mut rec = vec![g.raw_id(a).to_string(), g.raw_id(b).to_string()];
        rec.extend(fm.edge_raw.row(r).iter().chain(fm.edge.row(r)).map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    out.summary(json!({ "graph": graph_summary(&g), "source_raw_id": g.raw_id(s) }))
}

pub fn train(cfg: &RunConfig, resume: Option<&Path>, out: &Output) -> Result<()> {
    let tc = cfg.train()?;
    let dataset = load_dataset(cfg)?;
    let initial = resume.map(|p| load_checkpoint(cfg, p)).transpose()?;
    let total = tc.episodes;
    let (params, log) = train_policy(&tc, dataset.as_ref(), initial, |e| {
        if (e.episode + 1) % 100 == 0 || e.episode + 1 == total {
            eprintln!("episode {}/{} return {:.4} entropy {:.3}", e.episode + 1, total, e.episode_return, e.entropy);
        }
    })?;
    let mut f = out.file("checkpoint.bin")?;
    save_parameters(&params, &mut f)?;
    f.flush()?;
    let mut f = out.file("training_log.csv")?;
    write_training_log(&log, &mut f)?;
    f.flush()?;

    let window = log.len().min(100);
    let mean = |xs: &[rumorcut::training::EpisodeLog]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().map(|e| e.episode_return).sum::<f64>() / xs.len() as f64
        }
    };
    out.summary(json!({
        "episodes": log.len(),
        "resumed_from": resume.map(|p| p.display().to_string()),
        "mean_return_first": mean(&log[..window]),
        "mean_return_last": mean(&log[log.len() - window..]),
    }))
}

fn policy_model(cfg: &RunConfig, checkpoint: &Path) -> Result<PolicyModel> {
    let mut model = PolicyModel::new(load_checkpoint(cfg, checkpoint)?);
    (model.switches, model.mask) = cfg.model_switches()?;
    Ok(model)
}

pub fn evaluate(cfg: &RunConfig, checkpoint: &Path, out: &Output) -> Result<()> {
    let model = policy_model(cfg, checkpoint)?;
    let g = target_graph(cfg)?;
    let sources = select_sources(cfg, &g)?;
    let eval = cfg.eval();
    eval.episode.validate()?;
    let report = evaluate_policy(&model, &g, &sources, &eval)?;
    write_report_files(out, &g, std::slice::from_ref(&report), true)?;
    out.summary(json!({
        "graph": graph_summary(&g),
        "checkpoint": checkpoint.display().to_string(),
        "budget": eval.episode.budget(&g),
        "reports": [report_summary(&g, &report)],
    }))
}

pub fn baseline(cfg: &RunConfig, method: &str, exact: bool, out: &Output) -> Result<()> {
    let methods: Vec<Method> = if method.eq_ignore_ascii_case("all") {
        Method::ALL.to_vec()
    } else {
        method.split(',').map(|m| m.trim().parse::<Method>()).collect::<rumorcut::Result<_>>()?
    };
    let g = target_graph(cfg)?;
    let sources = select_sources(cfg, &g)?;
    let eval = cfg.eval();
    eval.episode.validate()?;
    let bcfg = cfg.baselines();
    let objective =
        if exact { Objective::Exact } else { Objective::MonteCarlo { n_sims: cfg.search_sims, seed: cfg.seed } };
    let budget = eval.episode.budget(&g);
    let sir = cfg.sir();

    let mut reports = Vec::new();
    for m in methods {
        let mut report = MitigationReport::new(m.name());
        for &s in &sources {
            if g.out_degree(s) == 0 {
                report.skipped.push(s);
                continue;
            }
            let task = Task { graph: &g, source: s, budget, retention: cfg.retention, sir };
            let plan = run_baseline(m, &task, &bcfg, objective).with_context(|| format!("{m} from source {}", g.raw_id(s)))?;
            report.rows.push(ReportRow::from_plan(&g, plan, sir, cfg.n_sims, cfg.seed)?);
        }
        reports.push(report);
    }
    write_report_files(out, &g, &reports, true)?;
    out.summary(json!({
        "graph": graph_summary(&g),
        "budget": budget,
        "objective": if exact { "exact" } else { "monte-carlo" },
        "reports": reports.iter().map(|r| report_summary(&g, r)).collect::<Vec<_>>(),
    }))
}

pub fn ablate(cfg: &RunConfig, checkpoint: &Path, out: &Output) -> Result<()> {
    let base = policy_model(cfg, checkpoint)?;
    let g = target_graph(cfg)?;
    let sources = select_sources(cfg, &g)?;
    let eval = cfg.eval();
    eval.episode.validate()?;

    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut reference = None;
    for name in ABLATIONS {
        let mut model = base.clone();
        apply_ablation(name, &mut model.switches, &mut model.mask)?;
        let mut report = evaluate_policy(&model, &g, &sources, &eval)?;
        report.method = format!("drle-{name}");
        let mean = report.mean_mitigation();
        let reference = *reference.get_or_insert(mean);
        rows.push(AblationRow::new(name, mean, reference));
        reports.push(report);
    }
    let mut f = out.file("ablation.csv")?;
    write_ablations(&rows, &mut f)?;
    f.flush()?;
    write_report_files(out, &g, &reports, false)?;
    out.summary(json!({
        "graph": graph_summary(&g),
        "checkpoint": checkpoint.display().to_string(),
        "ablations": rows.iter().map(|r| json!({
            "ablation": r.name,
            "mean_mitigation_pct": r.mean_mitigation,
            "relative_change_pct": r.relative_change,
        })).collect::<Vec<_>>(),
    }))
}
