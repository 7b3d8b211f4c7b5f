//! Mitigation reports and the CSV files downstream tooling reads.
//!
//! Headers are fixed; floats are written in shortest round-trip form so that
//! identical runs produce identical bytes.

use std::io::Write;

use crate::environment::{DeletionPlan, EpisodeState};
use crate::error::Result;
use crate::graph::SocialGraph;
use crate::propagation::{estimate_impact, MeanCurve, SirParams};
use crate::training::EpisodeLog;

pub const TRACE_HEADER: [&str; 5] =
    ["step", "newly_affected", "infectious", "cumulative_fraction", "infectious_fraction"];
pub const PLAN_HEADER: [&str; 4] = ["step", "edge_src_raw_id", "edge_dst_raw_id", "eta_after"];
pub const TRAINING_LOG_HEADER: [&str; 6] = ["episode", "return", "loss", "entropy", "eta_0", "eta_final"];
pub const REPORT_HEADER: [&str; 9] = [
    "method",
    "source_raw_id",
    "eta_original",
    "eta_mitigated",
    "mitigation_pct",
    "budget",
    "deleted",
    "short",
    "sim_seed",
];
pub const ABLATION_HEADER: [&str; 3] = ["ablation", "mean_mitigation_pct", "relative_change_pct"];

/// `100 · (eta_original − eta_mitigated) / eta_original`.
pub fn mitigation_pct(eta_original: f64, eta_mitigated: f64) -> f64 {
    if eta_original == 0.0 {
        0.0
    } else {
        100.0 * (eta_original - eta_mitigated) / eta_original
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub source_raw_id: u64,
    pub eta_original: f64,
    pub eta_mitigated: f64,
    pub mitigation_pct: f64,
    pub plan: DeletionPlan,
    /// Impact estimate after each deletion of the plan.
    pub eta_after: Vec<f64>,
    pub sim_seed: u64,
}

impl ReportRow {
    pub fn from_state(g: &SocialGraph, state: &EpisodeState) -> Self {
        Self {
            source_raw_id: g.raw_id(state.source),
            eta_original: state.eta_initial,
            eta_mitigated: state.eta_prev,
            mitigation_pct: mitigation_pct(state.eta_initial, state.eta_prev),
            plan: state.plan(),
            eta_after: state.eta_after().to_vec(),
            sim_seed: state.sim_seed,
        }
    }

    /// Scores a plan by replaying it under common random numbers `sim_seed`.
    pub fn from_plan(
        g: &SocialGraph,
        plan: DeletionPlan,
        sir: SirParams,
        n_sims: usize,
        sim_seed: u64,
    ) -> Result<Self> {
        let s = plan.source;
        let eta_original = estimate_impact(g, s, sir, n_sims, sim_seed)?.mean_eta;
        let mut h = g.clone();
        let mut eta_after = Vec::with_capacity(plan.edges.len());
        for &e in &plan.edges {
            h.remove_edge(e)?;
            eta_after.push(estimate_impact(&h, s, sir, n_sims, sim_seed)?.mean_eta);
        }
        let eta_mitigated = eta_after.last().copied().unwrap_or(eta_original);
        Ok(Self {
            source_raw_id: g.raw_id(s),
            eta_original,
            eta_mitigated,
            mitigation_pct: mitigation_pct(eta_original, eta_mitigated),
            plan,
            eta_after,
            sim_seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MitigationReport {
    pub method: String,
    pub rows: Vec<ReportRow>,
    /// Sources skipped for having no out-edges.
    pub skipped: Vec<usize>,
}

impl MitigationReport {
    pub fn new(method: &str) -> Self {
        Self { method: method.to_string(), rows: Vec::new(), skipped: Vec::new() }
    }

    pub fn mean_mitigation(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.mitigation_pct).sum::<f64>() / self.rows.len() as f64
    }

    /// Sample standard deviation of the per-source mitigation.
    pub fn std_mitigation(&self) -> f64 {
        let k = self.rows.len();
        if k < 2 {
            return 0.0;
        }
        let mean = self.mean_mitigation();
        let ss: f64 = self.rows.iter().map(|r| (r.mitigation_pct - mean).powi(2)).sum();
        (ss / (k - 1) as f64).sqrt()
    }
}

pub fn write_trace<W: Write>(curve: &MeanCurve, node_count: usize, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TRACE_HEADER)?;
    for step in 0..curve.newly_affected.len() {
        w.write_record([
            step.to_string(),
            curve.newly_affected[step].to_string(),
            curve.infectious[step].to_string(),
            curve.cumulative_fraction[step].to_string(),
            (curve.infectious[step] / node_count as f64).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_plan<W: Write>(g: &SocialGraph, row: &ReportRow, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(PLAN_HEADER)?;
    for (k, (&e, eta)) in row.plan.edges.iter().zip(&row.eta_after).enumerate() {
        let (a, b) = g.edge(e);
        w.write_record([
            (k + 1).to_string(),
            g.raw_id(a).to_string(),
            g.raw_id(b).to_string(),
            eta.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_training_log<W: Write>(log: &[EpisodeLog], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TRAINING_LOG_HEADER)?;
    for e in log {
        w.write_record([
            e.episode.to_string(),
            e.episode_return.to_string(),
            e.loss.to_string(),
            e.entropy.to_string(),
            e.eta_0.to_string(),
            e.eta_final.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reports<W: Write>(reports: &[MitigationReport], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(REPORT_HEADER)?;
    for report in reports {
        for r in &report.rows {
            w.write_record([
                report.method.clone(),
                r.source_raw_id.to_string(),
                r.eta_original.to_string(),
                r.eta_mitigated.to_string(),
                r.mitigation_pct.to_string(),
                r.plan.budget.to_string(),
                r.plan.edges.len().to_string(),
                r.plan.is_short().to_string(),
                r.sim_seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One ablation result: mean mitigation and its change relative to the
/// unablated run, in percent of the unablated value.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub mean_mitigation: f64,
    pub relative_change: f64,
}

impl AblationRow {
    pub fn new(name: &str, mean_mitigation: f64, reference: f64) -> Self {
        let relative_change = if reference == 0.0 {
            0.0
        } else {
            100.0 * (mean_mitigation - reference) / reference.abs()
        };
        Self { name: name.to_string(), mean_mitigation, relative_change }
    }
}

pub fn write_ablations<W: Write>(rows: &[AblationRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(ABLATION_HEADER)?;
    for r in rows {
        w.write_record([r.name.clone(), r.mean_mitigation.to_string(), r.relative_change.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
