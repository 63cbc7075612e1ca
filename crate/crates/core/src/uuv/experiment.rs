//! Batch runs over seeds and policies, with CSV summaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::episode::{median, run_episode, write_trace_csv, Episode, EpisodeConfig, EpisodeMetrics, Policy};
use super::scenario::{ScenarioOverrides, UuvScenario};
use super::UuvError;
use crate::runtime::write_log_csv;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub policies: Vec<Policy>,
    pub episode: EpisodeConfig,
    /// Output directory; nothing is written without one.
    pub out: Option<PathBuf>,
    /// Write solve-time columns. Off gives byte-identical files across runs.
    pub timing: bool,
    /// Also write per-episode traces and adaptation logs.
    pub traces: bool,
    /// Applied to every generated scenario; a `seed` in here is ignored.
    pub overrides: Option<ScenarioOverrides>,
}

impl ExperimentConfig {
    pub fn new(n_seeds: usize) -> Self {
        Self {
            seeds: (1..=n_seeds as u64).collect(),
            policies: vec![Policy::Adaptive, Policy::Baseline],
            episode: EpisodeConfig::default(),
            out: None,
            timing: true,
            traces: false,
            overrides: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyMeans {
    pub policy: Policy,
    pub episodes: usize,
    pub cumulative_robustness_visibility: f64,
    pub cumulative_robustness_thrust: f64,
    pub until_opt_robustness_visibility: f64,
    pub until_opt_robustness_thrust: f64,
    pub pipeline_inspected: f64,
    pub mean_solve_ms: f64,
    /// Median over every solve of every episode.
    pub median_solve_ms: f64,
    pub event_median_solve_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub episodes: Vec<EpisodeMetrics>,
    pub means: Vec<PolicyMeans>,
}

impl ExperimentSummary {
    pub fn means_of(&self, p: Policy) -> Option<&PolicyMeans> {
        self.means.iter().find(|m| m.policy == p)
    }
}

#[derive(Serialize)]
struct SummaryRow {
    seed: u64,
    policy: Policy,
    cumulative_robustness_visibility: f64,
    cumulative_robustness_thrust: f64,
    until_opt_robustness_visibility: f64,
    until_opt_robustness_thrust: f64,
    pipeline_inspected: f64,
    weakenings: usize,
    strengthenings: usize,
    solve_count: usize,
    mean_solve_ms: Option<f64>,
    median_solve_ms: Option<f64>,
    event_median_solve_ms: Option<f64>,
}

#[derive(Serialize)]
struct MeansRow {
    policy: Policy,
    episodes: usize,
    cumulative_robustness_visibility: f64,
    cumulative_robustness_thrust: f64,
    until_opt_robustness_visibility: f64,
    until_opt_robustness_thrust: f64,
    pipeline_inspected: f64,
    mean_solve_ms: Option<f64>,
    median_solve_ms: Option<f64>,
    event_median_solve_ms: Option<f64>,
}

fn summary_row(m: &EpisodeMetrics, timing: bool) -> SummaryRow {
    let t = |v: f64| timing.then_some(v);
    SummaryRow {
        seed: m.seed,
        policy: m.policy,
        cumulative_robustness_visibility: m.cumulative_robustness_visibility,
        cumulative_robustness_thrust: m.cumulative_robustness_thrust,
        until_opt_robustness_visibility: m.until_opt_robustness_visibility,
        until_opt_robustness_thrust: m.until_opt_robustness_thrust,
        pipeline_inspected: m.pipeline_inspected,
        weakenings: m.weakenings,
        strengthenings: m.strengthenings,
        solve_count: m.solve_count,
        mean_solve_ms: t(m.mean_solve_ms),
        median_solve_ms: t(m.median_solve_ms),
        event_median_solve_ms: t(m.event_median_solve_ms),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, UuvError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes the trace and the per-feature adaptation logs of one episode. Without
/// `timing` the logs leave solve times blank.
pub fn write_episode_files(dir: &Path, ep: &Episode, timing: bool) -> Result<(), UuvError> {
    let (seed, policy) = (ep.metrics.seed, ep.metrics.policy);
    write_trace_csv(&ep.rows, create(dir, &format!("trace_{seed}_{policy}.csv"))?)?;
    for l in &ep.logs {
        let name = format!("log_{seed}_{policy}_{}.csv", l.feature.name());
        let mut records = l.records.clone();
        if !timing {
            records.iter_mut().for_each(|r| r.solve_ms = f64::NAN);
        }
        write_log_csv(&records, &l.params, create(dir, &name)?)?;
    }
    Ok(())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, UuvError> {
    if cfg.seeds.is_empty() {
        return Err(UuvError::Scenario("at least one seed is needed".into()));
    }
    let mut csv_out = match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Some(csv::Writer::from_writer(create(dir, "summary.csv")?))
        }
        None => None,
    };
    let mut episodes = Vec::new();
    let mut all_solves: Vec<(Policy, Vec<f64>, Vec<f64>)> = cfg.policies.iter().map(|p| (*p, Vec::new(), Vec::new())).collect();
    for &seed in &cfg.seeds {
        let mut sc = UuvScenario::generate(seed);
        if let Some(o) = &cfg.overrides {
            sc = sc.apply(ScenarioOverrides { seed: None, ..o.clone() });
            sc.validate()?;
        }
        for &policy in &cfg.policies {
            let ep = run_episode(&sc, policy, &cfg.episode)?;
            if let Some(w) = csv_out.as_mut() {
                w.serialize(summary_row(&ep.metrics, cfg.timing))?;
                w.flush()?;
            }
            if let (Some(dir), true) = (&cfg.out, cfg.traces) {
                write_episode_files(dir, &ep, cfg.timing)?;
            }
            let slot = all_solves.iter_mut().find(|s| s.0 == policy).expect("policy listed");
            slot.1.extend(ep.solves.iter().map(|s| s.solve_ms));
            slot.2.extend(ep.logs.iter().flat_map(|l| l.records.iter().map(|r| r.solve_ms)));
            episodes.push(ep.metrics);
        }
    }

    let means: Vec<PolicyMeans> = all_solves
        .iter()
        .map(|(policy, solves, events)| {
            let eps: Vec<&EpisodeMetrics> = episodes.iter().filter(|m| m.policy == *policy).collect();
            let n = eps.len() as f64;
            let avg = |f: fn(&EpisodeMetrics) -> f64| eps.iter().map(|m| f(m)).sum::<f64>() / n;
            PolicyMeans {
                policy: *policy,
                episodes: eps.len(),
                cumulative_robustness_visibility: avg(|m| m.cumulative_robustness_visibility),
                cumulative_robustness_thrust: avg(|m| m.cumulative_robustness_thrust),
                until_opt_robustness_visibility: avg(|m| m.until_opt_robustness_visibility),
                until_opt_robustness_thrust: avg(|m| m.until_opt_robustness_thrust),
                pipeline_inspected: avg(|m| m.pipeline_inspected),
                mean_solve_ms: if solves.is_empty() { 0.0 } else { solves.iter().sum::<f64>() / solves.len() as f64 },
                median_solve_ms: median(solves),
                event_median_solve_ms: median(events),
            }
        })
        .collect();

    if let Some(dir) = &cfg.out {
        let mut w = csv::Writer::from_writer(create(dir, "summary_means.csv")?);
        for m in &means {
            let t = |v: f64| cfg.timing.then_some(v);
            w.serialize(MeansRow {
                policy: m.policy,
                episodes: m.episodes,
                cumulative_robustness_visibility: m.cumulative_robustness_visibility,
                cumulative_robustness_thrust: m.cumulative_robustness_thrust,
                until_opt_robustness_visibility: m.until_opt_robustness_visibility,
                until_opt_robustness_thrust: m.until_opt_robustness_thrust,
                pipeline_inspected: m.pipeline_inspected,
                mean_solve_ms: t(m.mean_solve_ms),
                median_solve_ms: t(m.median_solve_ms),
                event_median_solve_ms: t(m.event_median_solve_ms),
            })?;
        }
        w.flush()?;
    }
    if let Some(mut w) = csv_out {
        w.flush()?;
        w.into_inner().map_err(|e| UuvError::Io(std::io::Error::other(e.to_string())))?.flush()?;
    }
    Ok(ExperimentSummary { episodes, means })
}
