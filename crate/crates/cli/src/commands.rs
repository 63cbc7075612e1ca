use std::fs::File;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use reqadapt::env::TransitionSystem;
use reqadapt::milp::{solve_adaptation, AdaptRequest, Budget};
use reqadapt::pstl::RequirementSpace;
use reqadapt::runtime::LoopConfig;
use reqadapt::stl::{parse_stl, robustness, Formula};
use reqadapt::uuv::episode::EPISODE_MAX_NODES;
use reqadapt::uuv::experiment::PolicyMeans;
use reqadapt::uuv::{run_experiment, EpisodeConfig, ExperimentConfig, ScenarioOverrides};
use reqadapt::Signal;

use crate::args::{BudgetArgs, ExperimentArgs, MonitorArgs, SimOptions, SimulateArgs, SolveArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

const SCHEMA_VERSION: u32 = 1;

/// What a command prints: a text block and the same content as JSON.
pub struct Report {
    pub code: i32,
    pub text: String,
    pub json: Value,
}

fn envelope(command: &str, mut body: Value) -> Value {
    let obj = body.as_object_mut().expect("reports are objects");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    body
}

fn read_trace(path: &Path) -> Result<Signal> {
    let f = File::open(path).with_context(|| format!("cannot open trace {}", path.display()))?;
    Signal::read_csv(f).with_context(|| format!("cannot read trace {}", path.display()))
}

pub fn monitor(a: &MonitorArgs) -> Result<Report> {
    let sig = read_trace(&a.trace)?;
    let f: Formula<f64> = parse_stl(&a.formula).with_context(|| format!("cannot parse formula `{}`", a.formula))?;
    let t = sig.start_time() + a.time;
    let Some(index) = sig.index_at(t) else {
        bail!("time {} is not a sample instant of the trace", a.time);
    };
    let r = robustness(&f, &sig, index)?;
    let (verdict, code) = match (r.defined, r.value >= 0.0) {
        (false, _) => ("UNDEFINED", EXIT_ERROR),
        (true, true) => ("SAT", EXIT_OK),
        (true, false) => ("UNSAT", EXIT_NEGATIVE),
    };
    let text = if r.defined {
        format!("robustness {}\n{verdict}", r.value)
    } else {
        format!("robustness undefined: the trace ends inside a window of the formula (partial value {})\n{verdict}", r.value)
    };
    let body = json!({
        "formula": f.to_string(),
        "time": a.time,
        "robustness": r.defined.then_some(r.value),
        "partial_robustness": r.value,
        "defined": r.defined,
        "verdict": verdict,
    });
    Ok(Report { code, text, json: envelope("monitor", body) })
}

fn solve_budget(b: &BudgetArgs) -> Budget {
    Budget { deadline: b.budget_ms.map(|ms| Instant::now() + Duration::from_millis(ms)), max_nodes: b.max_nodes }
}

pub fn solve(a: &SolveArgs) -> Result<Report> {
    let space = RequirementSpace::from_path(&a.space).with_context(|| format!("cannot load requirement space {}", a.space.display()))?;
    let model = TransitionSystem::from_path(&a.model).with_context(|| format!("cannot load model {}", a.model.display()))?;
    let trace = read_trace(&a.trace)?;
    for e in &a.events {
        if model.env_action(e).is_none() {
            bail!("model has no environment action `{e}`");
        }
    }
    let req = AdaptRequest::from_observed(&space, &model, &trace, a.events.clone(), a.mode.into(), solve_budget(&a.budget))?;
    let res = solve_adaptation(&req)?;

    let status = serde_json::to_value(res.status)?;
    let mut body = serde_json::to_value(&res)?;
    body["found"] = json!(res.predicted.is_some());
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        if let Some(p) = &res.milp {
            std::fs::write(dir.join("problem.lp"), p.to_lp_string())?;
        }
        let report = envelope("solve", body.clone());
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }

    let mut text = format!("status {}\n", status.as_str().unwrap_or_default());
    if res.predicted.is_some() {
        text += &format!("valuation {}\nobjective {}\nrobustness {}\nplan", res.valuation, res.objective, res.robustness);
        for s in &res.plan.steps {
            text += &format!(" {}", s.action);
        }
    } else {
        text += &format!("no feasible adaptation; valuation stays {}", res.valuation);
    }
    let code = if res.predicted.is_some() { EXIT_OK } else { EXIT_NEGATIVE };
    Ok(Report { code, text, json: envelope("solve", body) })
}

fn experiment_config(seeds: Vec<u64>, o: &SimOptions, traces: bool, overrides: Option<ScenarioOverrides>) -> ExperimentConfig {
    let loop_config = LoopConfig {
        max_nodes: Some(o.budget.max_nodes.unwrap_or(EPISODE_MAX_NODES)),
        max_millis: o.budget.budget_ms,
        ..LoopConfig::default()
    };
    ExperimentConfig {
        seeds,
        policies: o.policy.policies(),
        episode: EpisodeConfig { loop_config },
        out: o.out.clone(),
        timing: !o.no_timing,
        traces,
        overrides,
    }
}

fn load_overrides(o: &SimOptions) -> Result<Option<ScenarioOverrides>> {
    o.scenario
        .as_ref()
        .map(|p| ScenarioOverrides::from_path(p).with_context(|| format!("cannot load scenario {}", p.display())))
        .transpose()
}

fn means_line(m: &PolicyMeans) -> String {
    format!(
        "{}: {} episodes, cumulative robustness visibility {:.2} thrust {:.2}, inspected {:.2} m, median solve {:.2} ms",
        m.policy, m.episodes, m.cumulative_robustness_visibility, m.cumulative_robustness_thrust, m.pipeline_inspected, m.median_solve_ms
    )
}

fn run(cfg: &ExperimentConfig, command: &str, verbose: u8) -> Result<Report> {
    let summary = run_experiment(cfg)?;
    let mut lines = Vec::new();
    for m in &summary.episodes {
        if verbose > 0 {
            eprintln!("seed {} {}: {} weakenings, {} strengthenings", m.seed, m.policy, m.weakenings, m.strengthenings);
        }
        lines.push(format!(
            "seed {} {}: visibility {:.2} thrust {:.2} inspected {:.2} m weakenings {} strengthenings {}",
            m.seed, m.policy, m.cumulative_robustness_visibility, m.cumulative_robustness_thrust, m.pipeline_inspected, m.weakenings, m.strengthenings
        ));
    }
    lines.extend(summary.means.iter().map(means_line));
    let mut episodes = serde_json::to_value(&summary.episodes)?;
    let mut means = serde_json::to_value(&summary.means)?;
    if !cfg.timing {
        for v in episodes.as_array_mut().into_iter().flatten().chain(means.as_array_mut().into_iter().flatten()) {
            for k in ["mean_solve_ms", "median_solve_ms", "event_median_solve_ms", "max_solve_ms"] {
                if let Some(o) = v.as_object_mut() {
                    o.remove(k);
                }
            }
        }
    }
    let body = json!({ "episodes": episodes, "means": means, "out": cfg.out });
    Ok(Report { code: EXIT_OK, text: lines.join("\n"), json: envelope(command, body) })
}

pub fn simulate(a: &SimulateArgs, verbose: u8) -> Result<Report> {
    let overrides = load_overrides(&a.opts)?;
    let seed = overrides.as_ref().and_then(|o| o.seed).unwrap_or(a.seed);
    run(&experiment_config(vec![seed], &a.opts, true, overrides), "simulate", verbose)
}

pub fn experiment(a: &ExperimentArgs, verbose: u8) -> Result<Report> {
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let overrides = load_overrides(&a.opts)?;
    let seeds = (1..=a.seeds as u64).collect();
    run(&experiment_config(seeds, &a.opts, a.traces, overrides), "experiment", verbose)
}
