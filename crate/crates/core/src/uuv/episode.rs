//! One mission under the adaptive or the fixed-rule policy, with its trace and metrics.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model::{build_uuv_model, thrust_space, visibility_space, DIVE_RATE};
use super::scenario::UuvScenario;
use super::world::World;
use super::UuvError;
use crate::env::{Restriction, TransitionSystem};
use crate::pstl::RequirementSpace;
use crate::runtime::{AdaptationRecord, CycleSolve, EventClasses, LoopConfig, LoopState, RecordKind};
use crate::stl::{robustness, Formula, Signal};

/// Depth the baseline descends on losing visibility, m.
pub const BASELINE_DIVE_DEPTH: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Adaptive,
    Baseline,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Adaptive => "adaptive",
            Policy::Baseline => "baseline",
        })
    }
}

impl FromStr for Policy {
    type Err = UuvError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adaptive" => Ok(Policy::Adaptive),
            "baseline" => Ok(Policy::Baseline),
            _ => Err(UuvError::Scenario(format!("unknown policy `{s}`"))),
        }
    }
}

/// The two adaptable features of the mission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Visibility,
    Thrust,
}

impl Feature {
    pub const ALL: [Feature; 2] = [Feature::Visibility, Feature::Thrust];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Visibility => "visibility",
            Feature::Thrust => "thrust",
        }
    }

    pub fn space(self) -> RequirementSpace {
        match self {
            Feature::Visibility => visibility_space(),
            Feature::Thrust => thrust_space(),
        }
    }

    fn roots(self) -> Vec<String> {
        match self {
            Feature::Visibility => vec!["visibility".into(), "distance_to_pipeline".into()],
            Feature::Thrust => vec!["thrust".into()],
        }
    }

    fn classes(self, thrusters: usize) -> EventClasses {
        let r = match self {
            Feature::Visibility => EventClasses::new(["visibility_drop"], ["visibility_improved"]),
            Feature::Thrust => EventClasses::new(
                (1..=thrusters).map(|i| format!("thruster_failure_{i}")),
                (1..=thrusters).map(|i| format!("thruster_repair_{i}")),
            ),
        };
        r.expect("event classes are disjoint")
    }
}

/// Node budget per adaptation in simulated missions. Node limits keep runs
/// reproducible; this one bounds the worst event solve to about a second.
pub const EPISODE_MAX_NODES: usize = 5_000;

#[derive(Debug, Clone, Copy)]
pub struct EpisodeConfig {
    pub loop_config: LoopConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { loop_config: LoopConfig { max_nodes: Some(EPISODE_MAX_NODES), ..LoopConfig::default() } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub policy: Policy,
    /// `∫ ρ(φ_min)` over the visibility degradation windows, each running
    /// from the degradation event until the environment undoes it.
    pub cumulative_robustness_visibility: f64,
    pub cumulative_robustness_thrust: f64,
    /// Same integral over windows that close once `φ_opt` holds on the trace.
    pub until_opt_robustness_visibility: f64,
    pub until_opt_robustness_thrust: f64,
    /// Metres of pipeline passed while in visual contact.
    pub pipeline_inspected: f64,
    pub weakenings: usize,
    pub strengthenings: usize,
    pub solve_count: usize,
    pub mean_solve_ms: f64,
    pub median_solve_ms: f64,
    /// Median over the degradation and recovery solves only.
    pub event_median_solve_ms: f64,
    pub max_solve_ms: f64,
}

impl EpisodeMetrics {
    pub fn cumulative_robustness(&self, f: Feature) -> f64 {
        match f {
            Feature::Visibility => self.cumulative_robustness_visibility,
            Feature::Thrust => self.cumulative_robustness_thrust,
        }
    }
}

/// One cycle of the trace: the post-event state at `time` and what was done.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRow {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub altitude: f64,
    pub distance_to_pipeline: f64,
    pub visibility: f64,
    pub thrust: f64,
    pub events: String,
    pub vertical_action: String,
    pub thruster_action: String,
    /// Current valuations after the cycle; absent for the baseline.
    pub tau: Option<f64>,
    pub p: Option<f64>,
    pub rho_min_visibility: f64,
    pub rho_min_thrust: f64,
    pub window_visibility: bool,
    pub window_thrust: bool,
    pub contact: bool,
    pub saturated: bool,
}

#[derive(Debug, Clone)]
pub struct FeatureLog {
    pub feature: Feature,
    pub params: Vec<String>,
    pub records: Vec<AdaptationRecord>,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub metrics: EpisodeMetrics,
    pub rows: Vec<CycleRow>,
    /// Observed states in the planning model's variables.
    pub trace: Signal<f64>,
    pub logs: Vec<FeatureLog>,
    pub solves: Vec<CycleSolve>,
}

struct FeatureLoop {
    feature: Feature,
    restriction: Restriction,
    state: LoopState,
}

/// Fixed design-time reactions; never looks at requirement valuations.
#[derive(Debug, Default)]
struct Baseline {
    dive_steps: usize,
    enables: usize,
}

impl Baseline {
    fn react(&mut self, events: &[String], dt: f64) {
        for e in events {
            if e == "visibility_drop" {
                self.dive_steps = (BASELINE_DIVE_DEPTH / (DIVE_RATE * dt)).round() as usize;
            } else if e.starts_with("thruster_failure_") {
                self.enables += 1;
            }
        }
    }

    fn actions(&mut self, world: &World) -> (String, String) {
        let vertical = if self.dive_steps > 0 {
            self.dive_steps -= 1;
            "dive".to_string()
        } else {
            "noop".to_string()
        };
        let mut thruster = "noop".to_string();
        if self.enables > 0 {
            match (0..world.on.len()).find(|&i| world.healthy[i] && !world.on[i]) {
                Some(i) => {
                    thruster = format!("enable_{}", i + 1);
                    self.enables -= 1;
                }
                None => self.enables = 0,
            }
        }
        (vertical, thruster)
    }
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Events of the schedule grouped by the cycle they fall in.
fn bucket_events(sc: &UuvScenario, cycles: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new(); cycles];
    for e in &sc.events {
        let k = ((e.time / sc.cycle_period).round() as usize).min(cycles - 1);
        out[k].push(e.action.clone());
    }
    out
}

pub fn run_episode(sc: &UuvScenario, policy: Policy, cfg: &EpisodeConfig) -> Result<Episode, UuvError> {
    sc.validate()?;
    let dt = sc.cycle_period;
    let cycles = (sc.duration / dt).round() as usize + 1;
    let schedule = bucket_events(sc, cycles);
    let full = build_uuv_model(dt, sc.thruster_count, sc.active_thrusters);
    let mut world = World::new(sc);

    let mut loops = Vec::new();
    if policy == Policy::Adaptive {
        let obs = world.model_state();
        for f in Feature::ALL {
            let restriction = full.restrict(&f.roots())?;
            let q = restriction.project(&full, &obs);
            let state = LoopState::new(f.space(), restriction.model.clone(), f.classes(sc.thruster_count), cfg.loop_config, &q, 0.0)?;
            loops.push(FeatureLoop { feature: f, restriction, state });
        }
    }
    let mut baseline = Baseline::default();

    let mut samples = Vec::with_capacity(cycles);
    let mut rows = Vec::with_capacity(cycles);
    let mut inspected = 0.0;
    for (k, events) in schedule.iter().enumerate() {
        let time = k as f64 * dt;
        for e in events {
            world.apply_event(e);
        }
        let obs = world.model_state();
        samples.push(obs.clone());

        let (vertical, thruster) = match policy {
            Policy::Adaptive => {
                let mut acts = Vec::new();
                for l in &mut loops {
                    let q = l.restriction.project(&full, &obs);
                    acts.push(l.state.control_cycle(&q, events, time)?);
                }
                (acts[0].clone(), acts[1].clone())
            }
            Policy::Baseline => {
                baseline.react(events, dt);
                baseline.actions(&world)
            }
        };
        let nu = |f: Feature, p: &str| loops.iter().find(|l| l.feature == f).and_then(|l| l.state.nu_curr().get(p));
        let proj = world.projection();
        let contact = world.in_contact();
        rows.push(CycleRow {
            time,
            x: world.position[0],
            y: world.position[1],
            z: world.position[2],
            altitude: world.altitude(),
            distance_to_pipeline: proj.distance,
            visibility: world.visibility,
            thrust: world.thrust(),
            events: events.join(";"),
            vertical_action: vertical.clone(),
            thruster_action: thruster.clone(),
            tau: nu(Feature::Visibility, "tau"),
            p: nu(Feature::Thrust, "p"),
            rho_min_visibility: f64::NAN,
            rho_min_thrust: f64::NAN,
            window_visibility: false,
            window_thrust: false,
            contact,
            saturated: false,
        });

        world.advance(&[vertical, thruster], dt);
        rows[k].saturated = world.saturated;
        let arc = world.projection().arc;
        if contact && arc > proj.arc {
            inspected += arc - proj.arc;
        }
    }

    let trace = Signal::new(dt, 0.0, full.var_names(), samples).expect("model variables are distinct");
    let cum_vis = score_windows(Feature::Visibility, WindowEnd::Restored, &trace, &schedule, &mut rows)?;
    let cum_thr = score_windows(Feature::Thrust, WindowEnd::Restored, &trace, &schedule, &mut rows)?;
    let opt_vis = score_windows(Feature::Visibility, WindowEnd::OptimalHolds, &trace, &schedule, &mut rows)?;
    let opt_thr = score_windows(Feature::Thrust, WindowEnd::OptimalHolds, &trace, &schedule, &mut rows)?;

    let mut logs = Vec::new();
    let mut solves = Vec::new();
    for l in loops {
        let params = l.state.space.params().iter().map(|p| p.name.clone()).collect();
        logs.push(FeatureLog { feature: l.feature, params, records: l.state.log });
        solves.extend(l.state.solves);
    }
    solves.sort_by(|a, b| a.time.total_cmp(&b.time));
    let times: Vec<f64> = solves.iter().map(|s| s.solve_ms).collect();
    let event_times: Vec<f64> = logs.iter().flat_map(|l| l.records.iter().map(|r| r.solve_ms)).collect();
    let count = |pred: fn(&AdaptationRecord) -> bool| logs.iter().flat_map(|l| &l.records).filter(|r| pred(r)).count();

    let metrics = EpisodeMetrics {
        seed: sc.seed,
        policy,
        cumulative_robustness_visibility: cum_vis,
        cumulative_robustness_thrust: cum_thr,
        until_opt_robustness_visibility: opt_vis,
        until_opt_robustness_thrust: opt_thr,
        pipeline_inspected: inspected,
        weakenings: count(|r| matches!(r.kind, RecordKind::Degrade | RecordKind::Reweaken) && r.after != r.before),
        strengthenings: count(|r| matches!(r.kind, RecordKind::Restore | RecordKind::Retry) && r.after != r.before),
        solve_count: times.len(),
        mean_solve_ms: if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 },
        median_solve_ms: median(&times),
        event_median_solve_ms: median(&event_times),
        max_solve_ms: times.iter().copied().fold(0.0, f64::max),
    };
    Ok(Episode { metrics, rows, trace, logs, solves })
}

/// Whether the environment currently holds a degradation of `f` that the
/// events so far have not undone.
#[derive(Default)]
struct Degradations {
    visibility: bool,
    failed: Vec<String>,
}

impl Degradations {
    fn update(&mut self, events: &[String]) {
        for e in events {
            if e == "visibility_drop" {
                self.visibility = true;
            } else if e == "visibility_improved" {
                self.visibility = false;
            } else if let Some(i) = e.strip_prefix("thruster_failure_") {
                if !self.failed.iter().any(|f| f == i) {
                    self.failed.push(i.to_string());
                }
            } else if let Some(i) = e.strip_prefix("thruster_repair_") {
                self.failed.retain(|f| f != i);
            }
        }
    }

    fn active(&self, f: Feature) -> bool {
        match f {
            Feature::Visibility => self.visibility,
            Feature::Thrust => !self.failed.is_empty(),
        }
    }
}

fn opens(f: Feature, events: &[String]) -> bool {
    events.iter().any(|e| match f {
        Feature::Visibility => e == "visibility_drop",
        Feature::Thrust => e.starts_with("thruster_failure_"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowEnd {
    /// Once the environment has undone every open degradation. Both policies
    /// are then scored over the same windows.
    Restored,
    /// At the first cycle where `φ_opt` holds on the trace.
    OptimalHolds,
}

/// Integrates `ρ(φ_min)` over the windows of `f`; a window opens at a
/// degradation event. Only [`WindowEnd::Restored`] windows are marked in `rows`.
fn score_windows(
    f: Feature,
    end: WindowEnd,
    trace: &Signal<f64>,
    schedule: &[Vec<String>],
    rows: &mut [CycleRow],
) -> Result<f64, UuvError> {
    let space = f.space();
    let phi_min: Formula<f64> = space.phi_min()?;
    let phi_opt: Formula<f64> = space.phi_opt()?;
    let dt = trace.sample_period();
    let mut env = Degradations::default();
    let mut open = false;
    let mut total = 0.0;
    for (k, events) in schedule.iter().enumerate() {
        env.update(events);
        let rho_min = robustness(&phi_min, trace, k)?.value;
        match f {
            Feature::Visibility => rows[k].rho_min_visibility = rho_min,
            Feature::Thrust => rows[k].rho_min_thrust = rho_min,
        }
        if opens(f, events) {
            open = true;
        }
        let closes = match end {
            WindowEnd::Restored => !env.active(f),
            WindowEnd::OptimalHolds => robustness(&phi_opt, trace, k)?.value >= 0.0,
        };
        if open && closes {
            open = false;
        }
        if open {
            total += rho_min * dt;
        }
        if open && end == WindowEnd::Restored {
            match f {
                Feature::Visibility => rows[k].window_visibility = true,
                Feature::Thrust => rows[k].window_thrust = true,
            }
        }
    }
    Ok(total)
}

pub fn write_trace_csv<W: Write>(rows: &[CycleRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Full planning model for a scenario, as the adaptive policy sees it.
pub fn scenario_model(sc: &UuvScenario) -> TransitionSystem {
    build_uuv_model(sc.cycle_period, sc.thruster_count, sc.active_thrusters)
}
