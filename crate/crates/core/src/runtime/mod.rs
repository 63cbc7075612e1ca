//! Receding-horizon adaptation loop: event detection, degradation and
//! recovery solving, and re-planning between events.

mod log;
mod trigger;

use std::collections::{BTreeSet, VecDeque};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

pub use log::write_log_csv;
pub use trigger::{check_trigger, TriggerError, TriggerMode, MAX_TRIGGER_LEAVES};

use crate::env::{ActionSequence, TransitionSystem};
use crate::milp::{solve_adaptation, AdaptMode, AdaptRequest, Budget, MilpStatus, SolveResult};
use crate::pstl::{valuation_leq, RequirementSpace, Valuation};
use crate::stl::{robustness, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Degrade,
    Restore,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptationEvent {
    pub kind: EventKind,
    pub action: String,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("`{0}` is both a degradation and a restoration event")]
    Overlap(String),
    #[error("`{0}` is not an environment action of the model")]
    NotEnvAction(String),
    #[error("observation has {got} values, model has {expected} variables")]
    Arity { got: usize, expected: usize },
}

/// The partition of environment actions into `A_degrade` and `A_restore`.
#[derive(Debug, Clone, Default)]
pub struct EventClasses {
    degrade: BTreeSet<String>,
    restore: BTreeSet<String>,
}

impl EventClasses {
    pub fn new<I, J, S, T>(degrade: I, restore: J) -> Result<Self, RuntimeError>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        let degrade: BTreeSet<String> = degrade.into_iter().map(Into::into).collect();
        let restore: BTreeSet<String> = restore.into_iter().map(Into::into).collect();
        if let Some(a) = degrade.intersection(&restore).next() {
            return Err(RuntimeError::Overlap(a.clone()));
        }
        Ok(Self { degrade, restore })
    }

    /// Checks that every listed action exists in `model`.
    pub fn check_against(&self, model: &TransitionSystem) -> Result<(), RuntimeError> {
        for a in self.degrade.iter().chain(&self.restore) {
            if model.env_action(a).is_none() {
                return Err(RuntimeError::NotEnvAction(a.clone()));
            }
        }
        Ok(())
    }

    pub fn classify(&self, action: &str) -> Option<EventKind> {
        if self.degrade.contains(action) {
            Some(EventKind::Degrade)
        } else if self.restore.contains(action) {
            Some(EventKind::Restore)
        } else {
            None
        }
    }

    /// Takes the next adaptation event off `queue`: the oldest degradation if
    /// there is one, otherwise the oldest restoration. Actions of neither
    /// class stay in the queue.
    pub fn detect(&self, queue: &mut VecDeque<String>, time: f64) -> Option<AdaptationEvent> {
        for kind in [EventKind::Degrade, EventKind::Restore] {
            if let Some(i) = queue.iter().position(|a| self.classify(a) == Some(kind)) {
                let action = queue.remove(i).unwrap();
                return Some(AdaptationEvent { kind, action, time });
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LoopMode {
    Nominal,
    /// Since a degradation event: `ν_curr` may only weaken.
    Degraded,
    /// Since a restoration event: `ν_curr` may only strengthen.
    Recovering,
}

/// What a logged solve was for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordKind {
    Degrade,
    Restore,
    /// Re-planning under `ν_curr` failed and the loop weakened without a new event.
    Reweaken,
    /// Recovery re-attempted after an earlier restoration left `ν_curr` short of `ν_opt`.
    Retry,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdaptationRecord {
    pub time: f64,
    pub kind: RecordKind,
    /// Triggering environment action, empty for loop-initiated solves.
    pub event: String,
    pub status: MilpStatus,
    pub before: Valuation,
    pub after: Valuation,
    pub delta: f64,
    /// `ρ(φ_min)` on the predicted signal, NaN without a plan.
    pub robustness_min: f64,
    pub solve_ms: f64,
}

/// Per-cycle solver accounting, kept for every cycle that ran a solve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CycleSolve {
    pub time: f64,
    pub mode: AdaptMode,
    pub status: MilpStatus,
    pub nodes: usize,
    pub solve_ms: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LoopConfig {
    /// Node limit per adaptation solve; `None` for unlimited.
    pub max_nodes: Option<usize>,
    /// Wall-clock limit per solve in milliseconds.
    pub max_millis: Option<u64>,
    /// Re-plan under `ν_curr` every cycle between events.
    pub replan: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self { max_nodes: Some(20_000), max_millis: None, replan: true }
    }
}

impl LoopConfig {
    fn budget(&self) -> Budget {
        let mut b = Budget::unlimited();
        b.max_nodes = self.max_nodes;
        if let Some(ms) = self.max_millis {
            b.deadline = Budget::millis(ms).deadline;
        }
        b
    }
}

/// State of one adaptation loop over one requirement space.
#[derive(Debug, Clone)]
pub struct LoopState {
    pub space: RequirementSpace,
    pub model: TransitionSystem,
    pub classes: EventClasses,
    pub config: LoopConfig,
    pub mode: LoopMode,
    /// Observed history, one sample per cycle.
    pub buffer: Signal<f64>,
    pub pending: ActionSequence,
    pub log: Vec<AdaptationRecord>,
    pub solves: Vec<CycleSolve>,
}

impl LoopState {
    pub fn new(
        space: RequirementSpace,
        model: TransitionSystem,
        classes: EventClasses,
        config: LoopConfig,
        initial: &[f64],
        start_time: f64,
    ) -> Result<Self, RuntimeError> {
        classes.check_against(&model)?;
        let q = clamp_to_model(&model, initial)?;
        let buffer = Signal::new(model.dt, start_time, model.var_names(), vec![q]).expect("model variables are distinct");
        Ok(Self {
            space,
            model,
            classes,
            config,
            mode: LoopMode::Nominal,
            buffer,
            pending: ActionSequence::new(),
            log: Vec::new(),
            solves: Vec::new(),
        })
    }

    pub fn cycle_period(&self) -> f64 {
        self.model.dt
    }

    pub fn nu_curr(&self) -> &Valuation {
        self.space.nu_curr()
    }

    /// One control cycle. `observation` is the state after this cycle's
    /// environment actions `events` took effect; the events are also replayed
    /// at the start of the prediction. Returns the system action to execute.
    pub fn control_cycle(&mut self, observation: &[f64], events: &[String], time: f64) -> Result<String, RuntimeError> {
        let q = clamp_to_model(&self.model, observation)?;
        if time > self.buffer.end_time() + 1e-9 {
            self.buffer.push(q.clone()).expect("arity checked");
        }
        let known: Vec<String> = events.iter().filter(|e| self.model.env_action(e).is_some()).cloned().collect();
        let mut queue: VecDeque<String> = known.iter().cloned().collect();

        let mut handled = false;
        while let Some(ev) = self.classes.detect(&mut queue, time) {
            handled = true;
            let (mode, kind) = match ev.kind {
                EventKind::Degrade => (AdaptMode::Degrade, RecordKind::Degrade),
                EventKind::Restore => (AdaptMode::Recover, RecordKind::Restore),
            };
            self.mode = match ev.kind {
                EventKind::Degrade => LoopMode::Degraded,
                EventKind::Restore => LoopMode::Recovering,
            };
            let result = self.solve(&q, &known, mode, time);
            self.adopt(result, kind, &ev.action, time);
        }

        if !handled {
            let retry = self.mode == LoopMode::Recovering && !self.space.is_optimal();
            if retry {
                let result = self.solve(&q, &known, AdaptMode::Recover, time);
                let searched = result.as_ref().is_some_and(|r| r.valuation != *self.space.nu_curr());
                if searched {
                    self.adopt(result, RecordKind::Retry, "", time);
                } else if let Some(r) = result.filter(|r| !r.plan.is_empty()) {
                    self.pending = r.plan;
                } else {
                    self.replan(&q, &known, time);
                }
            } else {
                self.replan(&q, &known, time);
            }
        }
        if self.mode == LoopMode::Recovering && self.space.is_optimal() {
            self.mode = LoopMode::Nominal;
        }

        Ok(match self.pending.advance() {
            Some(step) => step.action,
            None => self.model.noop_name().to_string(),
        })
    }

    fn replan(&mut self, q: &[f64], events: &[String], time: f64) {
        if !self.config.replan {
            return;
        }
        match self.solve(q, events, AdaptMode::Replan, time) {
            Some(r) if !r.plan.is_empty() => self.pending = r.plan,
            _ if self.mode == LoopMode::Degraded && !self.space_is_minimal() => {
                // φ_curr became unreachable: weakening is still allowed here
                let result = self.solve(q, events, AdaptMode::Degrade, time);
                self.adopt(result, RecordKind::Reweaken, "", time);
            }
            // keep whatever is left of the previous plan
            _ => {}
        }
    }

    fn space_is_minimal(&self) -> bool {
        self.space.nu_curr() == self.space.nu_min()
    }

    fn solve(&mut self, q: &[f64], events: &[String], mode: AdaptMode, time: f64) -> Option<SolveResult> {
        let req = AdaptRequest {
            space: &self.space,
            model: &self.model,
            q0: q.to_vec(),
            events: events.to_vec(),
            mode,
            budget: self.config.budget(),
        };
        let started = Instant::now();
        let out = solve_adaptation(&req).ok();
        let solve_ms = started.elapsed().as_secs_f64() * 1e3;
        let (status, nodes) = match &out {
            Some(r) => (r.status, r.stats.nodes),
            None => (MilpStatus::Infeasible, 0),
        };
        self.solves.push(CycleSolve { time, mode, status, nodes, solve_ms });
        out
    }

    /// Adopts a degradation or recovery result, checking the episode-shape
    /// contract before touching `ν_curr`.
    fn adopt(&mut self, result: Option<SolveResult>, kind: RecordKind, event: &str, time: f64) {
        let before = self.space.nu_curr().clone();
        let solve_ms = self.solves.last().map_or(0.0, |s| s.solve_ms);
        let Some(r) = result.filter(|r| r.predicted.is_some()) else {
            if matches!(kind, RecordKind::Reweaken | RecordKind::Retry) {
                return;
            }
            self.log.push(AdaptationRecord {
                time,
                kind,
                event: event.to_string(),
                status: MilpStatus::Infeasible,
                after: before.clone(),
                before,
                delta: 0.0,
                robustness_min: f64::NAN,
                solve_ms,
            });
            return;
        };
        let pol = self.space.polarity();
        let allowed = match kind {
            RecordKind::Degrade | RecordKind::Reweaken => valuation_leq(&r.valuation, &before, pol).unwrap_or(false),
            RecordKind::Restore | RecordKind::Retry => valuation_leq(&before, &r.valuation, pol).unwrap_or(false),
        };
        let min_rho = self
            .space
            .phi_min()
            .ok()
            .and_then(|f| robustness(&f, r.predicted.as_ref().unwrap(), 0).ok())
            .map_or(f64::NAN, |v| v.value);
        let adopted = allowed && self.space.set_current(r.valuation.clone()).is_ok();
        if adopted {
            self.pending = r.plan;
        }
        self.log.push(AdaptationRecord {
            time,
            kind,
            event: event.to_string(),
            status: r.status,
            before,
            after: self.space.nu_curr().clone(),
            delta: if adopted { r.objective } else { 0.0 },
            robustness_min: min_rho,
            solve_ms,
        });
    }
}

/// Observations outside the model's box are clamped to it.
fn clamp_to_model(model: &TransitionSystem, q: &[f64]) -> Result<Vec<f64>, RuntimeError> {
    if q.len() != model.vars.len() {
        return Err(RuntimeError::Arity { got: q.len(), expected: model.vars.len() });
    }
    Ok(q.iter().zip(&model.vars).map(|(v, s)| v.clamp(s.lo, s.hi)).collect())
}
