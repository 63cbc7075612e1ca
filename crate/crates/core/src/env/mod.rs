//! Declarative linear transition-system models that generate predictive signals.

mod model;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stl::Signal;

pub use model::{Action, ActionEntry, Effect, EffectKind, Expr, ModelFile, StateVar, TransitionSystem};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("model refers to undeclared variable `{0}`")]
    UnknownVariable(String),
    #[error("bad expression in model: {0}")]
    Expr(String),
    #[error("undeclared system action `{0}`")]
    UnknownSysAction(String),
    #[error("undeclared environment action `{0}`")]
    UnknownEnvAction(String),
    #[error("state has {got} components, model has {expected} variables")]
    Arity { got: usize, expected: usize },
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
}

/// One step of a plan: environment events applied first, then one system action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<String>,
    pub action: String,
}

/// Ordered system actions, one per step, with injected environment events.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSequence {
    pub steps: Vec<PlanStep>,
}

impl ActionSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_actions<I: IntoIterator<Item = S>, S: Into<String>>(actions: I) -> Self {
        Self { steps: actions.into_iter().map(|a| PlanStep { events: Vec::new(), action: a.into() }).collect() }
    }

    pub fn push(&mut self, events: Vec<String>, action: impl Into<String>) {
        self.steps.push(PlanStep { events, action: action.into() });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn concat(&self, other: &ActionSequence) -> Self {
        let mut steps = self.steps.clone();
        steps.extend(other.steps.iter().cloned());
        Self { steps }
    }

    /// Drops the first step (receding horizon).
    pub fn advance(&mut self) -> Option<PlanStep> {
        (!self.steps.is_empty()).then(|| self.steps.remove(0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    /// Indices of variables that hit a bound and were clamped.
    pub clamped: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub signal: Signal<f64>,
    /// Per step, the variables clamped during that step.
    pub clamped: Vec<Vec<usize>>,
}

impl Rollout {
    pub fn saturated(&self) -> bool {
        self.clamped.iter().any(|c| !c.is_empty())
    }
}

fn apply_effects(a: &Action, prev: &[f64], out: &mut [f64]) {
    for e in &a.effects {
        let v = e.expr.eval(prev, prev);
        match e.kind {
            EffectKind::Assign => out[e.var] = v,
            EffectKind::Add => out[e.var] += v,
        }
    }
}

impl TransitionSystem {
    fn clamp(&self, q: &mut [f64], clamped: &mut Vec<usize>) {
        for (i, v) in self.vars.iter().enumerate() {
            if q[i] < v.lo || q[i] > v.hi {
                q[i] = q[i].clamp(v.lo, v.hi);
                if !clamped.contains(&i) {
                    clamped.push(i);
                }
            }
        }
    }

    /// State after applying `events` to `q`, each reading the state left by the previous one.
    pub fn apply_events(&self, q: &[f64], events: &[String]) -> Result<(Vec<f64>, Vec<usize>), EnvError> {
        if q.len() != self.vars.len() {
            return Err(EnvError::Arity { got: q.len(), expected: self.vars.len() });
        }
        let mut cur = q.to_vec();
        let mut clamped = Vec::new();
        for ev in events {
            let a = &self.env_actions[self.env_action(ev).ok_or_else(|| EnvError::UnknownEnvAction(ev.clone()))?];
            let prev = cur.clone();
            apply_effects(a, &prev, &mut cur);
            self.clamp(&mut cur, &mut clamped);
        }
        Ok((cur, clamped))
    }

    /// `q′ = δ(q, a)` with pending environment events applied first.
    pub fn step(&self, q: &[f64], events: &[String], action: &str) -> Result<StepOutcome, EnvError> {
        let ai = self.sys_action(action).ok_or_else(|| EnvError::UnknownSysAction(action.to_string()))?;
        let (q, mut clamped) = self.apply_events(q, events)?;
        let a = &self.sys_actions[ai];
        let mut next = q.clone();
        for i in 0..self.vars.len() {
            let mut base = match &self.updates[i] {
                Some(u) => u.eval(&q, &next),
                None => q[i],
            };
            let mut add = 0.0;
            for e in a.effect_on(i) {
                let v = e.expr.eval(&q, &q);
                match e.kind {
                    EffectKind::Assign => base = v,
                    EffectKind::Add => add += v,
                }
            }
            next[i] = (base + add).clamp(self.vars[i].lo, self.vars[i].hi);
            if next[i] != base + add && !clamped.contains(&i) {
                clamped.push(i);
            }
        }
        clamped.sort_unstable();
        Ok(StepOutcome { state: next, clamped })
    }

    /// States `q0, q1, …, qn` as a signal starting at `start_time`.
    pub fn rollout_from(&self, q0: &[f64], actions: &ActionSequence, start_time: f64) -> Result<Rollout, EnvError> {
        if q0.len() != self.vars.len() {
            return Err(EnvError::Arity { got: q0.len(), expected: self.vars.len() });
        }
        let mut samples = vec![q0.to_vec()];
        let mut clamped = Vec::new();
        for s in &actions.steps {
            let out = self.step(samples.last().unwrap(), &s.events, &s.action)?;
            samples.push(out.state);
            clamped.push(out.clamped);
        }
        let signal = Signal::new(self.dt, start_time, self.var_names(), samples).expect("model variables are distinct");
        Ok(Rollout { signal, clamped })
    }

    pub fn rollout(&self, q0: &[f64], actions: &ActionSequence) -> Result<Rollout, EnvError> {
        self.rollout_from(q0, actions, 0.0)
    }

    /// Variables that can influence any of `roots`, in declaration order.
    pub fn cone_of_influence(&self, roots: &[String]) -> Result<Vec<usize>, EnvError> {
        let deps = self.dependencies();
        let mut keep = vec![false; self.vars.len()];
        let mut stack = Vec::new();
        for r in roots {
            let i = self.var_index(r).ok_or_else(|| EnvError::UnknownVariable(r.clone()))?;
            stack.push(i);
        }
        while let Some(i) = stack.pop() {
            if !keep[i] {
                keep[i] = true;
                stack.extend(deps[i].iter().copied());
            }
        }
        Ok((0..self.vars.len()).filter(|&i| keep[i]).collect())
    }

    /// Sub-model over the cone of influence of `roots`, with system actions that
    /// act identically on it merged into one class.
    pub fn restrict(&self, roots: &[String]) -> Result<Restriction, EnvError> {
        let cone = self.cone_of_influence(roots)?;
        let names: Vec<String> = cone.iter().map(|&i| self.vars[i].name.clone()).collect();
        let on_cone = |a: &Action| -> Vec<Effect> {
            a.effects.iter().filter(|e| cone.contains(&e.var)).cloned().collect()
        };
        let mut classes: Vec<ActionClass> = Vec::new();
        let mut class_effects: Vec<Vec<Effect>> = Vec::new();
        for a in &self.sys_actions {
            let eff = on_cone(a);
            match class_effects.iter().position(|e| *e == eff) {
                Some(k) => classes[k].members.push(a.name.clone()),
                None => {
                    class_effects.push(eff);
                    classes.push(ActionClass { representative: a.name.clone(), members: vec![a.name.clone()] });
                }
            }
        }
        let noop = self.noop_name().to_string();
        for c in &mut classes {
            if c.members.contains(&noop) {
                c.representative = noop.clone();
            }
        }
        let src = self.to_file();
        let keep_entry = |e: &ActionEntry| ActionEntry {
            name: e.name.clone(),
            effects: e.effects.iter().filter(|(v, _)| names.contains(v)).map(|(k, v)| (k.clone(), v.clone())).collect(),
        };
        let file = ModelFile {
            dt: src.dt,
            vars: src.vars.iter().filter(|v| names.contains(&v.name)).cloned().collect(),
            sys_actions: src
                .sys_actions
                .iter()
                .filter(|a| classes.iter().any(|c| c.representative == a.name))
                .map(keep_entry)
                .collect(),
            env_actions: src.env_actions.iter().map(keep_entry).collect(),
            updates: src.updates.iter().filter(|(v, _)| names.contains(v)).map(|(k, v)| (k.clone(), v.clone())).collect(),
            noop: src.noop.clone(),
        };
        Ok(Restriction { model: TransitionSystem::from_file(file)?, classes, vars: names })
    }
}

/// System actions indistinguishable on a sub-model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionClass {
    pub representative: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Restriction {
    pub model: TransitionSystem,
    pub classes: Vec<ActionClass>,
    /// Names of the kept variables, in declaration order.
    pub vars: Vec<String>,
}

impl Restriction {
    pub fn class_of(&self, action: &str) -> Option<&ActionClass> {
        self.classes.iter().find(|c| c.members.iter().any(|m| m == action))
    }

    /// Projects a full state onto the kept variables.
    pub fn project(&self, full: &TransitionSystem, q: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|n| q[full.var_index(n).expect("restricted from this model")]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn velocity_model() -> TransitionSystem {
        TransitionSystem::from_json_str(
            r#"{
            "dt": 1.0,
            "vars": [
                {"name": "vx", "lo": -10, "hi": 10, "init": 1},
                {"name": "vy", "lo": -10, "hi": 10, "init": 0},
                {"name": "vz", "lo": -10, "hi": 10, "init": 2}
            ],
            "sys_actions": [
                {"name": "noop"},
                {"name": "accelerate", "effects": {"vx": "+= 0.5", "vz": "+= -1"}}
            ],
            "env_actions": [{"name": "stall", "effects": {"vx": "= 0"}}]
        }"#,
        )
        .unwrap()
    }

    fn thruster_model() -> TransitionSystem {
        TransitionSystem::from_json_str(
            r#"{
            "dt": 0.5,
            "vars": [
                {"name": "on1", "lo": 0, "hi": 1, "init": 1},
                {"name": "on2", "lo": 0, "hi": 1, "init": 1},
                {"name": "on3", "lo": 0, "hi": 1, "init": 0},
                {"name": "on4", "lo": 0, "hi": 1, "init": 0},
                {"name": "thrust", "lo": 0, "hi": 120, "init": 60},
                {"name": "depth", "lo": 0, "hi": 50, "init": 10}
            ],
            "sys_actions": [
                {"name": "noop"},
                {"name": "enable3", "effects": {"on3": "= 1"}},
                {"name": "disable1", "effects": {"on1": "= 0"}},
                {"name": "dive", "effects": {"depth": "+= 1"}},
                {"name": "rise", "effects": {"depth": "+= -1"}}
            ],
            "env_actions": [{"name": "fail2", "effects": {"on2": "= 0"}}],
            "updates": {"thrust": "30*on1' + 30*on2' + 30*on3' + 30*on4'"}
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn additive_velocity_update() {
        let m = velocity_model();
        let out = m.step(&[1.0, 0.0, 2.0], &[], "accelerate").unwrap();
        assert_eq!(out.state, vec![1.5, 0.0, 1.0]);
        assert!(out.clamped.is_empty());
        assert_eq!(m.step(&[1.0, 0.0, 2.0], &[], "noop").unwrap().state, vec![1.0, 0.0, 2.0]);
    }

    #[test]
    fn events_apply_before_the_action() {
        let m = velocity_model();
        let out = m.step(&[3.0, 0.0, 0.0], &["stall".into()], "accelerate").unwrap();
        assert_eq!(out.state[0], 0.5);
    }

    #[test]
    fn thrust_is_sum_of_active_thrusters() {
        let m = thruster_model();
        let q = m.initial_state();
        assert_eq!(m.step(&q, &[], "noop").unwrap().state[4], 60.0);
        assert_eq!(m.step(&q, &[], "enable3").unwrap().state[4], 90.0);
        assert_eq!(m.step(&q, &["fail2".into()], "noop").unwrap().state[4], 30.0);
    }

    #[test]
    fn rollout_shapes_and_clamping() {
        let m = velocity_model();
        let r = m.rollout(&[0.0, 0.0, 0.0], &ActionSequence::new()).unwrap();
        assert_eq!(r.signal.len(), 1);
        let seq = ActionSequence::from_actions(vec!["accelerate"; 25]);
        let r = m.rollout(&[0.0, 0.0, 0.0], &seq).unwrap();
        assert_eq!(r.signal.len(), 26);
        assert_eq!(r.signal.value(0, 4), 2.0);
        assert_eq!(r.signal.value(2, 25), -10.0);
        assert!(r.saturated());
    }

    #[test]
    fn rejects_malformed_models() {
        let bad_update = r#"{"dt": 1, "vars": [{"name": "a", "lo": 0, "hi": 1, "init": 0}],
            "sys_actions": [{"name": "noop"}], "updates": {"a": "a' + 1"}}"#;
        assert!(TransitionSystem::from_json_str(bad_update).is_err());
        let overlap = r#"{"dt": 1, "vars": [{"name": "a", "lo": 0, "hi": 1, "init": 0}],
            "sys_actions": [{"name": "noop"}], "env_actions": [{"name": "noop"}]}"#;
        assert!(TransitionSystem::from_json_str(overlap).is_err());
        let unbounded = r#"{"dt": 1, "vars": [{"name": "a", "lo": 0, "hi": 1e400, "init": 0}],
            "sys_actions": [{"name": "noop"}]}"#;
        assert!(TransitionSystem::from_json_str(unbounded).is_err());
        let no_noop = r#"{"dt": 1, "vars": [{"name": "a", "lo": 0, "hi": 1, "init": 0}],
            "sys_actions": [{"name": "go"}]}"#;
        assert!(TransitionSystem::from_json_str(no_noop).is_err());
        let m = velocity_model();
        assert!(matches!(m.step(&[0.0; 3], &[], "fly"), Err(EnvError::UnknownSysAction(_))));
    }

    #[test]
    fn restriction_merges_irrelevant_actions() {
        let m = thruster_model();
        let r = m.restrict(&["thrust".to_string()]).unwrap();
        assert_eq!(r.vars, vec!["on1", "on2", "on3", "on4", "thrust"]);
        let noop = r.class_of("dive").unwrap();
        assert_eq!(noop.representative, "noop");
        assert_eq!(noop.members, vec!["noop", "dive", "rise"]);
        assert_eq!(r.model.sys_actions.len(), 3);
        let full = m.rollout(&m.initial_state(), &ActionSequence::from_actions(["enable3", "dive"])).unwrap();
        let small = r
            .model
            .rollout(&r.project(&m, &m.initial_state()), &ActionSequence::from_actions(["enable3", "noop"]))
            .unwrap();
        assert_eq!(full.signal.value(4, 2), small.signal.value(4, 2));
    }
}
