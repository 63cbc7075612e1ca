use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::stl::{parse_term, Term};

/// Affine expression over the previous state (`prev`) and already-updated
/// entries of the next state (`next`), by variable index.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub prev: Vec<(usize, f64)>,
    pub next: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Self { prev: Vec::new(), next: Vec::new(), constant: c }
    }

    pub fn eval(&self, prev: &[f64], next: &[f64]) -> f64 {
        let mut acc = self.constant;
        for &(i, c) in &self.prev {
            acc += c * prev[i];
        }
        for &(i, c) in &self.next {
            acc += c * next[i];
        }
        acc
    }

    /// True when the expression reads nothing but constants.
    pub fn is_constant(&self) -> bool {
        self.prev.is_empty() && self.next.is_empty()
    }

    fn reads(&self) -> impl Iterator<Item = usize> + '_ {
        self.prev.iter().chain(&self.next).map(|&(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Assign,
    Add,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub var: usize,
    pub kind: EffectKind,
    /// Reads the previous state only.
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub name: String,
    pub effects: Vec<Effect>,
}

impl Action {
    pub fn effect_on(&self, var: usize) -> impl Iterator<Item = &Effect> {
        self.effects.iter().filter(move |e| e.var == var)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVar {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub init: f64,
}

/// Deterministic linear environment model.
///
/// A step first applies the pending environment events to the state, then the
/// system action: each variable, in declaration order, takes the action's
/// assignment if it has one and otherwise its update rule (identity when none),
/// plus any additive effects. Results are clamped to the declared bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSystem {
    pub vars: Vec<StateVar>,
    pub sys_actions: Vec<Action>,
    pub env_actions: Vec<Action>,
    pub updates: Vec<Option<Expr>>,
    pub dt: f64,
    pub noop: usize,
    source: ModelFile,
}

impl TransitionSystem {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn var_names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.name.clone()).collect()
    }

    pub fn sys_action(&self, name: &str) -> Option<usize> {
        self.sys_actions.iter().position(|a| a.name == name)
    }

    pub fn env_action(&self, name: &str) -> Option<usize> {
        self.env_actions.iter().position(|a| a.name == name)
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.vars.iter().map(|v| v.init).collect()
    }

    pub fn noop_name(&self) -> &str {
        &self.sys_actions[self.noop].name
    }

    /// The declarative form this model was built from.
    pub fn to_file(&self) -> &ModelFile {
        &self.source
    }

    pub fn from_file(file: ModelFile) -> Result<Self, EnvError> {
        compile(file)
    }

    pub fn from_json_str(text: &str) -> Result<Self, EnvError> {
        compile(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, EnvError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Direct dependencies of each variable: what its update rule and the
    /// effects targeting it read.
    pub fn dependencies(&self) -> Vec<Vec<usize>> {
        let mut deps: Vec<Vec<usize>> = vec![Vec::new(); self.vars.len()];
        for (i, u) in self.updates.iter().enumerate() {
            if let Some(u) = u {
                deps[i].extend(u.reads());
            }
        }
        for a in self.sys_actions.iter().chain(&self.env_actions) {
            for e in &a.effects {
                deps[e.var].extend(e.expr.reads());
            }
        }
        for d in &mut deps {
            d.sort_unstable();
            d.dedup();
        }
        deps
    }
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub dt: f64,
    pub vars: Vec<StateVar>,
    pub sys_actions: Vec<ActionEntry>,
    #[serde(default)]
    pub env_actions: Vec<ActionEntry>,
    /// Variable name to affine expression; primed names (`x'`) read the next state.
    #[serde(default)]
    pub updates: BTreeMap<String, String>,
    #[serde(default = "default_noop")]
    pub noop: String,
}

fn default_noop() -> String {
    "noop".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub name: String,
    /// Variable name to `"= expr"` or `"+= expr"`.
    #[serde(default)]
    pub effects: BTreeMap<String, String>,
}

fn compile(file: ModelFile) -> Result<TransitionSystem, EnvError> {
    if !(file.dt > 0.0) || !file.dt.is_finite() {
        return Err(EnvError::Invalid(format!("dt must be positive, got {}", file.dt)));
    }
    let vars = file.vars.clone();
    for (i, v) in vars.iter().enumerate() {
        if vars[..i].iter().any(|w| w.name == v.name) {
            return Err(EnvError::Invalid(format!("duplicate variable `{}`", v.name)));
        }
        if v.name.ends_with('\'') {
            return Err(EnvError::Invalid(format!("variable name `{}` may not end in a prime", v.name)));
        }
        if !v.lo.is_finite() || !v.hi.is_finite() || v.lo > v.hi {
            return Err(EnvError::Invalid(format!("variable `{}` needs finite bounds lo <= hi", v.name)));
        }
        if v.init < v.lo || v.init > v.hi {
            return Err(EnvError::Invalid(format!("initial value of `{}` outside its bounds", v.name)));
        }
    }
    let index = |name: &str| vars.iter().position(|v| v.name == name);
    let lower = |term: &Term<f64>, owner: Option<usize>, what: &str| -> Result<Expr, EnvError> {
        let mut e = Expr::constant(term.constant);
        for (name, c) in &term.coefficients {
            if let Some(base) = name.strip_suffix('\'') {
                let j = index(base).ok_or_else(|| EnvError::UnknownVariable(base.to_string()))?;
                match owner {
                    Some(i) if j < i => e.next.push((j, *c)),
                    Some(_) => {
                        return Err(EnvError::Invalid(format!(
                            "{what}: `{name}` must name a variable declared earlier"
                        )))
                    }
                    None => return Err(EnvError::Invalid(format!("{what}: effects cannot read the next state"))),
                }
            } else {
                let j = index(name).ok_or_else(|| EnvError::UnknownVariable(name.clone()))?;
                e.prev.push((j, *c));
            }
        }
        Ok(e)
    };
    let actions = |entries: &[ActionEntry]| -> Result<Vec<Action>, EnvError> {
        let mut out = Vec::new();
        for a in entries {
            let mut effects = Vec::new();
            for (var, text) in &a.effects {
                let vi = index(var).ok_or_else(|| EnvError::UnknownVariable(var.clone()))?;
                let text = text.trim();
                let (kind, body) = if let Some(rest) = text.strip_prefix("+=") {
                    (EffectKind::Add, rest)
                } else if let Some(rest) = text.strip_prefix('=') {
                    (EffectKind::Assign, rest)
                } else {
                    return Err(EnvError::Invalid(format!(
                        "effect of `{}` on `{var}` must start with `=` or `+=`",
                        a.name
                    )));
                };
                let term = parse_term(body).map_err(|e| EnvError::Expr(format!("action `{}`, `{var}`: {e}", a.name)))?;
                effects.push(Effect { var: vi, kind, expr: lower(&term, None, &a.name)? });
            }
            out.push(Action { name: a.name.clone(), effects });
        }
        Ok(out)
    };
    let sys_actions = actions(&file.sys_actions)?;
    let env_actions = actions(&file.env_actions)?;
    let all: Vec<&str> = sys_actions.iter().chain(&env_actions).map(|a| a.name.as_str()).collect();
    for (i, n) in all.iter().enumerate() {
        if all[..i].contains(n) {
            return Err(EnvError::Invalid(format!("action `{n}` declared twice (system and environment actions must be disjoint)")));
        }
    }
    let noop = sys_actions
        .iter()
        .position(|a| a.name == file.noop)
        .ok_or_else(|| EnvError::Invalid(format!("no system action named `{}`", file.noop)))?;
    let mut updates = vec![None; vars.len()];
    for (var, text) in &file.updates {
        let vi = index(var).ok_or_else(|| EnvError::UnknownVariable(var.clone()))?;
        let term = parse_term(text).map_err(|e| EnvError::Expr(format!("update of `{var}`: {e}")))?;
        updates[vi] = Some(lower(&term, Some(vi), &format!("update of `{var}`"))?);
    }
    Ok(TransitionSystem { vars, sys_actions, env_actions, updates, dt: file.dt, noop, source: file })
}
