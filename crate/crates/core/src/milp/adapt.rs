//! Requirement adaptation as MILP: weaken as little as possible after a
//! degradation event, strengthen as far as possible after a restoration event,
//! or re-plan actions under the current requirement.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use super::bnb::{branch_and_bound, branch_and_bound_from, BnbOptions, Budget, MilpSolution, MilpStatus};
use super::encode::{Bounded, EncodeError, EncodeStats, Encoder, ParamValue, Side, SignalVars};
use super::expr::{LinExpr, VarId};
use super::problem::{Definition, MilpProblem, ObjectiveSense, Sense};
use crate::env::{ActionSequence, EffectKind, EnvError, Expr, TransitionSystem};
use crate::pstl::{Direction, ParamKind, PstlError, PstlFormula, RequirementSpace, Valuation};
use crate::stl::{robustness, EvalError, Signal};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Requirement(#[from] PstlError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("observed signal lacks model variable `{0}`")]
    MissingObservation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptMode {
    /// Weaken within `[ν_min, ν_curr]`, minimizing the degree of weakening.
    Degrade,
    /// Strengthen within `[ν_curr, ν_opt]`, maximizing the degree of strengthening.
    Recover,
    /// Keep `ν_curr`; maximize its robustness.
    Replan,
}

/// One adaptation problem instance.
#[derive(Debug, Clone)]
pub struct AdaptRequest<'a> {
    pub space: &'a RequirementSpace,
    pub model: &'a TransitionSystem,
    /// Current state, in model variable order.
    pub q0: Vec<f64>,
    /// Environment events applied at the start of the first predicted step.
    pub events: Vec<String>,
    pub mode: AdaptMode,
    pub budget: Budget,
}

impl<'a> AdaptRequest<'a> {
    /// Takes `q0` from the last sample of `observed`, matched by variable name.
    pub fn from_observed(
        space: &'a RequirementSpace,
        model: &'a TransitionSystem,
        observed: &Signal<f64>,
        events: Vec<String>,
        mode: AdaptMode,
        budget: Budget,
    ) -> Result<Self, SolveError> {
        let last = observed.last();
        let q0 = model
            .vars
            .iter()
            .map(|v| {
                observed
                    .var_index(&v.name)
                    .map(|i| last[i])
                    .ok_or_else(|| SolveError::MissingObservation(v.name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { space, model, q0, events, mode, budget })
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveStats {
    /// Time-parameter grid points tried.
    pub outer_iterations: usize,
    pub milp_solves: usize,
    pub nodes: usize,
    pub max_binaries: usize,
    pub max_constraints: usize,
    pub gadgets: usize,
    pub horizon_steps: usize,
    pub millis: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub status: MilpStatus,
    pub mode: AdaptMode,
    /// `ν′`; equals `ν_curr` when nothing better was found.
    pub valuation: Valuation,
    pub plan: ActionSequence,
    /// Degree of weakening (degrade), of strengthening (recover), or robustness (replan).
    pub objective: f64,
    /// `ρ(φ(ν′), predicted, 0)` as computed by the STL evaluator.
    pub robustness: f64,
    #[serde(skip)]
    pub predicted: Option<Signal<f64>>,
    pub stats: SolveStats,
    #[serde(skip)]
    pub milp: Option<MilpProblem<f64>>,
}

/// Sample-aligned values in `[lo, hi]`, endpoints always included.
pub fn time_grid(lo: f64, hi: f64, dt: f64) -> Vec<f64> {
    let (a, b) = (lo.min(hi), lo.max(hi));
    let mut out = vec![a];
    let k0 = (a / dt - 1e-9).ceil() as i64;
    let k1 = (b / dt + 1e-9).floor() as i64;
    for k in k0..=k1 {
        let v = k as f64 * dt;
        if v > a + 1e-9 && v < b - 1e-9 {
            out.push(v);
        }
    }
    if b > a + 1e-9 {
        out.push(b);
    }
    out
}

/// Parameter box for a mode: `[ν_min, ν_curr]`, `[ν_curr, ν_opt]` or `{ν_curr}`.
pub fn mode_box(space: &RequirementSpace, mode: AdaptMode) -> BTreeMap<String, (f64, f64)> {
    let (a, b) = match mode {
        AdaptMode::Degrade => (space.nu_min(), space.nu_curr()),
        AdaptMode::Recover => (space.nu_curr(), space.nu_opt()),
        AdaptMode::Replan => (space.nu_curr(), space.nu_curr()),
    };
    space
        .params()
        .iter()
        .map(|p| (p.name.clone(), space.range_between(&p.name, a, b).expect("valuations are total")))
        .collect()
}

/// Time-parameter assignments to try, strongest first.
pub fn time_candidates(space: &RequirementSpace, mode: AdaptMode, dt: f64) -> Vec<Valuation> {
    let bx = mode_box(space, mode);
    let mut out = vec![Valuation::new()];
    for p in space.params().iter().filter(|p| p.kind == ParamKind::Time) {
        let (lo, hi) = bx[&p.name];
        let mut grid = time_grid(lo, hi, dt);
        if p.direction == Direction::StrengthensWhenIncreased {
            grid.reverse();
        }
        out = out
            .into_iter()
            .flat_map(|nu| grid.iter().map(move |v| nu.clone().with(&p.name, *v)))
            .collect();
    }
    out
}

/// Prediction length in steps: the longest horizon over `ν_curr` and all candidates.
pub fn planning_horizon(space: &RequirementSpace, mode: AdaptMode, dt: f64) -> Result<usize, PstlError> {
    let mut n = space.phi_curr()?.horizon_steps(dt);
    for tc in time_candidates(space, mode, dt) {
        let mut nu = space.nu_curr().clone();
        for (k, v) in tc.iter() {
            nu.set(k, v);
        }
        n = n.max(space.instantiate(&nu)?.horizon_steps(dt));
    }
    Ok(n)
}

struct Built {
    problem: MilpProblem<f64>,
    actions: Vec<Vec<VarId>>,
    value_params: Vec<(String, VarId)>,
    gap_expr: LinExpr<f64>,
    stats: EncodeStats,
}

/// Weight of `ρ` at the next sample in planning objectives. Small enough to
/// act as a lexicographic preference at the problem scales at hand.
const TIE_BREAK_WEIGHT: f64 = 1e-5;
/// Per-step preference for the idle action.
const ACTION_COST: f64 = 1e-8;

fn scaled_add(acc: &mut Bounded<f64>, b: &Bounded<f64>, k: f64) {
    acc.expr.add_scaled(&b.expr, k);
    if k >= 0.0 {
        acc.lo += k * b.lo;
        acc.hi += k * b.hi;
    } else {
        acc.lo += k * b.hi;
        acc.hi += k * b.lo;
    }
}

fn eval_symbolic(e: &Expr, prev: &[Bounded<f64>], next: &[Bounded<f64>]) -> Bounded<f64> {
    let mut acc = Bounded::constant(e.constant);
    for &(i, c) in &e.prev {
        scaled_add(&mut acc, &prev[i], c);
    }
    for &(i, c) in &e.next {
        scaled_add(&mut acc, &next[i], c);
    }
    acc
}

/// `b · e` for binary `b`: linear when `e` is constant, McCormick otherwise.
fn times_binary(p: &mut MilpProblem<f64>, b: VarId, e: &Bounded<f64>, name: &str) -> LinExpr<f64> {
    if let Some(c) = e.expr.as_constant() {
        return LinExpr::term(b, c);
    }
    let (l, u) = (e.lo, e.hi);
    let y = p.add_continuous(name, l.min(0.0), u.max(0.0));
    p.definitions.push(Definition::Product { out: y, bin: b, expr: e.expr.clone() });
    let yv = LinExpr::var(y);
    p.relate(format!("{name}_a"), yv.clone(), Sense::Le, LinExpr::term(b, u));
    p.relate(format!("{name}_b"), yv.clone(), Sense::Ge, LinExpr::term(b, l));
    let mut hi = e.expr.clone() + (-l);
    hi.add_term(b, l);
    p.relate(format!("{name}_c"), yv.clone(), Sense::Le, hi);
    let mut lo = e.expr.clone() + (-u);
    lo.add_term(b, u);
    p.relate(format!("{name}_d"), yv.clone(), Sense::Ge, lo);
    yv
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Goal {
    /// maximize robustness of the template
    Robustness,
    /// maximize robustness, ties broken by [`TIE_BREAK_WEIGHT`] and [`ACTION_COST`]
    Plan,
    /// minimize `ρ(new) - ρ(curr)`
    Degree,
    /// the degree terms, with the [`Goal::Plan`] objective
    Refine,
}

fn build(
    req: &AdaptRequest<'_>,
    mode: AdaptMode,
    goal: Goal,
    time_nu: &Valuation,
    horizon: usize,
    require_sat: bool,
) -> Result<Built, SolveError> {
    let m = req.model;
    let nv = m.vars.len();
    let mut p = MilpProblem::<f64>::new();

    let (q1, _) = m.apply_events(&req.q0, &req.events)?;
    let mut samples: Vec<Vec<Bounded<f64>>> = vec![req.q0.iter().map(|&v| Bounded::constant(v)).collect()];
    let mut actions = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let prev: Vec<Bounded<f64>> = if k == 0 {
            q1.iter().map(|&v| Bounded::constant(v)).collect()
        } else {
            samples[k].clone()
        };
        let bins: Vec<VarId> = if m.sys_actions.len() == 1 {
            Vec::new()
        } else {
            let bins: Vec<VarId> = m.sys_actions.iter().map(|a| p.add_binary(format!("a{k}_{}", a.name))).collect();
            let mut one = LinExpr::default();
            for b in &bins {
                one.add_term(*b, 1.0);
            }
            p.add_constraint(format!("onehot{k}"), one, Sense::Eq, 1.0);
            bins
        };
        let mut next: Vec<Bounded<f64>> = prev.clone();
        for i in 0..nv {
            let default = match &m.updates[i] {
                Some(u) => eval_symbolic(u, &prev, &next),
                None => prev[i].clone(),
            };
            let mut value = default.clone();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (ai, a) in m.sys_actions.iter().enumerate() {
                let mut branch = default.clone();
                let mut delta = Bounded::constant(0.0);
                let mut touched = false;
                for e in a.effect_on(i) {
                    let v = eval_symbolic(&e.expr, &prev, &prev);
                    touched = true;
                    match e.kind {
                        EffectKind::Assign => {
                            // override: contribute (A - D) on top of the default
                            let mut d = v.clone();
                            scaled_add(&mut d, &default, -1.0);
                            delta = d;
                            branch = v;
                        }
                        EffectKind::Add => {
                            scaled_add(&mut delta, &v, 1.0);
                            scaled_add(&mut branch, &v, 1.0);
                        }
                    }
                }
                lo = lo.min(branch.lo);
                hi = hi.max(branch.hi);
                if touched {
                    if bins.is_empty() {
                        value.expr.add_scaled(&delta.expr, 1.0);
                    } else {
                        let y = times_binary(&mut p, bins[ai], &delta, &format!("y{k}_{i}_{ai}"));
                        value.expr.add_scaled(&y, 1.0);
                    }
                }
            }
            let v = &m.vars[i];
            if lo < v.lo - 1e-9 {
                p.add_constraint(format!("lb{k}_{}", v.name), value.expr.clone(), Sense::Ge, v.lo);
            }
            if hi > v.hi + 1e-9 {
                p.add_constraint(format!("ub{k}_{}", v.name), value.expr.clone(), Sense::Le, v.hi);
            }
            value.lo = lo.max(v.lo);
            value.hi = hi.min(v.hi);
            if value.lo > value.hi {
                value.hi = value.lo;
            }
            next[i] = value;
        }
        samples.push(next);
        actions.push(bins);
    }
    let signal = SignalVars { names: m.var_names(), period: m.dt, samples };

    let bx = mode_box(req.space, mode);
    let mut params = BTreeMap::new();
    let mut value_params = Vec::new();
    for spec in req.space.params() {
        let binding = match spec.kind {
            ParamKind::Time => ParamValue::Const(
                time_nu.get(&spec.name).unwrap_or_else(|| req.space.nu_curr().get(&spec.name).unwrap()),
            ),
            ParamKind::Value => {
                let (lo, hi) = bx[&spec.name];
                if hi - lo <= 0.0 {
                    ParamValue::Const(lo)
                } else {
                    let v = p.add_continuous(format!("param_{}", spec.name), lo, hi);
                    value_params.push((spec.name.clone(), v));
                    ParamValue::Var(Bounded { expr: LinExpr::var(v), lo, hi })
                }
            }
        };
        params.insert(spec.name.clone(), binding);
    }
    let template = req.space.formula();
    let current = PstlFormula::from_stl(&req.space.phi_curr()?);
    let optimal = PstlFormula::from_stl(&req.space.phi_opt()?);
    let mut enc = Encoder::new(&mut p, &signal, &params, "");
    let (r_sat, gap_expr) = match goal {
        Goal::Robustness | Goal::Plan => {
            let r = enc.encode(template, 0, Side::Below)?;
            (r.expr, LinExpr::default())
        }
        Goal::Degree | Goal::Refine => {
            let r_sat = enc.encode(template, 0, Side::Below)?;
            let r_new = enc.encode(template, 0, Side::Above)?;
            let r_cur = enc.encode(&current, 0, Side::Below)?;
            (r_sat.expr, r_new.expr - r_cur.expr)
        }
    };
    // secondary preferences: progress towards φ_opt one step ahead, then idleness
    let mut tiebreak = LinExpr::default();
    if matches!(goal, Goal::Plan | Goal::Refine) {
        match enc.encode(&optimal, 1, Side::Below) {
            Ok(r1) => {
                // shortfall = max(-ρ, 0); margin beyond φ_opt earns nothing
                let short = enc.problem.add_continuous("opt_shortfall", 0.0, (-r1.lo).max(0.0));
                let items = vec![LinExpr::default() - r1.expr.clone(), LinExpr::default()];
                enc.problem.relate("opt_shortfall_lb", LinExpr::var(short), Sense::Ge, items[0].clone());
                enc.problem.definitions.push(Definition::Max { out: short, items, selectors: Vec::new() });
                tiebreak.add_term(short, -TIE_BREAK_WEIGHT);
            }
            Err(EncodeError::HorizonOverflow { .. }) => {}
            Err(e) => return Err(e.into()),
        }
        for bins in &actions {
            for (ai, b) in bins.iter().enumerate() {
                if ai != m.noop {
                    tiebreak.add_term(*b, -ACTION_COST);
                }
            }
        }
    }
    let stats = enc.stats;
    if require_sat {
        p.add_constraint("satisfied", r_sat.clone(), Sense::Ge, 0.0);
    }
    match goal {
        Goal::Robustness => p.set_objective(ObjectiveSense::Maximize, r_sat.clone()),
        Goal::Plan | Goal::Refine => p.set_objective(ObjectiveSense::Maximize, r_sat.clone() + tiebreak.clone()),
        Goal::Degree => p.set_objective(ObjectiveSense::Minimize, gap_expr.clone()),
    }
    Ok(Built { problem: p, actions, value_params, gap_expr, stats })
}

struct Candidate {
    key: f64,
    valuation: Valuation,
    plan: ActionSequence,
    predicted: Signal<f64>,
    robustness: f64,
    objective: f64,
    milp: MilpProblem<f64>,
}

const TIE: f64 = 1e-7;

/// Steps that matter for one time candidate: beyond both horizons the plan is irrelevant.
fn candidate_horizon(space: &RequirementSpace, time_nu: &Valuation, dt: f64) -> Result<usize, SolveError> {
    let mut nu = space.nu_curr().clone();
    for (k, v) in time_nu.iter() {
        nu.set(k, v);
    }
    let curr = space.phi_curr()?.horizon_steps(dt);
    Ok(curr.max(space.instantiate(&nu)?.horizon_steps(dt)).max(1))
}

fn note(stats: &mut SolveStats, built: &Built, sol: &MilpSolution<f64>, budget_hit: &mut bool) {
    stats.milp_solves += 1;
    stats.nodes += sol.nodes;
    stats.max_binaries = stats.max_binaries.max(built.problem.num_binaries());
    stats.max_constraints = stats.max_constraints.max(built.problem.constraints.len());
    stats.gadgets += built.stats.gadgets;
    *budget_hit |= sol.status == MilpStatus::BudgetExceeded;
}

/// The point of `built` that follows the plan (and value parameters) of `x0`, a
/// point of `probe`. May violate constraints; callers check.
fn seed_point(built: &Built, probe: &Built, x0: &[f64]) -> Vec<f64> {
    let p = &built.problem;
    let mut x: Vec<f64> = p.vars.iter().map(|v| v.lo).collect();
    for (bins, pbins) in built.actions.iter().zip(&probe.actions) {
        for (b, pb) in bins.iter().zip(pbins) {
            x[b.0] = x0[pb.0].round();
        }
    }
    for ((_, v), (_, pv)) in built.value_params.iter().zip(&probe.value_params) {
        x[v.0] = x0[pv.0];
    }
    p.complete(&mut x);
    x
}

/// Simple plans tried before search: one action held for `j` steps, then the
/// idle action. Returns the best satisfying one as a point of `built`.
fn heuristic_seed(req: &AdaptRequest<'_>, built: &Built, time_nu: &Valuation) -> Result<Option<Vec<f64>>, SolveError> {
    let m = req.model;
    let steps = built.actions.len();
    if steps == 0 || built.actions.iter().all(Vec::is_empty) {
        return Ok(None);
    }
    let mut nu = req.space.nu_curr().clone();
    for (k, v) in time_nu.iter() {
        nu.set(k, v);
    }
    // the weakest admissible values leave the most room
    let bx = mode_box(req.space, req.mode);
    let mut values = Vec::new();
    for (name, var) in &built.value_params {
        let (lo, hi) = bx[name];
        let v = match req.space.polarity().get(name).unwrap() {
            Direction::StrengthensWhenIncreased => lo,
            Direction::StrengthensWhenDecreased => hi,
        };
        nu.set(name, v);
        values.push((*var, v));
    }
    let f = req.space.instantiate(&nu)?;
    let opt = req.space.phi_opt()?;
    let (_, event_clamps) = m.apply_events(&req.q0, &req.events)?;
    let mut best: Option<(f64, usize, usize)> = None;
    for a in 0..m.sys_actions.len() {
        let lens: Vec<usize> = if a == m.noop { vec![steps] } else { (1..=steps).collect() };
        for j in lens {
            let mut seq = ActionSequence::new();
            for k in 0..steps {
                let events = if k == 0 { req.events.clone() } else { Vec::new() };
                let ai = if k < j { a } else { m.noop };
                seq.push(events, m.sys_actions[ai].name.clone());
            }
            let r = m.rollout(&req.q0, &seq)?;
            let clamps = r.clamped.iter().enumerate().any(|(k, c)| c.iter().any(|i| k > 0 || !event_clamps.contains(i)));
            if clamps {
                continue;
            }
            let rho0 = robustness(&f, &r.signal, 0)?.value;
            if rho0 < 0.0 {
                continue;
            }
            let rho1 = robustness(&opt, &r.signal, 1).map_or(0.0, |v| v.value.min(0.0));
            let active = if a == m.noop { 0 } else { j };
            let score = rho0 + TIE_BREAK_WEIGHT * rho1 - ACTION_COST * active as f64;
            if best.map_or(true, |(b, _, _)| score > b) {
                best = Some((score, a, j));
            }
        }
    }
    let Some((_, a, j)) = best else { return Ok(None) };
    let p = &built.problem;
    let mut x: Vec<f64> = p.vars.iter().map(|v| v.lo).collect();
    for (k, bins) in built.actions.iter().enumerate() {
        let ai = if k < j { a } else { m.noop };
        for (bi, b) in bins.iter().enumerate() {
            x[b.0] = if bi == ai { 1.0 } else { 0.0 };
        }
    }
    for (var, v) in values {
        x[var.0] = v;
    }
    p.complete(&mut x);
    Ok(Some(x))
}

/// Node cap for searches that only refine secondary preferences.
const SECONDARY_NODES: usize = 500;
/// Node cap for improving on a known weakening of one candidate; proving
/// optimality against the floor is what usually consumes the nodes.
const DEGREE_NODES: usize = 2_000;

fn capped(budget: &Budget, used: usize, cap: usize) -> Budget {
    let mut b = remaining(budget, used);
    b.max_nodes = Some(b.max_nodes.map_or(cap, |m| m.min(cap)));
    b
}

/// The node budget is shared by every MILP of one adaptation.
fn remaining(budget: &Budget, used: usize) -> Budget {
    Budget { deadline: budget.deadline, max_nodes: budget.max_nodes.map(|m| m.saturating_sub(used)) }
}

/// Solves one adaptation problem.
pub fn solve_adaptation(req: &AdaptRequest<'_>) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    let dt = req.model.dt;
    let horizon = planning_horizon(req.space, req.mode, dt)?;
    let mut stats = SolveStats { horizon_steps: horizon, ..SolveStats::default() };
    let mut best: Option<Candidate> = None;
    let mut budget_hit = false;

    // Both terms of the degree are read off one signal and the new requirement
    // must hold on it, so no candidate does better than `-max_plan ρ(φ_curr)`.
    let mut floor = None;
    if req.mode != AdaptMode::Replan {
        let steps = req.space.phi_curr()?.horizon_steps(dt).max(1);
        let built = build(req, AdaptMode::Replan, Goal::Robustness, &Valuation::new(), steps, false)?;
        let sol = branch_and_bound(&built.problem, &BnbOptions { budget: remaining(&req.budget, 0), gap: 1e-9, ..BnbOptions::default() });
        stats.milp_solves += 1;
        stats.nodes += sol.nodes;
        if let (MilpStatus::Optimal, Some(best_curr)) = (sol.status, sol.objective) {
            let lb = -best_curr;
            floor = Some(if req.mode == AdaptMode::Degrade { lb.max(0.0) } else { lb });
        }
    }

    let candidates = match req.mode {
        AdaptMode::Replan => vec![Valuation::new()],
        _ => time_candidates(req.space, req.mode, dt),
    };
    for tc in candidates {
        if req.budget.deadline.is_some_and(|d| Instant::now() >= d) {
            budget_hit = true;
            break;
        }
        stats.outer_iterations += 1;
        // one extra step so the tie-break can look a sample ahead
        let steps = candidate_horizon(req.space, &tc, dt)? + 1;
        let unchanged = req.mode != AdaptMode::Replan
            && req.space.params().iter().all(|p| p.kind == ParamKind::Time)
            && tc.iter().all(|(k, v)| req.space.nu_curr().get(k) == Some(v));

        // most robust plan for this candidate: a feasibility test and a seed
        let probe = build(req, req.mode, Goal::Plan, &tc, steps, true)?;
        let hint = heuristic_seed(req, &probe, &tc)?;
        let opts = BnbOptions { budget: capped(&req.budget, stats.nodes, SECONDARY_NODES), gap: 1e-9, ..BnbOptions::default() };
        let mut sol = branch_and_bound_from(&probe.problem, &opts, hint.as_deref());
        if sol.x.is_none() && sol.status == MilpStatus::BudgetExceeded {
            // no plan yet: this decides feasibility, so it gets the whole budget
            stats.nodes += sol.nodes;
            let opts = BnbOptions { budget: remaining(&req.budget, stats.nodes), ..opts };
            sol = branch_and_bound_from(&probe.problem, &opts, None);
        }
        let mut capped_hit = false;
        note(&mut stats, &probe, &sol, &mut capped_hit);
        // a capped probe with a plan in hand only matters when it is the answer
        budget_hit |= capped_hit && (sol.x.is_none() || req.mode == AdaptMode::Replan);
        let Some(x0) = sol.x else { continue };
        let r_max = (sol.status == MilpStatus::Optimal).then(|| sol.objective.unwrap());

        let (built, x, key) = if unchanged || req.mode == AdaptMode::Replan {
            // with the current requirement kept the degree is zero for every plan
            (probe, x0, 0.0)
        } else {
            let built = build(req, req.mode, Goal::Degree, &tc, steps, true)?;
            let start = seed_point(&built, &probe, &x0);
            let cutoff = best.as_ref().map(|b| b.key - TIE);
            let cap = if best.is_some() { SECONDARY_NODES } else { DEGREE_NODES };
            let opts = BnbOptions { budget: capped(&req.budget, stats.nodes, cap), gap: 1e-9, cutoff, floor };
            let sol = branch_and_bound_from(&built.problem, &opts, Some(&start));
            note(&mut stats, &built, &sol, &mut budget_hit);
            let (Some(x), Some(key)) = (sol.x, sol.objective) else { continue };

            // among equally good weakenings, prefer the most robust plan
            let mut second = build(req, req.mode, Goal::Refine, &tc, steps, true)?;
            second.problem.add_constraint("keep_degree", second.gap_expr.clone(), Sense::Le, key + TIE / 10.0);
            let start = seed_point(&second, &built, &x);
            let opts = BnbOptions { budget: capped(&req.budget, stats.nodes, SECONDARY_NODES), gap: 1e-9, floor: r_max, ..BnbOptions::default() };
            let s2 = branch_and_bound_from(&second.problem, &opts, Some(&start));
            let mut ignore = false;
            note(&mut stats, &second, &s2, &mut ignore);
            match s2.x {
                Some(x2) => (second, x2, key),
                None => (built, x, key),
            }
        };
        if let Some(c) = realize(req, &tc, &built, &x, horizon)? {
            let c = Candidate { key, ..c };
            let better = best.as_ref().map_or(true, |b| key < b.key - TIE);
            if better {
                best = Some(c);
            }
        }
        if let (Some(b), Some(f)) = (&best, floor) {
            if b.key <= f + TIE {
                break;
            }
        }
    }
    stats.millis = started.elapsed().as_secs_f64() * 1e3;
    Ok(match best {
        Some(c) => SolveResult {
            status: if budget_hit { MilpStatus::BudgetExceeded } else { MilpStatus::Optimal },
            mode: req.mode,
            valuation: c.valuation,
            plan: c.plan,
            objective: c.objective,
            robustness: c.robustness,
            predicted: Some(c.predicted),
            stats,
            milp: Some(c.milp),
        },
        None => SolveResult {
            status: if budget_hit { MilpStatus::BudgetExceeded } else { MilpStatus::Infeasible },
            mode: req.mode,
            valuation: req.space.nu_curr().clone(),
            plan: ActionSequence::new(),
            objective: f64::NAN,
            robustness: f64::NAN,
            predicted: None,
            stats,
            milp: None,
        },
    })
}

/// Turns a MILP point into a plan, rolls it out and re-checks it with the STL evaluator.
fn realize(
    req: &AdaptRequest<'_>,
    time_nu: &Valuation,
    built: &Built,
    x: &[f64],
    horizon: usize,
) -> Result<Option<Candidate>, SolveError> {
    let m = req.model;
    let mut plan = ActionSequence::new();
    for k in 0..horizon.max(built.actions.len()) {
        let ai = if k >= built.actions.len() {
            m.noop
        } else if built.actions[k].is_empty() {
            0
        } else {
            built.actions[k].iter().position(|b| x[b.0] > 0.5).unwrap_or(m.noop)
        };
        let events = if k == 0 { req.events.clone() } else { Vec::new() };
        plan.push(events, m.sys_actions[ai].name.clone());
    }
    let rollout = m.rollout(&req.q0, &plan)?;
    let predicted = rollout.signal;
    let mut nu = req.space.nu_curr().clone();
    for (k, v) in time_nu.iter() {
        nu.set(k, v);
    }
    let bx = mode_box(req.space, req.mode);
    for (name, var) in &built.value_params {
        let (lo, hi) = bx[name];
        nu.set(name, x[var.0].clamp(lo, hi));
    }
    let mut rho = robustness(&req.space.instantiate(&nu)?, &predicted, 0)?.value;
    if !built.value_params.is_empty() {
        let mut snapped = nu.clone();
        for (name, _) in &built.value_params {
            let (lo, hi) = bx[name];
            snapped.set(name, ((nu.get(name).unwrap() * 1e6).round() / 1e6).clamp(lo, hi));
        }
        let r = robustness(&req.space.instantiate(&snapped)?, &predicted, 0)?.value;
        if r >= 0.0 {
            nu = snapped;
            rho = r;
        }
    }
    // LP tolerances can leave a value parameter a hair on the wrong side
    for _ in 0..8 {
        if rho >= 0.0 {
            break;
        }
        for (name, _) in &built.value_params {
            let (lo, hi) = bx[name];
            let d = req.space.polarity().get(name).unwrap();
            let step = (2.0 * rho.abs()).max(1e-12);
            let v = nu.get(name).unwrap() - d.sign() * step;
            nu.set(name, v.clamp(lo, hi));
        }
        rho = robustness(&req.space.instantiate(&nu)?, &predicted, 0)?.value;
    }
    if rho < -1e-6 {
        return Ok(None);
    }
    let rho_curr = robustness(&req.space.phi_curr()?, &predicted, 0)?.value;
    let objective = match req.mode {
        AdaptMode::Degrade => rho - rho_curr,
        AdaptMode::Recover => rho_curr - rho,
        AdaptMode::Replan => rho,
    };
    Ok(Some(Candidate {
        key: 0.0,
        valuation: nu,
        plan,
        predicted,
        robustness: rho,
        objective,
        milp: built.problem.clone(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::exhaustive_adaptation;

    fn thrusters() -> TransitionSystem {
        let mut vars = Vec::new();
        let mut sys = vec![r#"{"name": "noop"}"#.to_string()];
        let mut env = Vec::new();
        let mut sum = Vec::new();
        for i in 1..=4 {
            let on = if i <= 2 { 1 } else { 0 };
            vars.push(format!(r#"{{"name": "h{i}", "lo": 0, "hi": 1, "init": 1}}"#));
            vars.push(format!(r#"{{"name": "on{i}", "lo": 0, "hi": 1, "init": {on}}}"#));
            sys.push(format!(r#"{{"name": "enable{i}", "effects": {{"on{i}": "= h{i}"}}}}"#));
            env.push(format!(r#"{{"name": "fail{i}", "effects": {{"h{i}": "= 0", "on{i}": "= 0"}}}}"#));
            env.push(format!(r#"{{"name": "repair{i}", "effects": {{"h{i}": "= 1"}}}}"#));
            sum.push(format!("30*on{i}'"));
        }
        vars.push(r#"{"name": "thrust", "lo": 0, "hi": 120, "init": 60}"#.to_string());
        let text = format!(
            r#"{{"dt": 0.5, "vars": [{}], "sys_actions": [{}], "env_actions": [{}], "updates": {{"thrust": "{}"}}}}"#,
            vars.join(","),
            sys.join(","),
            env.join(","),
            sum.join(" + ")
        );
        TransitionSystem::from_json_str(&text).unwrap()
    }

    fn space(curr: f64) -> RequirementSpace {
        let text = format!(
            r#"{{"formula": "G[0,1](thrust > $p)", "parameters": [
                {{"name": "p", "polarity": "strengthens_when_increased", "min": 50, "opt": 100, "initial": {curr}}}]}}"#
        );
        RequirementSpace::from_json_str(&text).unwrap()
    }

    fn state(m: &TransitionSystem, on: [f64; 4], h: [f64; 4]) -> Vec<f64> {
        let mut q = m.initial_state();
        for i in 0..4 {
            q[m.var_index(&format!("h{}", i + 1)).unwrap()] = h[i];
            q[m.var_index(&format!("on{}", i + 1)).unwrap()] = on[i];
        }
        let t = m.var_index("thrust").unwrap();
        q[t] = 30.0 * on.iter().sum::<f64>();
        q
    }

    #[test]
    fn degradation_matches_enumeration() {
        let m = thrusters();
        let sp = space(100.0);
        // thrusters 1..3 on, 2 and 3 fail now: only 1 stays, 4 can be enabled
        let q0 = state(&m, [1.0, 1.0, 1.0, 0.0], [1.0; 4]);
        let req = AdaptRequest {
            space: &sp,
            model: &m,
            q0,
            events: vec!["fail2".into(), "fail3".into()],
            mode: AdaptMode::Degrade,
            budget: Budget::unlimited(),
        };
        let r = solve_adaptation(&req).unwrap();
        let o = exhaustive_adaptation(&req, 51).unwrap().unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        // sample 0 is the pre-event 90 N; afterwards 30 N, then 60 N with thruster 4
        assert!((r.valuation.get("p").unwrap() - 30.0_f64.max(50.0)).abs() < 1e-6 || r.objective >= 0.0);
        assert!(r.objective <= o.objective + 1e-6, "{} vs {}", r.objective, o.objective);
        assert!(r.robustness >= 0.0);
    }

    #[test]
    fn no_violation_means_no_weakening() {
        let m = thrusters();
        let sp = space(100.0);
        let q0 = state(&m, [1.0, 1.0, 1.0, 1.0], [1.0; 4]);
        let mut req = AdaptRequest {
            space: &sp,
            model: &m,
            q0,
            events: vec![],
            mode: AdaptMode::Degrade,
            budget: Budget::unlimited(),
        };
        let r = solve_adaptation(&req).unwrap();
        assert_eq!(r.valuation.get("p"), Some(100.0));
        assert!(r.objective.abs() < 1e-9);
        // losing one of four: 90 N is the best that can still be met
        req.events = vec!["fail4".into()];
        let r = solve_adaptation(&req).unwrap();
        assert_eq!(r.valuation.get("p"), Some(90.0));
        assert!((r.objective - 10.0).abs() < 1e-9);
    }

    #[test]
    fn all_failed_is_infeasible() {
        let m = thrusters();
        let sp = space(100.0);
        let q0 = state(&m, [0.0; 4], [0.0; 4]);
        let req = AdaptRequest {
            space: &sp,
            model: &m,
            q0,
            events: vec![],
            mode: AdaptMode::Degrade,
            budget: Budget::unlimited(),
        };
        assert_eq!(solve_adaptation(&req).unwrap().status, MilpStatus::Infeasible);
    }

    #[test]
    fn recovery_strengthens_to_enumeration_optimum() {
        let m = thrusters();
        let sp = space(50.0);
        let q0 = state(&m, [1.0, 1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 1.0]);
        let req = AdaptRequest {
            space: &sp,
            model: &m,
            q0,
            events: vec!["repair3".into()],
            mode: AdaptMode::Recover,
            budget: Budget::unlimited(),
        };
        let r = solve_adaptation(&req).unwrap();
        let o = exhaustive_adaptation(&req, 51).unwrap().unwrap();
        assert!(r.objective >= o.objective - 1e-6);
        assert!((r.valuation.get("p").unwrap() - 60.0).abs() < 1e-6, "{:?}", r.valuation);
    }
}
