//! Exhaustive reference for adaptation problems: every system-action sequence
//! crossed with a grid over the parameter box.

use super::adapt::{mode_box, planning_horizon, time_candidates, AdaptMode, AdaptRequest, SolveError};
use crate::env::ActionSequence;
use crate::pstl::{ParamKind, Valuation};
use crate::stl::{robustness, Signal};

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Same meaning as `SolveResult::objective`.
    pub objective: f64,
    pub valuation: Valuation,
    pub plan: ActionSequence,
    pub predicted: Signal<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi - lo <= 0.0 || n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Best adaptation over all `|A_sys|^N` plans and a grid of valuations
/// (`value_points` per value parameter). `None` when nothing is feasible.
/// Plans that drive a variable outside its bounds are infeasible.
pub fn exhaustive_adaptation(req: &AdaptRequest<'_>, value_points: usize) -> Result<Option<OracleResult>, SolveError> {
    let m = req.model;
    let dt = m.dt;
    let horizon = planning_horizon(req.space, req.mode, dt)?;
    let bx = mode_box(req.space, req.mode);
    let times = match req.mode {
        AdaptMode::Replan => vec![Valuation::new()],
        _ => time_candidates(req.space, req.mode, dt),
    };
    let mut valuations = Vec::new();
    for tc in &times {
        let mut partial = vec![req.space.nu_curr().clone()];
        for (k, v) in tc.iter() {
            for nu in &mut partial {
                nu.set(k, v);
            }
        }
        for p in req.space.params().iter().filter(|p| p.kind == ParamKind::Value) {
            let (lo, hi) = bx[&p.name];
            partial = partial
                .into_iter()
                .flat_map(|nu| linspace(lo, hi, value_points).into_iter().map(move |v| nu.clone().with(&p.name, v)))
                .collect();
        }
        valuations.extend(partial);
    }
    let formulas = valuations.iter().map(|nu| req.space.instantiate(nu)).collect::<Result<Vec<_>, _>>()?;
    let current = req.space.phi_curr()?;

    let k = m.sys_actions.len();
    let total = k.pow(horizon as u32);
    let (q1, _) = m.apply_events(&req.q0, &req.events)?;
    let mut best: Option<OracleResult> = None;
    let mut idx = vec![0usize; horizon];
    for _ in 0..total {
        let mut samples = vec![req.q0.clone()];
        let mut feasible = true;
        let mut q = q1.clone();
        for &a in &idx {
            let out = m.step(&q, &[], &m.sys_actions[a].name)?;
            if !out.clamped.is_empty() {
                feasible = false;
                break;
            }
            q = out.state.clone();
            samples.push(out.state);
        }
        if feasible {
            let sig = Signal::new(dt, 0.0, m.var_names(), samples).expect("model-shaped samples");
            let rho_curr = robustness(&current, &sig, 0)?.value;
            for (nu, f) in valuations.iter().zip(&formulas) {
                let rho = robustness(f, &sig, 0)?.value;
                if rho < 0.0 {
                    continue;
                }
                let objective = match req.mode {
                    AdaptMode::Degrade => rho - rho_curr,
                    AdaptMode::Recover => rho_curr - rho,
                    AdaptMode::Replan => rho,
                };
                let better = match (&best, req.mode) {
                    (None, _) => true,
                    (Some(b), AdaptMode::Degrade) => objective < b.objective,
                    (Some(b), _) => objective > b.objective,
                };
                if better {
                    let mut plan = ActionSequence::new();
                    for (s, &a) in idx.iter().enumerate() {
                        let events = if s == 0 { req.events.clone() } else { Vec::new() };
                        plan.push(events, m.sys_actions[a].name.clone());
                    }
                    best = Some(OracleResult { objective, valuation: nu.clone(), plan, predicted: sig.clone() });
                }
            }
        }
        // next action sequence in lexicographic order
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < k {
                break;
            }
            *slot = 0;
        }
    }
    Ok(best)
}
