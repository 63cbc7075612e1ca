//! Small random adaptation problems: at most four system actions, a short
//! horizon and a coarse time grid, so exhaustive enumeration stays cheap.

use proptest::prelude::*;
use reqadapt::env::TransitionSystem;
use reqadapt::milp::{AdaptMode, AdaptRequest, Budget};
use reqadapt::pstl::RequirementSpace;

#[derive(Debug, Clone)]
pub struct Instance {
    pub model: TransitionSystem,
    pub space: RequirementSpace,
    pub q0: Vec<f64>,
    pub events: Vec<String>,
    pub mode: AdaptMode,
}

impl Instance {
    pub fn request(&self) -> AdaptRequest<'_> {
        AdaptRequest {
            space: &self.space,
            model: &self.model,
            q0: self.q0.clone(),
            events: self.events.clone(),
            mode: self.mode,
            budget: Budget::unlimited(),
        }
    }
}

/// Thrusters `1..=n` of 30 N each; the first `active` are on. Only thrusters
/// `2..` can be switched on, so there are `n` sys actions with the no-op.
pub fn thruster_model(n: usize, active: usize) -> TransitionSystem {
    let (mut vars, mut sys, mut env, mut sum) = (Vec::new(), vec![r#"{"name": "noop"}"#.to_string()], Vec::new(), Vec::new());
    for i in 1..=n {
        let on = u8::from(i <= active);
        vars.push(format!(r#"{{"name": "h{i}", "lo": 0, "hi": 1, "init": 1}}"#));
        vars.push(format!(r#"{{"name": "on{i}", "lo": 0, "hi": 1, "init": {on}}}"#));
        if i > 1 {
            sys.push(format!(r#"{{"name": "enable{i}", "effects": {{"on{i}": "= h{i}"}}}}"#));
        }
        env.push(format!(r#"{{"name": "fail{i}", "effects": {{"h{i}": "= 0", "on{i}": "= 0"}}}}"#));
        env.push(format!(r#"{{"name": "repair{i}", "effects": {{"h{i}": "= 1"}}}}"#));
        sum.push(format!("30*on{i}'"));
    }
    vars.push(format!(r#"{{"name": "thrust", "lo": 0, "hi": {}, "init": {}}}"#, 30 * n, 30 * active));
    let text = format!(
        r#"{{"dt": 0.5, "vars": [{}], "sys_actions": [{}], "env_actions": [{}], "updates": {{"thrust": "{}"}}, "noop": "noop"}}"#,
        vars.join(","),
        sys.join(","),
        env.join(","),
        sum.join(" + ")
    );
    TransitionSystem::from_json_str(&text).unwrap()
}

/// Point mass on a line: `x' = x + dt·v`, with actions that set `v`.
pub fn line_model(speeds: &[f64]) -> TransitionSystem {
    let mut sys = vec![r#"{"name": "noop", "effects": {"v": "= 0"}}"#.to_string()];
    for (i, s) in speeds.iter().enumerate() {
        sys.push(format!(r#"{{"name": "move{i}", "effects": {{"v": "= {s}"}}}}"#));
    }
    let text = format!(
        r#"{{"dt": 1.0, "vars": [
            {{"name": "v", "lo": -3, "hi": 3, "init": 0}},
            {{"name": "x", "lo": -12, "hi": 12, "init": 0}}],
          "sys_actions": [{}],
          "env_actions": [{{"name": "push", "effects": {{"x": "+= -4"}}}}, {{"name": "calm"}}],
          "updates": {{"x": "x + 1*v'"}}, "noop": "noop"}}"#,
        sys.join(",")
    );
    TransitionSystem::from_json_str(&text).unwrap()
}

fn space(formula: &str, params: &[(&str, &str, f64, f64, f64)]) -> RequirementSpace {
    let ps: Vec<String> = params
        .iter()
        .map(|(n, pol, min, opt, cur)| {
            format!(r#"{{"name": "{n}", "polarity": "{pol}", "min": {min}, "opt": {opt}, "initial": {cur}}}"#)
        })
        .collect();
    RequirementSpace::from_json_str(&format!(r#"{{"formula": "{formula}", "parameters": [{}]}}"#, ps.join(","))).unwrap()
}

const UP: &str = "strengthens_when_increased";
const DOWN: &str = "strengthens_when_decreased";

/// Interpolates `frac` of the way from `min` back toward `opt`.
fn between(min: f64, opt: f64, frac: f64) -> f64 {
    min + (opt - min) * frac
}

fn thruster_instances() -> impl Strategy<Value = Instance> {
    (2usize..=4, 0usize..4, 0.0..=1.0f64, any::<bool>(), 0usize..3).prop_map(|(n, fail_pick, frac, recover, shape)| {
        let active = (n - 1).max(1).min(2);
        let model = thruster_model(n, active);
        let mut q0 = model.initial_state();
        let fail = 1 + fail_pick % active;
        let mut events = vec![format!("fail{fail}")];
        let mode = if recover {
            // failed earlier, repaired now
            let (q, _) = model.apply_events(&q0, &events).unwrap();
            q0 = q;
            let t = model.var_index("thrust").unwrap();
            q0[t] = 30.0 * (active as f64 - 1.0);
            events = vec![format!("repair{fail}")];
            AdaptMode::Recover
        } else {
            AdaptMode::Degrade
        };
        let cur_frac = if recover { frac * 0.9 } else { 0.6 + 0.4 * frac };
        let sp = match shape {
            0 => space("G[0,1](thrust > $p)", &[("p", UP, 20.0, 70.0, between(20.0, 70.0, cur_frac))]),
            1 => space(
                "G[0,$T](thrust > $p)",
                &[("p", UP, 20.0, 70.0, between(20.0, 70.0, cur_frac)), ("T", UP, 0.5, 1.5, if recover { 0.5 } else { 1.5 })],
            ),
            _ => space("F[0,$T](thrust >= 60)", &[("T", DOWN, 2.0, 0.5, if recover { 2.0 } else { 0.5 })]),
        };
        Instance { model, space: sp, q0, events, mode }
    })
}

fn line_instances() -> impl Strategy<Value = Instance> {
    (
        prop::collection::vec(prop_oneof![Just(-2.0), Just(-1.0), Just(1.0), Just(2.0)], 1..=3),
        -4i32..=4,
        0.0..=1.0f64,
        any::<bool>(),
        0usize..3,
    )
        .prop_map(|(speeds, x0, frac, recover, shape)| {
            let model = line_model(&speeds);
            let mut q0 = model.initial_state();
            q0[1] = f64::from(x0);
            let mode = if recover { AdaptMode::Recover } else { AdaptMode::Degrade };
            let events = vec![if recover { "calm" } else { "push" }.to_string()];
            let cur_frac = if recover { frac * 0.9 } else { 0.6 + 0.4 * frac };
            let sp = match shape {
                0 => space("G[1,2](x > $p)", &[("p", UP, -8.0, 4.0, between(-8.0, 4.0, cur_frac))]),
                1 => space(
                    "(x > $p) U[0,$T] (x > $q)",
                    &[("p", UP, -10.0, -2.0, between(-10.0, -2.0, cur_frac)), ("q", UP, 0.0, 5.0, 5.0), ("T", DOWN, 3.0, 1.0, if recover { 3.0 } else { 1.0 })],
                ),
                _ => space("F[0,$T](x < $u) && G[0,2](x > -9)", &[("u", DOWN, 6.0, 1.0, between(6.0, 1.0, cur_frac)), ("T", DOWN, 4.0, 1.0, 1.0)]),
            };
            Instance { model, space: sp, q0, events, mode }
        })
}

pub fn instance() -> impl Strategy<Value = Instance> {
    prop_oneof![thruster_instances(), line_instances()]
}

/// Solver and oracle objectives for one instance.
#[derive(Debug, Clone, Copy)]
pub struct Comparison {
    pub solver: Option<f64>,
    pub oracle: Option<f64>,
}

/// Solves `inst` and checks the answer against exhaustive enumeration: never
/// worse than the oracle, `ν′` inside the allowed box, the plan reproduces the
/// predicted signal, and that signal satisfies `φ(ν′)`.
pub fn check(inst: &Instance, value_points: usize) -> Result<Comparison, String> {
    use reqadapt::milp::{exhaustive_adaptation, mode_box, solve_adaptation};
    use reqadapt::stl::robustness;

    let req = inst.request();
    let res = solve_adaptation(&req).map_err(|e| e.to_string())?;
    let oracle = exhaustive_adaptation(&req, value_points).map_err(|e| e.to_string())?;
    let tol = 1e-6;
    if let Some(pred) = &res.predicted {
        let bx = mode_box(&inst.space, inst.mode);
        for p in inst.space.params() {
            let v = res.valuation.get(&p.name).ok_or("valuation lacks a parameter")?;
            let (a, b) = (inst.space.nu_min().get(&p.name).unwrap(), inst.space.nu_opt().get(&p.name).unwrap());
            let (lo, hi) = bx[&p.name];
            if v < a.min(b) - 1e-9 || v > a.max(b) + 1e-9 || v < lo - 1e-9 || v > hi + 1e-9 {
                return Err(format!("{} = {v} outside [{lo}, {hi}]", p.name));
            }
        }
        let roll = inst.model.rollout(&inst.q0, &res.plan).map_err(|e| e.to_string())?;
        if roll.saturated() {
            return Err("plan drives the model out of bounds".into());
        }
        for (a, b) in roll.signal.samples().iter().zip(pred.samples()) {
            if a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-9) {
                return Err("predicted signal differs from the plan's rollout".into());
            }
        }
        let phi = inst.space.instantiate(&res.valuation).map_err(|e| e.to_string())?;
        let rho_new = robustness(&phi, pred, 0).map_err(|e| e.to_string())?.value;
        if rho_new < -tol {
            return Err(format!("predicted signal violates φ(ν′): ρ = {rho_new}"));
        }
        let rho_curr = robustness(&inst.space.phi_curr().unwrap(), pred, 0).map_err(|e| e.to_string())?.value;
        let delta = match inst.mode {
            AdaptMode::Degrade => rho_new - rho_curr,
            AdaptMode::Recover => rho_curr - rho_new,
            AdaptMode::Replan => rho_new,
        };
        if (delta - res.objective).abs() > tol {
            return Err(format!("reported objective {} but the signal gives {delta}", res.objective));
        }
    }
    if let Some(o) = &oracle {
        let Some(_) = res.predicted else {
            return Err(format!("oracle found {} with {}, solver found nothing ({:?})", o.objective, o.valuation, res.status));
        };
        let worse = match inst.mode {
            AdaptMode::Degrade => res.objective > o.objective + tol,
            _ => res.objective < o.objective - tol,
        };
        if worse {
            return Err(format!(
                "solver {} at {} is worse than oracle {} at {}",
                res.objective, res.valuation, o.objective, o.valuation
            ));
        }
    }
    Ok(Comparison { solver: res.predicted.is_some().then_some(res.objective), oracle: oracle.map(|o| o.objective) })
}
