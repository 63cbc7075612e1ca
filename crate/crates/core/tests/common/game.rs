//! Game-tree reference for the trigger conditions on a two-thruster model.

use reqadapt::env::TransitionSystem;
use reqadapt::pstl::RequirementSpace;
use reqadapt::runtime::TriggerMode;
use reqadapt::stl::Signal;

use super::naive;

pub fn two_thrusters() -> TransitionSystem {
    TransitionSystem::from_json_str(
        r#"{
        "dt": 0.5,
        "vars": [
            {"name": "h1", "lo": 0, "hi": 1, "init": 1},
            {"name": "on1", "lo": 0, "hi": 1, "init": 1},
            {"name": "h2", "lo": 0, "hi": 1, "init": 1},
            {"name": "on2", "lo": 0, "hi": 1, "init": 0},
            {"name": "thrust", "lo": 0, "hi": 60, "init": 30}
        ],
        "sys_actions": [
            {"name": "noop"},
            {"name": "enable1", "effects": {"on1": "= h1"}},
            {"name": "enable2", "effects": {"on2": "= h2"}}
        ],
        "env_actions": [
            {"name": "fail1", "effects": {"h1": "= 0", "on1": "= 0"}},
            {"name": "fail2", "effects": {"h2": "= 0", "on2": "= 0"}},
            {"name": "repair1", "effects": {"h1": "= 1"}}
        ],
        "updates": {"thrust": "30*on1' + 30*on2'"}
    }"#,
    )
    .unwrap()
}

pub fn space(formula: &str, min: f64, opt: f64, curr: f64) -> RequirementSpace {
    RequirementSpace::from_json_str(&format!(
        r#"{{"formula": "{formula}", "parameters": [
            {{"name": "p", "polarity": "strengthens_when_increased", "min": {min}, "opt": {opt}, "initial": {curr}}}]}}"#
    ))
    .unwrap()
}

/// Every leaf of the depth-`depth` tree: `(env choices, sys choices, samples)`,
/// env choice 0 meaning no event.
fn leaves(m: &TransitionSystem, path: &mut Vec<(usize, usize)>, samples: &mut Vec<Vec<f64>>, depth: usize, out: &mut Vec<(Vec<usize>, Vec<usize>, Vec<Vec<f64>>)>) {
    if path.len() == depth {
        out.push((path.iter().map(|p| p.0).collect(), path.iter().map(|p| p.1).collect(), samples.clone()));
        return;
    }
    for e in 0..=m.env_actions.len() {
        for a in 0..m.sys_actions.len() {
            let events = if e == 0 { vec![] } else { vec![m.env_actions[e - 1].name.clone()] };
            let next = m.step(samples.last().unwrap(), &events, &m.sys_actions[a].name).unwrap().state;
            path.push((e, a));
            samples.push(next);
            leaves(m, path, samples, depth, out);
            samples.pop();
            path.pop();
        }
    }
}

/// `∃ env ∀ sys: ¬φ` for degradation, `∀ env ∃ sys: φ` for recovery.
pub fn oracle(sp: &RequirementSpace, m: &TransitionSystem, q0: &[f64], mode: TriggerMode, depth: usize) -> bool {
    let f = sp.phi_curr().unwrap();
    let mut out = Vec::new();
    leaves(m, &mut Vec::new(), &mut vec![q0.to_vec()], depth, &mut out);
    let sat = |s: &Vec<Vec<f64>>| {
        let sig = Signal::new(m.dt, 0.0, m.var_names(), s.clone()).unwrap();
        naive::rho(&f, &sig, 0) >= 0.0
    };
    let mut envs: Vec<Vec<usize>> = out.iter().map(|l| l.0.clone()).collect();
    envs.sort();
    envs.dedup();
    let some_sys_sat = |env: &Vec<usize>| out.iter().filter(|l| &l.0 == env).any(|l| sat(&l.2));
    match mode {
        TriggerMode::Degrade => envs.iter().any(|e| !some_sys_sat(e)),
        TriggerMode::Recover => envs.iter().all(some_sys_sat),
    }
}

/// Model state from thruster health and switch flags.
pub fn state(h: [bool; 2], on: [bool; 2]) -> Vec<f64> {
    let on = [on[0] && h[0], on[1] && h[1]];
    let b = |x: bool| f64::from(u8::from(x));
    vec![b(h[0]), b(on[0]), b(h[1]), b(on[1]), 30.0 * (b(on[0]) + b(on[1]))]
}
