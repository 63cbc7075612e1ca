//! Linear UUV model and the two requirement spaces of the inspection mission.

use std::collections::BTreeMap;

use crate::env::{ActionEntry, ModelFile, StateVar, TransitionSystem};
use crate::pstl::RequirementSpace;

/// Rated thrust of one thruster, N.
pub const THRUST_PER_UNIT: f64 = 30.0;
/// Forward speed per newton of thrust, m/s.
pub const SPEED_PER_NEWTON: f64 = 0.01;
pub const DIVE_RATE: f64 = 1.0;
pub const ASCEND_RATE: f64 = 0.5;
pub const MIN_ALTITUDE: f64 = 2.0;
pub const MAX_ALTITUDE: f64 = 40.0;
/// Visibility index below which the pipeline cannot be seen from cruise altitude.
pub const VISIBILITY_THRESHOLD: f64 = 20.0;
/// Distance to the pipeline within which it can be inspected in low visibility.
pub const CONTACT_DISTANCE: f64 = 10.0;

pub const VISIBILITY_REQUIREMENT: &str =
    "G[0,1]((visibility < 20) -> F[0,$tau](distance_to_pipeline < 10))";
pub const THRUST_REQUIREMENT: &str = "G[0,1](thrust > $p)";

fn var(name: &str, lo: f64, hi: f64, init: f64) -> StateVar {
    StateVar { name: name.to_string(), lo, hi, init }
}

fn action(name: &str, effects: &[(&str, &str)]) -> ActionEntry {
    ActionEntry {
        name: name.to_string(),
        effects: effects.iter().map(|(v, e)| (v.to_string(), e.to_string())).collect(),
    }
}

/// Declarative model for a vehicle with `thrusters` thrusters, of which the
/// first `active` start switched on.
pub fn uuv_model_file(dt: f64, thrusters: usize, active: usize) -> ModelFile {
    let mut vars = vec![
        var("visibility", 0.0, 100.0, 100.0),
        var("vz", -DIVE_RATE, ASCEND_RATE, 0.0),
        var("distance_to_pipeline", MIN_ALTITUDE, MAX_ALTITUDE, 15.0),
    ];
    let mut sys = vec![
        action("noop", &[]),
        action("dive", &[("vz", &format!("= -{DIVE_RATE}"))]),
        action("ascend", &[("vz", &format!("= {ASCEND_RATE}"))]),
    ];
    let mut env = vec![action("visibility_drop", &[]), action("visibility_improved", &[])];
    let mut sum = Vec::new();
    for i in 1..=thrusters {
        let (h, on) = (format!("h{i}"), format!("on{i}"));
        vars.push(var(&h, 0.0, 1.0, 1.0));
        vars.push(var(&on, 0.0, 1.0, if i <= active { 1.0 } else { 0.0 }));
        sys.push(action(&format!("enable_{i}"), &[(&on, &format!("= {h}"))]));
        sys.push(action(&format!("disable_{i}"), &[(&on, "= 0")]));
        env.push(action(&format!("thruster_failure_{i}"), &[(&h, "= 0"), (&on, "= 0")]));
        env.push(action(&format!("thruster_repair_{i}"), &[(&h, "= 1")]));
        sum.push(format!("{THRUST_PER_UNIT}*{on}'"));
    }
    let max_thrust = THRUST_PER_UNIT * thrusters as f64;
    vars.push(var("thrust", 0.0, max_thrust, THRUST_PER_UNIT * active.min(thrusters) as f64));
    vars.push(var("vx", 0.0, SPEED_PER_NEWTON * max_thrust, SPEED_PER_NEWTON * THRUST_PER_UNIT * active as f64));
    vars.push(var("x", -1e5, 1e5, 0.0));
    vars.push(var("z", -1e4, 1e4, 0.0));
    let mut updates = BTreeMap::new();
    updates.insert("vz".to_string(), "0".to_string());
    updates.insert("distance_to_pipeline".to_string(), format!("distance_to_pipeline + {dt}*vz'"));
    updates.insert("thrust".to_string(), sum.join(" + "));
    updates.insert("vx".to_string(), format!("{SPEED_PER_NEWTON}*thrust'"));
    updates.insert("x".to_string(), format!("x + {dt}*vx'"));
    updates.insert("z".to_string(), format!("z + {dt}*vz'"));
    ModelFile { dt, vars, sys_actions: sys, env_actions: env, updates, noop: "noop".to_string() }
}

pub fn build_uuv_model(dt: f64, thrusters: usize, active: usize) -> TransitionSystem {
    TransitionSystem::from_file(uuv_model_file(dt, thrusters, active)).expect("built-in model is well formed")
}

/// `τ ∈ [5, 15]` s: optimal 5, minimal 15.
pub fn visibility_space() -> RequirementSpace {
    RequirementSpace::from_json_str(&format!(
        r#"{{"formula": "{VISIBILITY_REQUIREMENT}", "parameters": [
            {{"name": "tau", "kind": "time", "polarity": "strengthens_when_decreased", "min": 15, "opt": 5}}]}}"#
    ))
    .expect("built-in requirement is well formed")
}

/// `p ∈ [50, 100]` N: optimal 100, minimal 50.
pub fn thrust_space() -> RequirementSpace {
    RequirementSpace::from_json_str(&format!(
        r#"{{"formula": "{THRUST_REQUIREMENT}", "parameters": [
            {{"name": "p", "kind": "value", "polarity": "strengthens_when_increased", "min": 50, "opt": 100}}]}}"#
    ))
    .expect("built-in requirement is well formed")
}
