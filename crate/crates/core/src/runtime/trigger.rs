//! Offline check of the quantified trigger conditions by bounded enumeration.

use thiserror::Error;

use crate::env::{ActionSequence, EnvError, TransitionSystem};
use crate::pstl::{PstlError, RequirementSpace};
use crate::stl::{robustness, EvalError, Formula};

/// Upper limit on enumerated (environment, system) sequence pairs.
pub const MAX_TRIGGER_LEAVES: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerMode {
    /// Some environment sequence makes `φ(ν_curr)` fail whatever the system does.
    Degrade,
    /// For every environment sequence some system sequence satisfies `φ(ν_curr)`.
    Recover,
}

#[derive(Debug, Error)]
pub enum TriggerError {
    #[error("depth {depth} needs {leaves} sequence pairs, limit is {limit}")]
    TooDeep { depth: usize, leaves: u128, limit: u128 },
    #[error(transparent)]
    Requirement(#[from] PstlError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Advances `digits` (little end first) in base `base`; false after the last combination.
fn odometer(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Robustness of `f` at 0 on the `depth`-step rollout. Windows past the end of
/// the rollout are cut to the samples available.
fn outcome(
    model: &TransitionSystem,
    f: &Formula<f64>,
    q0: &[f64],
    env: &[usize],
    sys: &[usize],
) -> Result<f64, TriggerError> {
    let mut seq = ActionSequence::new();
    for (e, a) in env.iter().zip(sys) {
        // env digit 0 means no environment action in that step
        let events = if *e == 0 { Vec::new() } else { vec![model.env_actions[e - 1].name.clone()] };
        seq.push(events, model.sys_actions[*a].name.clone());
    }
    let r = model.rollout(q0, &seq)?;
    Ok(robustness(f, &r.signal, 0)?.value)
}

/// Evaluates the degradation (`∃ env ∀ sys: violated`) or recovery
/// (`∀ env ∃ sys: satisfied`) condition over sequences of `depth` steps, each
/// step carrying at most one environment action.
pub fn check_trigger(
    space: &RequirementSpace,
    model: &TransitionSystem,
    q0: &[f64],
    mode: TriggerMode,
    depth: usize,
) -> Result<bool, TriggerError> {
    let f = space.phi_curr()?;
    let (ne, ns) = (model.env_actions.len() + 1, model.sys_actions.len());
    let leaves = (ne as u128).saturating_pow(depth as u32).saturating_mul((ns as u128).saturating_pow(depth as u32));
    if leaves > MAX_TRIGGER_LEAVES {
        return Err(TriggerError::TooDeep { depth, leaves, limit: MAX_TRIGGER_LEAVES });
    }
    let mut env = vec![0; depth];
    loop {
        let mut sys = vec![0; depth];
        let mut some_sat = false;
        loop {
            if outcome(model, &f, q0, &env, &sys)? >= 0.0 {
                some_sat = true;
                break;
            }
            if !odometer(&mut sys, ns) {
                break;
            }
        }
        match mode {
            TriggerMode::Degrade if !some_sat => return Ok(true),
            TriggerMode::Recover if !some_sat => return Ok(false),
            _ => {}
        }
        if !odometer(&mut env, ne) {
            break;
        }
    }
    Ok(mode == TriggerMode::Recover)
}
