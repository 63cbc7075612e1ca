//! Quantitative (robustness) semantics over sampled signals.
//!
//! Temporal windows are taken over sample instants. A formula evaluated at sample
//! `t` whose windows run past the last sample still yields a number, computed
//! over the samples that exist, but it is flagged as undefined.

use thiserror::Error;

use super::formula::{Formula, Interval};
use super::signal::Signal;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("formula refers to variable `{0}` which the signal does not carry")]
    UnknownVariable(String),
    #[error("invalid interval [{start},{end}]")]
    InvalidInterval { start: f64, end: f64 },
    #[error("sample index {index} out of range for signal of {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("robustness undefined: signal is shorter than the formula horizon ({needed} samples needed after t, {available} available)")]
    Undefined { needed: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessValue<S> {
    pub value: S,
    /// False when some window reached past the end of the signal.
    pub defined: bool,
}

impl<S: Scalar> RobustnessValue<S> {
    fn new(value: S, defined: bool) -> Self {
        Self { value, defined }
    }
}

type Trace<S> = Vec<RobustnessValue<S>>;

/// Robustness of `f` at every sample of `signal`.
pub fn robustness_trace<S: Scalar>(f: &Formula<S>, signal: &Signal<S>) -> Result<Trace<S>, EvalError> {
    let n = signal.len();
    let dt = signal.sample_period();
    Ok(match f {
        Formula::Pred(p) => {
            let mut cols = Vec::new();
            for (name, c) in &p.term.coefficients {
                let k = signal.var_index(name).ok_or_else(|| EvalError::UnknownVariable(name.clone()))?;
                cols.push((k, *c));
            }
            (0..n)
                .map(|i| {
                    let row = signal.sample(i);
                    let v = cols.iter().fold(p.term.constant, |acc, &(k, c)| acc + c * row[k]);
                    RobustnessValue::new(p.margin(v), true)
                })
                .collect()
        }
        Formula::Not(x) => robustness_trace(x, signal)?
            .into_iter()
            .map(|r| RobustnessValue::new(-r.value, r.defined))
            .collect(),
        Formula::And(a, b) => zip(robustness_trace(a, signal)?, robustness_trace(b, signal)?, |x, y| x.min(y)),
        Formula::Or(a, b) => zip(robustness_trace(a, signal)?, robustness_trace(b, signal)?, |x, y| x.max(y)),
        Formula::Implies(a, b) => {
            zip(robustness_trace(a, signal)?, robustness_trace(b, signal)?, |x, y| (-x).max(y))
        }
        Formula::Eventually(iv, x) => {
            let (lo, hi) = window(iv, dt)?;
            let child = robustness_trace(x, signal)?;
            sweep(&child, lo, hi, S::neg_infinity(), |a, b| a.max(b))
        }
        Formula::Globally(iv, x) => {
            let (lo, hi) = window(iv, dt)?;
            let child = robustness_trace(x, signal)?;
            sweep(&child, lo, hi, S::infinity(), |a, b| a.min(b))
        }
        Formula::Until(iv, a, b) => {
            let (lo, hi) = window(iv, dt)?;
            let left = robustness_trace(a, signal)?;
            let right = robustness_trace(b, signal)?;
            (0..n)
                .map(|t| {
                    let mut best = S::neg_infinity();
                    let mut defined = t + hi < n;
                    let mut run_min = S::infinity();
                    for (tp, l) in left.iter().enumerate().take(n.min(t + hi + 1)).skip(t) {
                        run_min = run_min.min(l.value);
                        if tp >= t + lo {
                            defined &= l.defined && right[tp].defined;
                            best = best.max(run_min.min(right[tp].value));
                        } else {
                            defined &= l.defined;
                        }
                    }
                    RobustnessValue::new(best, defined)
                })
                .collect()
        }
    })
}

fn window(iv: &Interval, dt: f64) -> Result<(usize, usize), EvalError> {
    if !iv.is_valid() {
        return Err(EvalError::InvalidInterval { start: iv.start, end: iv.end });
    }
    Ok(iv.steps(dt))
}

fn zip<S: Scalar>(a: Trace<S>, b: Trace<S>, op: impl Fn(S, S) -> S) -> Trace<S> {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| RobustnessValue::new(op(x.value, y.value), x.defined && y.defined))
        .collect()
}

fn sweep<S: Scalar>(child: &Trace<S>, lo: usize, hi: usize, unit: S, op: impl Fn(S, S) -> S) -> Trace<S> {
    let n = child.len();
    (0..n)
        .map(|t| {
            let mut acc = unit;
            let mut defined = t + hi < n;
            for r in child.iter().take(n.min(t + hi + 1)).skip(t + lo) {
                acc = op(acc, r.value);
                defined &= r.defined;
            }
            RobustnessValue::new(acc, defined)
        })
        .collect()
}

/// Robustness of `f` at sample `index`.
pub fn robustness<S: Scalar>(f: &Formula<S>, signal: &Signal<S>, index: usize) -> Result<RobustnessValue<S>, EvalError> {
    if index >= signal.len() {
        return Err(EvalError::IndexOutOfRange { index, len: signal.len() });
    }
    // only samples index..=index+horizon matter
    let h = f.horizon_steps(signal.sample_period());
    let tail = signal.suffix(index).and_then(|s| s.prefix(h + 1)).expect("index checked above");
    Ok(robustness_trace(f, &tail)?[0])
}

/// `signal, index ⊨ f`. A signal too short for the horizon is an error, not a verdict.
pub fn satisfies<S: Scalar>(f: &Formula<S>, signal: &Signal<S>, index: usize) -> Result<bool, EvalError> {
    let r = robustness(f, signal, index)?;
    if !r.defined {
        return Err(EvalError::Undefined {
            needed: f.horizon_steps(signal.sample_period()),
            available: signal.len() - 1 - index,
        });
    }
    Ok(r.value >= S::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse_stl;

    fn sig(name: &str, vals: &[f64]) -> Signal<f64> {
        Signal::from_values(name, 1.0, vals).unwrap()
    }

    #[test]
    fn predicate_margins() {
        let s = sig("x", &[3.0]);
        for (text, want) in [("x > 1", 2.0), ("x >= 1", 2.0), ("x < 1", -2.0), ("x <= 5", 2.0), ("2*x - 1 > 0", 5.0)] {
            let f = parse_stl::<f64>(text).unwrap();
            assert_eq!(robustness(&f, &s, 0).unwrap().value, want, "{text}");
        }
    }

    #[test]
    fn temporal_operators() {
        let s = sig("x", &[1.0, 4.0, -2.0, 3.0, 0.5]);
        let r = |text: &str, t| robustness(&parse_stl::<f64>(text).unwrap(), &s, t).unwrap();
        assert_eq!(r("F[0,2](x > 0)", 0).value, 4.0);
        assert_eq!(r("G[0,2](x > 0)", 0).value, -2.0);
        assert_eq!(r("G[1,2](x > 0)", 2).value, 0.5);
        assert!(r("G[0,2](x > 0)", 2).defined);
        let late = r("G[0,2](x > 0)", 3);
        assert!(!late.defined);
        assert_eq!(late.value, 0.5);
    }

    #[test]
    fn until_takes_prefix_minimum() {
        let mut s = Signal::new(
            1.0,
            0.0,
            vec!["a".into(), "b".into()],
            vec![vec![5.0, -1.0], vec![2.0, -3.0], vec![4.0, 6.0], vec![-1.0, 9.0]],
        )
        .unwrap();
        let f = parse_stl::<f64>("(a > 0) U[0,3] (b > 0)").unwrap();
        // t'=2: min(6, min(5,2,4)) = 2 ; t'=3: min(9, -1) = -1
        assert_eq!(robustness(&f, &s, 0).unwrap().value, 2.0);
        s.push(vec![0.0, 0.0]).unwrap();
        assert!(robustness(&f, &s, 0).unwrap().defined);
    }

    #[test]
    fn unknown_variable_and_undefined_are_errors() {
        let s = sig("x", &[1.0, 2.0]);
        let f = parse_stl::<f64>("y > 0").unwrap();
        assert_eq!(robustness(&f, &s, 0).unwrap_err(), EvalError::UnknownVariable("y".into()));
        let g = parse_stl::<f64>("G[0,5](x > 0)").unwrap();
        assert!(matches!(satisfies(&g, &s, 0), Err(EvalError::Undefined { .. })));
        assert!(matches!(robustness(&g, &s, 7), Err(EvalError::IndexOutOfRange { .. })));
    }

    #[test]
    fn boundary_zero_counts_as_satisfied() {
        let s = sig("x", &[1.0]);
        assert!(satisfies(&parse_stl::<f64>("x >= 1").unwrap(), &s, 0).unwrap());
        assert!(satisfies(&parse_stl::<f64>("x > 1").unwrap(), &s, 0).unwrap());
    }

    #[test]
    fn single_precision() {
        let s = Signal::<f32>::from_values("x", 0.5, &[1.0, 2.0, 3.0]).unwrap();
        let f = parse_stl::<f32>("F[0,1](x > 2.5)").unwrap();
        assert_eq!(robustness(&f, &s, 0).unwrap().value, 0.5f32);
    }
}
