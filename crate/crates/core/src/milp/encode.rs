//! Linearization of STL robustness over decision signals.
//!
//! Each subformula at each instant becomes an affine expression with a known
//! range. Minima and maxima become big-M gadgets with one-hot selector binaries.
//! A gadget may be one-sided: when the caller only needs `r ≤ ρ` (r is pushed up,
//! or constrained `r ≥ 0`) minima are exact without binaries, and dually for
//! `r ≥ ρ`.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::expr::LinExpr;
use super::problem::{Definition, MilpProblem, Sense};
use crate::pstl::{PstlFormula, Slot, SlotInterval};
use crate::stl::{Formula, Interval};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodeError {
    #[error("formula needs sample {needed} but the decision signal ends at {available}")]
    HorizonOverflow { needed: usize, available: usize },
    #[error("decision signal has no variable `{0}`")]
    UnknownVariable(String),
    #[error("parameter `${0}` has no binding")]
    UnboundParameter(String),
    #[error("time parameter `${0}` must be bound to a constant")]
    TimeParameterNotConstant(String),
    #[error("invalid interval [{0},{1}]")]
    InvalidInterval(f64, f64),
    #[error("unbounded quantity in encoding")]
    Unbounded,
}

/// Affine expression together with an interval enclosing all its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounded<S> {
    pub expr: LinExpr<S>,
    pub lo: S,
    pub hi: S,
}

impl<S: Scalar> Bounded<S> {
    pub fn constant(c: S) -> Self {
        Self { expr: LinExpr::constant(c), lo: c, hi: c }
    }

    fn neg(&self) -> Self {
        Self { expr: -self.expr.clone(), lo: -self.hi, hi: -self.lo }
    }

    fn as_constant(&self) -> Option<S> {
        self.expr.as_constant()
    }
}

/// Decision signal: one bounded expression per sample and variable.
#[derive(Debug, Clone)]
pub struct SignalVars<S> {
    pub names: Vec<String>,
    pub period: f64,
    pub samples: Vec<Vec<Bounded<S>>>,
}

impl<S: Scalar> SignalVars<S> {
    fn lookup(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Which inequality between the encoded `r` and the true robustness `ρ` must hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `r = ρ`.
    Exact,
    /// `r ≤ ρ`.
    Below,
    /// `r ≥ ρ`.
    Above,
}

impl Side {
    fn flip(self) -> Self {
        match self {
            Side::Exact => Side::Exact,
            Side::Below => Side::Above,
            Side::Above => Side::Below,
        }
    }
}

/// Binding of a formula parameter inside the MILP.
#[derive(Debug, Clone)]
pub enum ParamValue<S> {
    Const(f64),
    Var(Bounded<S>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeStats {
    pub gadgets: usize,
    pub binaries: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Agg {
    Min,
    Max,
}

pub struct Encoder<'a, S: Scalar> {
    pub problem: &'a mut MilpProblem<S>,
    signal: &'a SignalVars<S>,
    params: &'a BTreeMap<String, ParamValue<S>>,
    memo: HashMap<(usize, usize, Side), Bounded<S>>,
    pub stats: EncodeStats,
    tag: String,
}

impl<'a, S: Scalar> Encoder<'a, S> {
    pub fn new(
        problem: &'a mut MilpProblem<S>,
        signal: &'a SignalVars<S>,
        params: &'a BTreeMap<String, ParamValue<S>>,
        tag: &str,
    ) -> Self {
        Self { problem, signal, params, memo: HashMap::new(), stats: EncodeStats::default(), tag: tag.to_string() }
    }

    /// Robustness of `f` at sample `t`, related to the true value per `side`.
    pub fn encode(&mut self, f: &PstlFormula, t: usize, side: Side) -> Result<Bounded<S>, EncodeError> {
        let key = (f as *const PstlFormula as usize, t, side);
        if let Some(b) = self.memo.get(&key) {
            return Ok(b.clone());
        }
        let out = match f {
            PstlFormula::Pred { term, cmp, bound } => {
                if t >= self.signal.samples.len() {
                    return Err(EncodeError::HorizonOverflow { needed: t, available: self.signal.samples.len() - 1 });
                }
                let mut acc = Bounded::constant(S::of(term.constant));
                for (name, c) in &term.coefficients {
                    let v = self.signal.lookup(name).ok_or_else(|| EncodeError::UnknownVariable(name.clone()))?;
                    acc = add_scaled(acc, &self.signal.samples[t][v], S::of(*c));
                }
                let b = match bound {
                    Slot::Const(c) => Bounded::constant(S::of(*c)),
                    Slot::Param(p) => match self.params.get(p) {
                        Some(ParamValue::Const(c)) => Bounded::constant(S::of(*c)),
                        Some(ParamValue::Var(b)) => b.clone(),
                        None => return Err(EncodeError::UnboundParameter(p.clone())),
                    },
                };
                if cmp.orientation() > 0 {
                    add_scaled(acc, &b, -S::one())
                } else {
                    add_scaled(b, &acc, -S::one())
                }
            }
            PstlFormula::Not(x) => self.encode(x, t, side.flip())?.neg(),
            PstlFormula::And(..) => {
                let mut parts = Vec::new();
                flatten(f, Agg::Min, &mut parts);
                let items = parts.iter().map(|p| self.encode_signed(p, t, side)).collect::<Result<Vec<_>, _>>()?;
                self.aggregate(Agg::Min, items, side)?
            }
            PstlFormula::Or(..) | PstlFormula::Implies(..) => {
                let mut parts = Vec::new();
                flatten(f, Agg::Max, &mut parts);
                let items = parts.iter().map(|p| self.encode_signed(p, t, side)).collect::<Result<Vec<_>, _>>()?;
                self.aggregate(Agg::Max, items, side)?
            }
            PstlFormula::Globally(iv, x) | PstlFormula::Eventually(iv, x) => {
                let agg = if matches!(f, PstlFormula::Globally(..)) { Agg::Min } else { Agg::Max };
                let (lo, hi) = self.window(iv)?;
                self.check_len(t + hi)?;
                let items = (t + lo..=t + hi).map(|k| self.encode(x, k, side)).collect::<Result<Vec<_>, _>>()?;
                self.aggregate(agg, items, side)?
            }
            PstlFormula::Until(iv, a, b) => {
                let (lo, hi) = self.window(iv)?;
                self.check_len(t + hi)?;
                let mut outer = Vec::new();
                for tp in t + lo..=t + hi {
                    let mut inner = vec![self.encode(b, tp, side)?];
                    for k in t..=tp {
                        inner.push(self.encode(a, k, side)?);
                    }
                    outer.push(self.aggregate(Agg::Min, inner, side)?);
                }
                self.aggregate(Agg::Max, outer, side)?
            }
        };
        self.memo.insert(key, out.clone());
        Ok(out)
    }

    fn encode_signed(&mut self, p: &Part<'_>, t: usize, side: Side) -> Result<Bounded<S>, EncodeError> {
        if p.negated {
            Ok(self.encode(p.f, t, side.flip())?.neg())
        } else {
            self.encode(p.f, t, side)
        }
    }

    fn check_len(&self, needed: usize) -> Result<(), EncodeError> {
        let available = self.signal.samples.len() - 1;
        if needed > available {
            return Err(EncodeError::HorizonOverflow { needed, available });
        }
        Ok(())
    }

    fn window(&self, iv: &SlotInterval) -> Result<(usize, usize), EncodeError> {
        let resolve = |s: &Slot| -> Result<f64, EncodeError> {
            match s {
                Slot::Const(c) => Ok(*c),
                Slot::Param(p) => match self.params.get(p) {
                    Some(ParamValue::Const(c)) => Ok(*c),
                    Some(ParamValue::Var(_)) => Err(EncodeError::TimeParameterNotConstant(p.clone())),
                    None => Err(EncodeError::UnboundParameter(p.clone())),
                },
            }
        };
        let iv = Interval::new(resolve(&iv.start)?, resolve(&iv.end)?);
        if !iv.is_valid() {
            return Err(EncodeError::InvalidInterval(iv.start, iv.end));
        }
        Ok(iv.steps(self.signal.period))
    }

    fn aggregate(&mut self, agg: Agg, items: Vec<Bounded<S>>, side: Side) -> Result<Bounded<S>, EncodeError> {
        // orient everything as a max: min(x) = -max(-x)
        let items: Vec<Bounded<S>> = match agg {
            Agg::Max => items,
            Agg::Min => items.iter().map(Bounded::neg).collect(),
        };
        let side = if agg == Agg::Min { side.flip() } else { side };
        let r = self.max_gadget(items, side)?;
        Ok(if agg == Agg::Min { r.neg() } else { r })
    }

    fn max_gadget(&mut self, items: Vec<Bounded<S>>, side: Side) -> Result<Bounded<S>, EncodeError> {
        if items.iter().any(|b| !b.lo.is_finite() || !b.hi.is_finite()) {
            return Err(EncodeError::Unbounded);
        }
        // fold constants into one, then drop items that can never be the maximum
        let mut kept: Vec<Bounded<S>> = Vec::new();
        let mut best_const: Option<S> = None;
        for b in items {
            match b.as_constant() {
                Some(c) => best_const = Some(best_const.map_or(c, |d: S| d.max(c))),
                None => kept.push(b),
            }
        }
        if let Some(c) = best_const {
            kept.push(Bounded::constant(c));
        }
        let floor = kept.iter().map(|b| b.lo).fold(S::neg_infinity(), S::max);
        let mut items: Vec<Bounded<S>> = Vec::new();
        for b in kept {
            if b.hi < floor || (b.hi == floor && b.lo < floor) {
                continue;
            }
            if items.iter().any(|k| k.expr == b.expr) {
                continue;
            }
            items.push(b);
        }
        if items.len() == 1 {
            return Ok(items.pop().unwrap());
        }
        let lo = items.iter().map(|b| b.lo).fold(S::neg_infinity(), S::max);
        let hi = items.iter().map(|b| b.hi).fold(S::neg_infinity(), S::max);
        let id = self.stats.gadgets;
        self.stats.gadgets += 1;
        let r = self.problem.add_continuous(format!("{}r{id}", self.tag), lo, hi);
        let rv = LinExpr::var(r);
        if side != Side::Below {
            for (k, b) in items.iter().enumerate() {
                self.problem.relate(format!("{}g{id}_ge{k}", self.tag), rv.clone(), Sense::Ge, b.expr.clone());
            }
        }
        let mut selectors = Vec::new();
        if side != Side::Above {
            let mut onehot = LinExpr::default();
            for (k, b) in items.iter().enumerate() {
                let z = self.problem.add_binary(format!("{}z{id}_{k}", self.tag));
                selectors.push(z);
                self.stats.binaries += 1;
                onehot.add_term(z, S::one());
                // r <= e_k + M (1 - z_k)
                let m = hi - b.lo + S::one();
                let mut rhs = b.expr.clone() + m;
                rhs.add_term(z, -m);
                self.problem.relate(format!("{}g{id}_le{k}", self.tag), rv.clone(), Sense::Le, rhs);
            }
            self.problem.add_constraint(format!("{}g{id}_one", self.tag), onehot, Sense::Eq, S::one());
        }
        let items = items.into_iter().map(|b| b.expr).collect();
        self.problem.definitions.push(Definition::Max { out: r, items, selectors });
        Ok(Bounded { expr: rv, lo, hi })
    }
}

fn add_scaled<S: Scalar>(mut acc: Bounded<S>, b: &Bounded<S>, k: S) -> Bounded<S> {
    acc.expr.add_scaled(&b.expr, k);
    if k >= S::zero() {
        acc.lo += k * b.lo;
        acc.hi += k * b.hi;
    } else {
        acc.lo += k * b.hi;
        acc.hi += k * b.lo;
    }
    acc
}

struct Part<'f> {
    f: &'f PstlFormula,
    negated: bool,
}

fn flatten<'f>(f: &'f PstlFormula, agg: Agg, out: &mut Vec<Part<'f>>) {
    match (f, agg) {
        (PstlFormula::And(a, b), Agg::Min) | (PstlFormula::Or(a, b), Agg::Max) => {
            flatten(a, agg, out);
            flatten(b, agg, out);
        }
        (PstlFormula::Implies(a, b), Agg::Max) => {
            out.push(Part { f: a, negated: true });
            flatten(b, agg, out);
        }
        _ => out.push(Part { f, negated: false }),
    }
}

/// Encodes `ρ(f, s, t)` for a parameter-free formula; returns the bounded
/// robustness expression and gadget statistics.
pub fn encode_robustness<S: Scalar>(
    problem: &mut MilpProblem<S>,
    f: &Formula<f64>,
    signal: &SignalVars<S>,
    t: usize,
    side: Side,
) -> Result<(Bounded<S>, EncodeStats), EncodeError> {
    let pf = PstlFormula::from_stl(f);
    let params = BTreeMap::new();
    let mut enc = Encoder::new(problem, signal, &params, "");
    let r = enc.encode(&pf, t, side)?;
    Ok((r, enc.stats))
}
