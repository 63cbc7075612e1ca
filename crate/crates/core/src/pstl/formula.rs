use std::collections::BTreeMap;
use std::fmt;

use crate::stl::{Comparator, Formula, Interval, Predicate, Term};

use super::{PstlError, Valuation};

/// A numeric position in a parametric formula: either fixed or a named parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Slot {
    Const(f64),
    Param(String),
}

impl Slot {
    fn resolve(&self, nu: &Valuation) -> Result<f64, PstlError> {
        match self {
            Slot::Const(c) => Ok(*c),
            Slot::Param(p) => nu.get(p).ok_or_else(|| PstlError::MissingParameter(p.clone())),
        }
    }

    pub fn param(&self) -> Option<&str> {
        match self {
            Slot::Param(p) => Some(p),
            Slot::Const(_) => None,
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Const(c) => write!(f, "{c}"),
            Slot::Param(p) => write!(f, "${p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotInterval {
    pub start: Slot,
    pub end: Slot,
}

impl fmt::Display for SlotInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Predicate threshold, in signal units.
    Value,
    /// Interval endpoint, in seconds.
    Time,
}

/// Parametric STL: the STL tree with [`Slot`]s in place of thresholds and interval ends.
#[derive(Debug, Clone, PartialEq)]
pub enum PstlFormula {
    Pred { term: Term<f64>, cmp: Comparator, bound: Slot },
    Not(Box<PstlFormula>),
    And(Box<PstlFormula>, Box<PstlFormula>),
    Or(Box<PstlFormula>, Box<PstlFormula>),
    Implies(Box<PstlFormula>, Box<PstlFormula>),
    Until(SlotInterval, Box<PstlFormula>, Box<PstlFormula>),
    Eventually(SlotInterval, Box<PstlFormula>),
    Globally(SlotInterval, Box<PstlFormula>),
}

impl PstlFormula {
    /// Parameter-free lift of an STL formula.
    pub fn from_stl(f: &Formula<f64>) -> Self {
        let b = |x: &Formula<f64>| Box::new(Self::from_stl(x));
        let si = |i: &Interval| SlotInterval { start: Slot::Const(i.start), end: Slot::Const(i.end) };
        match f {
            Formula::Pred(p) => PstlFormula::Pred {
                term: p.term.clone(),
                cmp: p.cmp,
                bound: Slot::Const(p.bound),
            },
            Formula::Not(x) => PstlFormula::Not(b(x)),
            Formula::And(x, y) => PstlFormula::And(b(x), b(y)),
            Formula::Or(x, y) => PstlFormula::Or(b(x), b(y)),
            Formula::Implies(x, y) => PstlFormula::Implies(b(x), b(y)),
            Formula::Until(i, x, y) => PstlFormula::Until(si(i), b(x), b(y)),
            Formula::Eventually(i, x) => PstlFormula::Eventually(si(i), b(x)),
            Formula::Globally(i, x) => PstlFormula::Globally(si(i), b(x)),
        }
    }

    /// Parameters in order of first appearance (left to right), with the kind implied
    /// by their position. Fails if any parameter appears more than once.
    pub fn parameters(&self) -> Result<Vec<(String, ParamKind)>, PstlError> {
        let mut out: Vec<(String, ParamKind)> = Vec::new();
        self.walk_slots(&mut |slot, kind, is_start| {
            if let Slot::Param(p) = slot {
                if out.iter().any(|(n, _)| n == p) {
                    return Err(PstlError::RepeatedParameter(p.clone()));
                }
                if is_start {
                    return Err(PstlError::TimeParameterAsStart(p.clone()));
                }
                out.push((p.clone(), kind));
            }
            Ok(())
        })?;
        Ok(out)
    }

    fn walk_slots<F>(&self, visit: &mut F) -> Result<(), PstlError>
    where
        F: FnMut(&Slot, ParamKind, bool) -> Result<(), PstlError>,
    {
        match self {
            PstlFormula::Pred { bound, .. } => visit(bound, ParamKind::Value, false),
            PstlFormula::Not(x) => x.walk_slots(visit),
            PstlFormula::And(a, b) | PstlFormula::Or(a, b) | PstlFormula::Implies(a, b) => {
                a.walk_slots(visit)?;
                b.walk_slots(visit)
            }
            PstlFormula::Until(i, a, b) => {
                visit(&i.start, ParamKind::Time, true)?;
                visit(&i.end, ParamKind::Time, false)?;
                a.walk_slots(visit)?;
                b.walk_slots(visit)
            }
            PstlFormula::Eventually(i, x) | PstlFormula::Globally(i, x) => {
                visit(&i.start, ParamKind::Time, true)?;
                visit(&i.end, ParamKind::Time, false)?;
                x.walk_slots(visit)
            }
        }
    }

    /// `φ(ν(p))`: replaces every slot with its value.
    pub fn instantiate(&self, nu: &Valuation) -> Result<Formula<f64>, PstlError> {
        let b = |x: &PstlFormula| x.instantiate(nu).map(Box::new);
        let iv = |i: &SlotInterval| -> Result<Interval, PstlError> {
            let out = Interval::new(i.start.resolve(nu)?, i.end.resolve(nu)?);
            if !out.is_valid() {
                return Err(PstlError::IntervalInversion { start: out.start, end: out.end });
            }
            Ok(out)
        };
        Ok(match self {
            PstlFormula::Pred { term, cmp, bound } => Formula::Pred(Predicate {
                term: term.clone(),
                cmp: *cmp,
                bound: bound.resolve(nu)?,
            }),
            PstlFormula::Not(x) => Formula::Not(b(x)?),
            PstlFormula::And(x, y) => Formula::And(b(x)?, b(y)?),
            PstlFormula::Or(x, y) => Formula::Or(b(x)?, b(y)?),
            PstlFormula::Implies(x, y) => Formula::Implies(b(x)?, b(y)?),
            PstlFormula::Until(i, x, y) => Formula::Until(iv(i)?, b(x)?, b(y)?),
            PstlFormula::Eventually(i, x) => Formula::Eventually(iv(i)?, b(x)?),
            PstlFormula::Globally(i, x) => Formula::Globally(iv(i)?, b(x)?),
        })
    }

    /// Recovers the valuation under which `f` is an instantiation of this template.
    pub fn match_instance(&self, f: &Formula<f64>) -> Result<Valuation, PstlError> {
        let mut found = BTreeMap::new();
        self.match_into(f, &mut found)?;
        Ok(Valuation::from_map(found))
    }

    fn match_into(&self, f: &Formula<f64>, found: &mut BTreeMap<String, f64>) -> Result<(), PstlError> {
        fn slot(s: &Slot, v: f64, found: &mut BTreeMap<String, f64>) -> Result<(), PstlError> {
            match s {
                Slot::Const(c) if *c == v => Ok(()),
                Slot::Const(_) => Err(PstlError::NotAnInstance),
                Slot::Param(p) => {
                    if let Some(prev) = found.insert(p.clone(), v) {
                        if prev != v {
                            return Err(PstlError::NotAnInstance);
                        }
                    }
                    Ok(())
                }
            }
        }
        let iv = |i: &SlotInterval, j: &Interval, found: &mut BTreeMap<String, f64>| {
            slot(&i.start, j.start, found)?;
            slot(&i.end, j.end, found)
        };
        match (self, f) {
            (PstlFormula::Pred { term, cmp, bound }, Formula::Pred(p)) if *term == p.term && *cmp == p.cmp => {
                slot(bound, p.bound, found)
            }
            (PstlFormula::Not(x), Formula::Not(y)) => x.match_into(y, found),
            (PstlFormula::And(a, b), Formula::And(c, d))
            | (PstlFormula::Or(a, b), Formula::Or(c, d))
            | (PstlFormula::Implies(a, b), Formula::Implies(c, d)) => {
                a.match_into(c, found)?;
                b.match_into(d, found)
            }
            (PstlFormula::Until(i, a, b), Formula::Until(j, c, d)) => {
                iv(i, j, found)?;
                a.match_into(c, found)?;
                b.match_into(d, found)
            }
            (PstlFormula::Eventually(i, a), Formula::Eventually(j, c))
            | (PstlFormula::Globally(i, a), Formula::Globally(j, c)) => {
                iv(i, j, found)?;
                a.match_into(c, found)
            }
            _ => Err(PstlError::NotAnInstance),
        }
    }

    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            PstlFormula::Pred { term, .. } => out.extend(term.variables().map(str::to_string)),
            PstlFormula::Not(f) | PstlFormula::Eventually(_, f) | PstlFormula::Globally(_, f) => {
                f.collect_vars(out)
            }
            PstlFormula::And(a, b)
            | PstlFormula::Or(a, b)
            | PstlFormula::Implies(a, b)
            | PstlFormula::Until(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for PstlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PstlFormula::Pred { term, cmp, bound } => write!(f, "{term} {} {bound}", cmp.symbol()),
            PstlFormula::Not(x) => write!(f, "!({x})"),
            PstlFormula::And(a, b) => write!(f, "({a}) && ({b})"),
            PstlFormula::Or(a, b) => write!(f, "({a}) || ({b})"),
            PstlFormula::Implies(a, b) => write!(f, "({a}) -> ({b})"),
            PstlFormula::Until(i, a, b) => write!(f, "({a}) U{i} ({b})"),
            PstlFormula::Eventually(i, x) => write!(f, "F{i}({x})"),
            PstlFormula::Globally(i, x) => write!(f, "G{i}({x})"),
        }
    }
}
