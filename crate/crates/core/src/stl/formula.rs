use std::fmt;

use super::term::Term;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Gt,
    Lt,
    Ge,
    Le,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Gt => ">",
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
        }
    }

    /// `+1` when the margin is `term - bound`, `-1` when it is `bound - term`.
    pub fn orientation(self) -> i8 {
        match self {
            Comparator::Gt | Comparator::Ge => 1,
            Comparator::Lt | Comparator::Le => -1,
        }
    }
}

/// Closed time window `[start, end]` in seconds, relative to the evaluation instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn is_valid(&self) -> bool {
        self.start.is_finite() && self.end.is_finite() && 0.0 <= self.start && self.start <= self.end
    }

    /// Sample offsets covered by the window for a given period.
    pub fn steps(&self, period: f64) -> (usize, usize) {
        let lo = (self.start / period - 1e-9).ceil().max(0.0) as usize;
        let hi = (self.end / period + 1e-9).floor().max(0.0) as usize;
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate<S> {
    pub term: Term<S>,
    pub cmp: Comparator,
    pub bound: S,
}

impl<S: Scalar> Predicate<S> {
    /// Signed margin for an evaluated term value.
    pub fn margin(&self, term_value: S) -> S {
        if self.cmp.orientation() > 0 {
            term_value - self.bound
        } else {
            self.bound - term_value
        }
    }
}

/// STL expression tree. `Or` and `Implies` are kept for printing but evaluate
/// through their rewrites `¬(¬φ ∧ ¬ψ)` and `¬φ ∨ ψ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula<S> {
    Pred(Predicate<S>),
    Not(Box<Formula<S>>),
    And(Box<Formula<S>>, Box<Formula<S>>),
    Or(Box<Formula<S>>, Box<Formula<S>>),
    Implies(Box<Formula<S>>, Box<Formula<S>>),
    Until(Interval, Box<Formula<S>>, Box<Formula<S>>),
    Eventually(Interval, Box<Formula<S>>),
    Globally(Interval, Box<Formula<S>>),
}

impl<S: Scalar> Formula<S> {
    pub fn pred(term: Term<S>, cmp: Comparator, bound: S) -> Self {
        Formula::Pred(Predicate { term, cmp, bound })
    }

    pub fn not(f: Self) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Self, b: Self) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Self, b: Self) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Self, b: Self) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn until(i: Interval, a: Self, b: Self) -> Self {
        Formula::Until(i, Box::new(a), Box::new(b))
    }

    pub fn eventually(i: Interval, f: Self) -> Self {
        Formula::Eventually(i, Box::new(f))
    }

    pub fn globally(i: Interval, f: Self) -> Self {
        Formula::Globally(i, Box::new(f))
    }

    /// Length of signal (seconds after `t`) needed to evaluate at `t`.
    pub fn horizon(&self) -> f64 {
        match self {
            Formula::Pred(_) => 0.0,
            Formula::Not(f) => f.horizon(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => a.horizon().max(b.horizon()),
            Formula::Until(i, a, b) => i.end + a.horizon().max(b.horizon()),
            Formula::Eventually(i, f) | Formula::Globally(i, f) => i.end + f.horizon(),
        }
    }

    /// Horizon in whole samples for a given sample period.
    pub fn horizon_steps(&self, period: f64) -> usize {
        match self {
            Formula::Pred(_) => 0,
            Formula::Not(f) => f.horizon_steps(period),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.horizon_steps(period).max(b.horizon_steps(period))
            }
            Formula::Until(i, a, b) => {
                i.steps(period).1 + a.horizon_steps(period).max(b.horizon_steps(period))
            }
            Formula::Eventually(i, f) | Formula::Globally(i, f) => i.steps(period).1 + f.horizon_steps(period),
        }
    }

    pub fn intervals_valid(&self) -> bool {
        match self {
            Formula::Pred(_) => true,
            Formula::Not(f) => f.intervals_valid(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.intervals_valid() && b.intervals_valid()
            }
            Formula::Until(i, a, b) => i.is_valid() && a.intervals_valid() && b.intervals_valid(),
            Formula::Eventually(i, f) | Formula::Globally(i, f) => i.is_valid() && f.intervals_valid(),
        }
    }

    /// Variable names referenced by predicates, sorted and deduplicated.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Formula::Pred(p) => out.extend(p.term.variables().map(str::to_string)),
            Formula::Not(f) | Formula::Eventually(_, f) | Formula::Globally(_, f) => f.collect_vars(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Until(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn cast<T: Scalar>(&self) -> Formula<T> {
        let b = |f: &Formula<S>| Box::new(f.cast::<T>());
        match self {
            Formula::Pred(p) => Formula::Pred(Predicate {
                term: p.term.cast(),
                cmp: p.cmp,
                bound: T::of(p.bound.as_f64()),
            }),
            Formula::Not(f) => Formula::Not(b(f)),
            Formula::And(x, y) => Formula::And(b(x), b(y)),
            Formula::Or(x, y) => Formula::Or(b(x), b(y)),
            Formula::Implies(x, y) => Formula::Implies(b(x), b(y)),
            Formula::Until(i, x, y) => Formula::Until(*i, b(x), b(y)),
            Formula::Eventually(i, f) => Formula::Eventually(*i, b(f)),
            Formula::Globally(i, f) => Formula::Globally(*i, b(f)),
        }
    }
}

impl<S: Scalar> fmt::Display for Formula<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Pred(p) => write!(f, "{} {} {}", p.term, p.cmp.symbol(), p.bound),
            Formula::Not(x) => write!(f, "!({x})"),
            Formula::And(a, b) => write!(f, "({a}) && ({b})"),
            Formula::Or(a, b) => write!(f, "({a}) || ({b})"),
            Formula::Implies(a, b) => write!(f, "({a}) -> ({b})"),
            Formula::Until(i, a, b) => write!(f, "({a}) U[{},{}] ({b})", i.start, i.end),
            Formula::Eventually(i, x) => write!(f, "F[{},{}]({x})", i.start, i.end),
            Formula::Globally(i, x) => write!(f, "G[{},{}]({x})", i.start, i.end),
        }
    }
}
