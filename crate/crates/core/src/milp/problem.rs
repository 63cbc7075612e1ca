use std::fmt::Write as _;

use thiserror::Error;

use super::expr::{LinExpr, VarId};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("variable `{0}` has non-finite or inverted bounds")]
    BadBounds(String),
    #[error("constraint {0} refers to undeclared variable x{1}")]
    UndeclaredVariable(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Var<S> {
    pub name: String,
    pub kind: VarKind,
    pub lo: S,
    pub hi: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// `expr (sense) rhs`, with any constant in `expr` folded into `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<S> {
    pub name: String,
    pub expr: LinExpr<S>,
    pub sense: Sense,
    pub rhs: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

/// How an auxiliary variable follows from earlier ones. Recorded by the
/// encoders so that a point can be completed from the decision variables alone.
#[derive(Debug, Clone)]
pub enum Definition<S> {
    /// `out = max(items)`; the selector of the first maximal item is 1.
    Max { out: VarId, items: Vec<LinExpr<S>>, selectors: Vec<VarId> },
    /// `out = bin · expr`.
    Product { out: VarId, bin: VarId, expr: LinExpr<S> },
}

#[derive(Debug, Clone)]
pub struct MilpProblem<S> {
    pub vars: Vec<Var<S>>,
    pub constraints: Vec<Constraint<S>>,
    pub objective: LinExpr<S>,
    pub sense: ObjectiveSense,
    /// In creation order, each only refers to variables defined before it.
    pub definitions: Vec<Definition<S>>,
}

impl<S: Scalar> Default for MilpProblem<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> MilpProblem<S> {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: LinExpr::constant(S::zero()),
            sense: ObjectiveSense::Minimize,
            definitions: Vec::new(),
        }
    }

    /// Fills every defined variable of `x` from the others.
    pub fn complete(&self, x: &mut [S]) {
        for d in &self.definitions {
            match d {
                Definition::Max { out, items, selectors } => {
                    let mut best = 0;
                    let mut val = S::neg_infinity();
                    for (k, e) in items.iter().enumerate() {
                        let v = e.eval(x);
                        if v > val {
                            val = v;
                            best = k;
                        }
                    }
                    x[out.0] = val;
                    for (k, z) in selectors.iter().enumerate() {
                        x[z.0] = if k == best { S::one() } else { S::zero() };
                    }
                }
                Definition::Product { out, bin, expr } => x[out.0] = x[bin.0] * expr.eval(x),
            }
        }
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lo: S, hi: S) -> VarId {
        self.vars.push(Var { name: name.into(), kind: VarKind::Continuous, lo, hi });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.vars.push(Var { name: name.into(), kind: VarKind::Binary, lo: S::zero(), hi: S::one() });
        VarId(self.vars.len() - 1)
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, expr: LinExpr<S>, sense: Sense, rhs: S) {
        let rhs = rhs - expr.constant;
        let expr = LinExpr { terms: expr.terms, constant: S::zero() };
        self.constraints.push(Constraint { name: name.into(), expr, sense, rhs });
    }

    /// `a (sense) b` for two expressions.
    pub fn relate(&mut self, name: impl Into<String>, a: LinExpr<S>, sense: Sense, b: LinExpr<S>) {
        self.add_constraint(name, a - b, sense, S::zero());
    }

    pub fn set_objective(&mut self, sense: ObjectiveSense, expr: LinExpr<S>) {
        self.sense = sense;
        self.objective = expr;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn lower_bounds(&self) -> Vec<S> {
        self.vars.iter().map(|v| v.lo).collect()
    }

    pub fn upper_bounds(&self) -> Vec<S> {
        self.vars.iter().map(|v| v.hi).collect()
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        for v in &self.vars {
            if !v.lo.is_finite() || !v.hi.is_finite() || v.lo > v.hi {
                return Err(ProblemError::BadBounds(v.name.clone()));
            }
        }
        let n = self.vars.len();
        for (i, c) in self.constraints.iter().enumerate() {
            if let Some(v) = c.expr.terms.keys().find(|v| v.0 >= n) {
                return Err(ProblemError::UndeclaredVariable(i, v.0));
            }
        }
        if let Some(v) = self.objective.terms.keys().find(|v| v.0 >= n) {
            return Err(ProblemError::UndeclaredVariable(usize::MAX, v.0));
        }
        Ok(())
    }

    /// Largest violation of bounds, constraints and integrality at `x`.
    pub fn max_violation(&self, x: &[S]) -> S {
        let mut worst = S::zero();
        for (v, xi) in self.vars.iter().zip(x) {
            worst = worst.max(v.lo - *xi).max(*xi - v.hi);
            if v.kind == VarKind::Binary {
                worst = worst.max(xi.min(S::one() - *xi).abs());
            }
        }
        for c in &self.constraints {
            let lhs = c.expr.eval(x);
            let viol = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// CPLEX-LP style text dump.
    pub fn to_lp_string(&self) -> String {
        let name = |v: &VarId| sanitize(&self.vars[v.0].name, v.0);
        let expr = |e: &LinExpr<S>| {
            let mut s = String::new();
            for (i, (v, c)) in e.terms.iter().enumerate() {
                let c = c.as_f64();
                if i == 0 {
                    let _ = write!(s, "{} {}", fmt_num(c), name(v));
                } else if c < 0.0 {
                    let _ = write!(s, " - {} {}", fmt_num(-c), name(v));
                } else {
                    let _ = write!(s, " + {} {}", fmt_num(c), name(v));
                }
            }
            if s.is_empty() {
                s.push_str("0 x_dummy");
            }
            s
        };
        let mut out = String::new();
        out.push_str(match self.sense {
            ObjectiveSense::Minimize => "Minimize\n",
            ObjectiveSense::Maximize => "Maximize\n",
        });
        let _ = write!(out, " obj: {}", expr(&self.objective));
        if self.objective.constant != S::zero() {
            let _ = write!(out, " + {}", fmt_num(self.objective.constant.as_f64()));
        }
        out.push_str("\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = writeln!(
                out,
                " {}: {} {} {}",
                sanitize(&c.name, i),
                expr(&c.expr),
                c.sense.symbol(),
                fmt_num(c.rhs.as_f64())
            );
        }
        out.push_str("Bounds\n");
        for (i, v) in self.vars.iter().enumerate() {
            if v.kind == VarKind::Continuous {
                let _ = writeln!(
                    out,
                    " {} <= {} <= {}",
                    fmt_num(v.lo.as_f64()),
                    sanitize(&v.name, i),
                    fmt_num(v.hi.as_f64())
                );
            }
        }
        let bins: Vec<String> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, v)| sanitize(&v.name, i))
            .collect();
        if !bins.is_empty() {
            out.push_str("Binaries\n");
            for chunk in bins.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// LP-format names: alphanumerics and `_`, made unique by the index.
fn sanitize(name: &str, index: usize) -> String {
    let body: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    format!("{body}_{index}")
}
