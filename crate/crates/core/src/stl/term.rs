use std::collections::BTreeMap;
use std::fmt;

use crate::Scalar;

/// Linear form `Σ cᵢ·vᵢ + constant` over named signal variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Term<S> {
    pub coefficients: BTreeMap<String, S>,
    pub constant: S,
}

impl<S: Scalar> Term<S> {
    pub fn var(name: &str) -> Self {
        let mut coefficients = BTreeMap::new();
        coefficients.insert(name.to_string(), S::one());
        Self { coefficients, constant: S::zero() }
    }

    pub fn constant(c: S) -> Self {
        Self { coefficients: BTreeMap::new(), constant: c }
    }

    pub fn add_var(&mut self, name: &str, coef: S) {
        *self.coefficients.entry(name.to_string()).or_insert_with(S::zero) += coef;
    }

    pub fn scaled(&self, k: S) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|(n, c)| (n.clone(), *c * k)).collect(),
            constant: self.constant * k,
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.coefficients.keys().map(String::as_str)
    }

    /// Evaluates the term with a variable lookup; `None` if a variable is unknown.
    pub fn eval_with<F: Fn(&str) -> Option<S>>(&self, lookup: F) -> Option<S> {
        let mut acc = self.constant;
        for (name, c) in &self.coefficients {
            acc += *c * lookup(name)?;
        }
        Some(acc)
    }

    pub fn cast<T: Scalar>(&self) -> Term<T> {
        Term {
            coefficients: self
                .coefficients
                .iter()
                .map(|(n, c)| (n.clone(), T::of(c.as_f64())))
                .collect(),
            constant: T::of(self.constant.as_f64()),
        }
    }
}

impl<S: Scalar> fmt::Display for Term<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, c) in &self.coefficients {
            let c = *c;
            let neg = c < S::zero();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            if mag == S::one() {
                write!(f, "{name}")?;
            } else {
                write!(f, "{mag}*{name}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)?;
        } else if self.constant != S::zero() {
            let neg = self.constant < S::zero();
            write!(f, " {} {}", if neg { '-' } else { '+' }, self.constant.abs())?;
        }
        Ok(())
    }
}
