use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::Scalar;

/// Index of a variable inside a [`MilpProblem`](super::MilpProblem).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Affine expression `Σ cᵢ·xᵢ + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinExpr<S> {
    pub terms: BTreeMap<VarId, S>,
    pub constant: S,
}

impl<S: Scalar> Default for LinExpr<S> {
    fn default() -> Self {
        Self::constant(S::zero())
    }
}

impl<S: Scalar> LinExpr<S> {
    pub fn constant(c: S) -> Self {
        Self { terms: BTreeMap::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        Self::term(v, S::one())
    }

    pub fn term(v: VarId, c: S) -> Self {
        let mut e = Self::constant(S::zero());
        e.add_term(v, c);
        e
    }

    pub fn add_term(&mut self, v: VarId, c: S) {
        let slot = self.terms.entry(v).or_insert_with(S::zero);
        *slot += c;
        if *slot == S::zero() {
            self.terms.remove(&v);
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr<S>, k: S) {
        for (v, c) in &other.terms {
            self.add_term(*v, *c * k);
        }
        self.constant += other.constant * k;
    }

    pub fn scaled(&self, k: S) -> Self {
        let mut out = Self::constant(S::zero());
        out.add_scaled(self, k);
        out
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<S> {
        self.is_constant().then_some(self.constant)
    }

    pub fn eval(&self, x: &[S]) -> S {
        self.terms.iter().fold(self.constant, |acc, (v, c)| acc + *c * x[v.0])
    }

    /// Range of the expression given per-variable bounds.
    pub fn bounds(&self, lo: &[S], hi: &[S]) -> (S, S) {
        let (mut a, mut b) = (self.constant, self.constant);
        for (v, c) in &self.terms {
            if *c >= S::zero() {
                a += *c * lo[v.0];
                b += *c * hi[v.0];
            } else {
                a += *c * hi[v.0];
                b += *c * lo[v.0];
            }
        }
        (a, b)
    }

    pub fn cast<T: Scalar>(&self) -> LinExpr<T> {
        LinExpr {
            terms: self.terms.iter().map(|(v, c)| (*v, T::of(c.as_f64()))).collect(),
            constant: T::of(self.constant.as_f64()),
        }
    }
}

impl<S: Scalar> Add for LinExpr<S> {
    type Output = LinExpr<S>;
    fn add(mut self, rhs: Self) -> Self {
        self.add_scaled(&rhs, S::one());
        self
    }
}

impl<S: Scalar> Sub for LinExpr<S> {
    type Output = LinExpr<S>;
    fn sub(mut self, rhs: Self) -> Self {
        self.add_scaled(&rhs, -S::one());
        self
    }
}

impl<S: Scalar> Neg for LinExpr<S> {
    type Output = LinExpr<S>;
    fn neg(self) -> Self {
        self.scaled(-S::one())
    }
}

impl<S: Scalar> Mul<S> for LinExpr<S> {
    type Output = LinExpr<S>;
    fn mul(self, k: S) -> Self {
        self.scaled(k)
    }
}

impl<S: Scalar> Add<S> for LinExpr<S> {
    type Output = LinExpr<S>;
    fn add(mut self, k: S) -> Self {
        self.constant += k;
        self
    }
}
