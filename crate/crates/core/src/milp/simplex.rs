//! Dense bounded-variable simplex: two-phase primal for cold starts, dual for
//! re-optimizing after bound changes (branch and bound).

use super::expr::VarId;
use super::problem::{MilpProblem, ObjectiveSense, Sense};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum At {
    Lower,
    Upper,
    Basic,
}

/// Tableau `B⁻¹A` over structural, slack and artificial columns. Structural
/// column `j` holds `x_j − offset_j`.
#[derive(Debug, Clone)]
pub(crate) struct Tableau<S> {
    m: usize,
    n: usize,
    a: Vec<S>,
    beta: Vec<S>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    at: Vec<At>,
    lb: Vec<S>,
    ub: Vec<S>,
    cost: Vec<S>,
    d: Vec<S>,
    n_struct: usize,
    first_artificial: usize,
    offset: Vec<S>,
    obj_constant: S,
    obj_sign: S,
}

const NONE: usize = usize::MAX;

impl<S: Scalar> Tableau<S> {
    fn piv_tol() -> S {
        S::tolerance()
    }

    fn feas_tol() -> S {
        S::tolerance() * S::of(10.0)
    }

    pub(crate) fn build(p: &MilpProblem<S>, lo: &[S], hi: &[S]) -> Self {
        let ns = p.vars.len();
        let m = p.constraints.len();
        let n_slack = p.constraints.iter().filter(|c| c.sense != Sense::Eq).count();
        // rows whose slack can start basic need no artificial
        let mut rows: Vec<(Vec<(usize, S)>, S, Option<S>)> = Vec::with_capacity(m);
        for c in &p.constraints {
            let mut rhs = c.rhs;
            let mut coefs: Vec<(usize, S)> = Vec::with_capacity(c.expr.terms.len());
            for (v, k) in &c.expr.terms {
                rhs -= *k * lo[v.0];
                coefs.push((v.0, *k));
            }
            let mut slack = match c.sense {
                Sense::Le => Some(S::one()),
                Sense::Ge => Some(-S::one()),
                Sense::Eq => None,
            };
            if rhs < S::zero() {
                rhs = -rhs;
                for (_, k) in coefs.iter_mut() {
                    *k = -*k;
                }
                slack = slack.map(|s| -s);
            }
            rows.push((coefs, rhs, slack));
        }
        let n_art = rows.iter().filter(|r| r.2 != Some(S::one())).count();
        let n = ns + n_slack + n_art;
        let mut t = Tableau {
            m,
            n,
            a: vec![S::zero(); m * n],
            beta: vec![S::zero(); m],
            basis: vec![NONE; m],
            row_of: vec![NONE; n],
            at: vec![At::Lower; n],
            lb: vec![S::zero(); n],
            ub: vec![S::infinity(); n],
            cost: vec![S::zero(); n],
            d: vec![S::zero(); n],
            n_struct: ns,
            first_artificial: ns + n_slack,
            offset: lo.to_vec(),
            obj_constant: S::zero(),
            obj_sign: if p.sense == ObjectiveSense::Maximize { -S::one() } else { S::one() },
        };
        for j in 0..ns {
            t.ub[j] = hi[j] - lo[j];
        }
        let (mut next_slack, mut next_art) = (ns, ns + n_slack);
        for (i, (coefs, rhs, slack)) in rows.into_iter().enumerate() {
            for (j, k) in coefs {
                t.a[i * n + j] += k;
            }
            t.beta[i] = rhs;
            let basic = match slack {
                Some(s) => {
                    let col = next_slack;
                    next_slack += 1;
                    t.a[i * n + col] = s;
                    if s == S::one() {
                        Some(col)
                    } else {
                        None
                    }
                }
                None => None,
            };
            let col = basic.unwrap_or_else(|| {
                let col = next_art;
                next_art += 1;
                t.a[i * n + col] = S::one();
                col
            });
            t.basis[i] = col;
            t.row_of[col] = i;
            t.at[col] = At::Basic;
        }
        // phase-2 costs kept aside in `cost` once phase 1 ends
        let mut obj_constant = p.objective.constant;
        for (v, c) in &p.objective.terms {
            obj_constant += *c * lo[v.0];
        }
        t.obj_constant = obj_constant;
        t
    }

    fn val(&self, j: usize) -> S {
        match self.at[j] {
            At::Lower => self.lb[j],
            At::Upper => self.ub[j],
            At::Basic => self.beta[self.row_of[j]],
        }
    }

    fn set_costs(&mut self, cost: Vec<S>) {
        self.cost = cost;
        let n = self.n;
        for j in 0..n {
            self.d[j] = self.cost[j];
        }
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != S::zero() {
                let row = &self.a[i * n..(i + 1) * n];
                for (dj, aij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * *aij;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let p = self.a[r * n + q];
        let inv = S::one() / p;
        for v in &mut self.a[r * n..(r + 1) * n] {
            *v *= inv;
        }
        let (before, rest) = self.a.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        for row in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)) {
            let f = row[q];
            if f != S::zero() {
                for (x, y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * *y;
                }
                row[q] = S::zero();
            }
        }
        let f = self.d[q];
        if f != S::zero() {
            for (x, y) in self.d.iter_mut().zip(prow.iter()) {
                *x -= f * *y;
            }
            self.d[q] = S::zero();
        }
        let leaving = self.basis[r];
        self.row_of[leaving] = NONE;
        self.basis[r] = q;
        self.row_of[q] = r;
    }

    fn primal(&mut self, max_iter: usize) -> LpStatus {
        let n = self.n;
        let opt_tol = Self::feas_tol();
        let tie = S::tolerance();
        let bland_after = 2 * (self.m + n) + 100;
        for iter in 0..max_iter {
            let bland = iter > bland_after;
            let mut q = NONE;
            let mut score = S::zero();
            for j in 0..n {
                if self.at[j] == At::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let dj = self.d[j];
                let improving = (self.at[j] == At::Lower && dj < -opt_tol) || (self.at[j] == At::Upper && dj > opt_tol);
                if !improving {
                    continue;
                }
                if bland {
                    q = j;
                    break;
                }
                if dj.abs() > score {
                    score = dj.abs();
                    q = j;
                }
            }
            if q == NONE {
                return LpStatus::Optimal;
            }
            let dir = if self.at[q] == At::Lower { S::one() } else { -S::one() };
            let mut theta = self.ub[q] - self.lb[q];
            let mut leave = NONE;
            let mut leave_up = false;
            let mut best_alpha = S::zero();
            for i in 0..self.m {
                let alpha = dir * self.a[i * n + q];
                if alpha.abs() <= Self::piv_tol() {
                    continue;
                }
                let b = self.basis[i];
                let (t, up) = if alpha > S::zero() {
                    ((self.beta[i] - self.lb[b]).max(S::zero()) / alpha, false)
                } else {
                    if !self.ub[b].is_finite() {
                        continue;
                    }
                    ((self.ub[b] - self.beta[i]).max(S::zero()) / -alpha, true)
                };
                let better = if t < theta - tie {
                    true
                } else if t <= theta + tie && leave != NONE {
                    if bland {
                        b < self.basis[leave]
                    } else {
                        alpha.abs() > best_alpha
                    }
                } else {
                    false
                };
                if better {
                    theta = t;
                    leave = i;
                    leave_up = up;
                    best_alpha = alpha.abs();
                }
            }
            if !theta.is_finite() {
                return LpStatus::Unbounded;
            }
            let entering_val = self.val(q) + dir * theta;
            if theta != S::zero() {
                for i in 0..self.m {
                    let aiq = self.a[i * n + q];
                    if aiq != S::zero() {
                        self.beta[i] -= dir * theta * aiq;
                    }
                }
            }
            if leave == NONE {
                self.at[q] = if self.at[q] == At::Lower { At::Upper } else { At::Lower };
                continue;
            }
            let b = self.basis[leave];
            self.at[b] = if leave_up { At::Upper } else { At::Lower };
            self.pivot(leave, q);
            self.beta[leave] = entering_val;
            self.at[q] = At::Basic;
        }
        LpStatus::IterationLimit
    }

    fn dual(&mut self, max_iter: usize) -> LpStatus {
        let n = self.n;
        let feas = Self::feas_tol();
        let bland_after = 2 * (self.m + n) + 100;
        for iter in 0..max_iter {
            let bland = iter > bland_after;
            let mut r = NONE;
            let mut worst = feas;
            for i in 0..self.m {
                let b = self.basis[i];
                let inf = if self.beta[i] < self.lb[b] - feas {
                    self.lb[b] - self.beta[i]
                } else if self.beta[i] > self.ub[b] + feas {
                    self.beta[i] - self.ub[b]
                } else {
                    S::zero()
                };
                if inf > worst {
                    worst = inf;
                    r = i;
                    if bland {
                        break;
                    }
                }
            }
            if r == NONE {
                return LpStatus::Optimal;
            }
            let b = self.basis[r];
            let up = self.beta[r] > self.ub[b];
            let mut q = NONE;
            let mut ratio = S::infinity();
            let mut best_alpha = S::zero();
            for j in 0..n {
                if self.at[j] == At::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let arj = self.a[r * n + j];
                if arj.abs() <= Self::piv_tol() {
                    continue;
                }
                let eligible = match (self.at[j], up) {
                    (At::Lower, false) => arj < S::zero(),
                    (At::Upper, false) => arj > S::zero(),
                    (At::Lower, true) => arj > S::zero(),
                    (At::Upper, true) => arj < S::zero(),
                    _ => false,
                };
                if !eligible {
                    continue;
                }
                let t = self.d[j].abs() / arj.abs();
                let better = t < ratio - S::tolerance()
                    || (t <= ratio + S::tolerance() && !bland && arj.abs() > best_alpha);
                if better {
                    ratio = t;
                    q = j;
                    best_alpha = arj.abs();
                }
            }
            if q == NONE {
                return LpStatus::Infeasible;
            }
            let target = if up { self.ub[b] } else { self.lb[b] };
            let delta = (self.beta[r] - target) / self.a[r * n + q];
            let entering_val = self.val(q) + delta;
            for i in 0..self.m {
                let aiq = self.a[i * n + q];
                if aiq != S::zero() {
                    self.beta[i] -= aiq * delta;
                }
            }
            self.at[b] = if up { At::Upper } else { At::Lower };
            self.pivot(r, q);
            self.beta[r] = entering_val;
            self.at[q] = At::Basic;
        }
        LpStatus::IterationLimit
    }

    fn iter_limit(&self) -> usize {
        50 * (self.m + self.n) + 1000
    }

    fn phase2_costs(&self, p: &MilpProblem<S>) -> Vec<S> {
        let mut c = vec![S::zero(); self.n];
        for (v, k) in &p.objective.terms {
            c[v.0] = self.obj_sign * *k;
        }
        c
    }

    /// Cold two-phase solve.
    pub(crate) fn solve(&mut self, p: &MilpProblem<S>) -> LpStatus {
        if self.first_artificial < self.n {
            let mut c1 = vec![S::zero(); self.n];
            for c in c1.iter_mut().skip(self.first_artificial) {
                *c = S::one();
            }
            self.set_costs(c1);
            let st = self.primal(self.iter_limit());
            if st != LpStatus::Optimal {
                return st;
            }
            let infeas: S = (self.first_artificial..self.n).map(|j| self.val(j)).sum();
            if infeas > Self::feas_tol() * S::of((1 + self.m) as f64) {
                return LpStatus::Infeasible;
            }
            for j in self.first_artificial..self.n {
                self.ub[j] = S::zero();
                if self.at[j] == At::Upper {
                    self.at[j] = At::Lower;
                }
            }
        }
        self.set_costs(self.phase2_costs(p));
        self.primal(self.iter_limit())
    }

    /// Changes the bounds on structural variable `v` (original coordinates).
    pub(crate) fn set_bounds(&mut self, v: VarId, lo: S, hi: S) {
        let j = v.0;
        let (nl, nu) = (lo - self.offset[j], hi - self.offset[j]);
        if self.at[j] == At::Basic {
            self.lb[j] = nl;
            self.ub[j] = nu;
            return;
        }
        let old = self.val(j);
        self.lb[j] = nl;
        self.ub[j] = nu;
        if nl == nu {
            self.at[j] = if self.d[j] >= S::zero() { At::Lower } else { At::Upper };
        }
        let new = self.val(j);
        if new != old {
            let n = self.n;
            for i in 0..self.m {
                let aij = self.a[i * n + j];
                if aij != S::zero() {
                    self.beta[i] -= aij * (new - old);
                }
            }
        }
    }

    fn dual_feasible(&self) -> bool {
        let tol = Self::feas_tol();
        (0..self.n).all(|j| match self.at[j] {
            At::Basic => true,
            _ if self.lb[j] == self.ub[j] => true,
            At::Lower => self.d[j] >= -tol,
            At::Upper => self.d[j] <= tol,
        })
    }

    /// Re-optimizes after bound changes, starting from an optimal basis.
    pub(crate) fn reoptimize(&mut self) -> LpStatus {
        if !self.dual_feasible() {
            return LpStatus::IterationLimit;
        }
        match self.dual(self.iter_limit()) {
            LpStatus::Optimal => self.primal(self.iter_limit()),
            other => other,
        }
    }

    pub(crate) fn solution(&self) -> Vec<S> {
        (0..self.n_struct).map(|j| self.val(j) + self.offset[j]).collect()
    }

    /// Objective in the problem's own sense.
    pub(crate) fn objective(&self) -> S {
        let mut z = S::zero();
        for j in 0..self.n_struct {
            if self.cost[j] != S::zero() {
                z += self.cost[j] * self.val(j);
            }
        }
        self.obj_sign * z + self.obj_constant
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution<S> {
    pub status: LpStatus,
    pub x: Vec<S>,
    pub objective: S,
}

/// Solves the continuous relaxation (binaries relaxed to `[0, 1]`).
pub fn solve_lp<S: Scalar>(p: &MilpProblem<S>) -> LpSolution<S> {
    let (lo, hi) = (p.lower_bounds(), p.upper_bounds());
    let mut t = Tableau::build(p, &lo, &hi);
    let status = t.solve(p);
    let (x, objective) = if status == LpStatus::Optimal {
        (t.solution(), t.objective())
    } else {
        (Vec::new(), S::nan())
    };
    LpSolution { status, x, objective }
}
