//! Best-first branch and bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use super::expr::VarId;
use super::problem::{MilpProblem, ObjectiveSense, VarKind};
use super::simplex::{LpStatus, Tableau};
use crate::Scalar;

/// Limits on a solve. Node limits keep results reproducible; deadlines do not.
#[derive(Debug, Clone, Copy, Default)]
pub struct Budget {
    pub deadline: Option<Instant>,
    pub max_nodes: Option<usize>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn nodes(n: usize) -> Self {
        Self { deadline: None, max_nodes: Some(n) }
    }

    pub fn millis(ms: u64) -> Self {
        Self { deadline: Some(Instant::now() + std::time::Duration::from_millis(ms)), max_nodes: None }
    }

    fn exhausted(&self, nodes: usize) -> bool {
        self.max_nodes.is_some_and(|m| nodes >= m) || self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    BudgetExceeded,
}

#[derive(Debug, Clone)]
pub struct MilpSolution<S> {
    pub status: MilpStatus,
    /// Best integer-feasible point found, if any.
    pub x: Option<Vec<S>>,
    pub objective: Option<S>,
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BnbOptions<S> {
    pub budget: Budget,
    /// Absolute optimality gap.
    pub gap: S,
    /// Only solutions strictly better than this objective are of interest.
    pub cutoff: Option<S>,
    /// A known bound on the optimum: search stops once the incumbent reaches it.
    pub floor: Option<S>,
}

impl<S: Scalar> Default for BnbOptions<S> {
    fn default() -> Self {
        Self { budget: Budget::unlimited(), gap: S::of(1e-6), cutoff: None, floor: None }
    }
}

struct Node<S> {
    /// LP bound in minimization form.
    bound: S,
    id: usize,
    depth: usize,
    fixes: Vec<(usize, bool)>,
    warm: Option<Rc<Tableau<S>>>,
}

impl<S: Scalar> PartialEq for Node<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Node<S> {}
impl<S: Scalar> PartialOrd for Node<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Node<S> {
    // max-heap: smallest bound first, then deeper, then older
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

const MAX_WARM_NODES: usize = 256;

/// Solves `p` exactly up to `opts.gap`. Deterministic for a fixed node budget.
pub fn branch_and_bound<S: Scalar>(p: &MilpProblem<S>, opts: &BnbOptions<S>) -> MilpSolution<S> {
    branch_and_bound_from(p, opts, None)
}

/// Like [`branch_and_bound`], seeded with a known point. The point is used as
/// the first incumbent if it satisfies every constraint and integrality.
pub fn branch_and_bound_from<S: Scalar>(
    p: &MilpProblem<S>,
    opts: &BnbOptions<S>,
    start: Option<&[S]>,
) -> MilpSolution<S> {
    let sign = if p.sense == ObjectiveSense::Maximize { -S::one() } else { S::one() };
    let (lo, hi) = (p.lower_bounds(), p.upper_bounds());
    let binaries: Vec<usize> = (0..p.vars.len()).filter(|&j| p.vars[j].kind == VarKind::Binary).collect();
    let int_tol = S::of(1e-6).max(S::tolerance() * S::of(10.0));

    let mut incumbent: Option<(S, Vec<S>)> = start.and_then(|x| {
        let integral = binaries.iter().all(|&j| (x[j] - x[j].round()).abs() <= int_tol);
        let tol = S::tolerance().sqrt().max(S::of(1e-6));
        (x.len() == p.vars.len() && integral && p.max_violation(x) <= tol).then(|| (sign * p.objective.eval(x), x.to_vec()))
    });
    if let (Some((z, _)), Some(c)) = (&incumbent, opts.cutoff) {
        if *z >= sign * c {
            incumbent = None;
        }
    }
    let cutoff = opts.cutoff.map(|c| sign * c);
    let floor = opts.floor.map(|f| sign * f);
    let at_floor = |inc: &Option<(S, Vec<S>)>| match (inc, floor) {
        (Some((z, _)), Some(f)) => *z <= f + opts.gap,
        _ => false,
    };
    let prune_at = |inc: &Option<(S, Vec<S>)>| -> Option<S> {
        match (inc, cutoff) {
            (Some((z, _)), Some(c)) => Some((*z - opts.gap).min(c)),
            (Some((z, _)), None) => Some(*z - opts.gap),
            (None, c) => c,
        }
    };

    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: S::neg_infinity(), id: 0, depth: 0, fixes: Vec::new(), warm: None });
    let mut next_id = 1;
    let mut nodes = 0;
    let mut trouble = false;

    // depth-first until the first incumbent, best-first afterwards
    let mut dive: Vec<Node<S>> = Vec::new();
    loop {
        if incumbent.is_some() && !dive.is_empty() {
            heap.extend(dive.drain(..));
        }
        let Some(node) = dive.pop().or_else(|| heap.pop()) else { break };
        if at_floor(&incumbent) {
            heap.clear();
            break;
        }
        if let Some(limit) = prune_at(&incumbent) {
            if node.bound >= limit {
                continue;
            }
        }
        if opts.budget.exhausted(nodes) {
            heap.push(node);
            heap.extend(dive.drain(..));
            break;
        }
        nodes += 1;

        let (status, tab) = solve_node(p, &lo, &hi, &node);
        let tab = match status {
            LpStatus::Optimal => tab,
            LpStatus::Infeasible => continue,
            _ => {
                trouble = true;
                continue;
            }
        };
        let z = sign * tab.objective();
        if let Some(limit) = prune_at(&incumbent) {
            if z >= limit {
                continue;
            }
        }
        let x = tab.solution();
        let mut branch = None;
        let mut best_frac = S::zero();
        for &j in &binaries {
            let f = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
            if f > int_tol && f > best_frac + S::tolerance() {
                best_frac = f;
                branch = Some(j);
            }
        }
        match branch {
            None => {
                if let Some((zp, xp)) = polish(p, &tab, &binaries, &x, sign) {
                    if prune_at(&incumbent).map_or(true, |l| zp < l) {
                        incumbent = Some((zp, xp));
                    }
                }
            }
            Some(j) => {
                // rounding heuristic: cheap incumbents prune ties early
                if incumbent.is_none() || nodes % 8 == 1 {
                    if let Some((zp, xp)) = polish(p, &tab, &binaries, &x, sign) {
                        if prune_at(&incumbent).map_or(true, |l| zp < l) {
                            incumbent = Some((zp, xp));
                        }
                    }
                }
                let shared = (heap.len() + dive.len() < MAX_WARM_NODES).then(|| Rc::new(tab));
                for up in [false, true] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, up));
                    let child = Node { bound: z, id: next_id, depth: node.depth + 1, fixes, warm: shared.clone() };
                    if incumbent.is_none() {
                        dive.push(child);
                    } else {
                        heap.push(child);
                    }
                    next_id += 1;
                }
            }
        }
    }

    let exhausted = !heap.is_empty() || trouble;
    let status = match (&incumbent, exhausted) {
        (Some(_), false) => MilpStatus::Optimal,
        (None, false) => MilpStatus::Infeasible,
        _ => MilpStatus::BudgetExceeded,
    };
    let (objective, x) = match incumbent {
        Some((z, x)) => (Some(sign * z), Some(x)),
        None => (None, None),
    };
    MilpSolution { status, x, objective, nodes }
}

fn solve_node<S: Scalar>(p: &MilpProblem<S>, lo: &[S], hi: &[S], node: &Node<S>) -> (LpStatus, Tableau<S>) {
    let fix_val = |up: bool| if up { S::one() } else { S::zero() };
    if let Some(parent) = &node.warm {
        let mut t = (**parent).clone();
        let &(j, up) = node.fixes.last().expect("warm nodes carry a fixing");
        t.set_bounds(VarId(j), fix_val(up), fix_val(up));
        let st = t.reoptimize();
        if st != LpStatus::IterationLimit {
            return (st, t);
        }
    }
    let (mut lo, mut hi) = (lo.to_vec(), hi.to_vec());
    for &(j, up) in &node.fixes {
        lo[j] = fix_val(up);
        hi[j] = fix_val(up);
    }
    let mut t = Tableau::build(p, &lo, &hi);
    let st = t.solve(p);
    (st, t)
}

/// Rounds binaries exactly and re-solves the continuous part.
fn polish<S: Scalar>(p: &MilpProblem<S>, tab: &Tableau<S>, binaries: &[usize], x: &[S], sign: S) -> Option<(S, Vec<S>)> {
    let mut t = tab.clone();
    for &j in binaries {
        let v = x[j].round();
        t.set_bounds(VarId(j), v, v);
    }
    let st = t.reoptimize();
    let mut xs = if st == LpStatus::Optimal { t.solution() } else { x.to_vec() };
    for &j in binaries {
        xs[j] = xs[j].round();
    }
    let tol = S::tolerance().sqrt().max(S::of(1e-6));
    if p.max_violation(&xs) > tol {
        return None;
    }
    let z = sign * p.objective.eval(&xs);
    Some((z, xs))
}
