use proptest::prelude::*;
use reqadapt::milp::{
    branch_and_bound, solve_lp, BnbOptions, LinExpr, LpStatus, MilpProblem, MilpStatus, ObjectiveSense, Sense,
};

const BOX: f64 = 5.0;

/// `a·y + b·z (sense) rhs` over continuous `(y, z)` and binaries `z_i`.
#[derive(Debug, Clone)]
struct Row {
    cont: [f64; 2],
    bin: Vec<f64>,
    sense: Sense,
    rhs: f64,
}

#[derive(Debug, Clone)]
struct Instance {
    objective: ([f64; 2], Vec<f64>),
    rows: Vec<Row>,
}

fn coef() -> impl Strategy<Value = f64> {
    (-4i32..=4).prop_map(f64::from)
}

fn instance(max_bins: usize) -> impl Strategy<Value = Instance> {
    (0..=max_bins).prop_flat_map(|nb| {
        let row = (
            [coef(), coef()],
            prop::collection::vec(coef(), nb),
            prop_oneof![8 => Just(Sense::Le), 3 => Just(Sense::Ge), 1 => Just(Sense::Eq)],
            (-8i32..=8).prop_map(f64::from),
        )
            .prop_map(|(cont, bin, sense, rhs)| Row { cont, bin, sense, rhs });
        (([coef(), coef()], prop::collection::vec(coef(), nb)), prop::collection::vec(row, 1..=4))
            .prop_map(|(objective, rows)| Instance { objective, rows })
    })
}

fn build(inst: &Instance) -> MilpProblem<f64> {
    let mut p = MilpProblem::new();
    let c = [p.add_continuous("y", -BOX, BOX), p.add_continuous("z", -BOX, BOX)];
    let b: Vec<_> = (0..inst.objective.1.len()).map(|i| p.add_binary(format!("b{i}"))).collect();
    let expr = |cc: &[f64; 2], bc: &[f64]| {
        let mut e = LinExpr::term(c[0], cc[0]);
        e.add_term(c[1], cc[1]);
        for (v, k) in b.iter().zip(bc) {
            e.add_term(*v, *k);
        }
        e
    };
    for (i, r) in inst.rows.iter().enumerate() {
        p.add_constraint(format!("r{i}"), expr(&r.cont, &r.bin), r.sense, r.rhs);
    }
    p.set_objective(ObjectiveSense::Maximize, expr(&inst.objective.0, &inst.objective.1));
    p
}

/// Maximum of a 2-D LP over the box by enumerating every vertex.
fn lp_by_vertices(obj: [f64; 2], rows: &[([f64; 2], Sense, f64)]) -> Option<f64> {
    let mut lines: Vec<([f64; 2], f64)> = rows.iter().map(|(a, _, r)| (*a, *r)).collect();
    lines.extend([([1.0, 0.0], BOX), ([1.0, 0.0], -BOX), ([0.0, 1.0], BOX), ([0.0, 1.0], -BOX)]);
    let feasible = |p: [f64; 2]| {
        p.iter().all(|v| v.abs() <= BOX + 1e-9)
            && rows.iter().all(|(a, s, r)| {
                let v = a[0] * p[0] + a[1] * p[1];
                match s {
                    Sense::Le => v <= r + 1e-9,
                    Sense::Ge => v >= r - 1e-9,
                    Sense::Eq => (v - r).abs() <= 1e-9,
                }
            })
    };
    let mut best: Option<f64> = None;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let ((a, r), (b, s)) = (lines[i], lines[j]);
            let det = a[0] * b[1] - a[1] * b[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let p = [(r * b[1] - a[1] * s) / det, (a[0] * s - r * b[0]) / det];
            if feasible(p) {
                let v = obj[0] * p[0] + obj[1] * p[1];
                best = Some(best.map_or(v, |w: f64| w.max(v)));
            }
        }
    }
    best
}

/// Maximum over every binary assignment.
fn brute_force(inst: &Instance) -> Option<f64> {
    let nb = inst.objective.1.len();
    let mut best: Option<f64> = None;
    for mask in 0..1u32 << nb {
        let bits: Vec<f64> = (0..nb).map(|i| f64::from((mask >> i) & 1)).collect();
        let dot = |c: &[f64]| c.iter().zip(&bits).map(|(a, b)| a * b).sum::<f64>();
        let rows: Vec<_> = inst.rows.iter().map(|r| (r.cont, r.sense, r.rhs - dot(&r.bin))).collect();
        if let Some(v) = lp_by_vertices(inst.objective.0, &rows) {
            let v = v + dot(&inst.objective.1);
            best = Some(best.map_or(v, |w: f64| w.max(v)));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn lp_matches_vertex_enumeration(inst in instance(0)) {
        let p = build(&inst);
        let sol = solve_lp(&p);
        let rows: Vec<_> = inst.rows.iter().map(|r| (r.cont, r.sense, r.rhs)).collect();
        match lp_by_vertices(inst.objective.0, &rows) {
            Some(v) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - v).abs() <= 1e-6, "{} vs {}", sol.objective, v);
                prop_assert!(p.max_violation(&sol.x) <= 1e-7);
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }

    #[test]
    fn milp_matches_brute_force(inst in instance(4)) {
        let p = build(&inst);
        let sol = branch_and_bound(&p, &BnbOptions::default());
        match brute_force(&inst) {
            Some(v) => {
                prop_assert_eq!(sol.status, MilpStatus::Optimal);
                let x = sol.x.unwrap();
                prop_assert!((sol.objective.unwrap() - v).abs() <= 1e-6, "{:?} vs {}", sol.objective, v);
                prop_assert!(p.max_violation(&x) <= 1e-7);
                prop_assert!(x[2..].iter().all(|b| *b == 0.0 || *b == 1.0), "binaries not integral: {:?}", x);
            }
            None => prop_assert_eq!(sol.status, MilpStatus::Infeasible),
        }
    }
}
