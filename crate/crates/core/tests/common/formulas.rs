use proptest::prelude::*;
use reqadapt::stl::{Comparator, Formula, Interval, Signal, Term};

pub const VARS: [&str; 2] = ["x", "y"];

fn comparator() -> impl Strategy<Value = Comparator> {
    prop_oneof![Just(Comparator::Gt), Just(Comparator::Lt), Just(Comparator::Ge), Just(Comparator::Le)]
}

fn term() -> impl Strategy<Value = Term<f64>> {
    (-3i32..=3, -3i32..=3, -5.0..5.0f64).prop_map(|(a, b, c)| {
        let mut t = Term::constant(c);
        if a != 0 {
            t.add_var("x", a as f64);
        }
        if b != 0 || a == 0 {
            t.add_var("y", if b == 0 { 1.0 } else { b as f64 });
        }
        t
    })
}

pub fn predicate() -> impl Strategy<Value = Formula<f64>> {
    (term(), comparator(), -10.0..10.0f64).prop_map(|(t, c, b)| Formula::pred(t, c, b))
}

/// Window on whole multiples of `period`, at most `max_steps` samples wide.
fn interval(period: f64, max_steps: usize) -> impl Strategy<Value = Interval> {
    (0..=max_steps, 0..=max_steps).prop_map(move |(a, b)| {
        let (lo, hi) = (a.min(b), a.max(b));
        Interval::new(lo as f64 * period, hi as f64 * period)
    })
}

/// Random formula of bounded depth over `x` and `y`.
pub fn formula(period: f64, depth: u32) -> impl Strategy<Value = Formula<f64>> {
    predicate().prop_recursive(depth, 24, 2, move |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
            (interval(period, 3), inner.clone()).prop_map(|(i, f)| Formula::eventually(i, f)),
            (interval(period, 3), inner.clone()).prop_map(|(i, f)| Formula::globally(i, f)),
            (interval(period, 3), inner.clone(), inner).prop_map(|(i, a, b)| Formula::until(i, a, b)),
        ]
    })
}

/// Samples of `x`, `y`; values on a coarse grid so ties occur now and then.
pub fn samples(len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec((-20i32..=20).prop_map(|v| v as f64 * 0.5), 2), len)
}

/// A formula together with a signal long enough to evaluate it at several instants.
pub fn formula_and_signal() -> impl Strategy<Value = (Formula<f64>, Signal<f64>)> {
    prop_oneof![Just(1.0), Just(0.5)].prop_flat_map(|period| {
        formula(period, 3).prop_flat_map(move |f| {
            let h = f.horizon_steps(period);
            (Just(f), (h + 1..=h + 6).prop_flat_map(samples)).prop_map(move |(f, s)| {
                let sig = Signal::new(period, 0.0, VARS.iter().map(|v| v.to_string()).collect(), s).unwrap();
                (f, sig)
            })
        })
    })
}
