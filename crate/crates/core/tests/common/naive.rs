//! Textbook pointwise STL semantics, written without any sharing with the library
//! evaluator: every window is rescanned from scratch at every instant.

use reqadapt::stl::{Comparator, Formula, Interval, Signal};

fn term_value(f: &reqadapt::stl::Predicate<f64>, sig: &Signal<f64>, t: usize) -> f64 {
    let mut v = f.term.constant;
    for (name, c) in &f.term.coefficients {
        v += c * sig.value(sig.var_index(name).expect("known variable"), t);
    }
    v
}

/// Indices whose time offset from `t` lies in the closed window.
fn window(iv: &Interval, sig: &Signal<f64>, t: usize) -> Vec<usize> {
    let t0 = sig.time_of(t);
    (t..sig.len())
        .filter(|&k| {
            let d = sig.time_of(k) - t0;
            d >= iv.start - 1e-9 && d <= iv.end + 1e-9
        })
        .collect()
}

pub fn rho(f: &Formula<f64>, sig: &Signal<f64>, t: usize) -> f64 {
    match f {
        Formula::Pred(p) => {
            let v = term_value(p, sig, t);
            match p.cmp {
                Comparator::Gt | Comparator::Ge => v - p.bound,
                Comparator::Lt | Comparator::Le => p.bound - v,
            }
        }
        Formula::Not(a) => -rho(a, sig, t),
        Formula::And(a, b) => rho(a, sig, t).min(rho(b, sig, t)),
        Formula::Or(a, b) => rho(a, sig, t).max(rho(b, sig, t)),
        Formula::Implies(a, b) => (-rho(a, sig, t)).max(rho(b, sig, t)),
        Formula::Eventually(iv, a) => window(iv, sig, t).into_iter().map(|k| rho(a, sig, k)).fold(f64::NEG_INFINITY, f64::max),
        Formula::Globally(iv, a) => window(iv, sig, t).into_iter().map(|k| rho(a, sig, k)).fold(f64::INFINITY, f64::min),
        Formula::Until(iv, a, b) => window(iv, sig, t)
            .into_iter()
            .map(|k| {
                let hold = (t..=k).map(|j| rho(a, sig, j)).fold(f64::INFINITY, f64::min);
                hold.min(rho(b, sig, k))
            })
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Boolean satisfaction; the window must fit in the signal.
pub fn sat(f: &Formula<f64>, sig: &Signal<f64>, t: usize) -> bool {
    match f {
        Formula::Pred(p) => {
            let v = term_value(p, sig, t);
            match p.cmp {
                Comparator::Gt => v > p.bound,
                Comparator::Ge => v >= p.bound,
                Comparator::Lt => v < p.bound,
                Comparator::Le => v <= p.bound,
            }
        }
        Formula::Not(a) => !sat(a, sig, t),
        Formula::And(a, b) => sat(a, sig, t) && sat(b, sig, t),
        Formula::Or(a, b) => sat(a, sig, t) || sat(b, sig, t),
        Formula::Implies(a, b) => !sat(a, sig, t) || sat(b, sig, t),
        Formula::Eventually(iv, a) => window(iv, sig, t).into_iter().any(|k| sat(a, sig, k)),
        Formula::Globally(iv, a) => window(iv, sig, t).into_iter().all(|k| sat(a, sig, k)),
        Formula::Until(iv, a, b) => window(iv, sig, t)
            .into_iter()
            .any(|k| sat(b, sig, k) && (t..=k).all(|j| sat(a, sig, j))),
    }
}

/// Largest instant at which every window of `f` fits in the signal.
pub fn last_defined(f: &Formula<f64>, sig: &Signal<f64>) -> Option<usize> {
    let h = (f.horizon() / sig.sample_period() + 1e-9).floor() as usize;
    sig.len().checked_sub(h + 1)
}
