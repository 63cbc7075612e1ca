mod common;

use common::game::{oracle, space, state, two_thrusters};
use reqadapt::runtime::{check_trigger, TriggerMode};

const FORMULAS: [&str; 4] = ["thrust > $p", "G[0,1](thrust > $p)", "F[0,1](thrust >= $p)", "(thrust > 0) U[0,1] (thrust >= $p)"];
const MODES: [TriggerMode; 2] = [TriggerMode::Degrade, TriggerMode::Recover];

#[test]
fn matches_game_tree_enumeration() {
    let m = two_thrusters();
    let mut checked = 0;
    for f in FORMULAS {
        for p in [0.0, 20.0, 45.0, 60.0] {
            let sp = space(f, 0.0, 60.0, p);
            for bits in 0..16u8 {
                let b = |i: u8| bits & (1 << i) != 0;
                let q0 = state([b(0), b(1)], [b(2), b(3)]);
                for mode in MODES {
                    for depth in 1..=3 {
                        let got = check_trigger(&sp, &m, &q0, mode, depth).unwrap();
                        assert_eq!(got, oracle(&sp, &m, &q0, mode, depth), "{f} p={p} q0={q0:?} {mode:?} depth {depth}");
                        checked += 1;
                    }
                }
            }
        }
    }
    assert_eq!(checked, 4 * 4 * 16 * 2 * 3);
}

#[test]
fn hand_enumerated_truth_values() {
    let m = two_thrusters();
    let one_on = state([true, true], [true, false]);
    let both_on = state([true, true], [true, true]);
    // (formula, p, state, degrade holds, recover holds)
    let table = [
        // two successive failures leave no thrust by the third sample
        ("G[0,1](thrust > $p)", 20.0, &one_on, true, false),
        ("G[0,1](thrust > $p)", 10.0, &both_on, true, false),
        // the first sample alone decides, and it holds
        ("thrust > $p", 20.0, &one_on, false, true),
        // failing thruster 2 at once rules out 60 N
        ("F[0,1](thrust >= $p)", 60.0, &one_on, true, false),
        // already at 60 N at the first sample
        ("F[0,1](thrust >= $p)", 60.0, &both_on, false, true),
    ];
    for (f, p, q0, degrade, recover) in table {
        let sp = space(f, 0.0, 60.0, p);
        assert_eq!(check_trigger(&sp, &m, q0, TriggerMode::Degrade, 3).unwrap(), degrade, "{f} {p} degrade");
        assert_eq!(check_trigger(&sp, &m, q0, TriggerMode::Recover, 3).unwrap(), recover, "{f} {p} recover");
    }
}

#[test]
fn depth_limit_is_enforced() {
    let sp = space("G[0,1](thrust > $p)", 0.0, 60.0, 30.0);
    let m = two_thrusters();
    assert!(check_trigger(&sp, &m, &m.initial_state(), TriggerMode::Degrade, 12).is_err());
}
