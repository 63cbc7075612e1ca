mod common;

use common::shape::check_episode;
use proptest::prelude::*;
use reqadapt::uuv::{run_episode, run_experiment, EpisodeConfig, ExperimentConfig, Policy, UuvScenario};

#[test]
fn adaptive_episodes_have_the_expected_shape() {
    let mut judged = 0;
    for seed in 1..=6 {
        let sc = UuvScenario::generate(seed);
        let ep = run_episode(&sc, Policy::Adaptive, &EpisodeConfig::default()).unwrap();
        let stats = check_episode(&ep).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        judged += stats.restorations;
    }
    assert!(judged > 0, "no restoration was followed long enough to be judged");
}

#[test]
fn baseline_rows_carry_no_valuations() {
    let ep = run_episode(&UuvScenario::generate(3), Policy::Baseline, &EpisodeConfig::default()).unwrap();
    assert!(ep.rows.iter().all(|r| r.tau.is_none() && r.p.is_none()));
    assert!(ep.logs.is_empty());
}

#[test]
fn nominal_mission_keeps_the_optimal_requirement() {
    let ep = run_episode(&UuvScenario::nominal(5), Policy::Adaptive, &EpisodeConfig::default()).unwrap();
    assert!(ep.rows.iter().all(|r| r.tau == Some(5.0) && r.p == Some(100.0)));
    assert_eq!(ep.metrics.weakenings + ep.metrics.strengthenings, 0);
}

#[test]
fn untimed_experiment_files_repeat_byte_for_byte() {
    let base = std::env::temp_dir().join(format!("reqadapt-uuv-{}", std::process::id()));
    let mut outputs = Vec::new();
    for run in 0..2 {
        let dir = base.join(run.to_string());
        let cfg = ExperimentConfig { seeds: vec![2, 4], out: Some(dir.clone()), timing: false, traces: true, ..ExperimentConfig::new(2) };
        let summary = run_experiment(&cfg).unwrap();
        assert_eq!(summary.episodes.len(), 4);
        let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        outputs.push(files.iter().map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(p).unwrap())).collect::<Vec<_>>());
    }
    std::fs::remove_dir_all(&base).ok();
    assert!(outputs[0].iter().any(|(n, _)| n == "summary.csv"));
    assert_eq!(outputs[0], outputs[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Random 40 s missions with events packed close together.
    #[test]
    fn shape_holds_on_short_random_missions(seed in any::<u64>(), squeeze in 0.3..1.0f64) {
        let mut sc = UuvScenario::generate(seed);
        let scale = 40.0 / sc.duration * squeeze;
        sc.duration = 40.0;
        for e in &mut sc.events {
            e.time = (e.time * scale / sc.cycle_period).round() * sc.cycle_period;
        }
        sc.events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let ep = run_episode(&sc, Policy::Adaptive, &EpisodeConfig::default()).unwrap();
        let res = check_episode(&ep);
        prop_assert!(res.is_ok(), "seed {}: {}", seed, res.unwrap_err());
    }
}
