//! Seeded mission setups: pipeline, start pose, thruster set and failure schedule.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::UuvError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub time: f64,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UuvScenario {
    pub seed: u64,
    /// Seconds.
    pub duration: f64,
    pub cycle_period: f64,
    pub initial_position: [f64; 3],
    /// Seabed pipeline, ordered along the mission.
    pub pipeline: Vec<[f64; 3]>,
    pub thruster_count: usize,
    /// Thrusters switched on at the start; the others are spares.
    pub active_thrusters: usize,
    /// Rated thrust per thruster, N.
    pub thrust_per_unit: f64,
    pub nominal_visibility: f64,
    pub low_visibility: f64,
    /// Environment actions, sorted by time.
    pub events: Vec<ScheduledEvent>,
}

/// Partial scenario as read from a file: present fields replace generated ones.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    pub cycle_period: Option<f64>,
    pub initial_position: Option<[f64; 3]>,
    pub pipeline: Option<Vec<[f64; 3]>>,
    pub thruster_count: Option<usize>,
    pub active_thrusters: Option<usize>,
    pub thrust_per_unit: Option<f64>,
    pub nominal_visibility: Option<f64>,
    pub low_visibility: Option<f64>,
    pub events: Option<Vec<ScheduledEvent>>,
}

pub const CYCLE_PERIOD: f64 = 0.5;
const MIN_DURATION: f64 = 60.0;
const MAX_DURATION: f64 = 120.0;
const PIPELINE_SPACING: f64 = 25.0;
const PIPELINE_LENGTH: f64 = 300.0;
/// Per-second probability that a degraded condition ends, after a minimum delay.
const REPAIR_RATE: f64 = 0.05;
const MIN_REPAIR_DELAY: f64 = 10.0;
const REPAIR_PROBABILITY: f64 = 0.7;

fn snap(t: f64, dt: f64) -> f64 {
    (t / dt).round() * dt
}

/// Seconds until an event with per-second rate `rate`, counted in whole cycles.
fn geometric_delay(rng: &mut ChaCha8Rng, rate: f64, dt: f64) -> f64 {
    let p = rate * dt;
    let mut cycles = 1usize;
    while !rng.gen_bool(p) {
        cycles += 1;
    }
    cycles as f64 * dt
}

impl ScenarioOverrides {
    pub fn from_path(path: &Path) -> Result<Self, UuvError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

impl UuvScenario {
    /// Draws a scenario from `seed`. Event times are uniform over the
    /// mission, repair delays geometric.
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dt = CYCLE_PERIOD;
        let duration = snap(rng.gen_range(MIN_DURATION..=MAX_DURATION), dt);

        let seabed = -50.0;
        let mut pipeline = Vec::new();
        let (mut y, mut z) = (rng.gen_range(-2.0..2.0), seabed);
        let mut x = 0.0;
        while x <= PIPELINE_LENGTH + 1e-9 {
            pipeline.push([x, y, z]);
            x += PIPELINE_SPACING;
            y += rng.gen_range(-1.0..1.0);
            z += rng.gen_range(-1.0..1.0);
        }
        let altitude = rng.gen_range(11.0..20.0);
        let initial_position = [0.0, pipeline[0][1] + rng.gen_range(-0.5..0.5), pipeline[0][2] + altitude];

        let thruster_count = rng.gen_range(4..=6);
        let active_thrusters = 4;
        let mut events = Vec::new();

        let n_vis = rng.gen_range(0..=2);
        let mut t: f64 = 0.0;
        for _ in 0..n_vis {
            let start = snap(rng.gen_range(t + 5.0..(t + 5.0).max(0.6 * duration) + 1.0), dt);
            if start >= duration {
                break;
            }
            events.push(ScheduledEvent { time: start, action: "visibility_drop".into() });
            let end = start + MIN_REPAIR_DELAY + geometric_delay(&mut rng, REPAIR_RATE, dt);
            if end >= duration {
                break;
            }
            events.push(ScheduledEvent { time: end, action: "visibility_improved".into() });
            t = end;
        }

        let n_fail = rng.gen_range(0..=2);
        let mut failed: Vec<usize> = Vec::new();
        for _ in 0..n_fail {
            let i = rng.gen_range(1..=active_thrusters);
            if failed.contains(&i) {
                continue;
            }
            failed.push(i);
            let at = snap(rng.gen_range(5.0..0.8 * duration), dt);
            events.push(ScheduledEvent { time: at, action: format!("thruster_failure_{i}") });
            let delay = MIN_REPAIR_DELAY + geometric_delay(&mut rng, REPAIR_RATE, dt);
            if rng.gen_bool(REPAIR_PROBABILITY) && at + delay < duration {
                events.push(ScheduledEvent { time: at + delay, action: format!("thruster_repair_{i}") });
            }
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));

        Self {
            seed,
            duration,
            cycle_period: dt,
            initial_position,
            pipeline,
            thruster_count,
            active_thrusters,
            thrust_per_unit: super::model::THRUST_PER_UNIT,
            nominal_visibility: 80.0,
            low_visibility: 10.0,
            events,
        }
    }

    /// One mission with nothing going wrong.
    pub fn nominal(seed: u64) -> Self {
        Self { events: Vec::new(), ..Self::generate(seed) }
    }

    pub fn has_failures(&self) -> bool {
        self.events.iter().any(|e| e.action == "visibility_drop" || e.action.starts_with("thruster_failure_"))
    }

    pub fn apply(mut self, o: ScenarioOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        take!(seed, duration, cycle_period, initial_position, pipeline, thruster_count, active_thrusters);
        take!(thrust_per_unit, nominal_visibility, low_visibility, events);
        self.events.sort_by(|a, b| a.time.total_cmp(&b.time));
        self
    }

    pub fn validate(&self) -> Result<(), UuvError> {
        let bad = |m: &str| Err(UuvError::Scenario(m.to_string()));
        if !(self.duration > 0.0) || !(self.cycle_period > 0.0) {
            return bad("duration and cycle period must be positive");
        }
        if self.pipeline.len() < 2 {
            return bad("pipeline needs at least two points");
        }
        if self.thruster_count == 0 || self.active_thrusters > self.thruster_count {
            return bad("active thrusters must not exceed the thruster count");
        }
        for e in &self.events {
            if e.time < 0.0 || e.time > self.duration {
                return Err(UuvError::Scenario(format!("event `{}` at {} is outside the mission", e.action, e.time)));
            }
        }
        Ok(())
    }

    /// Reads a JSON scenario file. With `base` the file may be partial and
    /// overrides the generated scenario for that seed.
    pub fn from_path(path: &Path, base: Option<u64>) -> Result<Self, UuvError> {
        let o = ScenarioOverrides::from_path(path)?;
        let seed = o.seed.or(base).unwrap_or(0);
        let sc = Self::generate(seed).apply(o);
        sc.validate()?;
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_valid() {
        for seed in 0..50 {
            let a = UuvScenario::generate(seed);
            assert_eq!(a, UuvScenario::generate(seed));
            a.validate().unwrap();
            for w in a.events.windows(2) {
                assert!(w[0].time <= w[1].time);
            }
            for e in &a.events {
                assert!((e.time / a.cycle_period - (e.time / a.cycle_period).round()).abs() < 1e-9);
            }
        }
        assert_ne!(UuvScenario::generate(1), UuvScenario::generate(2));
    }

    #[test]
    fn overrides_replace_fields() {
        let o: ScenarioOverrides = serde_json::from_str(r#"{"duration": 30, "events": []}"#).unwrap();
        let s = UuvScenario::generate(3).apply(o);
        assert_eq!(s.duration, 30.0);
        assert!(!s.has_failures());
        assert_eq!(s.pipeline, UuvScenario::generate(3).pipeline);
    }
}
