//! Shape checks on adaptive UUV episodes: valuations stay in bounds, move in one
//! direction between events, and return to the optimum after full restoration.

use reqadapt::pstl::valuation_leq;
use reqadapt::runtime::RecordKind;
use reqadapt::uuv::episode::CycleRow;
use reqadapt::uuv::{Episode, Feature};

/// Cycles a restoration gets to bring `ν_curr` back to `ν_opt` before the check applies.
pub const RECOVERY_SLACK: usize = 20;

#[derive(Debug, Default, Clone, Copy)]
pub struct ShapeStats {
    pub cycles: usize,
    pub segments: usize,
    /// Restorations followed by at least `RECOVERY_SLACK` undisturbed cycles.
    pub restorations: usize,
    /// Restorations too close to a new degradation or the end to be judged.
    pub skipped: usize,
}

fn value(row: &CycleRow, f: Feature) -> Option<f64> {
    match f {
        Feature::Visibility => row.tau,
        Feature::Thrust => row.p,
    }
}

fn relevant(f: Feature, e: &str) -> bool {
    match f {
        Feature::Visibility => e.starts_with("visibility_"),
        Feature::Thrust => e.starts_with("thruster_"),
    }
}

fn degrades(f: Feature, e: &str) -> bool {
    match f {
        Feature::Visibility => e == "visibility_drop",
        Feature::Thrust => e.starts_with("thruster_failure_"),
    }
}

/// `+1` when larger parameter values are stronger.
fn sign(f: Feature) -> f64 {
    match f {
        Feature::Visibility => -1.0,
        Feature::Thrust => 1.0,
    }
}

pub fn check_episode(ep: &Episode) -> Result<ShapeStats, String> {
    let mut stats = ShapeStats { cycles: ep.rows.len(), ..ShapeStats::default() };
    for f in Feature::ALL {
        let space = f.space();
        let pname = &space.params()[0].name;
        let (lo, hi) = {
            let (a, b) = (space.nu_min().get(pname).unwrap(), space.nu_opt().get(pname).unwrap());
            (a.min(b), a.max(b))
        };
        let opt = space.nu_opt().get(pname).unwrap();
        let vals: Vec<f64> = ep.rows.iter().map(|r| value(r, f).ok_or("adaptive rows carry valuations")).collect::<Result<_, _>>()?;
        if let Some((k, v)) = vals.iter().enumerate().find(|(_, v)| **v < lo - 1e-9 || **v > hi + 1e-9) {
            return Err(format!("{} = {v} out of [{lo}, {hi}] at cycle {k}", pname));
        }

        // monotone between consecutive events of this feature
        let cuts: Vec<usize> = std::iter::once(0)
            .chain((1..ep.rows.len()).filter(|&k| ep.rows[k].events.split(';').any(|e| relevant(f, e))))
            .chain(std::iter::once(ep.rows.len()))
            .collect();
        for w in cuts.windows(2) {
            let seg = &vals[w[0]..w[1]];
            let up = seg.windows(2).all(|p| sign(f) * (p[1] - p[0]) >= -1e-9);
            let down = seg.windows(2).all(|p| sign(f) * (p[1] - p[0]) <= 1e-9);
            if !up && !down {
                return Err(format!("{pname} not monotone over cycles {}..{}: {seg:?}", w[0], w[1]));
            }
            stats.segments += 1;
        }

        // every logged change points the way its kind says
        let log = ep.logs.iter().find(|l| l.feature == f).ok_or("missing feature log")?;
        for r in &log.records {
            let weaker = valuation_leq(&r.after, &r.before, space.polarity()).unwrap();
            let stronger = valuation_leq(&r.before, &r.after, space.polarity()).unwrap();
            let ok = match r.kind {
                RecordKind::Degrade | RecordKind::Reweaken => weaker,
                RecordKind::Restore | RecordKind::Retry => stronger,
            };
            if !ok {
                return Err(format!("{:?} at {} moved {} -> {}", r.kind, r.time, r.before, r.after));
            }
        }

        // full restoration brings the optimum back
        let mut failed: Vec<String> = Vec::new();
        let mut vis_low = false;
        let mut active_before = false;
        for k in 0..ep.rows.len() {
            for e in ep.rows[k].events.split(';').filter(|e| !e.is_empty()) {
                match e {
                    "visibility_drop" => vis_low = true,
                    "visibility_improved" => vis_low = false,
                    _ => {
                        if let Some(i) = e.strip_prefix("thruster_failure_") {
                            failed.push(i.to_string());
                        } else if let Some(i) = e.strip_prefix("thruster_repair_") {
                            failed.retain(|x| x != i);
                        }
                    }
                }
            }
            let active = match f {
                Feature::Visibility => vis_low,
                Feature::Thrust => !failed.is_empty(),
            };
            if active_before && !active {
                let next = (k + 1..ep.rows.len())
                    .find(|&j| ep.rows[j].events.split(';').any(|e| degrades(f, e)))
                    .unwrap_or(ep.rows.len());
                if next - k < RECOVERY_SLACK {
                    stats.skipped += 1;
                } else if vals[k..next].iter().any(|v| (v - opt).abs() <= 1e-9) {
                    stats.restorations += 1;
                } else {
                    return Err(format!("{pname} never returned to {opt} after restoration at cycle {k}: ends at {}", vals[next - 1]));
                }
            }
            active_before = active;
        }
    }
    Ok(stats)
}
