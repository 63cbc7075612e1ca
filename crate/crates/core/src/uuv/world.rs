//! Ground-truth world: forward-Euler point mass over a polyline pipeline.

use super::model::{ASCEND_RATE, CONTACT_DISTANCE, DIVE_RATE, MAX_ALTITUDE, MIN_ALTITUDE, SPEED_PER_NEWTON, VISIBILITY_THRESHOLD};
use super::scenario::UuvScenario;

/// Closest point on a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub distance: f64,
    /// Arc length from the first vertex to the closest point.
    pub arc: f64,
}

pub fn project_on_polyline(p: [f64; 3], line: &[[f64; 3]]) -> Projection {
    let mut best = Projection { distance: f64::INFINITY, arc: 0.0 };
    let mut arc = 0.0;
    for w in line.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let len2 = ab.iter().map(|c| c * c).sum::<f64>();
        let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
        let t = if len2 > 0.0 { (ap.iter().zip(&ab).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0) } else { 0.0 };
        let d = (0..3).map(|i| (ap[i] - t * ab[i]).powi(2)).sum::<f64>().sqrt();
        if d < best.distance {
            best = Projection { distance: d, arc: arc + t * len2.sqrt() };
        }
        arc += len2.sqrt();
    }
    best
}

/// Linear interpolation of the pipeline's `y` and `z` at along-track `x`.
fn pipeline_at(line: &[[f64; 3]], x: f64) -> (f64, f64) {
    if x <= line[0][0] {
        return (line[0][1], line[0][2]);
    }
    for w in line.windows(2) {
        if x <= w[1][0] {
            let t = if w[1][0] > w[0][0] { (x - w[0][0]) / (w[1][0] - w[0][0]) } else { 1.0 };
            return (w[0][1] + t * (w[1][1] - w[0][1]), w[0][2] + t * (w[1][2] - w[0][2]));
        }
    }
    let last = line[line.len() - 1];
    (last[1], last[2])
}

#[derive(Debug, Clone)]
pub struct World {
    pub position: [f64; 3],
    /// Cross-track offset held by the guidance.
    pub lateral_offset: f64,
    pub vz: f64,
    pub visibility: f64,
    pub healthy: Vec<bool>,
    pub on: Vec<bool>,
    pub thrust_per_unit: f64,
    nominal_visibility: f64,
    low_visibility: f64,
    pipeline: Vec<[f64; 3]>,
    /// Set when an altitude limit cut a vertical move in the last step.
    pub saturated: bool,
}

impl World {
    pub fn new(sc: &UuvScenario) -> Self {
        let n = sc.thruster_count;
        let (py, _) = pipeline_at(&sc.pipeline, sc.initial_position[0]);
        Self {
            position: sc.initial_position,
            lateral_offset: sc.initial_position[1] - py,
            vz: 0.0,
            visibility: sc.nominal_visibility,
            healthy: vec![true; n],
            on: (0..n).map(|i| i < sc.active_thrusters).collect(),
            thrust_per_unit: sc.thrust_per_unit,
            nominal_visibility: sc.nominal_visibility,
            low_visibility: sc.low_visibility,
            pipeline: sc.pipeline.clone(),
            saturated: false,
        }
    }

    pub fn thrust(&self) -> f64 {
        self.on.iter().filter(|o| **o).count() as f64 * self.thrust_per_unit
    }

    pub fn vx(&self) -> f64 {
        SPEED_PER_NEWTON * self.thrust()
    }

    pub fn projection(&self) -> Projection {
        project_on_polyline(self.position, &self.pipeline)
    }

    pub fn distance_to_pipeline(&self) -> f64 {
        self.projection().distance
    }

    pub fn altitude(&self) -> f64 {
        self.position[2] - pipeline_at(&self.pipeline, self.position[0]).1
    }

    /// Visual contact with the pipeline.
    pub fn in_contact(&self) -> bool {
        self.visibility >= VISIBILITY_THRESHOLD || self.distance_to_pipeline() < CONTACT_DISTANCE
    }

    /// Applies one environment action; unknown names are ignored.
    pub fn apply_event(&mut self, action: &str) {
        match action {
            "visibility_drop" => self.visibility = self.low_visibility,
            "visibility_improved" => self.visibility = self.nominal_visibility,
            _ => {
                let idx = |p: &str| action.strip_prefix(p).and_then(|s| s.parse::<usize>().ok()).filter(|i| (1..=self.on.len()).contains(i));
                if let Some(i) = idx("thruster_failure_") {
                    self.healthy[i - 1] = false;
                    self.on[i - 1] = false;
                } else if let Some(i) = idx("thruster_repair_") {
                    self.healthy[i - 1] = true;
                }
            }
        }
    }

    /// Applies system actions, then integrates one step of `dt` seconds.
    pub fn advance(&mut self, actions: &[String], dt: f64) {
        self.vz = 0.0;
        for a in actions {
            match a.as_str() {
                "dive" => self.vz = -DIVE_RATE,
                "ascend" => self.vz = ASCEND_RATE,
                _ => {
                    if let Some(i) = a.strip_prefix("enable_").and_then(|s| s.parse::<usize>().ok()) {
                        if (1..=self.on.len()).contains(&i) {
                            self.on[i - 1] = self.healthy[i - 1];
                        }
                    } else if let Some(i) = a.strip_prefix("disable_").and_then(|s| s.parse::<usize>().ok()) {
                        if (1..=self.on.len()).contains(&i) {
                            self.on[i - 1] = false;
                        }
                    }
                }
            }
        }
        let vx = self.vx();
        let x = self.position[0] + dt * vx;
        let (py, pz) = pipeline_at(&self.pipeline, x);
        let z = self.position[2] + dt * self.vz;
        let clamped = z.clamp(pz + MIN_ALTITUDE, pz + MAX_ALTITUDE);
        self.saturated = (clamped - z).abs() > 1e-12;
        self.position = [x, py + self.lateral_offset, clamped];
    }

    /// State vector in the variable order of the UUV planning model.
    pub fn model_state(&self) -> Vec<f64> {
        let mut q = vec![self.visibility, self.vz, self.distance_to_pipeline()];
        for (h, on) in self.healthy.iter().zip(&self.on) {
            q.push(if *h { 1.0 } else { 0.0 });
            q.push(if *on { 1.0 } else { 0.0 });
        }
        q.extend([self.thrust(), self.vx(), self.position[0], self.position[2]]);
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uuv::model::build_uuv_model;

    fn straight() -> UuvScenario {
        let mut s = UuvScenario::nominal(0);
        s.pipeline = vec![[0.0, 0.0, -50.0], [100.0, 0.0, -50.0], [200.0, 0.0, -50.0]];
        s.initial_position = [0.0, 0.0, -35.0];
        s
    }

    #[test]
    fn polyline_projection() {
        let line = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [10.0, 10.0, 0.0]];
        let p = project_on_polyline([5.0, 3.0, 4.0], &line);
        assert!((p.distance - 5.0).abs() < 1e-12 && (p.arc - 5.0).abs() < 1e-12);
        let p = project_on_polyline([12.0, 4.0, 0.0], &line);
        assert!((p.distance - 2.0).abs() < 1e-12 && (p.arc - 14.0).abs() < 1e-12);
    }

    #[test]
    fn kinematics_and_limits() {
        let mut w = World::new(&straight());
        assert_eq!(w.model_state().len(), build_uuv_model(0.5, w.on.len(), 4).vars.len());
        assert!((w.distance_to_pipeline() - 15.0).abs() < 1e-12);
        w.advance(&["dive".into()], 0.5);
        assert!((w.distance_to_pipeline() - 14.5).abs() < 1e-12);
        assert!((w.position[0] - 0.5 * 1.2).abs() < 1e-12);
        for _ in 0..40 {
            w.advance(&["dive".into()], 0.5);
        }
        assert!(w.saturated && (w.altitude() - MIN_ALTITUDE).abs() < 1e-9);
        w.apply_event("thruster_failure_2");
        assert_eq!(w.thrust(), 90.0);
        w.advance(&["enable_2".into()], 0.5);
        assert_eq!(w.thrust(), 90.0);
        w.apply_event("thruster_repair_2");
        w.advance(&["enable_2".into()], 0.5);
        assert_eq!(w.thrust(), 120.0);
    }
}
