//! Closed-loop localization: hear one segment, turn the neck toward the
//! estimate, repeat. Angles are degrees; the neck and the loudspeakers share
//! the world frame of the azimuth convention (0 right, 90 front, 180 left).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::acoustics::{render, HeadModel, SceneSpec};
use crate::error::{invalid, Result};
use crate::pipeline::{Localization, SslModel};
use crate::seed;
use crate::signal::{MonoSignal, StereoSignal};

/// Estimates below this confidence do not move the neck.
pub const DEFAULT_LOCK_THRESHOLD: f64 = 0.5;
/// The target counts as locked while |source - neck| stays within this.
pub const LOCK_TOLERANCE_DEG: f64 = 15.0;
/// Audio rendered before each segment so the room is already excited.
pub const DEFAULT_LEAD_IN_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckState {
    theta: f64,
}

impl NeckState {
    pub const MIN: f64 = 0.0;
    pub const MAX: f64 = 180.0;

    pub fn new(theta: f64) -> Self {
        Self { theta: theta.clamp(Self::MIN, Self::MAX) }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Rotate by `delta` degrees, stopping at the yaw limits.
    pub fn turn(&mut self, delta: f64) {
        *self = Self::new(self.theta + delta);
    }
}

/// Direction of a source at world angle `source` for a head facing `neck`,
/// in head-relative azimuth. Sources behind the interaural axis are folded
/// onto their front mirror image (the cone of confusion of a two-ear head).
pub fn relative_azimuth(source: f64, neck: f64) -> f64 {
    let rel = 90.0 + source - neck;
    if rel < 0.0 {
        -rel
    } else if rel > 180.0 {
        360.0 - rel
    } else {
        rel
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub id: usize,
    /// Loudspeaker angle θ_lspk.
    pub source: f64,
    pub neck_start: f64,
    pub compound: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl TrialSpec {
    /// Trial starting `delta` degrees away from the source, on the side that
    /// keeps the neck within its range.
    pub fn with_offset(id: usize, source: f64, delta: f64, compound: usize, max_iterations: usize, seed: u64) -> Self {
        let neck_start = if source >= 90.0 { source - delta } else { source + delta };
        Self { id, source, neck_start, compound, max_iterations, seed }
    }

    /// δ_start = |θ_lspk − θ_neck_start|.
    pub fn delta_start(&self) -> f64 {
        (self.source - self.neck_start).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// Head-relative source direction presented in this segment.
    pub relative: f64,
    /// Head-relative estimate θ̂.
    pub estimate: f64,
    pub confidence: f64,
    /// The estimate was too uncertain (or the segment silent) to act on.
    pub held: bool,
    /// Neck angle after this iteration's turn.
    pub theta_neck: f64,
    /// Signed δ_diff = θ_lspk − θ_neck after the turn.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingTrajectory {
    pub trial: TrialSpec,
    pub records: Vec<IterationRecord>,
}

/// Everything a trial needs besides its sound.
#[derive(Debug, Clone, Copy)]
pub struct TrackingSetup<'a> {
    pub model: &'a SslModel,
    pub head: &'a HeadModel,
    /// Room and noise of every segment; the azimuth and seed are set per segment.
    pub scene: SceneSpec,
    pub lock_threshold: f64,
    pub lead_in_s: f64,
}

/// One SSL decision on a segment of at least one decision span.
pub fn localize_segment(model: &SslModel, stereo: &StereoSignal) -> Result<Localization> {
    model.localize(stereo)
}

/// Play `sound` from the trial's loudspeaker, one decision per segment,
/// turning toward every confident estimate.
pub fn run_tracking_trial(trial: &TrialSpec, sound: &MonoSignal, setup: &TrackingSetup) -> Result<TrackingTrajectory> {
    if !(0.0..=180.0).contains(&trial.source) || !(0.0..=180.0).contains(&trial.neck_start) {
        return Err(invalid(format!("trial {} angles must lie in [0, 180]", trial.id)));
    }
    let fs = sound.sample_rate;
    let seg = setup.model.frontend.decision_len();
    let lead = (setup.lead_in_s * fs).round() as usize;
    let available = sound.len().saturating_sub(lead) / seg;
    let mut neck = NeckState::new(trial.neck_start);
    let mut records = Vec::new();
    for it in 0..available.min(trial.max_iterations) {
        let start = lead + it * seg;
        let relative = relative_azimuth(trial.source, neck.theta());
        let chunk = sound.slice_padded(start - lead, lead + seg);
        let scene =
            SceneSpec { azimuth: relative, seed: seed::derive(trial.seed, "iteration", it as u64), ..setup.scene };
        let heard = render(&chunk, &scene, setup.head)?.noisy.slice_padded(lead, seg);
        let loc = localize_segment(setup.model, &heard)?;
        let held = loc.silent || loc.confidence < setup.lock_threshold;
        if !held {
            neck.turn(loc.angle - 90.0);
        }
        records.push(IterationRecord {
            iteration: it + 1,
            relative,
            estimate: loc.angle,
            confidence: loc.confidence,
            held,
            theta_neck: neck.theta(),
            error: trial.source - neck.theta(),
        });
    }
    Ok(TrackingTrajectory { trial: trial.clone(), records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub delta_start: i64,
    pub iteration: usize,
    pub error: i64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub trials: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    /// Signed errors counted per (δ_start, iteration, error), sorted.
    pub histogram: Vec<HistogramRow>,
    pub per_iteration: Vec<IterationStats>,
}

/// Error histogram and per-iteration statistics over all trajectories.
/// Errors are keyed in whole degrees.
pub fn accumulate_errors(trajectories: &[TrackingTrajectory]) -> Result<ErrorSummary> {
    if trajectories.is_empty() {
        return Err(invalid("no trajectories to accumulate"));
    }
    let mut hist: BTreeMap<(i64, usize, i64), usize> = BTreeMap::new();
    let mut by_iter: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for t in trajectories {
        let d = t.trial.delta_start().round() as i64;
        for r in &t.records {
            *hist.entry((d, r.iteration, r.error.round() as i64)).or_default() += 1;
            by_iter.entry(r.iteration).or_default().push(r.error);
        }
    }
    let histogram = hist
        .into_iter()
        .map(|((delta_start, iteration, error), count)| HistogramRow { delta_start, iteration, error, count })
        .collect();
    let per_iteration = by_iter
        .into_iter()
        .map(|(iteration, e)| {
            let n = e.len() as f64;
            let mean = e.iter().sum::<f64>() / n;
            let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let mean_abs = e.iter().map(|x| x.abs()).sum::<f64>() / n;
            IterationStats { iteration, trials: e.len(), mean, std: var.sqrt(), mean_abs }
        })
        .collect();
    Ok(ErrorSummary { histogram, per_iteration })
}

/// Mean |δ_diff| after `iteration` over the trajectories that reached it.
pub fn mean_abs_error_at(trajectories: &[TrackingTrajectory], iteration: usize) -> Option<f64> {
    let e: Vec<f64> =
        trajectories.iter().filter_map(|t| t.records.get(iteration.checked_sub(1)?)).map(|r| r.error.abs()).collect();
    (!e.is_empty()).then(|| e.iter().sum::<f64>() / e.len() as f64)
}

/// Iterations after the first lock (|δ_diff| ≤ tolerance) that stay locked,
/// as (locked, total) over all trajectories.
pub fn lock_retention(trajectories: &[TrackingTrajectory], tolerance: f64) -> (usize, usize) {
    let mut kept = 0;
    let mut total = 0;
    for t in trajectories {
        if let Some(first) = t.records.iter().position(|r| r.error.abs() <= tolerance) {
            for r in &t.records[first + 1..] {
                total += 1;
                kept += (r.error.abs() <= tolerance) as usize;
            }
        }
    }
    (kept, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(delta: f64, errors: &[f64]) -> TrackingTrajectory {
        let trial = TrialSpec::with_offset(0, 90.0, delta, 0, errors.len(), 0);
        let records = errors
            .iter()
            .enumerate()
            .map(|(i, &error)| IterationRecord {
                iteration: i + 1,
                relative: 90.0,
                estimate: 90.0,
                confidence: 1.0,
                held: false,
                theta_neck: 90.0 - error,
                error,
            })
            .collect();
        TrackingTrajectory { trial, records }
    }

    #[test]
    fn neck_is_clamped() {
        let mut n = NeckState::new(170.0);
        n.turn(45.0);
        assert_eq!(n.theta(), 180.0);
        n.turn(-400.0);
        assert_eq!(n.theta(), 0.0);
        assert_eq!(NeckState::new(-5.0).theta(), 0.0);
    }

    #[test]
    fn relative_angle_stays_in_range() {
        assert_eq!(relative_azimuth(90.0, 90.0), 90.0);
        // source 30 deg to the left of the nose
        assert_eq!(relative_azimuth(120.0, 90.0), 120.0);
        assert_eq!(relative_azimuth(0.0, 180.0), 90.0);
        // 45 deg behind the left ear folds onto 45 deg in front of it
        assert_eq!(relative_azimuth(180.0, 45.0), 135.0);
        for s in (0..=180).step_by(5) {
            for n in (0..=180).step_by(5) {
                let r = relative_azimuth(s as f64, n as f64);
                assert!((0.0..=180.0).contains(&r));
            }
        }
    }

    #[test]
    fn trials_start_inside_the_range() {
        for s in (0..=180).step_by(15) {
            for d in (0..=90).step_by(15) {
                let t = TrialSpec::with_offset(0, s as f64, d as f64, 0, 5, 0);
                assert!((0.0..=180.0).contains(&t.neck_start), "{s} {d}");
                assert_eq!(t.delta_start(), d as f64);
            }
        }
    }

    #[test]
    fn perfect_trajectory_has_all_mass_at_zero() {
        let s = accumulate_errors(&[traj(30.0, &[0.0, 0.0, 0.0])]).unwrap();
        assert!(s.histogram.iter().all(|h| h.error == 0));
        assert_eq!(s.histogram.iter().map(|h| h.count).sum::<usize>(), 3);
    }

    #[test]
    fn two_point_statistics() {
        let s = accumulate_errors(&[traj(15.0, &[15.0]), traj(15.0, &[-15.0])]).unwrap();
        assert_eq!(s.per_iteration.len(), 1);
        let it = &s.per_iteration[0];
        assert_eq!((it.mean, it.std, it.mean_abs, it.trials), (0.0, 15.0, 15.0, 2));
        assert!(accumulate_errors(&[]).is_err());
    }

    #[test]
    fn retention_counts_after_first_lock() {
        let t = [traj(60.0, &[60.0, 0.0, 0.0, 30.0, 15.0])];
        assert_eq!(lock_retention(&t, 15.0), (2, 3));
        assert_eq!(mean_abs_error_at(&t, 1), Some(60.0));
        assert_eq!(mean_abs_error_at(&t, 9), None);
    }
}
