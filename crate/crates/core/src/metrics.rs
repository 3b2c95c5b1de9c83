//! Trajectory and tracking error metrics, and Monte Carlo aggregation.

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Se3Pose;
use crate::pipeline::EstimateLog;
use crate::sim::GroundTruth;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryError {
    pub ape: f64,
    pub rpe: f64,
    /// Per-frame camera-center error.
    pub ape_series: Vec<f64>,
    /// Per-pair relative translation error; entry `t` covers frames `t` and `t + 1`.
    pub rpe_series: Vec<f64>,
}

fn check_lengths(est: &[Se3Pose], gt: &[Se3Pose]) -> Result<()> {
    if est.len() != gt.len() {
        return Err(Error::invalid(format!(
            "trajectory lengths differ: {} estimated, {} ground truth",
            est.len(),
            gt.len()
        )));
    }
    Ok(())
}

fn rmse(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn clamp_range(range: Option<Range<usize>>, len: usize) -> Range<usize> {
    let r = range.unwrap_or(0..len);
    r.start.min(len)..r.end.min(len)
}

pub fn ape_series(est: &[Se3Pose], gt: &[Se3Pose]) -> Result<Vec<f64>> {
    check_lengths(est, gt)?;
    Ok(est.iter().zip(gt).map(|(e, g)| (e.center() - g.center()).norm()).collect())
}

/// RMSE of camera-center errors, without alignment.
pub fn ape(est: &[Se3Pose], gt: &[Se3Pose]) -> Result<f64> {
    Ok(rmse(ape_series(est, gt)?.into_iter()))
}

/// Translation norm of `(gt relative motion)⁻¹ · (estimated relative motion)`
/// for each consecutive pair, with motions expressed in the earlier camera frame.
pub fn rpe_series(est: &[Se3Pose], gt: &[Se3Pose]) -> Result<Vec<f64>> {
    check_lengths(est, gt)?;
    if est.len() < 2 {
        return Err(Error::invalid("relative pose error needs at least 2 frames"));
    }
    let rel = |a: &Se3Pose, b: &Se3Pose| a.compose(&b.inverse());
    Ok(est
        .windows(2)
        .zip(gt.windows(2))
        .map(|(e, g)| {
            let de = rel(&e[1], &e[0]);
            let dg = rel(&g[1], &g[0]);
            dg.inverse().compose(&de).center().norm()
        })
        .collect())
}

pub fn rpe(est: &[Se3Pose], gt: &[Se3Pose]) -> Result<f64> {
    Ok(rmse(rpe_series(est, gt)?.into_iter()))
}

/// APE and RPE restricted to a frame range (pairs must lie fully inside it).
pub fn trajectory_error(est: &[Se3Pose], gt: &[Se3Pose], range: Option<Range<usize>>) -> Result<TrajectoryError> {
    let a = ape_series(est, gt)?;
    let r = rpe_series(est, gt)?;
    let range = clamp_range(range, est.len());
    let ape = rmse(a[range.clone()].iter().copied());
    let pairs = range.start..range.end.saturating_sub(1).max(range.start);
    let rpe = rmse(r[pairs].iter().copied());
    Ok(TrajectoryError {
        ape,
        rpe,
        ape_series: a,
        rpe_series: r,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackingError {
    pub motp: f64,
    pub matched: usize,
    pub misses: usize,
}

/// One object position in the `x`–`z` plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackPoint {
    pub id: u64,
    pub position: Vector2<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// Pair estimates and truths sharing an id.
    #[default]
    ById,
    /// Minimum-distance assignment, ignoring ids.
    Assignment,
}

/// Mean matched distance. Every estimate either matches a truth within
/// `gate` or counts as a miss.
pub fn motp(
    est: &[Vec<TrackPoint>],
    gt: &[Vec<TrackPoint>],
    gate: f64,
    matching: Matching,
) -> Result<TrackingError> {
    if !(gate > 0.0) {
        return Err(Error::invalid(format!("gate must be positive, got {gate}")));
    }
    if est.len() != gt.len() {
        return Err(Error::invalid("estimate and truth frame counts differ"));
    }
    let mut total = 0.0;
    let mut out = TrackingError::default();
    for (e, g) in est.iter().zip(gt) {
        let pairs: Vec<Option<f64>> = match matching {
            Matching::ById => e
                .iter()
                .map(|p| {
                    g.iter()
                        .find(|q| q.id == p.id)
                        .map(|q| (p.position - q.position).norm())
                })
                .collect(),
            Matching::Assignment => {
                let cost: Vec<Vec<f64>> = e
                    .iter()
                    .map(|p| g.iter().map(|q| (p.position - q.position).norm()).collect())
                    .collect();
                let assign = assignment(&cost, gate);
                assign.iter().enumerate().map(|(i, a)| a.map(|j| cost[i][j])).collect()
            }
        };
        for d in pairs {
            match d {
                Some(d) if d <= gate => {
                    total += d;
                    out.matched += 1;
                }
                _ => out.misses += 1,
            }
        }
    }
    if out.matched > 0 {
        out.motp = total / out.matched as f64;
    }
    Ok(out)
}

/// Rectangular minimum-cost assignment (Hungarian method with potentials).
/// Pairs costlier than `gate` are treated as forbidden and left unassigned.
pub fn assignment(cost: &[Vec<f64>], gate: f64) -> Vec<Option<usize>> {
    let n = cost.len();
    let m = cost.first().map_or(0, |r| r.len());
    if n == 0 || m == 0 {
        return vec![None; n];
    }
    // Square padding; a forbidden pair costs more than any feasible total.
    let size = n.max(m);
    let big = 1.0 + gate * (size as f64 + 1.0);
    let c = |i: usize, j: usize| -> f64 {
        if i < n && j < m && cost[i][j] <= gate {
            cost[i][j]
        } else {
            big
        }
    };
    let inf = f64::INFINITY;
    let mut u = vec![0.0; size + 1];
    let mut v = vec![0.0; size + 1];
    let mut p = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];
    for i in 1..=size {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=size {
                if !used[j] {
                    let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=size {
        let i = p[j];
        if i >= 1 && i <= n && j <= m && cost[i - 1][j - 1] <= gate {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

/// Per-frame object positions of an estimate log and of the ground truth,
/// restricted to the frames (and objects) present in the log.
pub fn tracking_points(log: &EstimateLog, truth: &GroundTruth) -> (Vec<Vec<TrackPoint>>, Vec<Vec<TrackPoint>>) {
    let mut est = Vec::with_capacity(log.frames.len());
    let mut gt = Vec::with_capacity(log.frames.len());
    for f in &log.frames {
        est.push(
            f.objects
                .iter()
                .map(|o| TrackPoint {
                    id: o.object_id,
                    position: Vector2::new(o.state.x, o.state.z),
                })
                .collect(),
        );
        gt.push(
            truth
                .objects
                .iter()
                .filter_map(|o| {
                    o.state_at(f.frame).map(|(s, _)| TrackPoint {
                        id: o.id,
                        position: Vector2::new(s.x, s.z),
                    })
                })
                .collect(),
        );
    }
    (est, gt)
}

/// MOTP of a log against truth over an optional frame range.
pub fn motp_log(log: &EstimateLog, truth: &GroundTruth, gate: f64, range: Option<Range<usize>>) -> Result<TrackingError> {
    let (est, gt) = tracking_points(log, truth);
    let r = clamp_range(range, est.len());
    motp(&est[r.clone()], &gt[r], gate, Matching::ById)
}

/// Gate used when matching estimates to truths.
pub const DEFAULT_GATE: f64 = 2.0;

/// APE, RPE and (for object-tracking levels) MOTP of one run, keyed by
/// metric name.
pub fn evaluate(log: &EstimateLog, truth: &GroundTruth, range: Option<Range<usize>>) -> Result<BTreeMap<String, f64>> {
    let te = trajectory_error(&log.poses(), &truth.poses, range.clone())?;
    let mut out = BTreeMap::from([("ape".to_string(), te.ape), ("rpe".to_string(), te.rpe)]);
    if log.level.tracks_objects() {
        out.insert("motp".into(), motp_log(log, truth, DEFAULT_GATE, range)?.motp);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub median: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    Some(Summary {
        mean,
        std,
        median,
        count: values.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub metrics: Result<BTreeMap<String, f64>, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub trials: Vec<TrialOutcome>,
    pub summary: BTreeMap<String, Summary>,
}

impl MonteCarloReport {
    pub fn failures(&self) -> impl Iterator<Item = (u64, &str)> {
        self.trials
            .iter()
            .filter_map(|t| t.metrics.as_ref().err().map(|e| (t.seed, e.as_str())))
    }

    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.trials
            .iter()
            .filter_map(|t| t.metrics.as_ref().ok()?.get(metric).copied())
            .collect()
    }
}

/// Runs `trial` once per seed (in parallel) and aggregates every metric it
/// reports. Failed trials are kept in the report and left out of the summary.
pub fn monte_carlo<F>(seeds: &[u64], trial: F) -> Result<MonteCarloReport>
where
    F: Fn(u64) -> Result<BTreeMap<String, f64>> + Sync,
{
    if seeds.is_empty() {
        return Err(Error::invalid("monte carlo needs at least one trial"));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    let trials: Vec<TrialOutcome> = sorted
        .par_iter()
        .map(|&seed| TrialOutcome {
            seed,
            metrics: trial(seed).map_err(|e| e.to_string()),
        })
        .collect();
    let mut by_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in &trials {
        if let Ok(m) = &t.metrics {
            for (k, v) in m {
                by_metric.entry(k.clone()).or_default().push(*v);
            }
        }
    }
    let summary = by_metric
        .into_iter()
        .filter_map(|(k, v)| summarize(&v).map(|s| (k, s)))
        .collect();
    Ok(MonteCarloReport { trials, summary })
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;

    use super::*;

    fn line(n: usize) -> Vec<Se3Pose> {
        (0..n)
            .map(|i| Se3Pose::camera_from_planar(Vector3::new(0.1 * i as f64, 0.0, i as f64), 0.02 * i as f64))
            .collect()
    }

    #[test]
    fn ape_examples() {
        let gt = line(5);
        assert_eq!(ape(&gt, &gt).unwrap(), 0.0);
        let shifted: Vec<_> = gt
            .iter()
            .map(|p| Se3Pose::camera_from_planar(p.center() + Vector3::new(3.0, 0.0, 4.0), p.heading()))
            .collect();
        assert!((ape(&shifted, &gt).unwrap() - 5.0).abs() < 1e-12);
        assert!(ape(&gt[..3], &gt).is_err());
    }

    #[test]
    fn rpe_examples() {
        let gt = line(3);
        assert!(rpe(&gt, &gt).unwrap() < 1e-15);
        let g = Se3Pose::exp(&nalgebra::Vector6::new(0.1, -0.3, 0.2, 5.0, 1.0, -2.0));
        // A rigid change of world frame: T_cw' = T_cw · g.
        let moved: Vec<_> = gt.iter().map(|p| p.compose(&g)).collect();
        assert!(rpe(&moved, &gt).unwrap() < 1e-12);
    }

    #[test]
    fn motp_examples() {
        let tp = |id, x, z| TrackPoint {
            id,
            position: Vector2::new(x, z),
        };
        let gt = vec![vec![tp(1, 0.0, 0.0), tp(2, 5.0, 5.0)]];
        let perfect = motp(&gt, &gt, 2.0, Matching::ById).unwrap();
        assert_eq!((perfect.motp, perfect.misses, perfect.matched), (0.0, 0, 2));
        let est = vec![vec![tp(1, 0.5, 0.0)]];
        assert!((motp(&est, &gt, 2.0, Matching::ById).unwrap().motp - 0.5).abs() < 1e-15);
        let est = vec![vec![tp(1, 0.5, 0.0), tp(2, 9.0, 5.0)]];
        let e = motp(&est, &gt, 2.0, Matching::ById).unwrap();
        assert_eq!((e.matched, e.misses), (1, 1));
    }

    #[test]
    fn assignment_finds_optimum() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = assignment(&cost, 10.0);
        let total: f64 = a.iter().enumerate().map(|(i, j)| cost[i][j.unwrap()]).sum();
        assert_eq!(total, 5.0);
        let a = assignment(&[vec![0.5, 9.0]], 2.0);
        assert_eq!(a, vec![Some(0)]);
        let a = assignment(&[vec![9.0], vec![8.0]], 2.0);
        assert_eq!(a, vec![None, None]);
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[2.0]).unwrap();
        assert_eq!((s.mean, s.std, s.median), (2.0, 0.0, 2.0));
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((s.mean - 2.5).abs() < 1e-15);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.median, 2.5);
        let r = monte_carlo(&[3, 1, 2], |seed| {
            if seed == 2 {
                Err(Error::invalid("boom"))
            } else {
                Ok(BTreeMap::from([("x".to_string(), 1.0)]))
            }
        })
        .unwrap();
        assert_eq!(r.summary["x"].std, 0.0);
        assert_eq!(r.summary["x"].count, 2);
        assert_eq!(r.failures().count(), 1);
        assert_eq!(r.trials.iter().map(|t| t.seed).collect::<Vec<_>>(), vec![1, 2, 3]);
    }
}
