//! Class-average trajectories: every example of a class is time-normalized to
//! a common length, the (time index, value) pairs are pooled, and fuzzy
//! c-means centers summarize the pooled cloud.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{GestureLabel, Task};
use crate::segmentation::{Class, GestureInstance, InstanceSet};

/// Keep every third sample before interpolation.
pub const DOWNSAMPLE_STRIDE: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("signal of {0} samples is shorter than 2 after downsampling")]
    TooShort(usize),
    #[error("{points} points cannot support {clusters} clusters")]
    TooFewPoints { points: usize, clusters: usize },
    #[error("invalid clustering configuration: {0}")]
    InvalidConfig(String),
    #[error("{class} class of {gesture} has {count} examples, need at least 2")]
    InsufficientExamples { gesture: GestureLabel, class: &'static str, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcmConfig {
    pub cluster_count: usize,
    pub fuzzifier: f64,
    /// Stop once no center moves farther than this between iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub rng_seed: u64,
    /// Scale time and value axes to unit range before clustering.
    pub scale_axes: bool,
}

impl Default for FcmConfig {
    fn default() -> Self {
        FcmConfig { cluster_count: 15, fuzzifier: 2.0, tolerance: 1e-5, max_iterations: 300, rng_seed: 0, scale_axes: false }
    }
}

/// Downsamples by [`DOWNSAMPLE_STRIDE`] (phase 0) and linearly interpolates
/// to `target_length` samples. Both endpoints of the downsampled signal are
/// kept exactly.
pub fn time_normalize(signal: &[f64], target_length: usize) -> Result<Vec<f64>, TrajectoryError> {
    let down: Vec<f64> = signal.iter().step_by(DOWNSAMPLE_STRIDE).copied().collect();
    if down.len() < 2 {
        return Err(TrajectoryError::TooShort(signal.len()));
    }
    let last = down.len() - 1;
    if target_length == 1 {
        return Ok(vec![down[0]]);
    }
    let step = last as f64 / (target_length - 1) as f64;
    Ok((0..target_length)
        .map(|k| {
            if k == target_length - 1 {
                return down[last];
            }
            let pos = k as f64 * step;
            let i = (pos.floor() as usize).min(last - 1);
            let frac = pos - i as f64;
            if frac == 0.0 {
                down[i]
            } else {
                down[i] + frac * (down[i + 1] - down[i])
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmResult {
    pub centers: Vec<[f64; 2]>,
    /// One row per point, one column per cluster.
    pub memberships: Vec<Vec<f64>>,
    /// Objective after each completed iteration.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// `u^m`, with the common m = 2 kept off the slow `powf` path.
fn pow_m(u: f64, m: f64) -> f64 {
    if m == 2.0 {
        u * u
    } else {
        u.powf(m)
    }
}

/// Optimal memberships for fixed centers. A point sitting on one or more
/// centers splits its membership evenly among them.
fn update_memberships(points: &[[f64; 2]], centers: &[[f64; 2]], m: f64, out: &mut [Vec<f64>]) {
    let exponent = 1.0 / (m - 1.0);
    for (p, row) in points.iter().zip(out.iter_mut()) {
        for (u, c) in row.iter_mut().zip(centers) {
            *u = sq_dist(p, c);
        }
        let zeros = row.iter().filter(|v| **v == 0.0).count();
        if zeros > 0 {
            for u in row.iter_mut() {
                *u = if *u == 0.0 { 1.0 / zeros as f64 } else { 0.0 };
            }
            continue;
        }
        for u in row.iter_mut() {
            *u = if exponent == 1.0 { 1.0 / *u } else { u.powf(-exponent) };
        }
        let total: f64 = row.iter().sum();
        for u in row.iter_mut() {
            *u /= total;
        }
    }
}

fn update_centers(points: &[[f64; 2]], memberships: &[Vec<f64>], m: f64, centers: &mut [[f64; 2]]) {
    let mut acc = vec![[0.0f64; 3]; centers.len()];
    for (p, row) in points.iter().zip(memberships) {
        for (a, u) in acc.iter_mut().zip(row) {
            let u = pow_m(*u, m);
            a[0] += u * p[0];
            a[1] += u * p[1];
            a[2] += u;
        }
    }
    for (c, a) in centers.iter_mut().zip(&acc) {
        if a[2] > 0.0 {
            *c = [a[0] / a[2], a[1] / a[2]];
        }
    }
}

pub fn fcm_objective(points: &[[f64; 2]], centers: &[[f64; 2]], memberships: &[Vec<f64>], m: f64) -> f64 {
    points
        .iter()
        .zip(memberships)
        .map(|(p, row)| centers.iter().zip(row).map(|(c, u)| pow_m(*u, m) * sq_dist(p, c)).sum::<f64>())
        .sum()
}

/// Fuzzy c-means on 2-D points.
///
/// Initial centers are distinct points drawn with a seeded RNG; each iteration
/// updates memberships for the current centers and then centers for those
/// memberships. Running out of iterations is not an error: `converged` is
/// false and the final state is returned.
pub fn fuzzy_cmeans(points: &[[f64; 2]], config: &FcmConfig) -> Result<FcmResult, TrajectoryError> {
    let c = config.cluster_count;
    let m = config.fuzzifier;
    if c == 0 || m.is_nan() || m <= 1.0 || config.tolerance.is_nan() || config.tolerance <= 0.0 || config.max_iterations == 0 {
        return Err(TrajectoryError::InvalidConfig(format!(
            "clusters={c} fuzzifier={m} tolerance={} max_iterations={}",
            config.tolerance, config.max_iterations
        )));
    }
    if points.len() < c {
        return Err(TrajectoryError::TooFewPoints { points: points.len(), clusters: c });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut centers: Vec<[f64; 2]> = sample(&mut rng, points.len(), c).into_iter().map(|i| points[i]).collect();
    let mut memberships = vec![vec![0.0; c]; points.len()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        update_memberships(points, &centers, m, &mut memberships);
        let previous = centers.clone();
        update_centers(points, &memberships, m, &mut centers);
        history.push(fcm_objective(points, &centers, &memberships, m));
        let shift = centers.iter().zip(&previous).map(|(a, b)| sq_dist(a, b).sqrt()).fold(0.0, f64::max);
        if shift < config.tolerance {
            converged = true;
            break;
        }
    }
    update_memberships(points, &centers, m, &mut memberships);
    Ok(FcmResult { centers, memberships, objective_history: history, iterations, converged })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageTrajectory {
    pub task: Task,
    pub gesture: GestureLabel,
    /// 1-indexed kinematic column.
    pub variable_column: usize,
    pub class: Class,
    pub target_length: usize,
    /// Sorted by time.
    pub centers: Vec<TrajectoryPoint>,
    pub converged: bool,
}

/// Mean duration of the instances rounded to the nearest frame, at least 2.
pub fn target_length(instances: &[GestureInstance]) -> usize {
    if instances.is_empty() {
        return 2;
    }
    let mean = instances.iter().map(|i| i.duration_frames() as f64).sum::<f64>() / instances.len() as f64;
    (mean.round() as usize).max(2)
}

/// Average trajectory of one kinematic column for one class.
///
/// `target` overrides the class-mean target length (used for per-task
/// lengths).
pub fn average_trajectory(
    set: &InstanceSet,
    variable_column: usize,
    class: Class,
    config: &FcmConfig,
    target: Option<usize>,
) -> Result<AverageTrajectory, TrajectoryError> {
    let instances = set.class(class);
    if instances.len() < 2 {
        return Err(TrajectoryError::InsufficientExamples {
            gesture: set.gesture.clone(),
            class: class.name(),
            count: instances.len(),
        });
    }
    let length = target.unwrap_or_else(|| target_length(instances)).max(2);
    let mut points = Vec::with_capacity(length * instances.len());
    for inst in instances {
        let normalized = time_normalize(&inst.column(variable_column), length)?;
        points.extend(normalized.into_iter().enumerate().map(|(k, v)| [k as f64, v]));
    }

    let fit = if config.scale_axes {
        let (scaled, restore) = scale_unit(&points);
        let mut fit = fuzzy_cmeans(&scaled, config)?;
        fit.centers.iter_mut().for_each(|c| *c = restore(*c));
        fit
    } else {
        fuzzy_cmeans(&points, config)?
    };

    let mut centers: Vec<TrajectoryPoint> = fit.centers.iter().map(|c| TrajectoryPoint { time: c[0], value: c[1] }).collect();
    centers.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.value.total_cmp(&b.value)));
    Ok(AverageTrajectory {
        task: set.task,
        gesture: set.gesture.clone(),
        variable_column,
        class,
        target_length: length,
        centers,
        converged: fit.converged,
    })
}

fn scale_unit(points: &[[f64; 2]]) -> (Vec<[f64; 2]>, impl Fn([f64; 2]) -> [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = [0, 1].map(|a| if hi[a] > lo[a] { hi[a] - lo[a] } else { 1.0 });
    let scaled = points.iter().map(|p| [(p[0] - lo[0]) / span[0], (p[1] - lo[1]) / span[1]]).collect();
    (scaled, move |c: [f64; 2]| [c[0] * span[0] + lo[0], c[1] * span[1] + lo[1]])
}
