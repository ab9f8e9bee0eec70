//! Dynamic time warping and the Nor-Nor / Err-Nor distance samples built on it.
//!
//! The step pattern is the classic symmetric one: match, insertion and
//! deletion all carry weight 1, with no window constraint and both endpoints
//! matched. The local cost between two samples is their Euclidean distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{GestureLabel, ParameterGroup, Task};
use crate::segmentation::{extract_group, InstanceSet, Series};

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("series widths differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("empty series")]
    EmptySeries,
    #[error("{gesture}: need at least 2 normal and 1 erroneous example, have {normal} and {erroneous}")]
    InsufficientExamples { gesture: GestureLabel, normal: usize, erroneous: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtwMode {
    /// One 1-D warping per variable, distances summed.
    #[default]
    Independent,
    /// All variables warped together as points.
    Dependent,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    /// Divide by the number of steps on the optimal warping path.
    PathLength,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DtwConfig {
    pub mode: DtwMode,
    pub normalize: Normalization,
    /// Standardize every variable of each series before warping.
    pub zscore: bool,
}

impl DtwConfig {
    pub fn independent() -> Self {
        DtwConfig::default()
    }

    pub fn dependent() -> Self {
        DtwConfig { mode: DtwMode::Dependent, ..DtwConfig::default() }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Accumulated cost over `la × lb` cells with the given local cost, plus the
/// length of the chosen optimal path. Ties prefer the diagonal, then
/// insertion, then deletion.
fn accumulate(la: usize, lb: usize, cost: impl Fn(usize, usize) -> f64) -> (f64, usize) {
    let mut prev = vec![(f64::INFINITY, 0usize); lb];
    let mut cur = vec![(f64::INFINITY, 0usize); lb];
    for i in 0..la {
        for j in 0..lb {
            let c = cost(i, j);
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, 0);
                if i > 0 && j > 0 {
                    best = prev[j - 1];
                }
                if i > 0 && prev[j].0 < best.0 {
                    best = prev[j];
                }
                if j > 0 && cur[j - 1].0 < best.0 {
                    best = cur[j - 1];
                }
                best
            };
            cur[j] = (best.0 + c, best.1 + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[lb - 1]
}

fn finish(total: (f64, usize), normalize: Normalization) -> f64 {
    match normalize {
        Normalization::None => total.0,
        Normalization::PathLength => total.0 / total.1 as f64,
    }
}

fn zscored(s: &Series) -> Series {
    let n = s.len() as f64;
    let mut data = s.data().to_vec();
    for c in 0..s.width() {
        let col = s.column(c);
        let mean = col.iter().sum::<f64>() / n;
        let var = if s.len() > 1 { col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let sd = var.sqrt();
        for (i, v) in col.iter().enumerate() {
            data[i * s.width() + c] = if sd > 0.0 { (v - mean) / sd } else { 0.0 };
        }
    }
    Series::new(s.width(), data)
}

/// DTW distance between two series of equal width.
pub fn dtw_distance(a: &Series, b: &Series, config: &DtwConfig) -> Result<f64, AlignError> {
    if a.width() != b.width() {
        return Err(AlignError::DimensionMismatch(a.width(), b.width()));
    }
    if a.is_empty() || b.is_empty() {
        return Err(AlignError::EmptySeries);
    }
    let (za, zb);
    let (a, b) = if config.zscore {
        za = zscored(a);
        zb = zscored(b);
        (&za, &zb)
    } else {
        (a, b)
    };
    Ok(match config.mode {
        DtwMode::Dependent => {
            let total = accumulate(a.len(), b.len(), |i, j| squared_distance(a.point(i), b.point(j)).sqrt());
            finish(total, config.normalize)
        }
        DtwMode::Independent => (0..a.width())
            .map(|c| {
                let (x, y) = (a.column(c), b.column(c));
                finish(accumulate(x.len(), y.len(), |i, j| (x[i] - y[j]).abs()), config.normalize)
            })
            .sum(),
    })
}

/// Nor-Nor and Err-Nor distance samples for one gesture and parameter group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtwDistanceSet {
    pub task: Task,
    pub gesture: GestureLabel,
    pub group: ParameterGroup,
    pub nor_nor: Vec<f64>,
    pub err_nor: Vec<f64>,
}

/// Runs DTW over every unordered pair of normal examples and every
/// (erroneous, normal) pair. Output order follows instance order; the pairs
/// are evaluated in parallel.
pub fn build_distance_sets(set: &InstanceSet, group: ParameterGroup, config: &DtwConfig) -> Result<DtwDistanceSet, AlignError> {
    let (n, e) = (set.normal.len(), set.erroneous.len());
    if n < 2 || e < 1 {
        return Err(AlignError::InsufficientExamples { gesture: set.gesture.clone(), normal: n, erroneous: e });
    }
    let normal: Vec<Series> = set.normal.iter().map(|i| extract_group(i, group)).collect();
    let erroneous: Vec<Series> = set.erroneous.iter().map(|i| extract_group(i, group)).collect();

    let nn_pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let en_pairs: Vec<(usize, usize)> = (0..e).flat_map(|i| (0..n).map(move |j| (i, j))).collect();

    let nor_nor = nn_pairs
        .par_iter()
        .map(|&(i, j)| dtw_distance(&normal[i], &normal[j], config))
        .collect::<Result<Vec<_>, _>>()?;
    let err_nor = en_pairs
        .par_iter()
        .map(|&(i, j)| dtw_distance(&erroneous[i], &normal[j], config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DtwDistanceSet { task: set.task, gesture: set.gesture.clone(), group, nor_nor, err_nor })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni(v: &[f64]) -> Series {
        Series::univariate(v.to_vec())
    }

    #[test]
    fn identity_is_zero() {
        let a = Series::new(2, vec![1.0, 2.0, -3.0, 0.5, 4.0, 4.0]);
        assert_eq!(dtw_distance(&a, &a, &DtwConfig::independent()).unwrap(), 0.0);
        assert_eq!(dtw_distance(&a, &a, &DtwConfig::dependent()).unwrap(), 0.0);
    }

    #[test]
    fn single_point_against_three() {
        assert_eq!(dtw_distance(&uni(&[0.0]), &uni(&[1.0, 1.0, 1.0]), &DtwConfig::independent()).unwrap(), 3.0);
    }

    #[test]
    fn zero_cost_alignment_exists() {
        assert_eq!(dtw_distance(&uni(&[0.0, 0.0, 1.0]), &uni(&[0.0, 1.0]), &DtwConfig::independent()).unwrap(), 0.0);
    }

    #[test]
    fn modes_agree_in_one_dimension() {
        let a = uni(&[0.3, -1.2, 2.5, 0.0]);
        let b = uni(&[1.0, 0.2, -0.7]);
        assert_eq!(
            dtw_distance(&a, &b, &DtwConfig::independent()).unwrap(),
            dtw_distance(&a, &b, &DtwConfig::dependent()).unwrap()
        );
    }

    #[test]
    fn path_length_normalization() {
        let cfg = DtwConfig { normalize: Normalization::PathLength, ..DtwConfig::default() };
        // single point against three: path has 3 steps
        assert_eq!(dtw_distance(&uni(&[0.0]), &uni(&[1.0, 1.0, 1.0]), &cfg).unwrap(), 1.0);
    }

    #[test]
    fn zscore_removes_offset_and_scale() {
        let cfg = DtwConfig { zscore: true, ..DtwConfig::default() };
        let a = uni(&[0.0, 1.0, 2.0, 1.0]);
        let b = uni(&[10.0, 13.0, 16.0, 13.0]);
        assert!(dtw_distance(&a, &b, &cfg).unwrap() < 1e-12);
    }

    #[test]
    fn errors() {
        let a = Series::new(2, vec![0.0, 0.0]);
        assert_eq!(dtw_distance(&a, &uni(&[0.0]), &DtwConfig::default()), Err(AlignError::DimensionMismatch(2, 1)));
        assert_eq!(dtw_distance(&uni(&[]), &uni(&[0.0]), &DtwConfig::default()), Err(AlignError::EmptySeries));
    }
}
