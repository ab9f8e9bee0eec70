//! KL divergence between the Err-Nor and Nor-Nor distance distributions, and
//! per-gesture ranking of parameter groups by it.
//!
//! The direction is always D(Err-Nor || Nor-Nor), natural log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::DtwDistanceSet;
use crate::ingest::{GestureLabel, ParameterGroup, Task};

/// Standard deviations at or below this are treated as degenerate.
pub const MIN_SIGMA: f64 = 1e-12;
pub const DEFAULT_BINS: usize = 32;
pub const DEFAULT_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DivergenceError {
    #[error("degenerate standard deviation {0}")]
    DegenerateSigma(f64),
    #[error("empty sample list")]
    EmptySamples,
    #[error("need at least 2 samples per side, have {err_nor} err-nor and {nor_nor} nor-nor")]
    InsufficientSamples { err_nor: usize, nor_nor: usize },
    #[error("bin masses must be non-empty, of equal length, and sum to a positive value")]
    BadMasses,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlMethod {
    #[default]
    Gaussian,
    Histogram,
}

impl KlMethod {
    pub fn name(self) -> &'static str {
        match self {
            KlMethod::Gaussian => "gaussian",
            KlMethod::Histogram => "histogram",
        }
    }
}

impl std::str::FromStr for KlMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(KlMethod::Gaussian),
            "histogram" => Ok(KlMethod::Histogram),
            _ => Err(format!("unknown divergence method `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DivergenceConfig {
    pub method: KlMethod,
    pub bins: usize,
    pub epsilon: f64,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        DivergenceConfig { method: KlMethod::Gaussian, bins: DEFAULT_BINS, epsilon: DEFAULT_EPSILON }
    }
}

/// KL(P || Q) for univariate normals P = N(mu_p, sigma_p²), Q = N(mu_q, sigma_q²).
pub fn gaussian_kl(mu_p: f64, sigma_p: f64, mu_q: f64, sigma_q: f64) -> Result<f64, DivergenceError> {
    for s in [sigma_p, sigma_q] {
        if s.is_nan() || s <= MIN_SIGMA {
            return Err(DivergenceError::DegenerateSigma(s));
        }
    }
    let ratio = sigma_p / sigma_q;
    let shift = (mu_p - mu_q) / sigma_q;
    // (σp² + Δμ²) / 2σq² − ½ − ln(σp/σq), arranged to cancel exactly when P = Q
    let kl = 0.5 * (ratio * ratio - 1.0) + 0.5 * shift * shift - ratio.ln();
    Ok(kl.max(0.0))
}

/// Discrete KL over already-binned masses. Empty bins of either side receive
/// `epsilon` before both sides are renormalized.
pub fn kl_from_masses(p: &[f64], q: &[f64], epsilon: f64) -> Result<f64, DivergenceError> {
    if p.is_empty() || p.len() != q.len() {
        return Err(DivergenceError::BadMasses);
    }
    let smooth = |m: &[f64]| -> Result<Vec<f64>, DivergenceError> {
        let filled: Vec<f64> = m.iter().map(|&v| if v > 0.0 { v } else { epsilon }).collect();
        let total: f64 = filled.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(DivergenceError::BadMasses);
        }
        Ok(filled.into_iter().map(|v| v / total).collect())
    };
    let (p, q) = (smooth(p)?, smooth(q)?);
    Ok(p.iter().zip(&q).filter(|(pi, _)| **pi > 0.0).map(|(pi, qi)| pi * (pi / qi).ln()).sum())
}

/// Bins both sample lists over their shared range and evaluates the discrete KL.
pub fn histogram_kl(p_samples: &[f64], q_samples: &[f64], bins: usize, epsilon: f64) -> Result<f64, DivergenceError> {
    if p_samples.is_empty() || q_samples.is_empty() {
        return Err(DivergenceError::EmptySamples);
    }
    let bins = bins.max(1);
    let all = p_samples.iter().chain(q_samples);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let histogram = |samples: &[f64]| {
        let mut counts = vec![0.0; bins];
        for &x in samples {
            let k = if width > 0.0 { (((x - lo) / width) as usize).min(bins - 1) } else { 0 };
            counts[k] += 1.0;
        }
        let n = samples.len() as f64;
        counts.iter_mut().for_each(|c| *c /= n);
        counts
    };
    kl_from_masses(&histogram(p_samples), &histogram(q_samples), epsilon)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Divergence of one distance set under the configured method.
pub fn set_divergence(set: &DtwDistanceSet, config: &DivergenceConfig) -> Result<f64, DivergenceError> {
    let (p, q) = (&set.err_nor, &set.nor_nor);
    match config.method {
        KlMethod::Gaussian => {
            if p.len() < 2 || q.len() < 2 {
                return Err(DivergenceError::InsufficientSamples { err_nor: p.len(), nor_nor: q.len() });
            }
            gaussian_kl(mean(p), sample_sd(p), mean(q), sample_sd(q))
        }
        KlMethod::Histogram => histogram_kl(p, q, config.bins, config.epsilon),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlEntry {
    pub task: Task,
    pub gesture: GestureLabel,
    pub group: ParameterGroup,
    pub kl_value: f64,
    pub method: KlMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GestureRanking {
    pub task: Task,
    pub gesture: GestureLabel,
    /// Groups by descending divergence, ties in column order.
    pub groups: Vec<ParameterGroup>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KlReport {
    pub entries: Vec<KlEntry>,
    pub rankings: Vec<GestureRanking>,
    pub warnings: Vec<String>,
}

impl KlReport {
    pub fn ranking(&self, task: Task, gesture: &GestureLabel) -> Option<&GestureRanking> {
        self.rankings.iter().find(|r| r.task == task && &r.gesture == gesture)
    }

    /// Entries as `task,gesture,group,method,kl` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,gesture,group,method,kl\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.task,
                e.gesture,
                e.group,
                e.method.name(),
                crate::report::fmt_f64(e.kl_value)
            ));
        }
        out
    }
}

/// Scores every distance set and ranks the groups within each gesture. Sets
/// whose divergence cannot be computed are skipped with a warning.
pub fn kl_report(distance_sets: &[DtwDistanceSet], config: &DivergenceConfig) -> KlReport {
    let mut report = KlReport::default();
    for set in distance_sets {
        match set_divergence(set, config) {
            Ok(kl_value) => report.entries.push(KlEntry {
                task: set.task,
                gesture: set.gesture.clone(),
                group: set.group,
                kl_value,
                method: config.method,
            }),
            Err(e) => report.warnings.push(format!("{} {} {}: skipped: {e}", set.task, set.gesture, set.group)),
        }
    }
    let mut by_gesture: BTreeMap<(Task, GestureLabel), Vec<&KlEntry>> = BTreeMap::new();
    for e in &report.entries {
        by_gesture.entry((e.task, e.gesture.clone())).or_default().push(e);
    }
    for ((task, gesture), mut entries) in by_gesture {
        entries.sort_by(|a, b| b.kl_value.total_cmp(&a.kl_value).then(a.group.ordinal().cmp(&b.group.ordinal())));
        report.rankings.push(GestureRanking { task, gesture, groups: entries.iter().map(|e| e.group).collect() });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_gaussians() {
        assert_eq!(gaussian_kl(1.5, 0.7, 1.5, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_values() {
        assert!((gaussian_kl(0.0, 1.0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let expected = 0.5f64.ln() + 2.0 - 0.5;
        assert!((gaussian_kl(0.0, 2.0, 0.0, 1.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.80685).abs() < 1e-5);
    }

    #[test]
    fn degenerate_sigma() {
        assert_eq!(gaussian_kl(0.0, 0.0, 0.0, 1.0), Err(DivergenceError::DegenerateSigma(0.0)));
        assert!(gaussian_kl(0.0, 1.0, 0.0, 1e-13).is_err());
    }

    #[test]
    fn prebinned_masses() {
        let kl = kl_from_masses(&[0.5, 0.5], &[0.25, 0.75], 1e-9).unwrap();
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl - expected).abs() < 1e-15);
        assert!((kl - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn histogram_identity_and_smoothing() {
        let p = [1.0, 2.0, 2.5, 7.0, 3.3];
        assert!(histogram_kl(&p, &p, 8, 1e-9).unwrap().abs() < 1e-12);
        let q = [1.0, 1.1, 1.2];
        let kl = histogram_kl(&[1.0, 9.0], &q, 4, 1e-6).unwrap();
        assert!(kl.is_finite() && kl > 0.0);
        assert_eq!(histogram_kl(&[], &q, 4, 1e-6), Err(DivergenceError::EmptySamples));
        // constant pooled samples collapse to a single bin
        assert_eq!(histogram_kl(&[2.0, 2.0], &[2.0], 4, 1e-9).unwrap(), 0.0);
    }

    fn set(group: ParameterGroup, err_nor: Vec<f64>, nor_nor: Vec<f64>) -> DtwDistanceSet {
        DtwDistanceSet { task: Task::Suturing, gesture: GestureLabel::g(3), group, nor_nor, err_nor }
    }

    #[test]
    fn report_ranking_and_warnings() {
        let base = vec![1.0, 2.0, 3.0, 2.0, 1.5];
        let sets = vec![
            set(ParameterGroup::RightPosition, base.clone(), base.clone()),
            set(ParameterGroup::LeftPosition, base.iter().map(|v| v + 5.0).collect(), base.clone()),
            set(ParameterGroup::LeftGripperAngle, vec![1.0], base.clone()),
        ];
        let report = kl_report(&sets, &DivergenceConfig::default());
        assert_eq!(report.entries.len(), 2);
        assert_eq!(report.entries[0].kl_value, 0.0);
        assert_eq!(report.rankings[0].groups, vec![ParameterGroup::LeftPosition, ParameterGroup::RightPosition]);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn ties_follow_column_order() {
        let base = vec![1.0, 2.0, 3.0];
        let sets = vec![
            set(ParameterGroup::LeftGripperAngle, base.clone(), base.clone()),
            set(ParameterGroup::RightRotationMatrix, base.clone(), base.clone()),
        ];
        let report = kl_report(&sets, &DivergenceConfig::default());
        assert_eq!(report.rankings[0].groups, vec![ParameterGroup::RightRotationMatrix, ParameterGroup::LeftGripperAngle]);
    }
}
