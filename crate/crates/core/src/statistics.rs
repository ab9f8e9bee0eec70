//! Duration t-tests, Pearson correlations and the executional error tables.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::ingest::{ErrorMode, GestureLabel, GrsBand, SkillRecord, SpLevel, Task, GRS_ELEMENTS};
use crate::segmentation::InstanceSet;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, have {have}")]
    TooFewSamples { needed: usize, have: usize },
    #[error("non-finite sample value")]
    NonFinite,
    #[error("constant input, correlation undefined")]
    ConstantInput,
    #[error("length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no skill record for trial {0}")]
    MissingSkillRecord(String),
}

/// Student-t cumulative distribution function.
pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(dof / 2.0, 0.5, dof / (dof + t * t));
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// P(T > t) for a Student-t variable.
pub fn student_t_sf(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let tail = 0.5 * beta_reg(dof / 2.0, 0.5, dof / (dof + t * t));
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    #[default]
    Welch,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    Greater,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub dof: f64,
    pub alternative: Alternative,
    pub variant: TTestVariant,
    pub n_a: usize,
    pub n_b: usize,
    /// Both samples had zero variance; t is undefined and p set by rule.
    pub degenerate: bool,
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sample t-test of `a > b` (upper tail).
///
/// When both samples have zero variance the test is degenerate: equal means
/// give t = 0 and p = 0.5; unequal means give an infinite t.
pub fn one_tailed_ttest(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TTestResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooFewSamples { needed: 2, have: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = moments(a);
    let (mb, vb) = moments(b);
    let result = |t_statistic: f64, p_value: f64, dof: f64, degenerate: bool| TTestResult {
        t_statistic,
        p_value,
        dof,
        alternative: Alternative::Greater,
        variant,
        n_a: a.len(),
        n_b: b.len(),
        degenerate,
    };
    if va == 0.0 && vb == 0.0 {
        let dof = na + nb - 2.0;
        return Ok(if ma == mb {
            result(0.0, 0.5, dof, true)
        } else if ma > mb {
            result(f64::INFINITY, 0.0, dof, true)
        } else {
            result(f64::NEG_INFINITY, 1.0, dof, true)
        });
    }
    let (se, dof) = match variant {
        TTestVariant::Welch => {
            let (sa, sb) = (va / na, vb / nb);
            let dof = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
            ((sa + sb).sqrt(), dof)
        }
        TTestVariant::Pooled => {
            let dof = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / dof;
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), dof)
        }
    };
    let t = (ma - mb) / se;
    Ok(result(t, student_t_sf(t, dof).clamp(0.0, 1.0), dof, false))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Sample Pearson correlation with a two-sided p-value from the
/// t-transform on n − 2 degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewSamples { needed: 3, have: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let dof = n - 2.0;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (dof / (1.0 - r * r)).sqrt();
        (2.0 * student_t_sf(t.abs(), dof)).min(1.0)
    };
    Ok(CorrelationResult { r, p_value, n: x.len() })
}

/// Human-readable p-value; anything below 1e-15 prints as `<1e-15`.
pub fn format_p(p: f64) -> String {
    if p < 1e-15 {
        "<1e-15".to_string()
    } else {
        format!("{p:.3e}")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ModeCounts {
    pub multiple_attempts: usize,
    pub needle_drop: usize,
    pub needle_orientation: usize,
    pub out_of_view: usize,
}

impl ModeCounts {
    pub fn add(&mut self, mode: ErrorMode) {
        match mode {
            ErrorMode::MultipleAttempts => self.multiple_attempts += 1,
            ErrorMode::NeedleDrop => self.needle_drop += 1,
            ErrorMode::NeedleOrientation => self.needle_orientation += 1,
            ErrorMode::OutOfView => self.out_of_view += 1,
        }
    }

    pub fn get(&self, mode: ErrorMode) -> usize {
        match mode {
            ErrorMode::MultipleAttempts => self.multiple_attempts,
            ErrorMode::NeedleDrop => self.needle_drop,
            ErrorMode::NeedleOrientation => self.needle_orientation,
            ErrorMode::OutOfView => self.out_of_view,
        }
    }

    pub fn total(&self) -> usize {
        ErrorMode::ALL.iter().map(|m| self.get(*m)).sum()
    }

    fn merge(&mut self, other: &ModeCounts) {
        self.multiple_attempts += other.multiple_attempts;
        self.needle_drop += other.needle_drop;
        self.needle_orientation += other.needle_orientation;
        self.out_of_view += other.out_of_view;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorCountRow {
    pub task: Task,
    /// `None` on the task roll-up row.
    pub gesture: Option<GestureLabel>,
    /// Every labeled mode occurrence.
    pub mode_counts: ModeCounts,
    pub erroneous: usize,
    pub total: usize,
    /// Erroneous examples carrying exactly one mode, by that mode.
    pub single_mode: ModeCounts,
    /// Erroneous examples carrying two or more modes.
    pub multiple_errors: usize,
}

impl ErrorCountRow {
    fn empty(task: Task, gesture: Option<GestureLabel>) -> Self {
        ErrorCountRow {
            task,
            gesture,
            mode_counts: ModeCounts::default(),
            erroneous: 0,
            total: 0,
            single_mode: ModeCounts::default(),
            multiple_errors: 0,
        }
    }

    pub fn erroneous_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.erroneous as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ErrorCountTable {
    pub rows: Vec<ErrorCountRow>,
    pub task_totals: Vec<ErrorCountRow>,
}

impl ErrorCountTable {
    pub fn row(&self, task: Task, gesture: &GestureLabel) -> Option<&ErrorCountRow> {
        self.rows.iter().find(|r| r.task == task && r.gesture.as_ref() == Some(gesture))
    }

    pub fn total(&self, task: Task) -> Option<&ErrorCountRow> {
        self.task_totals.iter().find(|r| r.task == task)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "task,gesture,multiple_attempts,needle_drop,needle_orientation,out_of_view,erroneous,total,erroneous_pct,\
             single_multiple_attempts,single_needle_drop,single_needle_orientation,single_out_of_view,multiple_errors\n",
        );
        for r in self.rows.iter().chain(&self.task_totals) {
            let gesture = r.gesture.as_ref().map_or_else(|| "All".to_string(), ToString::to_string);
            let modes: Vec<String> = ErrorMode::ALL.iter().map(|m| r.mode_counts.get(*m).to_string()).collect();
            let single: Vec<String> = ErrorMode::ALL.iter().map(|m| r.single_mode.get(*m).to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.task,
                gesture,
                modes.join(","),
                r.erroneous,
                r.total,
                crate::report::fmt_f64(100.0 * r.erroneous_fraction()),
                single.join(","),
                r.multiple_errors,
            ));
        }
        out
    }
}

/// Counts per (task, gesture) plus one roll-up row per task.
pub fn error_count_table(sets: &[InstanceSet]) -> ErrorCountTable {
    let mut rows: BTreeMap<(Task, GestureLabel), ErrorCountRow> = BTreeMap::new();
    for set in sets {
        let row = rows
            .entry((set.task, set.gesture.clone()))
            .or_insert_with(|| ErrorCountRow::empty(set.task, Some(set.gesture.clone())));
        for inst in set.iter() {
            row.total += 1;
            let Some(ann) = &inst.annotation else { continue };
            let active: Vec<ErrorMode> = ann.modes.active().collect();
            for m in &active {
                row.mode_counts.add(*m);
            }
            match active.len() {
                0 => {}
                1 => {
                    row.erroneous += 1;
                    row.single_mode.add(active[0]);
                }
                _ => {
                    row.erroneous += 1;
                    row.multiple_errors += 1;
                }
            }
        }
    }
    let mut totals: BTreeMap<Task, ErrorCountRow> = BTreeMap::new();
    for r in rows.values() {
        let t = totals.entry(r.task).or_insert_with(|| ErrorCountRow::empty(r.task, None));
        t.mode_counts.merge(&r.mode_counts);
        t.single_mode.merge(&r.single_mode);
        t.erroneous += r.erroneous;
        t.total += r.total;
        t.multiple_errors += r.multiple_errors;
    }
    ErrorCountTable { rows: rows.into_values().collect(), task_totals: totals.into_values().collect() }
}

/// Per-gesture duration comparison of erroneous against normal examples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DurationComparison {
    pub task: Task,
    /// `None` for the pooled all-gesture comparison.
    pub gesture: Option<GestureLabel>,
    pub normal_mean: f64,
    pub erroneous_mean: f64,
    pub normal_n: usize,
    pub erroneous_n: usize,
    pub test: Option<TTestResult>,
    pub note: Option<String>,
}

fn compare_durations(
    task: Task,
    gesture: Option<GestureLabel>,
    erroneous: &[f64],
    normal: &[f64],
    variant: TTestVariant,
) -> DurationComparison {
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let (test, note) = match one_tailed_ttest(erroneous, normal, variant) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    DurationComparison {
        task,
        gesture,
        normal_mean: mean(normal),
        erroneous_mean: mean(erroneous),
        normal_n: normal.len(),
        erroneous_n: erroneous.len(),
        test,
        note,
    }
}

/// Duration tests for every gesture set and for all gestures of each task
/// pooled; pooled rows come last.
pub fn duration_comparisons(sets: &[InstanceSet], variant: TTestVariant) -> Vec<DurationComparison> {
    let durations = |insts: &[crate::segmentation::GestureInstance]| -> Vec<f64> {
        insts.iter().map(|i| i.duration_frames() as f64).collect()
    };
    let mut out = Vec::new();
    let mut pooled: BTreeMap<Task, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for set in sets {
        let (e, n) = (durations(&set.erroneous), durations(&set.normal));
        let p = pooled.entry(set.task).or_default();
        p.0.extend(&e);
        p.1.extend(&n);
        out.push(compare_durations(set.task, Some(set.gesture.clone()), &e, &n, variant));
    }
    for (task, (e, n)) in pooled {
        out.push(compare_durations(task, None, &e, &n, variant));
    }
    out
}

/// Per-trial quantities joined with skill metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial_id: String,
    /// Sum of labeled error modes over the trial's gestures.
    pub executional_errors: usize,
    pub procedural_errors: usize,
    pub duration_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSummary {
    pub band: String,
    pub trials: usize,
    pub mean_executional_errors: f64,
    pub sd_executional_errors: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedCorrelation {
    pub x: String,
    pub y: String,
    pub result: Option<CorrelationResult>,
    pub error: Option<String>,
}

impl NamedCorrelation {
    fn compute(x: &str, y: &str, xs: &[f64], ys: &[f64]) -> Self {
        match pearson(xs, ys) {
            Ok(r) => NamedCorrelation { x: x.into(), y: y.into(), result: Some(r), error: None },
            Err(e) => NamedCorrelation { x: x.into(), y: y.into(), result: None, error: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SkillBreakdown {
    pub by_sp_level: Vec<BandSummary>,
    pub by_grs_band: Vec<BandSummary>,
    /// Procedural error count against the GRS total and each sub-score.
    pub procedural_vs_grs: Vec<NamedCorrelation>,
    pub executional_vs_duration: Option<NamedCorrelation>,
    pub procedural_vs_duration: Option<NamedCorrelation>,
    pub warnings: Vec<String>,
}

fn band_summary(band: &str, counts: &[f64]) -> BandSummary {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let sd = if counts.len() > 1 {
        (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    BandSummary { band: band.to_string(), trials: counts.len(), mean_executional_errors: mean, sd_executional_errors: sd }
}

/// Executional error spread by skill band and the correlations of
/// procedural errors with GRS scores and with trial duration.
pub fn skill_breakdowns(trials: &[TrialSummary], skills: &[SkillRecord]) -> Result<SkillBreakdown, StatsError> {
    let by_trial: HashMap<&str, &SkillRecord> = skills.iter().map(|s| (s.trial_id.as_str(), s)).collect();
    let joined: Vec<(&TrialSummary, &SkillRecord)> = trials
        .iter()
        .map(|t| {
            by_trial
                .get(t.trial_id.as_str())
                .map(|s| (t, *s))
                .ok_or_else(|| StatsError::MissingSkillRecord(t.trial_id.clone()))
        })
        .collect::<Result<_, _>>()?;

    let mut out = SkillBreakdown::default();
    for level in SpLevel::ALL {
        let counts: Vec<f64> =
            joined.iter().filter(|(_, s)| s.sp_level == level).map(|(t, _)| t.executional_errors as f64).collect();
        if counts.is_empty() {
            out.warnings.push(format!("no trials in {}", level.name()));
        } else {
            out.by_sp_level.push(band_summary(level.name(), &counts));
        }
    }
    for band in GrsBand::ALL {
        let counts: Vec<f64> =
            joined.iter().filter(|(_, s)| s.grs_band() == band).map(|(t, _)| t.executional_errors as f64).collect();
        if counts.is_empty() {
            out.warnings.push(format!("no trials in {}", band.name()));
        } else {
            out.by_grs_band.push(band_summary(band.name(), &counts));
        }
    }

    let procedural: Vec<f64> = joined.iter().map(|(t, _)| t.procedural_errors as f64).collect();
    let grs_total: Vec<f64> = joined.iter().map(|(_, s)| f64::from(s.grs_total)).collect();
    out.procedural_vs_grs.push(NamedCorrelation::compute("procedural_errors", "GRS total", &procedural, &grs_total));
    for (k, name) in GRS_ELEMENTS.iter().enumerate() {
        let sub: Vec<f64> = joined.iter().map(|(_, s)| f64::from(s.grs_sub[k])).collect();
        out.procedural_vs_grs.push(NamedCorrelation::compute("procedural_errors", name, &procedural, &sub));
    }
    let durations: Vec<f64> = joined.iter().map(|(t, _)| t.duration_frames as f64).collect();
    let executional: Vec<f64> = joined.iter().map(|(t, _)| t.executional_errors as f64).collect();
    out.executional_vs_duration =
        Some(NamedCorrelation::compute("executional_errors", "duration_frames", &executional, &durations));
    out.procedural_vs_duration =
        Some(NamedCorrelation::compute("procedural_errors", "duration_frames", &procedural, &durations));
    for c in out.procedural_vs_grs.iter().chain(&out.executional_vs_duration).chain(&out.procedural_vs_duration) {
        if let Some(e) = &c.error {
            out.warnings.push(format!("{} vs {}: {e}", c.x, c.y));
        }
    }
    Ok(out)
}
