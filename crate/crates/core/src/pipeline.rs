//! Batch orchestration: a declarative run manifest drives ingestion,
//! validation, the executional and procedural analyses, and artifact output.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{build_distance_sets, DtwConfig, DtwDistanceSet};
use crate::divergence::{kl_report, DivergenceConfig, KlReport};
use crate::ingest::{
    self, ErrorAnnotation, GestureLabel, GrammarGraph, KinematicTrial, ParameterGroup, SkillRecord, Task, TranscriptEntry,
};
use crate::procedural::{detect_procedural_errors, summarize_procedural, ProceduralErrorReport, ProceduralSummaryRow};
use crate::report::{build_index, fmt_f64, write_artifacts, Artifact};
use crate::segmentation::{build_instance_sets, segment_trial, Class, InstanceSet, DEFAULT_MIN_ERRONEOUS};
use crate::statistics::{
    duration_comparisons, error_count_table, skill_breakdowns, DurationComparison, ErrorCountTable, SkillBreakdown,
    TTestVariant, TrialSummary,
};
use crate::trajectory::{average_trajectory, target_length, AverageTrajectory, FcmConfig};

pub const TOOL_NAME: &str = "errscope";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("validation failed with {} issue(s)", .0.issues.len())]
    Validation(ValidationReport),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("writing outputs: {0}")]
    Write(#[from] crate::report::WriteError),
}

impl PipelineError {
    /// Process exit code: 1 for input problems, 2 for runtime stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Manifest { .. } | PipelineError::Validation(_) => 1,
            PipelineError::Stage { .. } | PipelineError::Write(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetLengthScope {
    /// Mean duration of the class within the gesture.
    #[default]
    PerGesture,
    /// Mean duration of the class over every gesture of the task.
    PerTask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    /// Gestures with fewer erroneous examples skip the executional analysis.
    pub min_erroneous: usize,
    /// Truncate transcript entries that run past the recorded frames.
    pub clamp: bool,
    /// Pooled-variance t-test instead of Welch.
    pub pooled_t: bool,
    /// Columns to average; empty means the columns of each gesture's
    /// top-ranked parameter group.
    pub trajectory_columns: Vec<usize>,
    pub target_length: TargetLengthScope,
    pub sample_rate_hz: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            min_erroneous: DEFAULT_MIN_ERRONEOUS,
            clamp: false,
            pooled_t: false,
            trajectory_columns: Vec::new(),
            target_length: TargetLengthScope::PerGesture,
            sample_rate_hz: ingest::DEFAULT_SAMPLE_RATE_HZ,
        }
    }
}

/// Declarative run description, read from TOML. Relative paths resolve
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub task: Task,
    pub kinematics_dir: PathBuf,
    pub transcripts_dir: PathBuf,
    pub labels_file: PathBuf,
    pub skills_file: PathBuf,
    pub grammar_file: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub dtw: DtwConfig,
    #[serde(default)]
    pub fcm: FcmConfig,
    #[serde(default)]
    pub divergence: DivergenceConfig,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let err = |message: String| PipelineError::Manifest { path: path.to_path_buf(), message };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut manifest: RunManifest = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    fn t_variant(&self) -> TTestVariant {
        if self.analysis.pooled_t {
            TTestVariant::Pooled
        } else {
            TTestVariant::Welch
        }
    }
}

/// A problem attributed to the stage that found it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub stage: String,
    pub message: String,
}

impl Issue {
    fn new(stage: &str, message: impl Into<String>) -> Self {
        Issue { stage: stage.to_string(), message: message.into() }
    }
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub trials: usize,
    pub issues: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TrialData {
    pub kinematics: KinematicTrial,
    pub transcript: Vec<TranscriptEntry>,
}

/// Parsed inputs of one run.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub trials: Vec<TrialData>,
    pub annotations: Vec<ErrorAnnotation>,
    pub skills: Vec<SkillRecord>,
    pub grammar: GrammarGraph,
}

fn open(path: &Path) -> Result<File, String> {
    File::open(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn trial_ids(dir: &Path) -> Result<Vec<String>, String> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

/// Parses every input and checks the joins between them, collecting all
/// problems instead of stopping at the first.
pub fn load_dataset(manifest: &RunManifest) -> (Dataset, ValidationReport) {
    let mut data = Dataset::default();
    let mut report = ValidationReport::default();
    let mut issue = |stage: &str, msg: String| report.issues.push(Issue::new(stage, msg));

    match open(&manifest.resolve(&manifest.grammar_file)).and_then(|f| ingest::parse_grammar(f).map_err(|e| e.to_string())) {
        Ok(g) => data.grammar = g,
        Err(e) => issue("ingest.grammar", e),
    }
    match open(&manifest.resolve(&manifest.labels_file)).and_then(|f| ingest::parse_error_labels(f).map_err(|e| e.to_string())) {
        Ok(a) => data.annotations = a,
        Err(e) => issue("ingest.labels", e),
    }
    match open(&manifest.resolve(&manifest.skills_file)).and_then(|f| ingest::parse_skills(f).map_err(|e| e.to_string())) {
        Ok(s) => data.skills = s,
        Err(e) => issue("ingest.skills", e),
    }

    let transcripts_dir = manifest.resolve(&manifest.transcripts_dir);
    let kinematics_dir = manifest.resolve(&manifest.kinematics_dir);
    let ids = match trial_ids(&transcripts_dir) {
        Ok(ids) => ids,
        Err(e) => {
            issue("ingest.transcripts", e);
            Vec::new()
        }
    };
    if ids.is_empty() {
        issue("ingest.transcripts", format!("no transcripts in {}", transcripts_dir.display()));
    }
    for id in &ids {
        let transcript = open(&transcripts_dir.join(format!("{id}.txt")))
            .and_then(|f| ingest::parse_transcript(f).map_err(|e| e.to_string()));
        let kinematics = open(&kinematics_dir.join(format!("{id}.txt")))
            .and_then(|f| ingest::parse_kinematics(f, id).map_err(|e| e.to_string()));
        match (transcript, kinematics) {
            (Ok(transcript), Ok(mut kinematics)) => {
                kinematics.sample_rate_hz = manifest.analysis.sample_rate_hz;
                data.trials.push(TrialData { kinematics, transcript });
            }
            (t, k) => {
                if let Err(e) = t {
                    issue("ingest.transcripts", format!("trial {id}: {e}"));
                }
                if let Err(e) = k {
                    issue("ingest.kinematics", format!("trial {id}: {e}"));
                }
            }
        }
    }
    report.trials = data.trials.len();

    let mut seen = HashSet::new();
    for a in &data.annotations {
        if !seen.insert((a.trial_id.as_str(), a.gesture_index)) {
            issue("ingest.labels", format!("duplicate label for trial {} gesture index {}", a.trial_id, a.gesture_index));
        }
    }
    let labels: HashMap<(&str, usize), &ErrorAnnotation> =
        data.annotations.iter().map(|a| ((a.trial_id.as_str(), a.gesture_index), a)).collect();
    let skills: HashSet<&str> = data.skills.iter().map(|s| s.trial_id.as_str()).collect();
    for t in &data.trials {
        let id = t.kinematics.trial_id.as_str();
        if let Err(e) = segment_trial(&t.kinematics, &t.transcript, manifest.analysis.clamp) {
            issue("segmentation", e.to_string());
        }
        for (k, entry) in t.transcript.iter().enumerate() {
            match labels.get(&(id, k)) {
                None => issue("segmentation", format!("no annotation for trial {id} gesture index {k}")),
                Some(a) if a.gesture != entry.gesture => issue(
                    "segmentation",
                    format!("trial {id} gesture index {k}: label says {}, transcript says {}", a.gesture, entry.gesture),
                ),
                Some(_) => {}
            }
        }
        if !skills.contains(id) {
            issue("statistics", format!("no skill record for trial {id}"));
        }
        if t.transcript.is_empty() {
            report.warnings.push(Issue::new("procedural", format!("trial {id} has an empty transcript")));
        }
    }
    (data, report)
}

pub fn validate(manifest: &RunManifest) -> ValidationReport {
    load_dataset(manifest).1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

/// Everything one run produces.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub tool: ToolInfo,
    pub manifest: RunManifest,
    pub task: Task,
    pub trials: usize,
    pub error_counts: ErrorCountTable,
    /// Gestures that entered the DTW/KL/trajectory analysis.
    pub analyzed_gestures: Vec<GestureLabel>,
    pub kl: KlReport,
    pub trajectories: Vec<AverageTrajectory>,
    pub procedural: Vec<ProceduralErrorReport>,
    pub procedural_summary: Vec<ProceduralSummaryRow>,
    pub durations: Vec<DurationComparison>,
    pub trial_summaries: Vec<TrialSummary>,
    pub skills: SkillBreakdown,
    pub warnings: Vec<Issue>,
    /// Raw distance samples; emitted as CSV rather than inside the JSON.
    #[serde(skip)]
    pub distance_sets: Vec<DtwDistanceSet>,
}

/// Which expensive stages to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub divergence: bool,
    pub trajectories: bool,
}

impl Stages {
    pub const ALL: Stages = Stages { divergence: true, trajectories: true };
    pub const NO_EXECUTIONAL: Stages = Stages { divergence: false, trajectories: false };
}

/// Validates and analyzes without touching the output directory.
pub fn analyze(manifest: &RunManifest, stages: Stages) -> Result<AnalysisReport, PipelineError> {
    let (data, validation) = load_dataset(manifest);
    if !validation.is_ok() {
        return Err(PipelineError::Validation(validation));
    }
    let mut warnings = validation.warnings;
    let task = manifest.task;

    // segmentation
    let mut instances = Vec::new();
    let mut trial_summaries = Vec::new();
    for t in &data.trials {
        let seg = segment_trial(&t.kinematics, &t.transcript, manifest.analysis.clamp)
            .map_err(|e| PipelineError::Stage { stage: "segmentation", message: e.to_string() })?;
        warnings.extend(seg.warnings.into_iter().map(|w| Issue::new("segmentation", w)));
        instances.extend(seg.instances);
    }
    let sets = build_instance_sets(task, instances, &data.annotations)
        .map_err(|e| PipelineError::Stage { stage: "segmentation", message: e.to_string() })?;

    // executional: distances, divergence, trajectories
    let mut analyzed = Vec::new();
    let mut distance_sets = Vec::new();
    for set in &sets {
        if set.erroneous.len() < manifest.analysis.min_erroneous.max(1) || set.normal.len() < 2 {
            warnings.push(Issue::new(
                "alignment",
                format!(
                    "{} excluded: {} erroneous / {} normal examples (minimum {} erroneous, 2 normal)",
                    set.gesture,
                    set.erroneous.len(),
                    set.normal.len(),
                    manifest.analysis.min_erroneous
                ),
            ));
            continue;
        }
        analyzed.push(set.gesture.clone());
        if stages.divergence {
            for group in ParameterGroup::ALL {
                let d = build_distance_sets(set, group, &manifest.dtw)
                    .map_err(|e| PipelineError::Stage { stage: "alignment", message: e.to_string() })?;
                distance_sets.push(d);
            }
        }
    }
    let kl = if stages.divergence { kl_report(&distance_sets, &manifest.divergence) } else { KlReport::default() };
    warnings.extend(kl.warnings.iter().map(|w| Issue::new("divergence", w.clone())));

    let trajectories = if stages.trajectories {
        compute_trajectories(manifest, &sets, &analyzed, &kl, &mut warnings)
    } else {
        Vec::new()
    };

    // procedural
    let mut procedural = Vec::new();
    for t in &data.trials {
        let labels: Vec<GestureLabel> = t.transcript.iter().map(|e| e.gesture.clone()).collect();
        if labels.is_empty() {
            continue;
        }
        let r = detect_procedural_errors(&t.kinematics.trial_id, &data.grammar, &labels)
            .map_err(|e| PipelineError::Stage { stage: "procedural", message: e.to_string() })?;
        procedural.push(r);
    }
    let procedural_summary = summarize_procedural(&procedural, &data.skills)
        .map_err(|e| PipelineError::Stage { stage: "procedural", message: e.to_string() })?;

    // statistics
    let procedural_counts: HashMap<&str, usize> = procedural.iter().map(|r| (r.trial_id.as_str(), r.error_count())).collect();
    let mut executional: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in sets.iter().flat_map(InstanceSet::iter) {
        *executional.entry(inst.trial_id.as_str()).or_default() +=
            inst.annotation.as_ref().map_or(0, |a| a.modes.count());
    }
    for t in &data.trials {
        let id = t.kinematics.trial_id.as_str();
        trial_summaries.push(TrialSummary {
            trial_id: id.to_string(),
            executional_errors: executional.get(id).copied().unwrap_or(0),
            procedural_errors: procedural_counts.get(id).copied().unwrap_or(0),
            duration_frames: t.kinematics.frame_count(),
        });
    }
    let skills = skill_breakdowns(&trial_summaries, &data.skills)
        .map_err(|e| PipelineError::Stage { stage: "statistics", message: e.to_string() })?;
    warnings.extend(skills.warnings.iter().map(|w| Issue::new("statistics", w.clone())));
    let durations = duration_comparisons(&sets, manifest.t_variant());

    Ok(AnalysisReport {
        tool: ToolInfo { name: TOOL_NAME, version: TOOL_VERSION },
        manifest: manifest.clone(),
        task,
        trials: data.trials.len(),
        error_counts: error_count_table(&sets),
        analyzed_gestures: analyzed,
        kl,
        trajectories,
        procedural,
        procedural_summary,
        durations,
        trial_summaries,
        skills,
        warnings,
        distance_sets,
    })
}

fn compute_trajectories(
    manifest: &RunManifest,
    sets: &[InstanceSet],
    analyzed: &[GestureLabel],
    kl: &KlReport,
    warnings: &mut Vec<Issue>,
) -> Vec<AverageTrajectory> {
    let task_target = |class: Class| {
        let all: Vec<_> = sets.iter().flat_map(|s| s.class(class).iter().cloned()).collect();
        target_length(&all)
    };
    let per_task = [Class::Normal, Class::Erroneous].map(task_target);
    let mut out = Vec::new();
    for set in sets.iter().filter(|s| analyzed.contains(&s.gesture)) {
        let columns: Vec<usize> = if !manifest.analysis.trajectory_columns.is_empty() {
            manifest.analysis.trajectory_columns.clone()
        } else if let Some(top) = kl.ranking(set.task, &set.gesture).and_then(|r| r.groups.first()) {
            top.columns().collect()
        } else {
            warnings.push(Issue::new("trajectory", format!("{}: no ranked parameter group to average", set.gesture)));
            continue;
        };
        for column in columns {
            for (ci, class) in [Class::Normal, Class::Erroneous].into_iter().enumerate() {
                let target = match manifest.analysis.target_length {
                    TargetLengthScope::PerGesture => None,
                    TargetLengthScope::PerTask => Some(per_task[ci]),
                };
                match average_trajectory(set, column, class, &manifest.fcm, target) {
                    Ok(t) => {
                        if !t.converged {
                            warnings.push(Issue::new(
                                "trajectory",
                                format!("{} column {column} {}: clustering hit the iteration limit", set.gesture, class.name()),
                            ));
                        }
                        out.push(t);
                    }
                    Err(e) => warnings.push(Issue::new("trajectory", format!("{} column {column}: {e}", set.gesture))),
                }
            }
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Plot-ready CSVs: DTW histograms, trajectory centers, per-gesture
/// durations and per-trial scatter points.
pub fn plot_data(report: &AnalysisReport) -> (Vec<Artifact>, Vec<String>) {
    let mut files = Vec::new();
    let mut notes = Vec::new();
    for d in &report.distance_sets {
        let mut csv = String::from("task,gesture,group,kind,distance\n");
        for (kind, values) in [("nor_nor", &d.nor_nor), ("err_nor", &d.err_nor)] {
            for v in values.iter() {
                csv.push_str(&format!("{},{},{},{kind},{}\n", d.task, d.gesture, d.group, fmt_f64(*v)));
            }
        }
        files.push(Artifact::new(format!("dtw/{}_{}_{}.csv", d.task, d.gesture, d.group.slug()), csv));
    }
    if report.distance_sets.is_empty() {
        notes.push("no DTW distance sets: no gesture met the executional-analysis minimum".to_string());
    }

    if report.trajectories.is_empty() {
        notes.push("no average trajectories computed".to_string());
    } else {
        let mut csv = String::from("task,gesture,column,class,time,value\n");
        for t in &report.trajectories {
            for c in &t.centers {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    t.task,
                    t.gesture,
                    t.variable_column,
                    t.class.name(),
                    fmt_f64(c.time),
                    fmt_f64(c.value)
                ));
            }
        }
        files.push(Artifact::new("trajectories.csv", csv));
    }

    let mut csv = String::from("task,gesture,normal_n,erroneous_n,normal_mean,erroneous_mean,t,dof,p_greater\n");
    for d in &report.durations {
        let gesture = d.gesture.as_ref().map_or_else(|| "All".to_string(), ToString::to_string);
        let (t, dof, p) = d
            .test
            .as_ref()
            .map_or_else(|| (String::new(), String::new(), String::new()), |t| (fmt_f64(t.t_statistic), fmt_f64(t.dof), fmt_f64(t.p_value)));
        csv.push_str(&format!(
            "{},{gesture},{},{},{},{},{t},{dof},{p}\n",
            d.task,
            d.normal_n,
            d.erroneous_n,
            fmt_f64(d.normal_mean),
            fmt_f64(d.erroneous_mean)
        ));
    }
    files.push(Artifact::new("durations.csv", csv));

    let mut csv = String::from("trial_id,executional_errors,procedural_errors,duration_frames\n");
    for t in &report.trial_summaries {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&t.trial_id),
            t.executional_errors,
            t.procedural_errors,
            t.duration_frames
        ));
    }
    files.push(Artifact::new("trial_scatter.csv", csv));
    (files, notes)
}

/// Table-shaped CSVs and JSON for the report sections.
pub fn table_files(report: &AnalysisReport) -> Vec<Artifact> {
    let mut files = vec![
        Artifact::json("report.json", report),
        Artifact::new("error_counts.csv", report.error_counts.to_csv()),
        Artifact::json("procedural.json", &report.procedural),
    ];
    if !report.kl.entries.is_empty() {
        files.push(Artifact::new("kl.csv", report.kl.to_csv()));
    }

    let mut csv = String::from("task,sp_level,trials,total_errors,erroneous_trials,erroneous_fraction,longest_chain\n");
    for r in &report.procedural_summary {
        csv.push_str(&format!(
            "{},{},{},{},{}/{},{},{}\n",
            report.task,
            r.sp_level.name(),
            r.trials,
            r.total_errors,
            r.erroneous_trials,
            r.trials,
            fmt_f64(r.erroneous_fraction()),
            r.longest_chain.join("-")
        ));
    }
    files.push(Artifact::new("procedural_summary.csv", csv));

    let mut csv = String::from("task,x,y,n,r,p_value,error\n");
    let s = &report.skills;
    for c in s.procedural_vs_grs.iter().chain(&s.executional_vs_duration).chain(&s.procedural_vs_duration) {
        let (n, r, p) = c
            .result
            .as_ref()
            .map_or_else(|| (String::new(), String::new(), String::new()), |r| (r.n.to_string(), fmt_f64(r.r), fmt_f64(r.p_value)));
        csv.push_str(&format!(
            "{},{},{},{n},{r},{p},{}\n",
            report.task,
            csv_field(&c.x),
            csv_field(&c.y),
            csv_field(c.error.as_deref().unwrap_or(""))
        ));
    }
    files.push(Artifact::new("correlations.csv", csv));

    let mut csv = String::from("task,band,trials,mean_executional_errors,sd_executional_errors\n");
    for b in s.by_sp_level.iter().chain(&s.by_grs_band) {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            report.task,
            b.band,
            b.trials,
            fmt_f64(b.mean_executional_errors),
            fmt_f64(b.sd_executional_errors)
        ));
    }
    files.push(Artifact::new("skill_bands.csv", csv));
    files
}

/// Writes the plot CSVs for `report` into `dir` and returns their paths.
pub fn emit_plot_data(report: &AnalysisReport, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let (files, _) = plot_data(report);
    Ok(write_artifacts(dir, &files)?)
}

/// Full artifact set for a report, `index.json` last.
pub fn artifacts(report: &AnalysisReport) -> Vec<Artifact> {
    let mut files = table_files(report);
    let (plots, notes) = plot_data(report);
    files.extend(plots);
    let index = build_index(&files, notes);
    files.push(index);
    files
}

/// Runs every stage and writes the artifacts into the manifest's output
/// directory. Nothing is written unless all stages succeed.
pub fn run_pipeline(manifest: &RunManifest) -> Result<AnalysisReport, PipelineError> {
    let report = analyze(manifest, Stages::ALL)?;
    write_artifacts(&manifest.output_path(), &artifacts(&report))?;
    Ok(report)
}
