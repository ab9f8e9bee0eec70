//! Synthetic datasets with known ground truth, written in the ingest formats.
//!
//! Each column of a gesture instance is a per-gesture sinusoid stretched over
//! the instance plus Gaussian noise. Transcripts are random walks on the
//! grammar, optionally with single-gesture corruptions that each produce
//! exactly one flagged transition.

use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    self, ErrorAnnotation, ErrorMode, ErrorModes, GestureLabel, GrammarGraph, KinematicTrial, ParameterGroup,
    SkillRecord, SpLevel, Task, TranscriptEntry, KINEMATIC_COLUMNS,
};
use crate::pipeline::{AnalysisOptions, RunManifest};
use crate::report::{write_artifacts, Artifact};
use crate::trajectory::DOWNSAMPLE_STRIDE;

/// Suturing grammar bundled for synthetic runs.
pub const SUTURING_GRAMMAR: &str = include_str!("../data/suturing_grammar.txt");
pub const NEEDLE_PASSING_GRAMMAR: &str = include_str!("../data/needle_passing_grammar.txt");

pub const MAX_TRIALS: usize = 40;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error("cannot read spec {}: {message}", path.display())]
    Read { path: PathBuf, message: String },
    #[error(transparent)]
    Write(#[from] crate::report::WriteError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DurationSpec {
    /// Normal instances last `mean ± spread` frames, uniformly.
    pub normal_mean: usize,
    pub normal_spread: usize,
    /// Added to every erroneous instance.
    pub erroneous_offset: usize,
}

impl Default for DurationSpec {
    fn default() -> Self {
        DurationSpec { normal_mean: 30, normal_spread: 6, erroneous_offset: 20 }
    }
}

/// Independent per-instance probability of each failure mode. Modes that do
/// not apply to a gesture are never injected there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorRates {
    pub multiple_attempts: f64,
    pub needle_drop: f64,
    pub needle_orientation: f64,
    pub out_of_view: f64,
}

impl Default for ErrorRates {
    fn default() -> Self {
        ErrorRates { multiple_attempts: 0.15, needle_drop: 0.05, needle_orientation: 0.2, out_of_view: 0.1 }
    }
}

impl ErrorRates {
    pub fn get(&self, mode: ErrorMode) -> f64 {
        match mode {
            ErrorMode::MultipleAttempts => self.multiple_attempts,
            ErrorMode::NeedleDrop => self.needle_drop,
            ErrorMode::NeedleOrientation => self.needle_orientation,
            ErrorMode::OutOfView => self.out_of_view,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveformSpec {
    pub amplitude: f64,
    /// Sine periods per instance.
    pub cycles: f64,
    pub noise_sd: f64,
}

impl Default for WaveformSpec {
    fn default() -> Self {
        WaveformSpec { amplitude: 1.0, cycles: 1.0, noise_sd: 0.05 }
    }
}

/// Offset added to one parameter group of one gesture's erroneous instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShift {
    pub gesture: GestureLabel,
    /// Group name, e.g. `"L Pos"`.
    pub group: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub task: Task,
    pub trials: usize,
    pub subjects: usize,
    /// Grammar text; the bundled Suturing grammar when absent.
    pub grammar: Option<String>,
    pub min_gestures: usize,
    pub max_gestures: usize,
    pub durations: DurationSpec,
    pub errors: ErrorRates,
    pub waveform: WaveformSpec,
    pub shift: Option<MeanShift>,
    /// Per-position probability of replacing a gesture so that the incoming
    /// transition breaks the grammar.
    pub corruption_rate: f64,
    /// Copied into the emitted manifest.
    pub min_erroneous: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            task: Task::Suturing,
            trials: 30,
            subjects: 6,
            grammar: None,
            min_gestures: 8,
            max_gestures: 12,
            durations: DurationSpec::default(),
            errors: ErrorRates::default(),
            waveform: WaveformSpec::default(),
            shift: None,
            corruption_rate: 0.0,
            min_erroneous: AnalysisOptions::default().min_erroneous,
        }
    }
}

impl SynthSpec {
    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let err = |message: String| SpecError::Read { path: path.to_path_buf(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        toml::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn grammar_text(&self) -> &str {
        self.grammar.as_deref().unwrap_or(SUTURING_GRAMMAR)
    }

    fn shift_group(&self) -> Result<Option<(GestureLabel, ParameterGroup, f64)>, SpecError> {
        self.shift
            .as_ref()
            .map(|s| {
                let group = s.group.parse::<ParameterGroup>().map_err(SpecError::Invalid)?;
                Ok((s.gesture.clone(), group, s.amount))
            })
            .transpose()
    }

    pub fn validate(&self) -> Result<GrammarGraph, SpecError> {
        let bad = |m: String| Err(SpecError::Invalid(m));
        if self.trials == 0 || self.trials > MAX_TRIALS {
            return bad(format!("trials must be in 1..={MAX_TRIALS}, got {}", self.trials));
        }
        if self.subjects == 0 {
            return bad("subjects must be positive".into());
        }
        if self.min_gestures == 0 || self.min_gestures > self.max_gestures {
            return bad(format!("gesture count range {}..={} is empty", self.min_gestures, self.max_gestures));
        }
        let d = &self.durations;
        if d.normal_mean < d.normal_spread || d.normal_mean - d.normal_spread < 2 * DOWNSAMPLE_STRIDE {
            return bad(format!(
                "shortest duration {} is under {} frames",
                d.normal_mean.saturating_sub(d.normal_spread),
                2 * DOWNSAMPLE_STRIDE
            ));
        }
        let rates = ErrorMode::ALL.map(|m| self.errors.get(m));
        if rates.iter().chain([&self.corruption_rate]).any(|r| !(0.0..=1.0).contains(r)) {
            return bad("rates must lie in [0, 1]".into());
        }
        if !(self.waveform.noise_sd >= 0.0 && self.waveform.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and non-negative".into());
        }
        self.shift_group()?;
        ingest::parse_grammar(self.grammar_text().as_bytes()).map_err(|e| SpecError::Invalid(format!("grammar: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corruption {
    pub trial_id: String,
    pub pos: usize,
    pub original: GestureLabel,
    pub replacement: GestureLabel,
}

/// What was injected, for comparison against the analysis output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub trials: usize,
    pub instances: usize,
    pub erroneous_instances: usize,
    pub corruptions: Vec<Corruption>,
    pub shift: Option<MeanShift>,
    pub erroneous_duration_offset: usize,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub task: Task,
    pub grammar: GrammarGraph,
    pub trials: Vec<(KinematicTrial, Vec<TranscriptEntry>)>,
    pub annotations: Vec<ErrorAnnotation>,
    pub skills: Vec<SkillRecord>,
    pub truth: GroundTruth,
    pub min_erroneous: usize,
}

/// Random walk from START, stopping early at a gesture without successors.
pub fn random_walk(graph: &GrammarGraph, len: usize, rng: &mut impl Rng) -> Vec<GestureLabel> {
    let mut walk: Vec<GestureLabel> = Vec::with_capacity(len);
    while walk.len() < len {
        let options: Vec<&GestureLabel> = match walk.last() {
            None => graph.start_successors().iter().collect(),
            Some(g) => graph.successors(g).collect(),
        };
        match options.choose(rng) {
            Some(next) => walk.push((*next).clone()),
            None => break,
        }
    }
    walk
}

/// Gestures that could replace `walk[pos]` so that only the incoming
/// transition is invalid.
pub fn corruption_candidates(graph: &GrammarGraph, walk: &[GestureLabel], pos: usize) -> Vec<GestureLabel> {
    graph
        .vertices()
        .iter()
        .filter(|x| {
            let incoming_ok = match pos {
                0 => graph.start_successors().contains(x),
                _ => graph.has_edge(&walk[pos - 1], x),
            };
            let outgoing_ok = walk.get(pos + 1).is_none_or(|next| graph.has_edge(x, next));
            !incoming_ok && outgoing_ok
        })
        .cloned()
        .collect()
}

fn waveform_phase(gesture: &GestureLabel, column: usize) -> f64 {
    let g = gesture.number().unwrap_or(0) as f64;
    0.9 * g + 0.37 * column as f64
}

fn column_offset(column: usize) -> f64 {
    (column % 7) as f64 * 0.5
}

pub fn generate(spec: &SynthSpec) -> Result<SynthDataset, SpecError> {
    let grammar = spec.validate()?;
    let shift = spec.shift_group()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.waveform.noise_sd).map_err(|e| SpecError::Invalid(e.to_string()))?;

    let mut trials = Vec::new();
    let mut annotations = Vec::new();
    let mut skills = Vec::new();
    let mut corruptions = Vec::new();
    let per_subject = spec.trials.div_ceil(spec.subjects);

    for t in 0..spec.trials {
        let subject = format!("S{:02}", t / per_subject + 1);
        let trial_id = format!("{}_{subject}_T{:02}", spec.task, t % per_subject + 1);
        let len = rng.random_range(spec.min_gestures..=spec.max_gestures);
        let mut walk = random_walk(&grammar, len, &mut rng);

        let mut last_corrupted: Option<usize> = None;
        for pos in 0..walk.len() {
            if last_corrupted.is_some_and(|p| pos == p + 1) || !rng.random_bool(spec.corruption_rate) {
                continue;
            }
            let candidates = corruption_candidates(&grammar, &walk, pos);
            if let Some(x) = candidates.choose(&mut rng) {
                corruptions.push(Corruption {
                    trial_id: trial_id.clone(),
                    pos,
                    original: walk[pos].clone(),
                    replacement: x.clone(),
                });
                walk[pos] = x.clone();
                last_corrupted = Some(pos);
            }
        }

        let mut values: Vec<f64> = Vec::new();
        let mut transcript = Vec::new();
        for (index, gesture) in walk.iter().enumerate() {
            let mut modes = ErrorModes::default();
            for mode in ErrorMode::ALL {
                if mode.applies_to(gesture) && rng.random_bool(spec.errors.get(mode)) {
                    modes.set(mode, true);
                }
            }
            let erroneous = modes.count() > 0;
            let d = &spec.durations;
            let mut duration = rng.random_range(d.normal_mean - d.normal_spread..=d.normal_mean + d.normal_spread);
            if erroneous {
                duration += d.erroneous_offset;
            }
            let start_frame = values.len() / KINEMATIC_COLUMNS + 1;
            for f in 0..duration {
                let phase = std::f64::consts::TAU * spec.waveform.cycles * f as f64 / (duration - 1) as f64;
                for column in 1..=KINEMATIC_COLUMNS {
                    let mut v = column_offset(column)
                        + spec.waveform.amplitude * (phase + waveform_phase(gesture, column)).sin()
                        + noise.sample(&mut rng);
                    if let Some((g, group, amount)) = &shift {
                        if erroneous && g == gesture && group.columns().contains(&column) {
                            v += amount;
                        }
                    }
                    values.push(v);
                }
            }
            transcript.push(TranscriptEntry {
                start_frame,
                end_frame: start_frame + duration - 1,
                gesture: gesture.clone(),
            });
            annotations.push(ErrorAnnotation { trial_id: trial_id.clone(), gesture_index: index, gesture: gesture.clone(), modes });
        }
        trials.push((KinematicTrial::from_rows(&trial_id, values), transcript));

        let sp_level = SpLevel::ALL[rng.random_range(0..SpLevel::ALL.len())];
        let grs_sub = std::array::from_fn(|_| rng.random_range(1..=5u8));
        skills.push(SkillRecord::new(&trial_id, &subject, sp_level, grs_sub));
    }

    let truth = GroundTruth {
        seed: spec.seed,
        trials: trials.len(),
        instances: annotations.len(),
        erroneous_instances: annotations.iter().filter(|a| a.is_erroneous()).count(),
        corruptions,
        shift: spec.shift.clone(),
        erroneous_duration_offset: spec.durations.erroneous_offset,
    };
    Ok(SynthDataset { task: spec.task, grammar, trials, annotations, skills, truth, min_erroneous: spec.min_erroneous })
}

impl SynthDataset {
    /// Manifest pointing at the files produced by [`SynthDataset::artifacts`],
    /// relative to the dataset directory.
    pub fn manifest(&self) -> RunManifest {
        RunManifest {
            task: self.task,
            kinematics_dir: "kinematics".into(),
            transcripts_dir: "transcripts".into(),
            labels_file: "labels.csv".into(),
            skills_file: "skills.csv".into(),
            grammar_file: "grammar.txt".into(),
            output_dir: "out".into(),
            dtw: Default::default(),
            fcm: Default::default(),
            divergence: Default::default(),
            analysis: AnalysisOptions { min_erroneous: self.min_erroneous, ..Default::default() },
            base_dir: PathBuf::new(),
        }
    }

    pub fn artifacts(&self) -> Vec<Artifact> {
        let mut files = Vec::new();
        for (k, transcript) in &self.trials {
            files.push(Artifact::new(format!("kinematics/{}.txt", k.trial_id), k.to_text()));
            files.push(Artifact::new(format!("transcripts/{}.txt", k.trial_id), ingest::write_transcript(transcript)));
        }
        files.push(Artifact::new("labels.csv", ingest::write_error_labels(&self.annotations)));
        files.push(Artifact::new("skills.csv", ingest::write_skills(&self.skills)));
        files.push(Artifact::new("grammar.txt", self.grammar.to_text()));
        files.push(Artifact::new("manifest.toml", self.manifest().to_toml()));
        files.push(Artifact::json("ground_truth.json", &self.truth));
        files
    }

    /// Writes the dataset under `dir` and returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, SpecError> {
        write_artifacts(dir, &self.artifacts())?;
        Ok(dir.join("manifest.toml"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procedural::detect_procedural_errors;

    fn small() -> SynthSpec {
        SynthSpec { trials: 6, corruption_rate: 0.3, seed: 3, ..Default::default() }
    }

    #[test]
    fn corruptions_flag_exactly_once_each() {
        let ds = generate(&small()).unwrap();
        let mut flagged = 0;
        for (k, transcript) in &ds.trials {
            let labels: Vec<GestureLabel> = transcript.iter().map(|e| e.gesture.clone()).collect();
            let r = detect_procedural_errors(&k.trial_id, &ds.grammar, &labels).unwrap();
            let truth: Vec<usize> =
                ds.truth.corruptions.iter().filter(|c| c.trial_id == k.trial_id).map(|c| c.pos).collect();
            let found: Vec<usize> = r.errors.iter().map(|e| e.pos).collect();
            assert_eq!(found, truth);
            flagged += found.len();
        }
        assert_eq!(flagged, ds.truth.corruptions.len());
        assert!(flagged > 0);
    }

    #[test]
    fn clean_walks_without_corruption() {
        let ds = generate(&SynthSpec { corruption_rate: 0.0, ..small() }).unwrap();
        assert!(ds.truth.corruptions.is_empty());
    }

    #[test]
    fn same_seed_same_files() {
        let a = generate(&small()).unwrap().artifacts();
        let b = generate(&small()).unwrap().artifacts();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate(&SynthSpec { trials: 41, ..small() }).is_err());
        assert!(generate(&SynthSpec { corruption_rate: 1.5, ..small() }).is_err());
        let short = DurationSpec { normal_mean: 6, normal_spread: 2, erroneous_offset: 0 };
        assert!(generate(&SynthSpec { durations: short, ..small() }).is_err());
    }
}
