//! Parsers for the on-disk inputs: kinematics, gesture transcripts, executional
//! error labels, skill metadata and grammar graphs.
//!
//! Frames are 1-indexed and transcript ranges are inclusive on both ends, the
//! convention used by JIGSAWS. Kinematic columns are likewise addressed with
//! 1-indexed column numbers (1..=76).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of kinematic variables per frame.
pub const KINEMATIC_COLUMNS: usize = 76;

/// First column of the patient-side manipulator block.
pub const PSM_FIRST_COLUMN: usize = 39;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 30.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: expected {KINEMATIC_COLUMNS} numeric columns, found {count}")]
    MalformedRow { line: usize, count: usize },
    #[error("kinematics file contains no frames")]
    EmptyFile,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: frame range overlaps the previous entry")]
    Overlap { line: usize },
    #[error("line {line}: start frame decreases relative to the previous entry")]
    Order { line: usize },
    #[error("row {row}: needle orientation is only defined for G4 and G8, found {gesture}")]
    RubricViolation { row: usize, gesture: GestureLabel },
    #[error("grammar has no START edge")]
    NoStart,
    #[error("row {row}: GRS sub-score {value} outside 1..=5")]
    Range { row: usize, value: i64 },
    #[error("annotations reference different gesture instances")]
    MismatchedInstance,
    #[error("consensus needs 2 or 3 annotators, got {0}")]
    UnsupportedCount(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    Suturing,
    NeedlePassing,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Suturing => "Suturing",
            Task::NeedlePassing => "NeedlePassing",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', '-', ' '], "").as_str() {
            "suturing" => Ok(Task::Suturing),
            "needlepassing" => Ok(Task::NeedlePassing),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

/// Frames of one trial, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicTrial {
    pub trial_id: String,
    pub sample_rate_hz: f64,
    values: Vec<f64>,
}

impl KinematicTrial {
    /// Builds a trial from row-major values. Panics if the length is not a
    /// positive multiple of 76 or a value is not finite.
    pub fn from_rows(trial_id: impl Into<String>, values: Vec<f64>) -> Self {
        assert!(
            !values.is_empty() && values.len().is_multiple_of(KINEMATIC_COLUMNS),
            "kinematic data must hold a positive multiple of {KINEMATIC_COLUMNS} values"
        );
        assert!(values.iter().all(|v| v.is_finite()), "kinematic values must be finite");
        KinematicTrial { trial_id: trial_id.into(), sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ, values }
    }

    pub fn frame_count(&self) -> usize {
        self.values.len() / KINEMATIC_COLUMNS
    }

    /// Row for 0-based sample index `t`.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * KINEMATIC_COLUMNS..(t + 1) * KINEMATIC_COLUMNS]
    }

    /// Value at 0-based sample `t` and 1-indexed `column`.
    pub fn value(&self, t: usize, column: usize) -> f64 {
        self.row(t)[column - 1]
    }

    /// Rows for the inclusive 1-indexed frame range, flattened.
    pub fn frames(&self, range: RangeInclusive<usize>) -> &[f64] {
        &self.values[(range.start() - 1) * KINEMATIC_COLUMNS..range.end() * KINEMATIC_COLUMNS]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Writes the trial in the whitespace-separated text layout. Values are
    /// printed in shortest round-trip form so re-parsing is lossless.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 12);
        for t in 0..self.frame_count() {
            let row = self.row(t);
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    out.push(' ');
                }
                out.push_str(&format!("{v:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// The ten patient-side kinematic parameter groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParameterGroup {
    RightPosition,
    RightRotationMatrix,
    RightLinearVelocity,
    RightRotationalVelocity,
    RightGripperAngle,
    LeftPosition,
    LeftRotationMatrix,
    LeftLinearVelocity,
    LeftRotationalVelocity,
    LeftGripperAngle,
}

impl ParameterGroup {
    /// Groups in column order; this order also breaks ranking ties.
    pub const ALL: [ParameterGroup; 10] = [
        ParameterGroup::RightPosition,
        ParameterGroup::RightRotationMatrix,
        ParameterGroup::RightLinearVelocity,
        ParameterGroup::RightRotationalVelocity,
        ParameterGroup::RightGripperAngle,
        ParameterGroup::LeftPosition,
        ParameterGroup::LeftRotationMatrix,
        ParameterGroup::LeftLinearVelocity,
        ParameterGroup::LeftRotationalVelocity,
        ParameterGroup::LeftGripperAngle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParameterGroup::RightPosition => "R Pos",
            ParameterGroup::RightRotationMatrix => "R Rot Mat",
            ParameterGroup::RightLinearVelocity => "R Lin Vel",
            ParameterGroup::RightRotationalVelocity => "R Rot Vel",
            ParameterGroup::RightGripperAngle => "R Grip Ang",
            ParameterGroup::LeftPosition => "L Pos",
            ParameterGroup::LeftRotationMatrix => "L Rot Mat",
            ParameterGroup::LeftLinearVelocity => "L Lin Vel",
            ParameterGroup::LeftRotationalVelocity => "L Rot Vel",
            ParameterGroup::LeftGripperAngle => "L Grip Ang",
        }
    }

    /// Inclusive, 1-indexed column range.
    pub fn columns(self) -> RangeInclusive<usize> {
        match self {
            ParameterGroup::RightPosition => 39..=41,
            ParameterGroup::RightRotationMatrix => 42..=50,
            ParameterGroup::RightLinearVelocity => 51..=53,
            ParameterGroup::RightRotationalVelocity => 54..=56,
            ParameterGroup::RightGripperAngle => 57..=57,
            ParameterGroup::LeftPosition => 58..=60,
            ParameterGroup::LeftRotationMatrix => 61..=69,
            ParameterGroup::LeftLinearVelocity => 70..=72,
            ParameterGroup::LeftRotationalVelocity => 73..=75,
            ParameterGroup::LeftGripperAngle => 76..=76,
        }
    }

    pub fn width(self) -> usize {
        let r = self.columns();
        r.end() - r.start() + 1
    }

    /// Position in [`ParameterGroup::ALL`].
    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Group owning a 1-indexed column, if it is a PSM column.
    pub fn containing(column: usize) -> Option<ParameterGroup> {
        Self::ALL.into_iter().find(|g| g.columns().contains(&column))
    }

    /// Short identifier usable in file names, e.g. `r_pos`.
    pub fn slug(self) -> String {
        self.name().to_ascii_lowercase().replace(' ', "_")
    }
}

impl fmt::Display for ParameterGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParameterGroup {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', '-'], " ");
        Self::ALL
            .into_iter()
            .find(|g| g.name().to_ascii_lowercase() == norm)
            .ok_or_else(|| format!("unknown parameter group `{s}`"))
    }
}

/// A gesture token from a transcript or grammar file.
///
/// Tokens of the form `G<n>` parse to [`GestureLabel::Gesture`] whether or not
/// `n` is part of the standard G1..G11 vocabulary; anything else is kept
/// verbatim in [`GestureLabel::Unrecognized`] so that out-of-vocabulary
/// gestures still reach the procedural detector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GestureLabel {
    Gesture(u16),
    Unrecognized(String),
}

impl GestureLabel {
    pub fn g(n: u16) -> Self {
        GestureLabel::Gesture(n)
    }

    pub fn number(&self) -> Option<u16> {
        match self {
            GestureLabel::Gesture(n) => Some(*n),
            GestureLabel::Unrecognized(_) => None,
        }
    }

    pub fn is_standard(&self) -> bool {
        matches!(self, GestureLabel::Gesture(1..=11))
    }

    fn parse_token(token: &str) -> GestureLabel {
        token
            .strip_prefix('G')
            .filter(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|rest| rest.parse::<u16>().ok())
            .filter(|n| *n > 0)
            .map(GestureLabel::Gesture)
            .unwrap_or_else(|| GestureLabel::Unrecognized(token.to_string()))
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GestureLabel::Gesture(n) => write!(f, "G{n}"),
            GestureLabel::Unrecognized(s) => f.write_str(s),
        }
    }
}

impl FromStr for GestureLabel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(GestureLabel::parse_token(s.trim()))
    }
}

impl Serialize for GestureLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GestureLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(GestureLabel::parse_token(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub start_frame: usize,
    pub end_frame: usize,
    pub gesture: GestureLabel,
}

impl TranscriptEntry {
    pub fn duration_frames(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    MultipleAttempts,
    NeedleDrop,
    NeedleOrientation,
    OutOfView,
}

impl ErrorMode {
    pub const ALL: [ErrorMode; 4] = [
        ErrorMode::MultipleAttempts,
        ErrorMode::NeedleDrop,
        ErrorMode::NeedleOrientation,
        ErrorMode::OutOfView,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorMode::MultipleAttempts => "multiple_attempts",
            ErrorMode::NeedleDrop => "needle_drop",
            ErrorMode::NeedleOrientation => "needle_orientation",
            ErrorMode::OutOfView => "out_of_view",
        }
    }

    /// Needle orientation is only scored for needle transfer (G4) and
    /// needle orienting (G8).
    pub fn applies_to(self, gesture: &GestureLabel) -> bool {
        match self {
            ErrorMode::NeedleOrientation => matches!(gesture, GestureLabel::Gesture(4 | 8)),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorModes {
    pub multiple_attempts: bool,
    pub needle_drop: bool,
    pub needle_orientation: bool,
    pub out_of_view: bool,
}

impl ErrorModes {
    pub fn get(&self, mode: ErrorMode) -> bool {
        match mode {
            ErrorMode::MultipleAttempts => self.multiple_attempts,
            ErrorMode::NeedleDrop => self.needle_drop,
            ErrorMode::NeedleOrientation => self.needle_orientation,
            ErrorMode::OutOfView => self.out_of_view,
        }
    }

    pub fn set(&mut self, mode: ErrorMode, value: bool) {
        match mode {
            ErrorMode::MultipleAttempts => self.multiple_attempts = value,
            ErrorMode::NeedleDrop => self.needle_drop = value,
            ErrorMode::NeedleOrientation => self.needle_orientation = value,
            ErrorMode::OutOfView => self.out_of_view = value,
        }
    }

    pub fn count(&self) -> usize {
        ErrorMode::ALL.iter().filter(|m| self.get(**m)).count()
    }

    pub fn active(&self) -> impl Iterator<Item = ErrorMode> + '_ {
        ErrorMode::ALL.into_iter().filter(|m| self.get(*m))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnnotation {
    pub trial_id: String,
    /// 0-based position in the trial's transcript.
    pub gesture_index: usize,
    pub gesture: GestureLabel,
    pub modes: ErrorModes,
}

impl ErrorAnnotation {
    pub fn is_erroneous(&self) -> bool {
        self.modes.count() > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpLevel {
    #[serde(rename = "SP-Novice")]
    Novice,
    #[serde(rename = "SP-Intermediate")]
    Intermediate,
    #[serde(rename = "SP-Expert")]
    Expert,
}

impl SpLevel {
    pub const ALL: [SpLevel; 3] = [SpLevel::Novice, SpLevel::Intermediate, SpLevel::Expert];

    pub fn name(self) -> &'static str {
        match self {
            SpLevel::Novice => "SP-Novice",
            SpLevel::Intermediate => "SP-Intermediate",
            SpLevel::Expert => "SP-Expert",
        }
    }
}

impl FromStr for SpLevel {
    type Err = String;

    /// Accepts the band names, JIGSAWS single-letter codes, and the hour
    /// ranges `<10`, `10-100`, `>100`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix("sp-").unwrap_or(&t);
        match t {
            "novice" | "n" | "<10" => Ok(SpLevel::Novice),
            "intermediate" | "i" | "10-100" => Ok(SpLevel::Intermediate),
            "expert" | "e" | ">100" => Ok(SpLevel::Expert),
            _ => Err(format!("unknown skill band `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GrsBand {
    #[serde(rename = "GRS-Novice")]
    Novice,
    #[serde(rename = "GRS-Intermediate")]
    Intermediate,
    #[serde(rename = "GRS-Expert")]
    Expert,
}

impl GrsBand {
    pub const ALL: [GrsBand; 3] = [GrsBand::Novice, GrsBand::Intermediate, GrsBand::Expert];

    pub fn from_total(total: u32) -> GrsBand {
        match total {
            0..=9 => GrsBand::Novice,
            10..=19 => GrsBand::Intermediate,
            _ => GrsBand::Expert,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GrsBand::Novice => "GRS-Novice",
            GrsBand::Intermediate => "GRS-Intermediate",
            GrsBand::Expert => "GRS-Expert",
        }
    }
}

pub const GRS_ELEMENTS: [&str; 6] = [
    "Respect for tissue",
    "Suture/needle handling",
    "Time and motion",
    "Flow of operation",
    "Overall performance",
    "Quality of final product",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillRecord {
    pub trial_id: String,
    pub subject: String,
    pub sp_level: SpLevel,
    pub grs_sub: [u8; 6],
    pub grs_total: u32,
}

impl SkillRecord {
    pub fn new(trial_id: impl Into<String>, subject: impl Into<String>, sp_level: SpLevel, grs_sub: [u8; 6]) -> Self {
        SkillRecord {
            trial_id: trial_id.into(),
            subject: subject.into(),
            sp_level,
            grs_total: grs_sub.iter().map(|&v| u32::from(v)).sum(),
            grs_sub,
        }
    }

    pub fn grs_band(&self) -> GrsBand {
        GrsBand::from_total(self.grs_total)
    }
}

/// Directed graph of acceptable gesture transitions with a START entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GrammarGraph {
    vertices: BTreeSet<GestureLabel>,
    edges: BTreeMap<GestureLabel, BTreeSet<GestureLabel>>,
    start_successors: BTreeSet<GestureLabel>,
}

impl GrammarGraph {
    pub fn new() -> Self {
        GrammarGraph::default()
    }

    pub fn add_start(&mut self, to: GestureLabel) {
        self.vertices.insert(to.clone());
        self.start_successors.insert(to);
    }

    pub fn add_edge(&mut self, from: GestureLabel, to: GestureLabel) {
        self.vertices.insert(from.clone());
        self.vertices.insert(to.clone());
        self.edges.entry(from).or_default().insert(to);
    }

    pub fn contains(&self, g: &GestureLabel) -> bool {
        self.vertices.contains(g)
    }

    pub fn vertices(&self) -> &BTreeSet<GestureLabel> {
        &self.vertices
    }

    pub fn start_successors(&self) -> &BTreeSet<GestureLabel> {
        &self.start_successors
    }

    pub fn successors(&self, g: &GestureLabel) -> impl Iterator<Item = &GestureLabel> {
        self.edges.get(g).into_iter().flatten()
    }

    pub fn has_edge(&self, from: &GestureLabel, to: &GestureLabel) -> bool {
        self.edges.get(from).is_some_and(|s| s.contains(to))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(BTreeSet::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&GestureLabel, &GestureLabel)> {
        self.edges.iter().flat_map(|(from, tos)| tos.iter().map(move |to| (from, to)))
    }

    /// Edge-list text accepted by [`parse_grammar`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.start_successors {
            out.push_str(&format!("START {g}\n"));
        }
        for (from, to) in self.edges() {
            out.push_str(&format!("{from} {to}\n"));
        }
        out
    }
}

fn lines<R: Read>(input: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    BufReader::new(input).lines().enumerate().map(|(i, l)| (i + 1, l))
}

pub fn parse_kinematics<R: Read>(input: R, trial_id: &str) -> Result<KinematicTrial> {
    let mut values = Vec::new();
    for (n, line) in lines(input) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(IngestError::MalformedRow {
                        line: n,
                        count: line.split_whitespace().count(),
                    })
                }
            }
        }
        let count = values.len() - before;
        if count != KINEMATIC_COLUMNS {
            return Err(IngestError::MalformedRow { line: n, count });
        }
    }
    if values.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(KinematicTrial::from_rows(trial_id, values))
}

pub fn parse_transcript<R: Read>(input: R) -> Result<Vec<TranscriptEntry>> {
    let mut entries: Vec<TranscriptEntry> = Vec::new();
    for (n, line) in lines(input) {
        let line = line?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let parse_err = |message: String| IngestError::Parse { line: n, message };
        if toks.len() != 3 {
            return Err(parse_err(format!("expected `<start> <end> <label>`, got {} fields", toks.len())));
        }
        let frame = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .ok()
                .filter(|v| *v > 0)
                .ok_or_else(|| parse_err(format!("`{s}` is not a positive frame number")))
        };
        let start_frame = frame(toks[0])?;
        let end_frame = frame(toks[1])?;
        if start_frame > end_frame {
            return Err(parse_err(format!("start frame {start_frame} exceeds end frame {end_frame}")));
        }
        if let Some(prev) = entries.last() {
            if start_frame < prev.start_frame {
                return Err(IngestError::Order { line: n });
            }
            if start_frame <= prev.end_frame {
                return Err(IngestError::Overlap { line: n });
            }
        }
        entries.push(TranscriptEntry { start_frame, end_frame, gesture: toks[2].parse().unwrap() });
    }
    Ok(entries)
}

pub const LABEL_HEADER: [&str; 7] = [
    "trial_id",
    "gesture_index",
    "gesture",
    "multiple_attempts",
    "needle_drop",
    "needle_orientation",
    "out_of_view",
];

pub const SKILL_HEADER: [&str; 9] =
    ["trial_id", "subject", "sp_hours_band", "grs1", "grs2", "grs3", "grs4", "grs5", "grs6"];

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader
        .headers()
        .map_err(|e| IngestError::Parse { line: 1, message: e.to_string() })?;
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(IngestError::Parse {
            line: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
        });
    }
    Ok(())
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input)
}

pub fn parse_error_labels<R: Read>(input: R) -> Result<Vec<ErrorAnnotation>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &LABEL_HEADER)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| IngestError::Parse { line: row, message: e.to_string() })?;
        if record.len() != LABEL_HEADER.len() {
            return Err(IngestError::Parse { line: row, message: format!("expected 7 fields, got {}", record.len()) });
        }
        let gesture_index = record[1]
            .parse::<usize>()
            .map_err(|_| IngestError::Parse { line: row, message: format!("bad gesture_index `{}`", &record[1]) })?;
        let gesture: GestureLabel = record[2].parse().unwrap();
        let mut modes = ErrorModes::default();
        for (k, mode) in ErrorMode::ALL.into_iter().enumerate() {
            let v = match &record[3 + k] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(IngestError::Parse {
                        line: row,
                        message: format!("{} must be 0 or 1, found `{other}`", mode.name()),
                    })
                }
            };
            if v && !mode.applies_to(&gesture) {
                return Err(IngestError::RubricViolation { row, gesture });
            }
            modes.set(mode, v);
        }
        out.push(ErrorAnnotation { trial_id: record[0].to_string(), gesture_index, gesture, modes });
    }
    Ok(out)
}

/// Writes annotations in the layout read by [`parse_error_labels`].
pub fn write_error_labels(annotations: &[ErrorAnnotation]) -> String {
    let mut out = LABEL_HEADER.join(",");
    out.push('\n');
    for a in annotations {
        let flags: Vec<&str> = ErrorMode::ALL.iter().map(|m| if a.modes.get(*m) { "1" } else { "0" }).collect();
        out.push_str(&format!("{},{},{},{}\n", a.trial_id, a.gesture_index, a.gesture, flags.join(",")));
    }
    out
}

/// Merges the per-annotator labels of one gesture instance.
///
/// Each mode is voted independently. Three annotators resolve by majority; two
/// annotators keep agreement and resolve a split to erroneous.
pub fn consensus(annotations: &[ErrorAnnotation]) -> Result<ErrorAnnotation> {
    if !(2..=3).contains(&annotations.len()) {
        return Err(IngestError::UnsupportedCount(annotations.len()));
    }
    let first = &annotations[0];
    if annotations
        .iter()
        .any(|a| a.trial_id != first.trial_id || a.gesture_index != first.gesture_index || a.gesture != first.gesture)
    {
        return Err(IngestError::MismatchedInstance);
    }
    let mut modes = ErrorModes::default();
    for mode in ErrorMode::ALL {
        let yes = annotations.iter().filter(|a| a.modes.get(mode)).count();
        let decided = match annotations.len() {
            3 => yes >= 2,
            _ => yes >= 1,
        };
        modes.set(mode, decided);
    }
    Ok(ErrorAnnotation { modes, ..first.clone() })
}

pub fn parse_grammar<R: Read>(input: R) -> Result<GrammarGraph> {
    let mut graph = GrammarGraph::new();
    for (n, line) in lines(input) {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(IngestError::Parse { line: n, message: "expected `SRC DST`".into() });
        }
        if toks[1] == "START" {
            return Err(IngestError::Parse { line: n, message: "START cannot be an edge target".into() });
        }
        let to: GestureLabel = toks[1].parse().unwrap();
        if toks[0] == "START" {
            graph.add_start(to);
        } else {
            graph.add_edge(toks[0].parse().unwrap(), to);
        }
    }
    if graph.start_successors.is_empty() {
        return Err(IngestError::NoStart);
    }
    Ok(graph)
}

pub fn parse_skills<R: Read>(input: R) -> Result<Vec<SkillRecord>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &SKILL_HEADER)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| IngestError::Parse { line: row, message: e.to_string() })?;
        if record.len() != SKILL_HEADER.len() {
            return Err(IngestError::Parse { line: row, message: format!("expected 9 fields, got {}", record.len()) });
        }
        let sp_level = record[2].parse::<SpLevel>().map_err(|message| IngestError::Parse { line: row, message })?;
        let mut grs_sub = [0u8; 6];
        for (k, slot) in grs_sub.iter_mut().enumerate() {
            let raw = &record[3 + k];
            let value = raw
                .parse::<i64>()
                .map_err(|_| IngestError::Parse { line: row, message: format!("bad GRS sub-score `{raw}`") })?;
            if !(1..=5).contains(&value) {
                return Err(IngestError::Range { row, value });
            }
            *slot = value as u8;
        }
        out.push(SkillRecord::new(&record[0], &record[1], sp_level, grs_sub));
    }
    Ok(out)
}

/// Writes skills in the layout read by [`parse_skills`].
pub fn write_skills(records: &[SkillRecord]) -> String {
    let mut out = SKILL_HEADER.join(",");
    out.push('\n');
    for r in records {
        let subs: Vec<String> = r.grs_sub.iter().map(u8::to_string).collect();
        out.push_str(&format!("{},{},{},{}\n", r.trial_id, r.subject, r.sp_level.name(), subs.join(",")));
    }
    out
}

pub fn write_transcript(entries: &[TranscriptEntry]) -> String {
    entries.iter().map(|e| format!("{} {} {}\n", e.start_frame, e.end_frame, e.gesture)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: impl IntoIterator<Item = f64>) -> String {
        values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn zero_row_parses() {
        let trial = parse_kinematics(row(vec![0.0; 76]).as_bytes(), "T").unwrap();
        assert_eq!(trial.frame_count(), 1);
        assert!(trial.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn column_numbering_is_one_indexed() {
        let text = row((1..=76).map(f64::from));
        let trial = parse_kinematics(text.as_bytes(), "T").unwrap();
        let right_pos: Vec<f64> = ParameterGroup::RightPosition.columns().map(|c| trial.value(0, c)).collect();
        assert_eq!(right_pos, vec![39.0, 40.0, 41.0]);
    }

    #[test]
    fn short_row_is_malformed() {
        let text = row(vec![1.0; 75]);
        match parse_kinematics(text.as_bytes(), "T") {
            Err(IngestError::MalformedRow { line: 1, count: 75 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let mut bad = row(vec![1.0; 75]);
        bad.push_str(" abc");
        assert!(matches!(parse_kinematics(bad.as_bytes(), "T"), Err(IngestError::MalformedRow { .. })));
        assert!(matches!(parse_kinematics("\n\n".as_bytes(), "T"), Err(IngestError::EmptyFile)));
    }

    #[test]
    fn groups_partition_psm_columns() {
        let mut seen = [0u8; KINEMATIC_COLUMNS + 1];
        for g in ParameterGroup::ALL {
            for c in g.columns() {
                seen[c] += 1;
            }
        }
        assert!(seen[1..PSM_FIRST_COLUMN].iter().all(|&n| n == 0));
        assert!(seen[PSM_FIRST_COLUMN..].iter().all(|&n| n == 1));
        let widths: Vec<usize> = ParameterGroup::ALL.iter().map(|g| g.width()).collect();
        assert_eq!(widths, vec![3, 9, 3, 3, 1, 3, 9, 3, 3, 1]);
        for g in ParameterGroup::ALL {
            assert_eq!(g.name().parse::<ParameterGroup>().unwrap(), g);
        }
    }

    #[test]
    fn transcript_lines() {
        let t = parse_transcript("80 205 G1\n".as_bytes()).unwrap();
        assert_eq!(t, vec![TranscriptEntry { start_frame: 80, end_frame: 205, gesture: GestureLabel::g(1) }]);
        assert!(matches!(parse_transcript("1 10 G1\n5 20 G2\n".as_bytes()), Err(IngestError::Overlap { line: 2 })));
        assert!(matches!(parse_transcript("10 5 G3\n".as_bytes()), Err(IngestError::Parse { line: 1, .. })));
        assert!(matches!(parse_transcript("20 30 G1\n1 5 G2\n".as_bytes()), Err(IngestError::Order { line: 2 })));
        assert!(matches!(parse_transcript("1 5\n".as_bytes()), Err(IngestError::Parse { .. })));
        // gaps between entries are fine
        assert_eq!(parse_transcript("1 5 G1\n\n9 12 G7\n".as_bytes()).unwrap().len(), 2);
    }

    #[test]
    fn gesture_tokens() {
        assert_eq!("G7".parse::<GestureLabel>().unwrap(), GestureLabel::g(7));
        assert_eq!("G11".parse::<GestureLabel>().unwrap().to_string(), "G11");
        assert!(GestureLabel::g(11).is_standard());
        assert!(!GestureLabel::g(15).is_standard());
        assert_eq!("G0".parse::<GestureLabel>().unwrap(), GestureLabel::Unrecognized("G0".into()));
        assert_eq!("idle".parse::<GestureLabel>().unwrap(), GestureLabel::Unrecognized("idle".into()));
    }

    const HEADER: &str = "trial_id,gesture_index,gesture,multiple_attempts,needle_drop,needle_orientation,out_of_view\n";

    #[test]
    fn label_rows() {
        let a = parse_error_labels(format!("{HEADER}T1,3,G4,0,0,1,0\n").as_bytes()).unwrap();
        assert!(a[0].modes.needle_orientation);
        assert!(a[0].is_erroneous());

        let err = parse_error_labels(format!("{HEADER}T1,0,G2,0,0,1,0\n").as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::RubricViolation { row: 2, .. }));

        let clean = parse_error_labels(format!("{HEADER}T1,0,G2,0,0,0,0\n").as_bytes()).unwrap();
        assert!(!clean[0].is_erroneous());

        assert!(matches!(
            parse_error_labels(format!("{HEADER}T1,0,G2,0,2,0,0\n").as_bytes()),
            Err(IngestError::Parse { .. })
        ));
        assert!(matches!(parse_error_labels("a,b\nT1,0\n".as_bytes()), Err(IngestError::Parse { line: 1, .. })));
    }

    fn ann(modes: [bool; 4]) -> ErrorAnnotation {
        ErrorAnnotation {
            trial_id: "T".into(),
            gesture_index: 2,
            gesture: GestureLabel::g(4),
            modes: ErrorModes {
                multiple_attempts: modes[0],
                needle_drop: modes[1],
                needle_orientation: modes[2],
                out_of_view: modes[3],
            },
        }
    }

    #[test]
    fn consensus_votes() {
        let three = [ann([true, false, false, false]), ann([true, false, true, false]), ann([false, false, true, false])];
        let c = consensus(&three).unwrap();
        assert!(c.modes.multiple_attempts);
        assert!(c.modes.needle_orientation);
        assert!(!c.modes.needle_drop);

        let none = [ann([false; 4]), ann([false; 4]), ann([false; 4])];
        assert!(!consensus(&none).unwrap().is_erroneous());

        let split = [ann([true, false, false, false]), ann([false; 4])];
        assert!(consensus(&split).unwrap().modes.multiple_attempts);

        assert!(matches!(consensus(&[ann([false; 4])]), Err(IngestError::UnsupportedCount(1))));
        let mut other = ann([false; 4]);
        other.gesture_index = 3;
        assert!(matches!(consensus(&[ann([false; 4]), other]), Err(IngestError::MismatchedInstance)));
    }

    #[test]
    fn grammar_edges() {
        let g = parse_grammar("# suturing\nSTART G1\nG1 G2\nG2 G3\nG1 G2\n".as_bytes()).unwrap();
        assert_eq!(g.start_successors().iter().collect::<Vec<_>>(), vec![&GestureLabel::g(1)]);
        assert_eq!(g.successors(&GestureLabel::g(1)).collect::<Vec<_>>(), vec![&GestureLabel::g(2)]);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.vertices().len(), 3);
        assert!(matches!(parse_grammar("G1 G2\n".as_bytes()), Err(IngestError::NoStart)));
        assert!(matches!(parse_grammar("START\n".as_bytes()), Err(IngestError::Parse { .. })));
        assert_eq!(parse_grammar(g.to_text().as_bytes()).unwrap(), g);
    }

    const SKILL_HDR: &str = "trial_id,subject,sp_hours_band,grs1,grs2,grs3,grs4,grs5,grs6\n";

    #[test]
    fn skill_rows() {
        let s = parse_skills(format!("{SKILL_HDR}T1,B,E,5,5,5,5,5,5\nT2,C,SP-Novice,1,1,1,1,1,2\n").as_bytes()).unwrap();
        assert_eq!(s[0].grs_total, 30);
        assert_eq!(s[0].grs_band(), GrsBand::Expert);
        assert_eq!(s[0].sp_level, SpLevel::Expert);
        assert_eq!(s[1].grs_total, 7);
        assert_eq!(s[1].grs_band(), GrsBand::Novice);
        assert!(matches!(
            parse_skills(format!("{SKILL_HDR}T1,B,E,5,5,6,5,5,5\n").as_bytes()),
            Err(IngestError::Range { value: 6, .. })
        ));
        assert_eq!(parse_skills(write_skills(&s).as_bytes()).unwrap(), s);
    }

    #[test]
    fn grs_band_edges() {
        assert_eq!(GrsBand::from_total(9), GrsBand::Novice);
        assert_eq!(GrsBand::from_total(10), GrsBand::Intermediate);
        assert_eq!(GrsBand::from_total(19), GrsBand::Intermediate);
        assert_eq!(GrsBand::from_total(20), GrsBand::Expert);
    }
}
