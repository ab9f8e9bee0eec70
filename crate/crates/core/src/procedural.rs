//! Procedural error detection: walks a gesture transcript through a task's
//! grammar graph and records every transition the graph does not allow.
//!
//! For each gesture `g` at position `i`, with `val` the set of gestures
//! accepted next (initially the successors of START):
//!
//! * `g` in the graph and in `val`: accepted, `val` becomes the successors of `g`;
//! * `g` in the graph but not in `val`: the pair (previous, `g`) is flagged and
//!   `val` becomes the successors of `g`;
//! * `g` not in the graph: the singleton `g` is flagged and `val` becomes
//!   exactly the next transcript gesture (empty at the end).
//!
//! A first gesture that is not a START successor is flagged as the pair
//! (START, `g`) with kind [`ErrorKind::Start`].

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{GestureLabel, GrammarGraph, SkillRecord, SpLevel};

#[derive(Debug, Error, PartialEq)]
pub enum ProceduralError {
    #[error("transcript is empty")]
    EmptyTranscript,
    #[error("no skill record for trial {0}")]
    MissingSkillRecord(String),
}

pub const START_TOKEN: &str = "START";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// First gesture is not a START successor.
    Start,
    /// Gesture in the graph but not an allowed successor.
    Transition,
    /// Gesture not in the graph.
    Unknown,
}

/// One flagged transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlaggedTransition {
    /// 0-based transcript position of the gesture that triggered the flag.
    pub pos: usize,
    pub kind: ErrorKind,
    /// `[previous, gesture]` for transitions (previous may be `START`),
    /// `[gesture]` for unknown gestures.
    pub gestures: Vec<String>,
}

impl FlaggedTransition {
    /// Inclusive transcript positions covered by the flag.
    fn span(&self) -> (usize, usize) {
        match self.kind {
            ErrorKind::Transition => (self.pos - 1, self.pos),
            ErrorKind::Start | ErrorKind::Unknown => (self.pos, self.pos),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProceduralErrorReport {
    pub trial_id: String,
    pub errors: Vec<FlaggedTransition>,
    pub chains: Vec<Vec<String>>,
}

impl ProceduralErrorReport {
    pub fn error_count(&self) -> usize {
        self.errors.len()
    }

    pub fn longest_chain(&self) -> Option<&Vec<String>> {
        self.chains.iter().fold(None, |best, c| match best {
            Some(b) if b.len() >= c.len() => Some(b),
            _ => Some(c),
        })
    }
}

/// Validates one transcript against `graph`.
pub fn detect_procedural_errors(
    trial_id: &str,
    graph: &GrammarGraph,
    transcript: &[GestureLabel],
) -> Result<ProceduralErrorReport, ProceduralError> {
    if transcript.is_empty() {
        return Err(ProceduralError::EmptyTranscript);
    }
    let mut errors = Vec::new();
    let mut val: Vec<&GestureLabel> = graph.start_successors().iter().collect();
    for (i, g) in transcript.iter().enumerate() {
        if graph.contains(g) {
            if !val.contains(&g) {
                let (kind, prev) = match i {
                    0 => (ErrorKind::Start, START_TOKEN.to_string()),
                    _ => (ErrorKind::Transition, transcript[i - 1].to_string()),
                };
                errors.push(FlaggedTransition { pos: i, kind, gestures: vec![prev, g.to_string()] });
            }
            val = graph.successors(g).collect();
        } else {
            errors.push(FlaggedTransition { pos: i, kind: ErrorKind::Unknown, gestures: vec![g.to_string()] });
            val = transcript.get(i + 1).into_iter().collect();
        }
    }
    let chains = merge_error_sequences(&errors, transcript);
    Ok(ProceduralErrorReport { trial_id: trial_id.to_string(), errors, chains })
}

/// Joins flags that touch in the transcript into gesture chains.
///
/// Two flags join when their covered positions share a gesture (consecutive
/// transitions meet at their junction), or when an unknown-gesture flag sits
/// immediately after the previous flag.
pub fn merge_error_sequences(errors: &[FlaggedTransition], transcript: &[GestureLabel]) -> Vec<Vec<String>> {
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for e in errors {
        let (lo, hi) = e.span();
        match spans.last_mut() {
            Some(cur) if lo <= cur.1 || (e.kind == ErrorKind::Unknown && lo == cur.1 + 1) => cur.1 = cur.1.max(hi),
            _ => spans.push((lo, hi)),
        }
    }
    spans.into_iter().map(|(lo, hi)| transcript[lo..=hi].iter().map(ToString::to_string).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProceduralSummaryRow {
    pub sp_level: SpLevel,
    pub trials: usize,
    pub total_errors: usize,
    /// Trials with at least one flagged transition.
    pub erroneous_trials: usize,
    pub longest_chain: Vec<String>,
}

impl ProceduralSummaryRow {
    pub fn erroneous_fraction(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.erroneous_trials as f64 / self.trials as f64
        }
    }
}

/// Per-skill-level totals, one row per level that has trials.
pub fn summarize_procedural(
    reports: &[ProceduralErrorReport],
    skills: &[SkillRecord],
) -> Result<Vec<ProceduralSummaryRow>, ProceduralError> {
    let by_trial: HashMap<&str, &SkillRecord> = skills.iter().map(|s| (s.trial_id.as_str(), s)).collect();
    let mut rows: BTreeMap<SpLevel, ProceduralSummaryRow> = BTreeMap::new();
    for r in reports {
        let skill = by_trial.get(r.trial_id.as_str()).ok_or_else(|| ProceduralError::MissingSkillRecord(r.trial_id.clone()))?;
        let row = rows.entry(skill.sp_level).or_insert_with(|| ProceduralSummaryRow {
            sp_level: skill.sp_level,
            trials: 0,
            total_errors: 0,
            erroneous_trials: 0,
            longest_chain: Vec::new(),
        });
        row.trials += 1;
        row.total_errors += r.error_count();
        row.erroneous_trials += usize::from(r.error_count() > 0);
        if let Some(chain) = r.longest_chain() {
            if chain.len() > row.longest_chain.len() {
                row.longest_chain = chain.clone();
            }
        }
    }
    Ok(rows.into_values().collect())
}
