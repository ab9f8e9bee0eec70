//! Slicing trials into gesture instances and grouping them into
//! normal/erroneous sets.

use std::collections::{BTreeMap, HashMap};
use std::ops::RangeInclusive;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{ErrorAnnotation, GestureLabel, KinematicTrial, ParameterGroup, Task, TranscriptEntry, KINEMATIC_COLUMNS};

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("trial {trial_id}: transcript entry {start}..={end} exceeds the {frames} recorded frames")]
    RangeExceedsTrial { trial_id: String, start: usize, end: usize, frames: usize },
    #[error("no annotation for trial {trial_id} gesture index {index}")]
    MissingAnnotation { trial_id: String, index: usize },
}

/// Default minimum number of erroneous examples for a gesture to enter the
/// executional analysis.
pub const DEFAULT_MIN_ERRONEOUS: usize = 5;

/// Row-major multivariate series: `len` samples of `width` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    width: usize,
    data: Vec<f64>,
}

impl Series {
    pub fn new(width: usize, data: Vec<f64>) -> Self {
        assert!(width > 0 && data.len().is_multiple_of(width), "series data must be a multiple of its width");
        Series { width, data }
    }

    /// One-variable series.
    pub fn univariate(values: Vec<f64>) -> Self {
        Series { width: 1, data: values }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.width).copied().collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureInstance {
    pub trial_id: String,
    pub gesture: GestureLabel,
    pub index_in_trial: usize,
    /// Inclusive, 1-indexed frames.
    pub frame_range: RangeInclusive<usize>,
    /// `duration_frames` rows of 76 values.
    pub kinematics: Vec<f64>,
    pub annotation: Option<ErrorAnnotation>,
}

impl GestureInstance {
    pub fn duration_frames(&self) -> usize {
        self.frame_range.end() - self.frame_range.start() + 1
    }

    /// Values of a 1-indexed column over the instance.
    pub fn column(&self, column: usize) -> Vec<f64> {
        self.kinematics.iter().skip(column - 1).step_by(KINEMATIC_COLUMNS).copied().collect()
    }

    pub fn is_erroneous(&self) -> bool {
        self.annotation.as_ref().is_some_and(ErrorAnnotation::is_erroneous)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Segmentation {
    pub instances: Vec<GestureInstance>,
    pub warnings: Vec<String>,
}

/// Cuts one instance per transcript entry out of `trial`.
///
/// An entry ending past the last frame is an error unless `clamp` is set, in
/// which case it is truncated to the trial and a warning is recorded. Entries
/// starting past the end cannot be clamped and always fail.
pub fn segment_trial(trial: &KinematicTrial, transcript: &[TranscriptEntry], clamp: bool) -> Result<Segmentation, SegmentError> {
    let frames = trial.frame_count();
    let mut out = Segmentation::default();
    for (index, entry) in transcript.iter().enumerate() {
        let exceeds = || SegmentError::RangeExceedsTrial {
            trial_id: trial.trial_id.clone(),
            start: entry.start_frame,
            end: entry.end_frame,
            frames,
        };
        let mut end = entry.end_frame;
        if end > frames {
            if !clamp || entry.start_frame > frames {
                return Err(exceeds());
            }
            out.warnings.push(format!(
                "trial {}: entry {index} ({}..={}) clamped to {frames} frames",
                trial.trial_id, entry.start_frame, entry.end_frame
            ));
            end = frames;
        }
        let range = entry.start_frame..=end;
        out.instances.push(GestureInstance {
            trial_id: trial.trial_id.clone(),
            gesture: entry.gesture.clone(),
            index_in_trial: index,
            kinematics: trial.frames(range.clone()).to_vec(),
            frame_range: range,
            annotation: None,
        });
    }
    Ok(out)
}

/// Columns of one parameter group over an instance, in column order.
pub fn extract_group(instance: &GestureInstance, group: ParameterGroup) -> Series {
    let cols = group.columns();
    let (lo, hi) = (cols.start() - 1, *cols.end());
    let data = instance.kinematics.chunks_exact(KINEMATIC_COLUMNS).flat_map(|row| row[lo..hi].iter().copied()).collect();
    Series::new(group.width(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Normal,
    Erroneous,
}

impl Class {
    pub fn name(self) -> &'static str {
        match self {
            Class::Normal => "normal",
            Class::Erroneous => "erroneous",
        }
    }
}

/// Normal and erroneous examples of one gesture in one task.
#[derive(Debug, Clone)]
pub struct InstanceSet {
    pub task: Task,
    pub gesture: GestureLabel,
    pub normal: Vec<GestureInstance>,
    pub erroneous: Vec<GestureInstance>,
}

impl InstanceSet {
    pub fn class(&self, class: Class) -> &[GestureInstance] {
        match class {
            Class::Normal => &self.normal,
            Class::Erroneous => &self.erroneous,
        }
    }

    pub fn len(&self) -> usize {
        self.normal.len() + self.erroneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &GestureInstance> {
        self.normal.iter().chain(&self.erroneous)
    }
}

/// Attaches annotations to instances (joined on trial id and transcript
/// position) and partitions them per gesture, sets ordered by gesture label.
pub fn build_instance_sets(
    task: Task,
    instances: Vec<GestureInstance>,
    annotations: &[ErrorAnnotation],
) -> Result<Vec<InstanceSet>, SegmentError> {
    let index: HashMap<(&str, usize), &ErrorAnnotation> =
        annotations.iter().map(|a| ((a.trial_id.as_str(), a.gesture_index), a)).collect();
    let mut sets: BTreeMap<GestureLabel, InstanceSet> = BTreeMap::new();
    for mut inst in instances {
        let ann = index.get(&(inst.trial_id.as_str(), inst.index_in_trial)).ok_or_else(|| {
            SegmentError::MissingAnnotation { trial_id: inst.trial_id.clone(), index: inst.index_in_trial }
        })?;
        inst.annotation = Some((*ann).clone());
        let set = sets.entry(inst.gesture.clone()).or_insert_with(|| InstanceSet {
            task,
            gesture: inst.gesture.clone(),
            normal: Vec::new(),
            erroneous: Vec::new(),
        });
        if inst.is_erroneous() {
            set.erroneous.push(inst);
        } else {
            set.normal.push(inst);
        }
    }
    Ok(sets.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ErrorModes;

    fn trial(frames: usize) -> KinematicTrial {
        let values = (0..frames * KINEMATIC_COLUMNS).map(|i| i as f64).collect();
        KinematicTrial::from_rows("T", values)
    }

    fn entry(start: usize, end: usize, g: u16) -> TranscriptEntry {
        TranscriptEntry { start_frame: start, end_frame: end, gesture: GestureLabel::g(g) }
    }

    #[test]
    fn inclusive_ranges() {
        let seg = segment_trial(&trial(20), &[entry(1, 10, 1)], false).unwrap();
        assert_eq!(seg.instances[0].duration_frames(), 10);
        assert_eq!(seg.instances[0].kinematics.len(), 10 * KINEMATIC_COLUMNS);
        assert_eq!(seg.instances[0].kinematics[0], 0.0);

        let err = segment_trial(&trial(20), &[entry(15, 25, 2)], false).unwrap_err();
        assert!(matches!(err, SegmentError::RangeExceedsTrial { frames: 20, .. }));

        assert!(segment_trial(&trial(20), &[], false).unwrap().instances.is_empty());
    }

    #[test]
    fn clamping_records_warning() {
        let seg = segment_trial(&trial(20), &[entry(15, 25, 2)], true).unwrap();
        assert_eq!(seg.instances[0].frame_range, 15..=20);
        assert_eq!(seg.warnings.len(), 1);
        assert!(segment_trial(&trial(20), &[entry(21, 25, 2)], true).is_err());
    }

    #[test]
    fn group_extraction() {
        let t = trial(3);
        let inst = &segment_trial(&t, &[entry(1, 3, 1)], false).unwrap().instances[0];
        let grip = extract_group(inst, ParameterGroup::RightGripperAngle);
        assert_eq!(grip.width(), 1);
        assert_eq!(grip.column(0), inst.column(57));
        let lrot = extract_group(inst, ParameterGroup::LeftRotationMatrix);
        assert_eq!(lrot.width(), 9);
        assert_eq!(lrot.len(), 3);
        assert_eq!(lrot.point(1), &t.row(1)[60..69]);

        let zero = GestureInstance { kinematics: vec![0.0; 2 * KINEMATIC_COLUMNS], frame_range: 1..=2, ..inst.clone() };
        assert!(extract_group(&zero, ParameterGroup::LeftPosition).data().iter().all(|v| *v == 0.0));
    }

    fn annotation(trial: &str, index: usize, erroneous: bool) -> ErrorAnnotation {
        ErrorAnnotation {
            trial_id: trial.into(),
            gesture_index: index,
            gesture: GestureLabel::g(1),
            modes: ErrorModes { multiple_attempts: erroneous, ..Default::default() },
        }
    }

    #[test]
    fn partition_by_annotation() {
        let t = trial(29);
        let transcript: Vec<_> = (1..=29).map(|f| entry(f, f, 1)).collect();
        let instances = segment_trial(&t, &transcript, false).unwrap().instances;
        let anns: Vec<_> = (0..29).map(|i| annotation("T", i, i < 8)).collect();
        let sets = build_instance_sets(Task::Suturing, instances.clone(), &anns).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].normal.len(), 21);
        assert_eq!(sets[0].erroneous.len(), 8);

        let clean: Vec<_> = (0..29).map(|i| annotation("T", i, false)).collect();
        let sets = build_instance_sets(Task::Suturing, instances.clone(), &clean).unwrap();
        assert!(sets[0].erroneous.is_empty());

        let err = build_instance_sets(Task::Suturing, instances, &clean[..28]).unwrap_err();
        assert_eq!(err, SegmentError::MissingAnnotation { trial_id: "T".into(), index: 28 });
    }
}
