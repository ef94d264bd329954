//! Run-length encoding of label maps.

use std::collections::BTreeMap;

use crate::segmenter::{Label, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Run {
    pub label: Label,
    pub length: usize,
}

/// Row-major runs of one label map. Consecutive runs always differ in label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct RegionSupport {
    runs: Vec<Run>,
}

impl RegionSupport {
    pub fn encode(labels: &LabelMap) -> Self {
        let mut runs: Vec<Run> = Vec::new();
        for &l in labels.labels() {
            match runs.last_mut() {
                Some(run) if run.label == l => run.length += 1,
                _ => runs.push(Run {
                    label: l,
                    length: 1,
                }),
            }
        }
        Self { runs }
    }

    /// Wraps runs as given; call [`RegionSupport::validate`] before trusting them.
    pub fn from_runs(runs: Vec<Run>) -> Self {
        Self { runs }
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    /// Checks the runs cover exactly `pixel_count` pixels with positive
    /// lengths, non-zero labels and no two adjacent runs sharing a label.
    pub fn validate(&self, pixel_count: usize) -> Result<(), String> {
        let mut total = 0usize;
        for (i, run) in self.runs.iter().enumerate() {
            if run.label == 0 {
                return Err(format!("run {i} has label 0"));
            }
            if run.length == 0 {
                return Err(format!("run {i} has zero length"));
            }
            if i > 0 && self.runs[i - 1].label == run.label {
                return Err(format!("runs {} and {i} repeat label {}", i - 1, run.label));
            }
            total = total
                .checked_add(run.length)
                .ok_or_else(|| "run lengths overflow".to_string())?;
        }
        if total != pixel_count {
            return Err(format!(
                "run lengths sum to {total}, expected {pixel_count}"
            ));
        }
        Ok(())
    }

    /// Pixel count per label.
    pub fn areas(&self) -> BTreeMap<Label, usize> {
        let mut areas = BTreeMap::new();
        for run in &self.runs {
            *areas.entry(run.label).or_default() += run.length;
        }
        areas
    }

    /// Expands the runs back into a label map. `None` if they do not cover `width * height`.
    pub fn decode(&self, width: usize, height: usize) -> Option<LabelMap> {
        self.validate(width * height).ok()?;
        let mut labels = Vec::with_capacity(width * height);
        for run in &self.runs {
            labels.extend(std::iter::repeat_n(run.label, run.length));
        }
        LabelMap::from_labels(width, height, labels)
    }
}
