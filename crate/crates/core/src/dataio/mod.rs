//! File formats, patient-grouped splitting and the synthetic cohort generator.

mod json;
mod model_file;
mod scores;
mod split;
mod synth;

pub use json::{to_json_padded, write_atomic};
pub use model_file::{model_from_json, model_to_json};
pub use scores::{read_scores, write_scores};
pub use split::{grouped_split, SplitBuckets, SplitSpec, BUCKET_NAMES};
pub use synth::{synth_generate, ClassSynth, PatientCases, SynthCohort, SynthConfig};

use crate::error::{Error, Result};

/// One image: its probability vector and, when known, its binary labels.
///
/// Both vectors are in the canonical class order of the taxonomy they were
/// read against.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCase {
    case_id: String,
    patient_id: Option<String>,
    scores: Vec<f64>,
    labels: Option<Vec<bool>>,
}

impl ScoredCase {
    pub fn new(
        case_id: impl Into<String>,
        patient_id: Option<String>,
        scores: Vec<f64>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        let case_id = case_id.into();
        if case_id.is_empty() {
            return Err(Error::input("case_id must be non-empty"));
        }
        if let Some((i, p)) = scores
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::input(format!(
                "case {case_id}: score {p} at position {i} is outside [0, 1]"
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != scores.len() {
                return Err(Error::input(format!(
                    "case {case_id}: {} labels for {} scores",
                    labels.len(),
                    scores.len()
                )));
            }
        }
        Ok(Self {
            case_id,
            patient_id: patient_id.filter(|p| !p.is_empty()),
            scores,
            labels,
        })
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn patient_id(&self) -> Option<&str> {
        self.patient_id.as_deref()
    }

    /// Grouping key for splitting: the patient id, or the case id for
    /// cases without one.
    pub fn group_key(&self) -> &str {
        self.patient_id.as_deref().unwrap_or(&self.case_id)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn width(&self) -> usize {
        self.scores.len()
    }

    pub fn without_labels(&self) -> Self {
        Self {
            labels: None,
            ..self.clone()
        }
    }

    pub(crate) fn require_labels(&self) -> Result<&[bool]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::input(format!("case {} has no labels", self.case_id)))
    }
}

/// Checks that every case is as wide as the taxonomy.
pub(crate) fn check_width(cases: &[ScoredCase], width: usize) -> Result<()> {
    if let Some(case) = cases.iter().find(|c| c.width() != width) {
        return Err(Error::validation(format!(
            "case {} has {} scores but the taxonomy has {} classes",
            case.case_id(),
            case.width(),
            width
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_score() {
        assert!(ScoredCase::new("a", None, vec![0.2, 1.3], None).is_err());
        assert!(ScoredCase::new("a", None, vec![f64::NAN], None).is_err());
        assert!(ScoredCase::new("a", None, vec![0.0, 1.0], None).is_ok());
    }

    #[test]
    fn label_width_must_match() {
        assert!(ScoredCase::new("a", None, vec![0.2, 0.3], Some(vec![true])).is_err());
    }

    #[test]
    fn empty_patient_is_none() {
        let c = ScoredCase::new("a", Some(String::new()), vec![0.5], None).unwrap();
        assert_eq!(c.patient_id(), None);
        assert_eq!(c.group_key(), "a");
    }
}
