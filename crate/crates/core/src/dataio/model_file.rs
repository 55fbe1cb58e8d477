//! JSON persistence for [`CalibrationModel`].
//!
//! Infinite thresholds are written as the string `"inf"`; finite ones as
//! decimals with at least 15 significant digits.

use serde::{Deserialize, Serialize};

use crate::conformal::{CalibrationModel, ConformalThreshold, OutcomeThresholds, Thresholds};
use crate::error::{Error, Result};

use super::json::to_json_padded;

pub const MODEL_FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum QHat {
    Finite(f64),
    Tagged(InfTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum InfTag {
    #[serde(rename = "inf")]
    Inf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdDoc {
    q_hat: QHat,
    n_cal: usize,
    rank_k: usize,
}

impl From<ConformalThreshold> for ThresholdDoc {
    fn from(t: ConformalThreshold) -> Self {
        Self {
            q_hat: if t.is_infinite() {
                QHat::Tagged(InfTag::Inf)
            } else {
                QHat::Finite(t.q_hat)
            },
            n_cal: t.n_cal,
            rank_k: t.rank_k,
        }
    }
}

impl From<ThresholdDoc> for ConformalThreshold {
    fn from(d: ThresholdDoc) -> Self {
        Self {
            q_hat: match d.q_hat {
                QHat::Finite(x) => x,
                QHat::Tagged(InfTag::Inf) => f64::INFINITY,
            },
            n_cal: d.n_cal,
            rank_k: d.rank_k,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassThresholdDoc {
    class_id: String,
    #[serde(flatten)]
    threshold: ThresholdDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassPairDoc {
    class_id: String,
    present: ThresholdDoc,
    absent: ThresholdDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupDoc {
    critical_present: Option<ThresholdDoc>,
    critical_absent: Option<ThresholdDoc>,
    standard: Option<ThresholdDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModeDoc {
    Independent,
    RiskSensitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PoolingDoc {
    Group,
    PerClass,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    version: String,
    mode: ModeDoc,
    alpha_standard: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha_critical: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pooling: Option<PoolingDoc>,
    taxonomy_fingerprint: String,
    class_ids: Vec<String>,
    thresholds: serde_json::Value,
}

pub fn model_to_json(model: &CalibrationModel) -> Result<String> {
    let (mode, pooling, thresholds) = match &model.thresholds {
        Thresholds::Independent(ts) => {
            let docs: Vec<ClassThresholdDoc> = model
                .class_ids
                .iter()
                .zip(ts)
                .map(|(id, t)| ClassThresholdDoc {
                    class_id: id.clone(),
                    threshold: (*t).into(),
                })
                .collect();
            (ModeDoc::Independent, None, serde_json::to_value(docs)?)
        }
        Thresholds::GroupPooled {
            critical_present,
            critical_absent,
            standard,
        } => {
            let doc = GroupDoc {
                critical_present: critical_present.map(Into::into),
                critical_absent: critical_absent.map(Into::into),
                standard: standard.map(Into::into),
            };
            (
                ModeDoc::RiskSensitive,
                Some(PoolingDoc::Group),
                serde_json::to_value(doc)?,
            )
        }
        Thresholds::PerClass(ts) => {
            let docs: Vec<ClassPairDoc> = model
                .class_ids
                .iter()
                .zip(ts)
                .map(|(id, t)| ClassPairDoc {
                    class_id: id.clone(),
                    present: t.present.into(),
                    absent: t.absent.into(),
                })
                .collect();
            (
                ModeDoc::RiskSensitive,
                Some(PoolingDoc::PerClass),
                serde_json::to_value(docs)?,
            )
        }
    };
    let doc = ModelDoc {
        version: MODEL_FORMAT_VERSION.to_string(),
        mode,
        alpha_standard: model.alpha_standard,
        alpha_critical: model.alpha_critical,
        pooling,
        taxonomy_fingerprint: model.taxonomy_fingerprint.clone(),
        class_ids: model.class_ids.clone(),
        thresholds,
    };
    to_json_padded(&doc)
}

fn malformed(e: serde_json::Error) -> Error {
    Error::input(format!("model file: {e}"))
}

fn check_ids<'a>(expected: &[String], found: impl Iterator<Item = &'a String>) -> Result<()> {
    let found: Vec<&String> = found.collect();
    if found.len() != expected.len() || found.iter().zip(expected).any(|(a, b)| *a != b) {
        return Err(Error::input(
            "model file: threshold class ids do not match class_ids",
        ));
    }
    Ok(())
}

pub fn model_from_json(text: &str) -> Result<CalibrationModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(malformed)?;
    if doc.version != MODEL_FORMAT_VERSION {
        return Err(Error::input(format!(
            "model file version {:?} is not supported (expected {MODEL_FORMAT_VERSION:?})",
            doc.version
        )));
    }
    let thresholds = match (doc.mode, doc.pooling) {
        (ModeDoc::Independent, None) => {
            let docs: Vec<ClassThresholdDoc> =
                serde_json::from_value(doc.thresholds).map_err(malformed)?;
            check_ids(&doc.class_ids, docs.iter().map(|d| &d.class_id))?;
            Thresholds::Independent(docs.into_iter().map(|d| d.threshold.into()).collect())
        }
        (ModeDoc::RiskSensitive, Some(PoolingDoc::Group)) => {
            let g: GroupDoc = serde_json::from_value(doc.thresholds).map_err(malformed)?;
            Thresholds::GroupPooled {
                critical_present: g.critical_present.map(Into::into),
                critical_absent: g.critical_absent.map(Into::into),
                standard: g.standard.map(Into::into),
            }
        }
        (ModeDoc::RiskSensitive, Some(PoolingDoc::PerClass)) => {
            let docs: Vec<ClassPairDoc> =
                serde_json::from_value(doc.thresholds).map_err(malformed)?;
            check_ids(&doc.class_ids, docs.iter().map(|d| &d.class_id))?;
            Thresholds::PerClass(
                docs.into_iter()
                    .map(|d| OutcomeThresholds {
                        present: d.present.into(),
                        absent: d.absent.into(),
                    })
                    .collect(),
            )
        }
        (ModeDoc::Independent, Some(_)) => {
            return Err(Error::input(
                "model file: independent model has a pooling field",
            ))
        }
        (ModeDoc::RiskSensitive, None) => {
            return Err(Error::input(
                "model file: risk-sensitive model lacks pooling",
            ))
        }
    };
    let model = CalibrationModel {
        alpha_standard: doc.alpha_standard,
        alpha_critical: doc.alpha_critical,
        thresholds,
        taxonomy_fingerprint: doc.taxonomy_fingerprint,
        class_ids: doc.class_ids,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{calibrate_independent, calibrate_risk_sensitive, Pooling};
    use crate::dataio::ScoredCase;
    use crate::taxonomy::Taxonomy;

    fn cohort(n: usize) -> Vec<ScoredCase> {
        (0..n)
            .map(|i| {
                let scores = (0..11)
                    .map(|j| ((i * 7 + j * 13) % 97) as f64 / 96.0)
                    .collect();
                let labels = (0..11).map(|j| (i + j) % 3 == 0).collect();
                ScoredCase::new(format!("c{i}"), None, scores, Some(labels)).unwrap()
            })
            .collect()
    }

    #[test]
    fn round_trips_every_layout() {
        let tax = Taxonomy::default_ranzcr();
        let cal = cohort(120);
        let models = [
            calibrate_independent(&cal, &tax, 0.1).unwrap(),
            calibrate_independent(&cal[..3], &tax, 0.1).unwrap(),
            calibrate_risk_sensitive(&cal, &tax, 0.1, 0.01, Pooling::GroupPooled).unwrap(),
            calibrate_risk_sensitive(&cal, &tax, 0.1, 0.01, Pooling::PerClass).unwrap(),
        ];
        for model in models {
            let text = model_to_json(&model).unwrap();
            assert_eq!(model_from_json(&text).unwrap(), model);
            assert_eq!(
                model_to_json(&model_from_json(&text).unwrap()).unwrap(),
                text
            );
        }
    }

    #[test]
    fn infinite_is_tagged() {
        let tax = Taxonomy::default_ranzcr();
        let model = calibrate_independent(&cohort(1), &tax, 0.1).unwrap();
        let text = model_to_json(&model).unwrap();
        assert!(text.contains("\"q_hat\": \"inf\""), "{text}");
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(model_from_json("{}"), Err(Error::Input(_))));
        let tax = Taxonomy::default_ranzcr();
        let model = calibrate_independent(&cohort(30), &tax, 0.1).unwrap();
        let text = model_to_json(&model)
            .unwrap()
            .replace("\"version\": \"1\"", "\"version\": \"9\"");
        assert!(model_from_json(&text).is_err());
    }
}
