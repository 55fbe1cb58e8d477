//! Per-image routing from prediction sets, and workload extrapolation.
//!
//! Categories are assigned with a fixed precedence so that they partition
//! any cohort:
//!
//! 1. `ImmediateIntervention` if some critical class is `{Present}`;
//! 2. `RescanNeeded` if some critical class is `{}`;
//! 3. `AutoNormal` if every critical class is `{Absent}` and every normal
//!    class is `{Present}`;
//! 4. `SpecialistReview` otherwise.
//!
//! Classes in the `Other` risk group never gate a category. They only
//! affect the orthogonal [`fully_confident`] flag.

use std::fmt;

use serde::Serialize;

use crate::conformal::{LabelSet, PredictionSet};
use crate::error::{Error, Result};
use crate::metrics::SafetyReport;
use crate::taxonomy::{RiskGroup, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TriageCategory {
    AutoNormal,
    ImmediateIntervention,
    SpecialistReview,
    RescanNeeded,
}

impl TriageCategory {
    pub const ALL: [TriageCategory; 4] = [
        TriageCategory::AutoNormal,
        TriageCategory::ImmediateIntervention,
        TriageCategory::SpecialistReview,
        TriageCategory::RescanNeeded,
    ];

    pub fn token(self) -> &'static str {
        match self {
            TriageCategory::AutoNormal => "auto_normal",
            TriageCategory::ImmediateIntervention => "immediate_intervention",
            TriageCategory::SpecialistReview => "specialist_review",
            TriageCategory::RescanNeeded => "rescan_needed",
        }
    }

    pub fn from_token(token: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.token() == token)
            .ok_or_else(|| Error::input(format!("unknown triage category {token:?}")))
    }

    pub fn label(self) -> &'static str {
        match self {
            TriageCategory::AutoNormal => "Auto-Normal",
            TriageCategory::ImmediateIntervention => "Immediate Intervention",
            TriageCategory::SpecialistReview => "Specialist Review",
            TriageCategory::RescanNeeded => "Re-scan Needed",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TriageCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn categorize(sets: &PredictionSet, taxonomy: &Taxonomy) -> Result<TriageCategory> {
    if sets.len() != taxonomy.len() {
        return Err(Error::validation(format!(
            "{} sets for a taxonomy of {} classes",
            sets.len(),
            taxonomy.len()
        )));
    }
    let critical = || {
        taxonomy
            .indices_in(RiskGroup::Critical)
            .map(|i| sets.get(i))
    };
    let category = if critical().any(|s| s == LabelSet::PRESENT) {
        TriageCategory::ImmediateIntervention
    } else if critical().any(LabelSet::is_empty) {
        TriageCategory::RescanNeeded
    } else if critical().all(|s| s == LabelSet::ABSENT)
        && taxonomy
            .indices_in(RiskGroup::Normal)
            .all(|i| sets.get(i) == LabelSet::PRESENT)
    {
        TriageCategory::AutoNormal
    } else {
        TriageCategory::SpecialistReview
    };
    Ok(category)
}

/// True when every class's set has exactly one element.
pub fn fully_confident(sets: &PredictionSet) -> bool {
    sets.sets().iter().all(|s| s.is_singleton())
}

/// Per-case routing decision and, when labels were available, safety flags.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseVerdict {
    pub case_id: String,
    pub sets: PredictionSet,
    pub triage: TriageCategory,
    pub fully_confident: bool,
    pub potential_critical_miss: Option<bool>,
    pub high_risk_misprediction: Option<bool>,
}

impl CaseVerdict {
    pub fn new(
        case_id: impl Into<String>,
        sets: PredictionSet,
        taxonomy: &Taxonomy,
    ) -> Result<Self> {
        let triage = categorize(&sets, taxonomy)?;
        Ok(Self {
            case_id: case_id.into(),
            fully_confident: fully_confident(&sets),
            triage,
            sets,
            potential_critical_miss: None,
            high_risk_misprediction: None,
        })
    }

    /// Attaches safety flags computed against the true labels.
    pub fn with_labels(mut self, labels: &[bool], taxonomy: &Taxonomy) -> Result<Self> {
        let miss = crate::metrics::potential_critical_miss(labels, &self.sets, taxonomy)?;
        let high_risk = crate::metrics::high_risk_mispredictions(labels, &self.sets, taxonomy)?;
        self.potential_critical_miss = Some(miss.is_miss());
        self.high_risk_misprediction = Some(high_risk.iter().any(|(_, flagged)| *flagged));
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryLoad {
    pub category: TriageCategory,
    pub count: u64,
    pub rate: f64,
    /// `rate * daily_volume`, unrounded.
    pub expected_per_day: f64,
    pub expected_per_day_rounded: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadReport {
    pub cohort_size: u64,
    pub daily_volume: u64,
    pub categories: Vec<CategoryLoad>,
    pub fully_confident: CategoryCount,
    /// Expected potential critical misses per day: the miss rate among
    /// images with a critical condition, times the daily volume.
    pub potential_misses_per_day: Option<f64>,
    pub potential_misses_per_day_rounded: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryCount {
    pub count: u64,
    pub rate: f64,
    pub expected_per_day: f64,
    pub expected_per_day_rounded: i64,
}

impl WorkloadReport {
    pub fn load(&self, category: TriageCategory) -> &CategoryLoad {
        &self.categories[category.index()]
    }
}

/// `rate * volume` rounded half away from zero.
pub fn extrapolate(rate: f64, volume: u64) -> (f64, i64) {
    let expected = rate * volume as f64;
    (expected, expected.round() as i64)
}

/// Category rates over a cohort, extrapolated to `daily_volume` images.
pub fn workload(
    verdicts: &[CaseVerdict],
    safety: Option<&SafetyReport>,
    daily_volume: u64,
) -> Result<WorkloadReport> {
    if verdicts.is_empty() {
        return Err(Error::input(
            "cannot extrapolate workload from an empty cohort",
        ));
    }
    if daily_volume == 0 {
        return Err(Error::input("daily volume must be at least 1"));
    }
    let n = verdicts.len() as u64;
    let mut counts = [0u64; 4];
    for v in verdicts {
        counts[v.triage.index()] += 1;
    }
    let categories = TriageCategory::ALL
        .into_iter()
        .map(|category| {
            let count = counts[category.index()];
            let rate = count as f64 / n as f64;
            let (expected, rounded) = extrapolate(rate, daily_volume);
            CategoryLoad {
                category,
                count,
                rate,
                expected_per_day: expected,
                expected_per_day_rounded: rounded,
            }
        })
        .collect();
    let confident = verdicts.iter().filter(|v| v.fully_confident).count() as u64;
    let confident_rate = confident as f64 / n as f64;
    let (expected, rounded) = extrapolate(confident_rate, daily_volume);
    let misses = safety
        .and_then(|s| s.potential_miss_rate)
        .map(|rate| extrapolate(rate, daily_volume));
    Ok(WorkloadReport {
        cohort_size: n,
        daily_volume,
        categories,
        fully_confident: CategoryCount {
            count: confident,
            rate: confident_rate,
            expected_per_day: expected,
            expected_per_day_rounded: rounded,
        },
        potential_misses_per_day: misses.map(|m| m.0),
        potential_misses_per_day_rounded: misses.map(|m| m.1),
    })
}

/// Renders verdicts as `case_id,category,fully_confident,set:<class>...`.
pub fn verdicts_to_csv(verdicts: &[CaseVerdict], taxonomy: &Taxonomy) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec![
        "case_id".to_string(),
        "category".to_string(),
        "fully_confident".to_string(),
    ];
    header.extend(taxonomy.ids().map(|id| format!("set:{id}")));
    w.write_record(&header)?;
    for v in verdicts {
        if v.sets.len() != taxonomy.len() {
            return Err(Error::validation(format!(
                "case {}: {} sets for {} classes",
                v.case_id,
                v.sets.len(),
                taxonomy.len()
            )));
        }
        let mut record = vec![
            v.case_id.clone(),
            v.triage.token().to_string(),
            if v.fully_confident { "1" } else { "0" }.to_string(),
        ];
        record.extend(v.sets.sets().iter().map(|s| s.code().to_string()));
        w.write_record(&record)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV writer emits UTF-8"))
}

/// Parses the verdict CSV written by [`verdicts_to_csv`], re-deriving the
/// category and confidence flag from the sets and rejecting rows whose
/// stored values disagree.
pub fn verdicts_from_csv(text: &str, taxonomy: &Taxonomy) -> Result<Vec<CaseVerdict>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    let mut expected = vec![
        "case_id".to_string(),
        "category".to_string(),
        "fully_confident".to_string(),
    ];
    expected.extend(taxonomy.ids().map(|id| format!("set:{id}")));
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::validation(
            "verdict file columns do not match the taxonomy",
        ));
    }
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let sets = PredictionSet(
            record
                .iter()
                .skip(3)
                .map(LabelSet::from_code)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::input(format!("line {line}: {e}")))?,
        );
        let verdict = CaseVerdict::new(&record[0], sets, taxonomy)?;
        let stored = TriageCategory::from_token(&record[1])?;
        let confident = match &record[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::input(format!(
                    "line {line}: fully_confident {other:?} is not 0 or 1"
                )))
            }
        };
        if stored != verdict.triage || confident != verdict.fully_confident {
            return Err(Error::validation(format!(
                "line {line}: stored category or flag disagrees with the sets"
            )));
        }
        out.push(verdict);
    }
    Ok(out)
}
