//! Coverage, set-size and clinical safety metrics over labeled prediction sets.

use serde::Serialize;

use crate::conformal::{Outcome, PredictionSet};
use crate::dataio::ScoredCase;
use crate::error::{Error, Result};
use crate::taxonomy::{RiskGroup, Taxonomy, TubeCategory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCoverage {
    pub class_id: String,
    pub covered: u64,
    pub total: u64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub cases: u64,
    pub pairs: u64,
    pub overall_coverage: f64,
    pub per_class: Vec<ClassCoverage>,
    /// Coverage over all pairs whose class is critical.
    pub critical_pair_coverage: Option<f64>,
    /// Coverage over critical pairs whose true label is Present.
    pub critical_present_coverage: Option<f64>,
    pub critical_present_pairs: u64,
    /// Coverage over pairs whose class is not critical.
    pub non_critical_coverage: Option<f64>,
    pub avg_set_size: f64,
    /// Number of pairs with set size 0, 1 and 2.
    pub size_histogram: [u64; 3],
}

impl CoverageReport {
    pub fn size_fraction(&self, size: usize) -> f64 {
        ratio(self.size_histogram[size], self.pairs).unwrap_or(0.0)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn check_pair(labels: &[bool], sets: &PredictionSet, taxonomy: &Taxonomy) -> Result<()> {
    if labels.len() != taxonomy.len() || sets.len() != taxonomy.len() {
        return Err(Error::validation(format!(
            "{} labels and {} sets for a taxonomy of {} classes",
            labels.len(),
            sets.len(),
            taxonomy.len()
        )));
    }
    Ok(())
}

fn labeled<'a>(
    cases: &'a [ScoredCase],
    sets: &'a [PredictionSet],
    taxonomy: &Taxonomy,
) -> Result<Vec<(&'a [bool], &'a PredictionSet)>> {
    if cases.len() != sets.len() {
        return Err(Error::validation(format!(
            "{} cases but {} prediction sets",
            cases.len(),
            sets.len()
        )));
    }
    cases
        .iter()
        .zip(sets)
        .map(|(case, set)| {
            let labels = case.require_labels()?;
            check_pair(labels, set, taxonomy)?;
            Ok((labels, set))
        })
        .collect()
}

/// Coverage and set-size statistics.
///
/// A `(case, class)` pair is covered when its true outcome is an element of
/// the class's prediction set.
pub fn coverage(
    cases: &[ScoredCase],
    sets: &[PredictionSet],
    taxonomy: &Taxonomy,
) -> Result<CoverageReport> {
    let rows = labeled(cases, sets, taxonomy)?;
    let width = taxonomy.len();
    let mut class_covered = vec![0u64; width];
    let mut histogram = [0u64; 3];
    let (mut crit_cov, mut crit_total) = (0u64, 0u64);
    let (mut crit_p_cov, mut crit_p_total) = (0u64, 0u64);
    let (mut other_cov, mut other_total) = (0u64, 0u64);

    for (labels, set) in &rows {
        for (i, class) in taxonomy.classes().iter().enumerate() {
            let s = set.get(i);
            histogram[s.len()] += 1;
            let covered = s.contains(Outcome::from_label(labels[i]));
            class_covered[i] += u64::from(covered);
            if class.is_critical() {
                crit_total += 1;
                crit_cov += u64::from(covered);
                if labels[i] {
                    crit_p_total += 1;
                    crit_p_cov += u64::from(covered);
                }
            } else {
                other_total += 1;
                other_cov += u64::from(covered);
            }
        }
    }

    let n = rows.len() as u64;
    let pairs = n * width as u64;
    let covered_total: u64 = class_covered.iter().sum();
    let size_sum = histogram[1] + 2 * histogram[2];
    Ok(CoverageReport {
        cases: n,
        pairs,
        overall_coverage: ratio(covered_total, pairs).unwrap_or(0.0),
        per_class: taxonomy
            .classes()
            .iter()
            .zip(&class_covered)
            .map(|(class, &covered)| ClassCoverage {
                class_id: class.id.clone(),
                covered,
                total: n,
                coverage: ratio(covered, n).unwrap_or(0.0),
            })
            .collect(),
        critical_pair_coverage: ratio(crit_cov, crit_total),
        critical_present_coverage: ratio(crit_p_cov, crit_p_total),
        critical_present_pairs: crit_p_total,
        non_critical_coverage: ratio(other_cov, other_total),
        avg_set_size: ratio(size_sum, pairs).unwrap_or(0.0),
        size_histogram: histogram,
    })
}

/// High-risk misprediction flag for each tube category that has a Normal
/// class.
///
/// A category is flagged when a critical class of it is truly present, a
/// Normal class of it has Present in its set, and no critical class of it
/// has Present in its set: the image is confidently called normal while
/// something is wrong.
pub fn high_risk_mispredictions(
    labels: &[bool],
    sets: &PredictionSet,
    taxonomy: &Taxonomy,
) -> Result<Vec<(TubeCategory, bool)>> {
    check_pair(labels, sets, taxonomy)?;
    let mut out = Vec::new();
    for category in taxonomy.categories() {
        let members: Vec<usize> = taxonomy.indices_of_category(category).collect();
        let group = |i: &&usize| taxonomy.class(**i).risk_group;
        let normals: Vec<usize> = members
            .iter()
            .filter(|i| group(i) == RiskGroup::Normal)
            .copied()
            .collect();
        if normals.is_empty() {
            continue;
        }
        let criticals: Vec<usize> = members
            .iter()
            .filter(|i| group(i) == RiskGroup::Critical)
            .copied()
            .collect();
        let problem_present = criticals.iter().any(|&i| labels[i]);
        let normal_asserted = normals.iter().any(|&i| sets.get(i).present);
        let problems_denied = criticals.iter().all(|&i| !sets.get(i).present);
        out.push((
            category,
            problem_present && normal_asserted && problems_denied,
        ));
    }
    Ok(out)
}

/// Critical classes that are truly present but whose set omits Present.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CriticalMiss {
    pub offending: Vec<usize>,
}

impl CriticalMiss {
    pub fn is_miss(&self) -> bool {
        !self.offending.is_empty()
    }
}

pub fn potential_critical_miss(
    labels: &[bool],
    sets: &PredictionSet,
    taxonomy: &Taxonomy,
) -> Result<CriticalMiss> {
    check_pair(labels, sets, taxonomy)?;
    let offending = taxonomy
        .indices_in(RiskGroup::Critical)
        .filter(|&i| labels[i] && !sets.get(i).present)
        .collect();
    Ok(CriticalMiss { offending })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryRisk {
    pub category: TubeCategory,
    pub events: u64,
    /// Images where this category has at least one truly present critical class.
    pub eligible_images: u64,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyReport {
    pub total_images: u64,
    pub high_risk: Vec<CategoryRisk>,
    pub high_risk_events: u64,
    pub high_risk_rate: Option<f64>,
    pub potential_critical_miss_images: u64,
    pub critical_condition_images: u64,
    /// Miss images over images with a critical condition; `None` when no
    /// image has one.
    pub potential_miss_rate: Option<f64>,
}

pub fn aggregate_safety(
    cases: &[ScoredCase],
    sets: &[PredictionSet],
    taxonomy: &Taxonomy,
) -> Result<SafetyReport> {
    let rows = labeled(cases, sets, taxonomy)?;
    let categories: Vec<TubeCategory> = taxonomy
        .categories()
        .into_iter()
        .filter(|&c| {
            taxonomy
                .indices_of_category(c)
                .any(|i| taxonomy.class(i).risk_group == RiskGroup::Normal)
        })
        .collect();
    let mut events = vec![0u64; categories.len()];
    let mut eligible = vec![0u64; categories.len()];
    let (mut miss_images, mut crit_images) = (0u64, 0u64);

    for (labels, set) in &rows {
        for (k, (category, flagged)) in high_risk_mispredictions(labels, set, taxonomy)?
            .into_iter()
            .enumerate()
        {
            debug_assert_eq!(categories[k], category);
            let has_problem = taxonomy
                .indices_of_category(category)
                .any(|i| taxonomy.class(i).is_critical() && labels[i]);
            eligible[k] += u64::from(has_problem);
            events[k] += u64::from(flagged);
        }
        if taxonomy.indices_in(RiskGroup::Critical).any(|i| labels[i]) {
            crit_images += 1;
        }
        if potential_critical_miss(labels, set, taxonomy)?.is_miss() {
            miss_images += 1;
        }
    }

    let high_risk_events = events.iter().sum();
    let eligible_total = eligible.iter().sum();
    Ok(SafetyReport {
        total_images: rows.len() as u64,
        high_risk: categories
            .iter()
            .zip(events.iter().zip(&eligible))
            .map(|(&category, (&events, &eligible_images))| CategoryRisk {
                category,
                events,
                eligible_images,
                rate: ratio(events, eligible_images),
            })
            .collect(),
        high_risk_events,
        high_risk_rate: ratio(high_risk_events, eligible_total),
        potential_critical_miss_images: miss_images,
        critical_condition_images: crit_images,
        potential_miss_rate: ratio(miss_images, crit_images),
    })
}

/// Renders a rate as a percentage with one decimal place, or `n/a`.
pub fn format_rate(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{:.1}%", r * 100.0),
        None => "n/a".to_string(),
    }
}
