//! End-to-end evaluation of a calibrated model on a labeled cohort.

use std::fmt::Write as _;

use serde::Serialize;

use crate::conformal::{CalibrationMode, CalibrationModel, Pooling, PredictionSet};
use crate::dataio::ScoredCase;
use crate::error::Result;
use crate::metrics::{aggregate_safety, coverage, format_rate, CoverageReport, SafetyReport};
use crate::taxonomy::Taxonomy;
use crate::triage::{workload, CaseVerdict, TriageCategory, WorkloadReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub mode: &'static str,
    pub pooling: Option<&'static str>,
    pub alpha_standard: f64,
    pub alpha_critical: Option<f64>,
}

impl ModelSummary {
    pub fn of(model: &CalibrationModel) -> Self {
        Self {
            mode: match model.mode() {
                CalibrationMode::Independent => "independent",
                CalibrationMode::RiskSensitive => "risk_sensitive",
            },
            pooling: model.pooling().map(|p| match p {
                Pooling::GroupPooled => "group",
                Pooling::PerClass => "per_class",
            }),
            alpha_standard: model.alpha_standard,
            alpha_critical: model.alpha_critical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub model: ModelSummary,
    pub coverage: CoverageReport,
    pub safety: SafetyReport,
    pub triage: WorkloadReport,
}

/// Builds prediction sets for `cases` and, for labeled cases, attaches
/// safety flags.
pub fn predict_cohort(
    model: &CalibrationModel,
    cases: &[ScoredCase],
    taxonomy: &Taxonomy,
) -> Result<Vec<CaseVerdict>> {
    let bound = model.bind(taxonomy)?;
    cases
        .iter()
        .map(|case| {
            let verdict =
                CaseVerdict::new(case.case_id(), bound.predict(case.scores())?, taxonomy)?;
            match case.labels() {
                Some(labels) => verdict.with_labels(labels, taxonomy),
                None => Ok(verdict),
            }
        })
        .collect()
}

pub fn evaluate(
    model: &CalibrationModel,
    cases: &[ScoredCase],
    taxonomy: &Taxonomy,
    daily_volume: u64,
) -> Result<(EvaluationReport, Vec<CaseVerdict>)> {
    for case in cases {
        case.require_labels()?;
    }
    let verdicts = predict_cohort(model, cases, taxonomy)?;
    let sets: Vec<PredictionSet> = verdicts.iter().map(|v| v.sets.clone()).collect();
    let coverage = coverage(cases, &sets, taxonomy)?;
    let safety = aggregate_safety(cases, &sets, taxonomy)?;
    let triage = workload(&verdicts, Some(&safety), daily_volume)?;
    Ok((
        EvaluationReport {
            model: ModelSummary::of(model),
            coverage,
            safety,
            triage,
        },
        verdicts,
    ))
}

fn pct(x: f64) -> String {
    format_rate(Some(x))
}

/// Workload lines: count, rate and expected cases per day per category.
pub fn render_workload(out: &mut String, w: &WorkloadReport) {
    let _ = writeln!(
        out,
        "Triage (cohort {}, daily volume {})",
        w.cohort_size, w.daily_volume
    );
    for c in &w.categories {
        let _ = writeln!(
            out,
            "  {:<26} {:>7} {:>7} {:>7}",
            c.category.label(),
            c.count,
            pct(c.rate),
            c.expected_per_day_rounded
        );
    }
    let f = &w.fully_confident;
    let _ = writeln!(
        out,
        "  {:<26} {:>7} {:>7} {:>7}",
        "Fully Confident",
        f.count,
        pct(f.rate),
        f.expected_per_day_rounded
    );
    if let Some(m) = w.potential_misses_per_day_rounded {
        let _ = writeln!(
            out,
            "  {:<26} {:>7} {:>7} {:>7}",
            "Potential critical misses", "", "", m
        );
    }
}

/// Aligned plain-text rendering; rates with one decimal place.
pub fn render_text(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let m = &report.model;
    let _ = write!(out, "Model: {}", m.mode);
    if let Some(p) = m.pooling {
        let _ = write!(out, " ({p})");
    }
    let _ = write!(out, ", alpha_standard={}", m.alpha_standard);
    if let Some(a) = m.alpha_critical {
        let _ = write!(out, ", alpha_critical={a}");
    }
    out.push('\n');

    let c = &report.coverage;
    let _ = writeln!(out, "\nCoverage ({} cases, {} pairs)", c.cases, c.pairs);
    let row = |out: &mut String, name: &str, value: String| {
        let _ = writeln!(out, "  {name:<42} {value:>8}");
    };
    row(&mut out, "Overall", pct(c.overall_coverage));
    row(
        &mut out,
        "Critical pairs",
        format_rate(c.critical_pair_coverage),
    );
    row(
        &mut out,
        &format!("Critical present ({} pairs)", c.critical_present_pairs),
        format_rate(c.critical_present_coverage),
    );
    row(
        &mut out,
        "Non-critical pairs",
        format_rate(c.non_critical_coverage),
    );
    row(
        &mut out,
        "Average set size",
        format!("{:.2}", c.avg_set_size),
    );
    row(&mut out, "Empty sets", pct(c.size_fraction(0)));
    row(&mut out, "Single-element sets", pct(c.size_fraction(1)));
    row(&mut out, "Two-element sets", pct(c.size_fraction(2)));
    let _ = writeln!(out, "\nPer-class coverage");
    for class in &c.per_class {
        row(&mut out, &class.class_id, pct(class.coverage));
    }

    let s = &report.safety;
    let _ = writeln!(out, "\nSafety ({} images)", s.total_images);
    for cat in &s.high_risk {
        row(
            &mut out,
            &format!(
                "High-risk mispredictions {} ({}/{})",
                cat.category.label(),
                cat.events,
                cat.eligible_images
            ),
            format_rate(cat.rate),
        );
    }
    row(
        &mut out,
        &format!(
            "Images with critical conditions ({})",
            s.critical_condition_images
        ),
        format_rate(
            (s.total_images > 0)
                .then(|| s.critical_condition_images as f64 / s.total_images as f64),
        ),
    );
    row(
        &mut out,
        &format!(
            "Potential critical miss ({})",
            s.potential_critical_miss_images
        ),
        format_rate(s.potential_miss_rate),
    );

    out.push('\n');
    render_workload(&mut out, &report.triage);
    out
}

/// Count of verdicts per triage category, in canonical category order.
pub fn triage_counts(verdicts: &[CaseVerdict]) -> [(TriageCategory, usize); 4] {
    TriageCategory::ALL.map(|c| (c, verdicts.iter().filter(|v| v.triage == c).count()))
}
