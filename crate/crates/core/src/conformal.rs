//! Split conformal calibration and prediction-set construction.
//!
//! Each class is treated as its own binary problem with outcomes
//! [`Outcome::Present`] and [`Outcome::Absent`]. The nonconformity of an
//! outcome is `1 - p` for Present and `p` for Absent, and an outcome enters
//! the prediction set when its nonconformity does not exceed the applicable
//! threshold. Thresholds are finite-sample conformal quantiles of
//! calibration scores:
//!
//! ```text
//! k = ceil((n + 1) * (1 - alpha)),   q_hat = k-th smallest score  (or +inf if k > n)
//! ```
//!
//! Two calibration schemes are provided:
//!
//! * **Independent**: one threshold per class over the true-outcome scores
//!   of that class, used for both outcomes.
//! * **Risk-sensitive**: label-conditional thresholds with a stricter
//!   miscoverage rate for the Present outcome of critical classes. Strata
//!   are either pooled by risk group (three thresholds) or kept per class.

use std::fmt;

use crate::dataio::{check_width, ScoredCase};
use crate::error::{Error, Result};
use crate::taxonomy::{RiskGroup, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Present,
    Absent,
}

impl Outcome {
    pub fn from_label(label: bool) -> Self {
        if label {
            Outcome::Present
        } else {
            Outcome::Absent
        }
    }
}

/// Nonconformity of `outcome` given the predicted probability of presence.
pub fn nonconformity(p: f64, outcome: Outcome) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::input(format!("probability {p} is outside [0, 1]")));
    }
    Ok(score_unchecked(p, outcome))
}

#[inline]
fn score_unchecked(p: f64, outcome: Outcome) -> f64 {
    match outcome {
        Outcome::Present => 1.0 - p,
        Outcome::Absent => p,
    }
}

/// A calibrated conformal threshold.
///
/// `q_hat` is `f64::INFINITY` when the required rank exceeds the number of
/// calibration scores, so every outcome conforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalThreshold {
    pub q_hat: f64,
    pub n_cal: usize,
    pub rank_k: usize,
}

impl ConformalThreshold {
    pub fn is_infinite(&self) -> bool {
        self.q_hat.is_infinite()
    }

    /// True when a nonconformity score conforms (ties included).
    #[inline]
    pub fn admits(&self, score: f64) -> bool {
        score <= self.q_hat
    }
}

impl fmt::Display for ConformalThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf (n={}, k={})", self.n_cal, self.rank_k)
        } else {
            write!(f, "{:.6} (n={}, k={})", self.q_hat, self.n_cal, self.rank_k)
        }
    }
}

fn check_alpha(alpha: f64, name: &str) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!(
            "{name} must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Order-statistic rank `ceil((n + 1)(1 - alpha))`, at least 1.
///
/// The product is nudged down by 1e-9 before rounding up so that values
/// such as `0.99 * 200` which land a few ulps above an integer are not
/// pushed to the next rank. For alphas with a handful of decimal digits the
/// true fractional part is never that small.
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    let raw = (n as f64 + 1.0) * (1.0 - alpha);
    ((raw - 1e-9).ceil() as usize).max(1)
}

/// Finite-sample conformal quantile of `scores` at miscoverage `alpha`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<ConformalThreshold> {
    check_alpha(alpha, "alpha")?;
    if scores.is_empty() {
        return Err(Error::EmptyStratum("no calibration scores".into()));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::input(format!(
            "calibration score {s} is outside [0, 1]"
        )));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_of_sorted(&sorted, alpha))
}

fn quantile_of_sorted(sorted: &[f64], alpha: f64) -> ConformalThreshold {
    let n = sorted.len();
    let k = conformal_rank(n, alpha);
    let q_hat = if k > n { f64::INFINITY } else { sorted[k - 1] };
    ConformalThreshold {
        q_hat,
        n_cal: n,
        rank_k: k,
    }
}

fn quantile_for_stratum(scores: Vec<f64>, alpha: f64, stratum: &str) -> Result<ConformalThreshold> {
    if scores.is_empty() {
        return Err(Error::EmptyStratum(stratum.to_string()));
    }
    let mut sorted = scores;
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_of_sorted(&sorted, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    Independent,
    RiskSensitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// One stratum per (risk group, outcome): three thresholds in total.
    #[default]
    GroupPooled,
    /// One stratum per (class, outcome).
    PerClass,
}

/// Present and Absent thresholds for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeThresholds {
    pub present: ConformalThreshold,
    pub absent: ConformalThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Thresholds {
    /// One threshold per class, shared by both outcomes.
    Independent(Vec<ConformalThreshold>),
    /// Strata pooled by risk group. A stratum is `None` only when the
    /// taxonomy has no class that would use it.
    GroupPooled {
        critical_present: Option<ConformalThreshold>,
        critical_absent: Option<ConformalThreshold>,
        standard: Option<ConformalThreshold>,
    },
    PerClass(Vec<OutcomeThresholds>),
}

/// Frozen conformal thresholds plus the parameters they were fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    pub alpha_standard: f64,
    pub alpha_critical: Option<f64>,
    pub thresholds: Thresholds,
    pub taxonomy_fingerprint: String,
    pub class_ids: Vec<String>,
}

impl CalibrationModel {
    pub fn mode(&self) -> CalibrationMode {
        match self.thresholds {
            Thresholds::Independent(_) => CalibrationMode::Independent,
            _ => CalibrationMode::RiskSensitive,
        }
    }

    pub fn pooling(&self) -> Option<Pooling> {
        match self.thresholds {
            Thresholds::Independent(_) => None,
            Thresholds::GroupPooled { .. } => Some(Pooling::GroupPooled),
            Thresholds::PerClass(_) => Some(Pooling::PerClass),
        }
    }

    /// Checks internal consistency: alphas, stratum ranks and class count.
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha_standard, "alpha_standard")?;
        let n = self.class_ids.len();
        let mut all = Vec::new();
        match &self.thresholds {
            Thresholds::Independent(ts) => {
                if self.alpha_critical.is_some() {
                    return Err(Error::input("independent model carries alpha_critical"));
                }
                if ts.len() != n {
                    return Err(Error::input(format!(
                        "{} thresholds for {} classes",
                        ts.len(),
                        n
                    )));
                }
                all.extend(ts.iter().copied());
            }
            other => {
                let crit = self
                    .alpha_critical
                    .ok_or_else(|| Error::input("risk-sensitive model lacks alpha_critical"))?;
                check_alpha(crit, "alpha_critical")?;
                if crit >= self.alpha_standard {
                    return Err(Error::input(format!(
                        "alpha_critical ({crit}) must be smaller than alpha_standard ({})",
                        self.alpha_standard
                    )));
                }
                match other {
                    Thresholds::GroupPooled {
                        critical_present,
                        critical_absent,
                        standard,
                    } => all.extend(
                        [critical_present, critical_absent, standard]
                            .into_iter()
                            .flatten(),
                    ),
                    Thresholds::PerClass(ts) => {
                        if ts.len() != n {
                            return Err(Error::input(format!(
                                "{} threshold pairs for {} classes",
                                ts.len(),
                                n
                            )));
                        }
                        for t in ts {
                            all.push(t.present);
                            all.push(t.absent);
                        }
                    }
                    Thresholds::Independent(_) => unreachable!(),
                }
            }
        }
        for t in all {
            let consistent = if t.rank_k > t.n_cal {
                t.is_infinite()
            } else {
                (0.0..=1.0).contains(&t.q_hat)
            };
            if !consistent || t.rank_k == 0 || t.n_cal == 0 {
                return Err(Error::input(format!("inconsistent threshold {t}")));
            }
        }
        Ok(())
    }

    /// Resolves the per-class thresholds against `taxonomy`, failing when
    /// the model was calibrated for a different class registry.
    pub fn bind(&self, taxonomy: &Taxonomy) -> Result<BoundModel> {
        let fp = taxonomy.fingerprint();
        if fp != self.taxonomy_fingerprint {
            return Err(Error::validation(format!(
                "model was calibrated for taxonomy {} but scores use taxonomy {}",
                short(&self.taxonomy_fingerprint),
                short(&fp)
            )));
        }
        let missing = |what: &str| {
            Error::validation(format!(
                "model has no {what} threshold but the taxonomy needs one"
            ))
        };
        let per_class = match &self.thresholds {
            Thresholds::Independent(ts) => ts.iter().map(|t| (t.q_hat, t.q_hat)).collect(),
            Thresholds::PerClass(ts) => ts
                .iter()
                .map(|t| (t.present.q_hat, t.absent.q_hat))
                .collect(),
            Thresholds::GroupPooled {
                critical_present,
                critical_absent,
                standard,
            } => taxonomy
                .classes()
                .iter()
                .map(|class| {
                    if class.is_critical() {
                        let p = critical_present.ok_or_else(|| missing("critical-present"))?;
                        let a = critical_absent.ok_or_else(|| missing("critical-absent"))?;
                        Ok((p.q_hat, a.q_hat))
                    } else {
                        let s = standard.ok_or_else(|| missing("standard"))?;
                        Ok((s.q_hat, s.q_hat))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(BoundModel { per_class })
    }
}

fn short(fp: &str) -> &str {
    &fp[..fp.len().min(12)]
}

/// A model resolved to one `(present, absent)` threshold pair per class.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundModel {
    per_class: Vec<(f64, f64)>,
}

impl BoundModel {
    pub fn width(&self) -> usize {
        self.per_class.len()
    }

    /// `(present, absent)` thresholds of class `index`.
    pub fn thresholds(&self, index: usize) -> (f64, f64) {
        self.per_class[index]
    }

    pub fn predict(&self, scores: &[f64]) -> Result<PredictionSet> {
        if scores.len() != self.per_class.len() {
            return Err(Error::validation(format!(
                "{} scores for a model with {} classes",
                scores.len(),
                self.per_class.len()
            )));
        }
        let sets = scores
            .iter()
            .zip(&self.per_class)
            .map(|(&p, &(t_present, t_absent))| LabelSet {
                present: score_unchecked(p, Outcome::Present) <= t_present,
                absent: score_unchecked(p, Outcome::Absent) <= t_absent,
            })
            .collect();
        Ok(PredictionSet(sets))
    }
}

/// A subset of `{Present, Absent}` for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelSet {
    pub present: bool,
    pub absent: bool,
}

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet {
        present: false,
        absent: false,
    };
    pub const PRESENT: LabelSet = LabelSet {
        present: true,
        absent: false,
    };
    pub const ABSENT: LabelSet = LabelSet {
        present: false,
        absent: true,
    };
    pub const BOTH: LabelSet = LabelSet {
        present: true,
        absent: true,
    };
    pub const ALL: [LabelSet; 4] = [Self::EMPTY, Self::PRESENT, Self::ABSENT, Self::BOTH];

    pub fn len(self) -> usize {
        usize::from(self.present) + usize::from(self.absent)
    }

    pub fn is_empty(self) -> bool {
        !self.present && !self.absent
    }

    pub fn is_singleton(self) -> bool {
        self.len() == 1
    }

    pub fn contains(self, outcome: Outcome) -> bool {
        match outcome {
            Outcome::Present => self.present,
            Outcome::Absent => self.absent,
        }
    }

    /// True when every element of `other` is also in `self`.
    pub fn is_superset_of(self, other: LabelSet) -> bool {
        (self.present || !other.present) && (self.absent || !other.absent)
    }

    /// CSV encoding: `""`, `"P"`, `"A"` or `"PA"`.
    pub fn code(self) -> &'static str {
        match (self.present, self.absent) {
            (false, false) => "",
            (true, false) => "P",
            (false, true) => "A",
            (true, true) => "PA",
        }
    }

    pub fn from_code(code: &str) -> Result<Self> {
        match code {
            "" => Ok(Self::EMPTY),
            "P" => Ok(Self::PRESENT),
            "A" => Ok(Self::ABSENT),
            "PA" => Ok(Self::BOTH),
            other => Err(Error::input(format!("unknown set code {other:?}"))),
        }
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.present, self.absent) {
            (false, false) => f.write_str("{}"),
            (true, false) => f.write_str("{Present}"),
            (false, true) => f.write_str("{Absent}"),
            (true, true) => f.write_str("{Present, Absent}"),
        }
    }
}

/// Per-class prediction sets for one case, in taxonomy order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredictionSet(pub Vec<LabelSet>);

impl PredictionSet {
    pub fn sets(&self) -> &[LabelSet] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> LabelSet {
        self.0[index]
    }

    pub fn is_superset_of(&self, other: &PredictionSet) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.is_superset_of(*b))
    }
}

fn labeled_cases<'a>(
    cal: &'a [ScoredCase],
    taxonomy: &Taxonomy,
) -> Result<Vec<(&'a [f64], &'a [bool])>> {
    check_width(cal, taxonomy.len())?;
    cal.iter()
        .map(|c| Ok((c.scores(), c.require_labels()?)))
        .collect()
}

/// Calibrates one threshold per class from the true-outcome scores.
pub fn calibrate_independent(
    cal: &[ScoredCase],
    taxonomy: &Taxonomy,
    alpha: f64,
) -> Result<CalibrationModel> {
    check_alpha(alpha, "alpha")?;
    let rows = labeled_cases(cal, taxonomy)?;
    let thresholds = taxonomy
        .classes()
        .iter()
        .enumerate()
        .map(|(i, class)| {
            let scores = rows
                .iter()
                .map(|(p, y)| score_unchecked(p[i], Outcome::from_label(y[i])))
                .collect();
            quantile_for_stratum(scores, alpha, &format!("class {}", class.id))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationModel {
        alpha_standard: alpha,
        alpha_critical: None,
        thresholds: Thresholds::Independent(thresholds),
        taxonomy_fingerprint: taxonomy.fingerprint(),
        class_ids: taxonomy.ids().map(str::to_owned).collect(),
    })
}

/// Calibrates label-conditional thresholds with `alpha_critical` applied to
/// the Present outcome of critical classes and `alpha_standard` elsewhere.
pub fn calibrate_risk_sensitive(
    cal: &[ScoredCase],
    taxonomy: &Taxonomy,
    alpha_standard: f64,
    alpha_critical: f64,
    pooling: Pooling,
) -> Result<CalibrationModel> {
    check_alpha(alpha_standard, "alpha_standard")?;
    check_alpha(alpha_critical, "alpha_critical")?;
    if alpha_critical >= alpha_standard {
        return Err(Error::input(format!(
            "alpha_critical ({alpha_critical}) must be smaller than alpha_standard ({alpha_standard})"
        )));
    }
    let rows = labeled_cases(cal, taxonomy)?;

    let thresholds = match pooling {
        Pooling::GroupPooled => {
            let mut crit_present = Vec::new();
            let mut crit_absent = Vec::new();
            let mut standard = Vec::new();
            for (p, y) in &rows {
                for (i, class) in taxonomy.classes().iter().enumerate() {
                    let outcome = Outcome::from_label(y[i]);
                    let score = score_unchecked(p[i], outcome);
                    match (class.is_critical(), outcome) {
                        (true, Outcome::Present) => crit_present.push(score),
                        (true, Outcome::Absent) => crit_absent.push(score),
                        (false, _) => standard.push(score),
                    }
                }
            }
            let has_critical = taxonomy.indices_in(RiskGroup::Critical).next().is_some();
            let has_standard = taxonomy.classes().iter().any(|c| !c.is_critical());
            let stratum = |needed: bool, scores: Vec<f64>, alpha: f64, name: &str| {
                needed
                    .then(|| quantile_for_stratum(scores, alpha, name))
                    .transpose()
            };
            Thresholds::GroupPooled {
                critical_present: stratum(
                    has_critical,
                    crit_present,
                    alpha_critical,
                    "critical classes / present",
                )?,
                critical_absent: stratum(
                    has_critical,
                    crit_absent,
                    alpha_standard,
                    "critical classes / absent",
                )?,
                standard: stratum(
                    has_standard,
                    standard,
                    alpha_standard,
                    "normal and other classes",
                )?,
            }
        }
        Pooling::PerClass => Thresholds::PerClass(
            taxonomy
                .classes()
                .iter()
                .enumerate()
                .map(|(i, class)| {
                    let (mut present, mut absent) = (Vec::new(), Vec::new());
                    for (p, y) in &rows {
                        if y[i] {
                            present.push(score_unchecked(p[i], Outcome::Present));
                        } else {
                            absent.push(score_unchecked(p[i], Outcome::Absent));
                        }
                    }
                    let present_alpha = if class.is_critical() {
                        alpha_critical
                    } else {
                        alpha_standard
                    };
                    Ok(OutcomeThresholds {
                        present: quantile_for_stratum(
                            present,
                            present_alpha,
                            &format!("class {} / present", class.id),
                        )?,
                        absent: quantile_for_stratum(
                            absent,
                            alpha_standard,
                            &format!("class {} / absent", class.id),
                        )?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };

    Ok(CalibrationModel {
        alpha_standard,
        alpha_critical: Some(alpha_critical),
        thresholds,
        taxonomy_fingerprint: taxonomy.fingerprint(),
        class_ids: taxonomy.ids().map(str::to_owned).collect(),
    })
}

/// Builds the prediction set of one case.
///
/// For batches, [`CalibrationModel::bind`] once and call
/// [`BoundModel::predict`] per case.
pub fn predict_sets(
    model: &CalibrationModel,
    case: &ScoredCase,
    taxonomy: &Taxonomy,
) -> Result<PredictionSet> {
    model.bind(taxonomy)?.predict(case.scores())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{ClassDef, TubeCategory};

    fn sorted_oracle(scores: &[f64], k: usize) -> f64 {
        let mut s = scores.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if k > s.len() {
            f64::INFINITY
        } else {
            s[k - 1]
        }
    }

    #[test]
    fn nonconformity_examples() {
        assert!((nonconformity(0.8, Outcome::Present).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(nonconformity(0.8, Outcome::Absent).unwrap(), 0.8);
        assert_eq!(nonconformity(0.0, Outcome::Absent).unwrap(), 0.0);
        assert!(nonconformity(1.2, Outcome::Absent).is_err());
        assert!(nonconformity(-0.1, Outcome::Present).is_err());
    }

    #[test]
    fn quantile_single_score_is_infinite() {
        let t = conformal_quantile(&[0.5], 0.1).unwrap();
        assert!(t.is_infinite());
        assert_eq!((t.n_cal, t.rank_k), (1, 2));
    }

    #[test]
    fn quantile_nine_scores() {
        let scores: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let t = conformal_quantile(&scores, 0.1).unwrap();
        assert_eq!(t.rank_k, 9);
        assert_eq!(t.q_hat, sorted_oracle(&scores, 9));
        assert_eq!(t.q_hat, 0.9);
    }

    #[test]
    fn quantile_nineteen_scores() {
        let scores: Vec<f64> = (1..=19).map(|i| i as f64 / 20.0).collect();
        let t = conformal_quantile(&scores, 0.1).unwrap();
        assert_eq!(t.rank_k, 18);
        assert_eq!(t.q_hat, 18.0 / 20.0);
    }

    #[test]
    fn quantile_errors() {
        assert!(matches!(
            conformal_quantile(&[], 0.1),
            Err(Error::EmptyStratum(_))
        ));
        assert!(conformal_quantile(&[0.1], 0.0).is_err());
        assert!(conformal_quantile(&[0.1], 1.0).is_err());
        assert!(conformal_quantile(&[1.5], 0.1).is_err());
    }

    #[test]
    fn quantile_ignores_input_order() {
        let a = [0.3, 0.1, 0.9, 0.5, 0.7, 0.2, 0.4, 0.8, 0.6, 0.05];
        let mut b = a;
        b.reverse();
        assert_eq!(
            conformal_quantile(&a, 0.2).unwrap(),
            conformal_quantile(&b, 0.2).unwrap()
        );
    }

    #[test]
    fn rank_handles_representation_error() {
        // 200 * 0.99 and 100 * 0.9 sit next to integers in binary.
        assert_eq!(conformal_rank(199, 0.01), 198);
        assert_eq!(conformal_rank(99, 0.1), 90);
        assert_eq!(conformal_rank(50, 0.01), 51);
        assert_eq!(conformal_rank(199, 0.1), 180);
        assert_eq!(conformal_rank(200, 0.1), 181);
    }

    fn one_class(group: RiskGroup) -> Taxonomy {
        let mut classes = vec![ClassDef::new("c", "C", group, TubeCategory::Ett)];
        if group == RiskGroup::Normal {
            classes.push(ClassDef::new(
                "k",
                "K",
                RiskGroup::Critical,
                TubeCategory::Ett,
            ));
        }
        Taxonomy::new("t", classes).unwrap()
    }

    fn case(id: usize, scores: Vec<f64>, labels: Vec<bool>) -> ScoredCase {
        ScoredCase::new(format!("c{id}"), None, scores, Some(labels)).unwrap()
    }

    #[test]
    fn independent_single_case_is_infinite() {
        let tax = one_class(RiskGroup::Critical);
        let model = calibrate_independent(&[case(0, vec![0.3], vec![true])], &tax, 0.1).unwrap();
        let Thresholds::Independent(ts) = &model.thresholds else {
            panic!()
        };
        assert!(ts[0].is_infinite());
    }

    #[test]
    fn independent_perfect_scores_give_zero() {
        let tax = one_class(RiskGroup::Critical);
        let cal: Vec<_> = (0..30)
            .map(|i| {
                let y = i % 3 == 0;
                case(i, vec![if y { 1.0 } else { 0.0 }], vec![y])
            })
            .collect();
        for alpha in [0.05, 0.1, 0.5] {
            let model = calibrate_independent(&cal, &tax, alpha).unwrap();
            let Thresholds::Independent(ts) = &model.thresholds else {
                panic!()
            };
            assert_eq!(ts[0].q_hat, 0.0);
        }
    }

    #[test]
    fn independent_requires_labels_and_width() {
        let tax = one_class(RiskGroup::Critical);
        let unlabeled = ScoredCase::new("u", None, vec![0.2], None).unwrap();
        assert!(matches!(
            calibrate_independent(&[unlabeled], &tax, 0.1),
            Err(Error::Input(_))
        ));
        let wide = case(0, vec![0.2, 0.3], vec![true, false]);
        assert!(matches!(
            calibrate_independent(&[wide], &tax, 0.1),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            calibrate_independent(&[], &tax, 0.1),
            Err(Error::EmptyStratum(_))
        ));
    }

    #[test]
    fn risk_sensitive_small_critical_stratum_is_infinite() {
        let tax = one_class(RiskGroup::Critical);
        let mut cal: Vec<_> = (0..50).map(|i| case(i, vec![0.9], vec![true])).collect();
        cal.extend((50..100).map(|i| case(i, vec![0.1], vec![false])));
        let model = calibrate_risk_sensitive(&cal, &tax, 0.1, 0.01, Pooling::GroupPooled).unwrap();
        let Thresholds::GroupPooled {
            critical_present,
            critical_absent,
            standard,
        } = model.thresholds
        else {
            panic!()
        };
        let cp = critical_present.unwrap();
        assert!(cp.is_infinite());
        assert_eq!((cp.n_cal, cp.rank_k), (50, 51));
        assert!(!critical_absent.unwrap().is_infinite());
        assert!(standard.is_none());
    }

    #[test]
    fn risk_sensitive_alpha_order_enforced() {
        let tax = one_class(RiskGroup::Critical);
        let cal = vec![case(0, vec![0.9], vec![true])];
        assert!(matches!(
            calibrate_risk_sensitive(&cal, &tax, 0.1, 0.1, Pooling::GroupPooled),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn pooling_over_singleton_group_matches_per_class() {
        let tax = Taxonomy::new(
            "t",
            vec![
                ClassDef::new("crit", "Crit", RiskGroup::Critical, TubeCategory::Ett),
                ClassDef::new("norm", "Norm", RiskGroup::Normal, TubeCategory::Ett),
            ],
        )
        .unwrap();
        let cal: Vec<_> = (0..300)
            .map(|i| {
                let p = ((i * 37) % 100) as f64 / 100.0;
                let q = ((i * 53) % 100) as f64 / 100.0;
                case(i, vec![p, q], vec![i % 4 == 0, i % 2 == 0])
            })
            .collect();
        let pooled = calibrate_risk_sensitive(&cal, &tax, 0.1, 0.01, Pooling::GroupPooled).unwrap();
        let per = calibrate_risk_sensitive(&cal, &tax, 0.1, 0.01, Pooling::PerClass).unwrap();
        let Thresholds::GroupPooled {
            critical_present,
            critical_absent,
            ..
        } = pooled.thresholds
        else {
            panic!()
        };
        let Thresholds::PerClass(ts) = per.thresholds else {
            panic!()
        };
        assert_eq!(critical_present.unwrap(), ts[0].present);
        assert_eq!(critical_absent.unwrap(), ts[0].absent);
    }

    #[test]
    fn per_class_empty_stratum_names_class() {
        let tax = one_class(RiskGroup::Critical);
        let cal: Vec<_> = (0..20).map(|i| case(i, vec![0.1], vec![false])).collect();
        let err = calibrate_risk_sensitive(&cal, &tax, 0.1, 0.01, Pooling::PerClass).unwrap_err();
        match err {
            Error::EmptyStratum(s) => assert!(s.contains("class c / present"), "{s}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn set_examples() {
        let t = |q: f64| BoundModel {
            per_class: vec![(q, q)],
        };
        assert_eq!(t(0.3).predict(&[0.8]).unwrap().get(0), LabelSet::PRESENT);
        assert_eq!(
            t(f64::INFINITY).predict(&[0.8]).unwrap().get(0),
            LabelSet::BOTH
        );
        assert_eq!(t(0.1).predict(&[0.5]).unwrap().get(0), LabelSet::EMPTY);
        assert!(t(0.1).predict(&[0.5, 0.2]).is_err());
    }

    #[test]
    fn bind_rejects_other_taxonomy() {
        let tax = Taxonomy::default_ranzcr();
        let cal: Vec<_> = (0..5)
            .map(|i| case(i, vec![0.5; 11], vec![i % 2 == 0; 11]))
            .collect();
        let model = calibrate_independent(&cal, &tax, 0.1).unwrap();
        let other = one_class(RiskGroup::Critical);
        assert!(matches!(model.bind(&other), Err(Error::Validation(_))));
    }

    #[test]
    fn label_set_codes() {
        for s in LabelSet::ALL {
            assert_eq!(LabelSet::from_code(s.code()).unwrap(), s);
        }
        assert!(LabelSet::from_code("X").is_err());
        assert_eq!(LabelSet::BOTH.len(), 2);
        assert!(LabelSet::BOTH.is_superset_of(LabelSet::PRESENT));
        assert!(!LabelSet::ABSENT.is_superset_of(LabelSet::PRESENT));
    }
}
