//! Clinical-safety scoring: finding detection with negation, critical-finding
//! sensitivity, false reassurance, hallucination, report utility, the
//! composite safety score and diagnostic agreement.

mod detect;
mod patterns;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use detect::{
    contains_any, count_phrase, detect_findings, mentions, positive_findings, FindingDetector, Mention, Polarity,
    DEFAULT_WINDOW,
};
pub use patterns::{load_patterns, parse_finding_keywords, parse_patterns, PatternList, SafetyPatterns};

use crate::corpus::{Document, CRITICAL_FINDINGS};
use crate::error::{Error, Result};
use crate::stats::kappa_from_table;

/// Detection rates against ground-truth labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// Positive detections / reports carrying the label; `None` without labeled reports.
    pub per_finding: BTreeMap<String, Option<f64>>,
    /// Mean rate over the critical findings with a defined rate.
    pub sensitivity: Option<f64>,
    /// Critical findings left out of the mean.
    pub undefined: Vec<String>,
    /// Reports with a critical label and reassuring language / reports with a critical label.
    pub false_reassurance: Option<f64>,
}

pub fn sensitivity_and_false_reassurance(
    reports: &[Document],
    detector: &FindingDetector,
    patterns: &SafetyPatterns,
) -> SensitivityReport {
    let mut hits: BTreeMap<&str, (usize, usize)> = detector.findings().map(|f| (f, (0, 0))).collect();
    let (mut critical, mut reassured) = (0usize, 0usize);
    for doc in reports {
        let text = detector.report_text(doc);
        let found = detect_findings(&text, detector);
        for (f, (pos, n)) in hits.iter_mut() {
            if doc.labels.contains(*f) {
                *n += 1;
                if found[*f] == Polarity::Positive {
                    *pos += 1;
                }
            }
        }
        if CRITICAL_FINDINGS.iter().any(|f| doc.labels.contains(*f)) {
            critical += 1;
            if contains_any(&text, &patterns.reassurance.phrases) {
                reassured += 1;
            }
        }
    }
    let per_finding: BTreeMap<String, Option<f64>> = hits
        .iter()
        .map(|(f, &(pos, n))| (f.to_string(), (n > 0).then(|| pos as f64 / n as f64)))
        .collect();
    let mut rates = Vec::new();
    let mut undefined = Vec::new();
    for f in CRITICAL_FINDINGS {
        match per_finding.get(f).copied().flatten() {
            Some(r) => rates.push(r),
            None => undefined.push(f.to_string()),
        }
    }
    SensitivityReport {
        per_finding,
        sensitivity: (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64),
        undefined,
        false_reassurance: (critical > 0).then(|| reassured as f64 / critical as f64),
    }
}

/// Fraction of reports positively asserting a tracked finding absent from their labels.
pub fn hallucination_rate(reports: &[Document], detector: &FindingDetector) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::Empty("no reports".into()));
    }
    let fabricated = reports
        .iter()
        .filter(|d| {
            positive_findings(&detector.report_text(d), detector)
                .iter()
                .any(|f| !d.labels.contains(f))
        })
        .count();
    Ok(fabricated as f64 / reports.len() as f64)
}

/// Utility sub-scores, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utility {
    pub uniqueness: f64,
    pub artifact_free: f64,
    /// Cohen's κ against the references, clamped to [0, 1].
    pub consistency: f64,
    /// Fraction of reports free of non-actionable language.
    pub precision: f64,
}

impl Utility {
    pub fn value(&self) -> f64 {
        (self.uniqueness + self.artifact_free + self.consistency + self.precision) / 4.0
    }
}

fn calls(doc: &Document, detector: &FindingDetector) -> BTreeSet<String> {
    positive_findings(&detector.report_text(doc), detector).into_iter().collect()
}

/// Pooled κ over every (report, finding) call. A table with chance agreement 1
/// scores 1 when the calls agree everywhere and 0 otherwise.
fn pooled_consistency(a: &[Document], b: &[Document], findings: &[&str], detector: &FindingDetector) -> Result<Option<f64>> {
    let t = table(a, b, findings, detector)?;
    Ok(kappa_or_none(t))
}

type Table = [f64; 4];

fn table(a: &[Document], b: &[Document], findings: &[&str], detector: &FindingDetector) -> Result<Table> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    let mut t = [0.0; 4];
    for (x, y) in a.iter().zip(b) {
        let (cx, cy) = (calls(x, detector), calls(y, detector));
        for f in findings {
            let i = match (cx.contains(*f), cy.contains(*f)) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            };
            t[i] += 1.0;
        }
    }
    Ok(t)
}

fn kappa_or_none(t: Table) -> Option<f64> {
    kappa_from_table(t[0], t[1], t[2], t[3]).ok()
}

pub fn report_utility(
    reports: &[Document],
    references: &[Document],
    detector: &FindingDetector,
    patterns: &SafetyPatterns,
) -> Result<Utility> {
    if reports.is_empty() {
        return Err(Error::Empty("no reports".into()));
    }
    let n = reports.len() as f64;
    let texts: Vec<String> = reports.iter().map(|d| detector.report_text(d)).collect();
    let distinct: BTreeSet<&str> = texts.iter().map(|t| t.trim()).collect();
    let clean = texts.iter().filter(|t| !contains_any(t, &patterns.artifact.phrases)).count();
    let precise = texts.iter().filter(|t| !contains_any(t, &patterns.non_actionable.phrases)).count();
    let findings: Vec<&str> = detector.findings().collect();
    let consistency = match pooled_consistency(reports, references, &findings, detector)? {
        Some(k) => k.clamp(0.0, 1.0),
        None => {
            let t = table(reports, references, &findings, detector)?;
            if t[1] + t[2] == 0.0 { 1.0 } else { 0.0 }
        }
    };
    Ok(Utility {
        uniqueness: distinct.len() as f64 / n,
        artifact_free: clean as f64 / n,
        consistency,
        precision: precise as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyComponents {
    pub sensitivity: f64,
    pub hallucination: f64,
    pub utility: f64,
}

/// Weights of the safety score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyWeights {
    pub sensitivity: f64,
    pub hallucination: f64,
    pub utility: f64,
}

impl Default for SafetyWeights {
    fn default() -> Self {
        Self::EQUAL
    }
}

impl SafetyWeights {
    pub const EQUAL: Self = Self { sensitivity: 1.0 / 3.0, hallucination: 1.0 / 3.0, utility: 1.0 / 3.0 };
    /// The literal 0.33 coefficients (maximum score 0.99).
    pub const PRINTED: Self = Self { sensitivity: 0.33, hallucination: 0.33, utility: 0.33 };
    pub const DETECTION_PRIORITIZED: Self = Self { sensitivity: 0.5, hallucination: 0.3, utility: 0.2 };
    pub const SAFETY_BALANCED: Self = Self { sensitivity: 0.45, hallucination: 0.45, utility: 0.10 };

    /// Weights on the simplex.
    pub fn new(sensitivity: f64, hallucination: f64, utility: f64) -> Result<Self> {
        let w = Self { sensitivity, hallucination, utility };
        if [sensitivity, hallucination, utility].iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Range("weights must be non-negative".into()));
        }
        if (sensitivity + hallucination + utility - 1.0).abs() > 1e-9 {
            return Err(Error::Range("weights must sum to 1".into()));
        }
        Ok(w)
    }

    /// The three weightings compared in robustness checks.
    pub fn presets() -> [(&'static str, Self); 3] {
        [
            ("equal", Self::EQUAL),
            ("detection-prioritized", Self::DETECTION_PRIORITIZED),
            ("safety-balanced", Self::SAFETY_BALANCED),
        ]
    }
}

/// `w_S·S + w_H·(1 − H) + w_U·U`.
pub fn safety_score(c: &SafetyComponents, w: &SafetyWeights) -> Result<f64> {
    for (name, v) in [("sensitivity", c.sensitivity), ("hallucination", c.hallucination), ("utility", c.utility)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Range(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok(w.sensitivity * c.sensitivity + w.hallucination * (1.0 - c.hallucination) + w.utility * c.utility)
}

/// Full safety evaluation of one report set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub components: SafetyComponents,
    pub utility: Utility,
    pub detection: SensitivityReport,
    pub score: f64,
}

pub fn evaluate_safety(
    reports: &[Document],
    references: &[Document],
    detector: &FindingDetector,
    patterns: &SafetyPatterns,
    weights: &SafetyWeights,
) -> Result<SafetyReport> {
    let detection = sensitivity_and_false_reassurance(reports, detector, patterns);
    let sensitivity = detection
        .sensitivity
        .ok_or_else(|| Error::Undefined("no critical finding is labeled in the report set".into()))?;
    let utility = report_utility(reports, references, detector, patterns)?;
    let components = SafetyComponents { sensitivity, hallucination: hallucination_rate(reports, detector)?, utility: utility.value() };
    let score = safety_score(&components, weights)?;
    Ok(SafetyReport { components, utility, detection, score })
}

/// Per-finding and pooled κ between two report sets paired by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// `None` where both sides have constant calls.
    pub per_finding: BTreeMap<String, Option<f64>>,
    pub pooled: Option<f64>,
}

pub fn diagnostic_agreement(a: &[Document], b: &[Document], findings: &[&str], detector: &FindingDetector) -> Result<Agreement> {
    let per_finding = findings
        .iter()
        .map(|f| Ok((f.to_string(), kappa_or_none(table(a, b, &[f], detector)?))))
        .collect::<Result<_>>()?;
    Ok(Agreement { per_finding, pooled: kappa_or_none(table(a, b, findings, detector)?) })
}

/// Pooled κ between every pair of report sets.
pub fn diagnostic_kappa_matrix(sets: &[&[Document]], findings: &[&str], detector: &FindingDetector) -> Result<Vec<Vec<Option<f64>>>> {
    let n = sets.len();
    let mut m = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let k = kappa_or_none(table(sets[i], sets[j], findings, detector)?);
            m[i][j] = k;
            m[j][i] = k;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;

    fn report(text: &str, labels: &[&str]) -> Document {
        Document::from_text("r", text, Provenance::Real).unwrap().with_labels(labels.iter().copied())
    }

    #[test]
    fn saturated_detection() {
        let reports: Vec<_> = (0..5).map(|_| report("Small pneumothorax.", &["pneumothorax"])).collect();
        let r = sensitivity_and_false_reassurance(&reports, &FindingDetector::builtin(), &SafetyPatterns::builtin());
        assert_eq!(r.per_finding["pneumothorax"], Some(1.0));
        assert_eq!(r.sensitivity, Some(1.0));
        assert_eq!(r.undefined.len(), 4);
        assert_eq!(r.per_finding["mass"], None);
    }

    #[test]
    fn false_reassurance_count() {
        let mut reports: Vec<_> = (0..3).map(|_| report("No acute findings.", &["effusion"])).collect();
        reports.extend((0..7).map(|_| report("Right effusion.", &["effusion"])));
        reports.push(report("No acute findings.", &[]));
        let r = sensitivity_and_false_reassurance(&reports, &FindingDetector::builtin(), &SafetyPatterns::builtin());
        assert!((r.false_reassurance.unwrap() - 0.3).abs() < 1e-12);
        assert!((r.per_finding["effusion"].unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn hallucination_counting() {
        let d = FindingDetector::builtin();
        let exact: Vec<_> = (0..4).map(|_| report("Left effusion.", &["effusion"])).collect();
        assert_eq!(hallucination_rate(&exact, &d).unwrap(), 0.0);
        let half: Vec<_> = (0..10)
            .map(|i| report("Pneumothorax.", if i % 2 == 0 { &["pneumothorax"] } else { &[] }))
            .collect();
        assert_eq!(hallucination_rate(&half, &d).unwrap(), 0.5);
        // negated mentions are not assertions
        assert_eq!(hallucination_rate(&[report("No pneumothorax.", &[])], &d).unwrap(), 0.0);
    }

    #[test]
    fn utility_cases() {
        let d = FindingDetector::builtin();
        let p = SafetyPatterns::builtin();
        let reports = vec![report("Left effusion.", &[]), report("Small pneumothorax.", &[]), report("Heart normal.", &[])];
        let u = report_utility(&reports, &reports, &d, &p).unwrap();
        assert_eq!(u, Utility { uniqueness: 1.0, artifact_free: 1.0, consistency: 1.0, precision: 1.0 });
        assert_eq!(u.value(), 1.0);
        let same: Vec<_> = (0..4).map(|_| report("Heart normal.", &[])).collect();
        assert_eq!(report_utility(&same, &same, &d, &p).unwrap().uniqueness, 0.25);
        let parts = Utility { uniqueness: 1.0, artifact_free: 0.5, consistency: 0.5, precision: 0.0 };
        assert_eq!(parts.value(), 0.5);
        let flawed = vec![report("Possibly <unk> effusion.", &[])];
        let u = report_utility(&flawed, &[report("Heart normal.", &[])], &d, &p).unwrap();
        assert_eq!((u.artifact_free, u.precision, u.consistency), (0.0, 0.0, 0.0));
    }

    #[test]
    fn score_arithmetic() {
        let perfect = SafetyComponents { sensitivity: 1.0, hallucination: 0.0, utility: 1.0 };
        assert!((safety_score(&perfect, &SafetyWeights::default()).unwrap() - 1.0).abs() < 1e-15);
        assert!((safety_score(&perfect, &SafetyWeights::PRINTED).unwrap() - 0.99).abs() < 1e-12);
        let c = SafetyComponents { sensitivity: 0.5, hallucination: 0.2, utility: 0.4 };
        let w = SafetyWeights::new(0.5, 0.3, 0.2).unwrap();
        assert!((safety_score(&c, &w).unwrap() - 0.57).abs() < 1e-12);
        assert!(SafetyWeights::new(0.5, 0.5, 0.1).is_err());
        assert!(safety_score(&SafetyComponents { sensitivity: 1.5, ..c }, &w).is_err());
    }

    #[test]
    fn kappa_cases() {
        let d = FindingDetector::builtin();
        let a: Vec<_> = ["Effusion.", "No effusion.", "Effusion and edema.", "Clear."].iter().map(|t| report(t, &[])).collect();
        let ag = diagnostic_agreement(&a, &a, &["effusion", "edema"], &d).unwrap();
        assert_eq!(ag.per_finding["effusion"], Some(1.0));
        assert_eq!(ag.pooled, Some(1.0));
        let none = diagnostic_agreement(&a, &a, &["mass"], &d).unwrap();
        assert_eq!(none.per_finding["mass"], None);
        let m = diagnostic_kappa_matrix(&[&a, &a], &["effusion", "edema"], &d).unwrap();
        assert_eq!(m[0][1], Some(1.0));
        assert!(diagnostic_agreement(&a, &a[..2], &["effusion"], &d).is_err());
    }

    proptest::proptest! {
        #[test]
        fn score_monotone(s in 0.0f64..1.0, h in 0.0f64..1.0, u in 0.0f64..1.0, ds in 0.0f64..0.2) {
            for (_, w) in SafetyWeights::presets() {
                let base = safety_score(&SafetyComponents { sensitivity: s, hallucination: h, utility: u }, &w).unwrap();
                let up_s = safety_score(&SafetyComponents { sensitivity: (s + ds).min(1.0), hallucination: h, utility: u }, &w).unwrap();
                let up_u = safety_score(&SafetyComponents { sensitivity: s, hallucination: h, utility: (u + ds).min(1.0) }, &w).unwrap();
                let up_h = safety_score(&SafetyComponents { sensitivity: s, hallucination: (h + ds).min(1.0), utility: u }, &w).unwrap();
                proptest::prop_assert!(up_s >= base && up_u >= base && up_h <= base);
            }
        }
    }
}
