use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::safety::{positive_findings, FindingDetector};

/// `P(condition j present | condition i present)` over a fixed condition list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub conditions: Vec<String>,
    pub marginals: Vec<usize>,
    pub joint: Vec<Vec<usize>>,
    /// `None` rows have a zero marginal.
    pub probabilities: Vec<Vec<Option<f64>>>,
}

impl CooccurrenceMatrix {
    pub fn get(&self, given: &str, target: &str) -> Option<f64> {
        let i = self.conditions.iter().position(|c| c == given)?;
        let j = self.conditions.iter().position(|c| c == target)?;
        self.probabilities[i][j]
    }

    /// Conditions whose row is undefined.
    pub fn undefined_rows(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .zip(&self.marginals)
            .filter(|(_, &m)| m == 0)
            .map(|(c, _)| c.as_str())
            .collect()
    }
}

/// Presence is a positive, non-negated detector mention.
pub fn cooccurrence_matrix<S: AsRef<str>>(documents: &[Document], conditions: &[S], detector: &FindingDetector) -> CooccurrenceMatrix {
    let k = conditions.len();
    let mut marginals = vec![0usize; k];
    let mut joint = vec![vec![0usize; k]; k];
    for doc in documents {
        let found = positive_findings(&detector.report_text(doc), detector);
        let present: Vec<bool> = conditions.iter().map(|c| found.iter().any(|f| f == c.as_ref())).collect();
        for i in 0..k {
            if !present[i] {
                continue;
            }
            marginals[i] += 1;
            for j in 0..k {
                if present[j] {
                    joint[i][j] += 1;
                }
            }
        }
    }
    let probabilities = (0..k)
        .map(|i| (0..k).map(|j| (marginals[i] > 0).then(|| joint[i][j] as f64 / marginals[i] as f64)).collect())
        .collect();
    CooccurrenceMatrix { conditions: conditions.iter().map(|c| c.as_ref().to_string()).collect(), marginals, joint, probabilities }
}
