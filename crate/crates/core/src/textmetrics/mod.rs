//! Text-quality measurements: lexical diversity and repetition, medical-term
//! content, coherence, co-occurrence, clinical-vs-template content,
//! grounding, readability, overlap scores and section completeness.

mod cooccurrence;
mod lexical;
mod overlap;
mod report;
mod sections;
mod sentences;
mod terms;
mod tfidf;

pub use cooccurrence::{cooccurrence_matrix, CooccurrenceMatrix};
pub use lexical::{lexical_profile, repetition_rate, top_opening_share, LexicalReport, REPETITION_DEFINITION};
pub use overlap::{lcs_len, overlap_scores, OverlapScores};
pub use report::{parse_metric_rows, write_metric_rows, MetricRow, REPORT_SCHEMA};
pub use sections::section_completeness;
pub use sentences::{count_syllables, readability, split_sentences, ABBREVIATIONS};
pub use terms::{content_ratio, medical_term_metrics, ContentReport, MedicalTermReport, TermMatch, TermMatcher};
pub use tfidf::{coherence_score, grounding_metrics, sparse_cosine, tfidf_vectors, CoherenceReport, Grounding};

use crate::corpus::Document;
use crate::error::{Error, Result};

/// Mean Flesch score over documents that have at least one sentence.
pub fn mean_readability(documents: &[Document]) -> Result<f64> {
    let scores: Vec<f64> = documents.iter().filter_map(|d| readability(&d.text()).ok()).collect();
    if scores.is_empty() {
        return Err(Error::Empty("no readable document".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
