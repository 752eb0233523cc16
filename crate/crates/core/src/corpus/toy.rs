//! Seeded toy population standing in for a clinical text corpus.
//!
//! Body sections are sentences of pseudo-words whose frequencies follow a
//! Zipf law over the generator's rank order (a handful of ranks are taken by
//! single-word lexicon terms so medical-term metrics have something to
//! count). The label section renders each document's finding labels as short
//! positive and negated statements.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::{Corpus, Demographics, Document, Lexicon, Provenance, Sex, CONDITIONS, MAX_AGE, MIN_AGE};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyPopulationSpec {
    pub vocabulary_size: usize,
    pub zipf_exponent: f64,
    pub document_count: usize,
    /// Section names in order.
    pub sections: Vec<String>,
    /// Section that carries the rendered finding labels; `None` for none.
    pub label_section: Option<String>,
    /// Target P(condition j | condition i) over [`CONDITIONS`]; unit diagonal.
    pub cooccurrence: Vec<Vec<f64>>,
    /// Marginal probability of each condition anchoring a document.
    pub prevalence: Vec<f64>,
    pub male_fraction: f64,
    pub age_mean: f64,
    pub age_sd: f64,
    pub sentences_per_section: (usize, usize),
    pub words_per_sentence: (usize, usize),
    /// Zipf ranks at which lexicon terms are placed: start, stride.
    pub medical_ranks: (usize, usize),
    pub seed: u64,
}

impl Default for ToyPopulationSpec {
    fn default() -> Self {
        let prevalence = vec![0.12, 0.15, 0.08, 0.10, 0.05, 0.07, 0.02, 0.03, 0.02, 0.10];
        let mut co = vec![vec![0.0; 10]; 10];
        for i in 0..10 {
            for j in 0..10 {
                co[i][j] = if i == j { 1.0 } else { prevalence[j] };
            }
        }
        // pneumonia → effusion, consolidation
        co[0][1] = 0.88;
        co[0][5] = 0.71;
        // cardiomegaly → edema, effusion
        co[9][2] = 0.5;
        co[9][1] = 0.4;
        // edema → effusion
        co[2][1] = 0.6;
        // mass → nodule
        co[6][7] = 0.3;
        Self {
            vocabulary_size: 2_000,
            zipf_exponent: 1.1,
            document_count: 5_000,
            sections: vec!["Findings".into(), "Impression".into()],
            label_section: Some("Impression".into()),
            cooccurrence: co,
            prevalence,
            male_fraction: 0.532,
            age_mean: 64.6,
            age_sd: 17.3,
            sentences_per_section: (2, 4),
            words_per_sentence: (4, 9),
            medical_ranks: (10, 25),
            seed: 42,
        }
    }
}

impl ToyPopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocabulary_size < 10 {
            return Err(Error::Config(format!(
                "vocabulary_size must be at least 10, got {}",
                self.vocabulary_size
            )));
        }
        if !(self.zipf_exponent > 0.0) {
            return Err(Error::Config("zipf_exponent must be positive".into()));
        }
        if self.document_count == 0 {
            return Err(Error::Config("document_count must be positive".into()));
        }
        if self.sections.is_empty() {
            return Err(Error::Config("section schema is empty".into()));
        }
        if let Some(ls) = &self.label_section {
            if !self.sections.contains(ls) {
                return Err(Error::Config(format!("label section {ls:?} not in schema")));
            }
        }
        if self.cooccurrence.len() != 10 || self.cooccurrence.iter().any(|r| r.len() != 10) {
            return Err(Error::Config("co-occurrence matrix must be 10×10".into()));
        }
        for (i, row) in self.cooccurrence.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!("co-occurrence[{i}][{j}] = {p} outside [0,1]")));
                }
                if i == j && p != 1.0 {
                    return Err(Error::Config(format!("co-occurrence diagonal [{i}] must be 1")));
                }
            }
        }
        if self.prevalence.len() != 10 || self.prevalence.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("prevalence must be 10 probabilities".into()));
        }
        if !(0.0..=1.0).contains(&self.male_fraction) {
            return Err(Error::Config("male_fraction outside [0,1]".into()));
        }
        if !(self.age_sd >= 0.0) {
            return Err(Error::Config("age_sd must be non-negative".into()));
        }
        let (a, b) = self.sentences_per_section;
        let (c, d) = self.words_per_sentence;
        if a == 0 || a > b || c == 0 || c > d {
            return Err(Error::Config("sentence/word ranges must be non-empty and positive".into()));
        }
        if self.medical_ranks.1 == 0 {
            return Err(Error::Config("medical rank stride must be positive".into()));
        }
        Ok(())
    }

    /// Word at each Zipf rank (index 0 = rank 1).
    pub fn vocabulary(&self) -> Vec<String> {
        let lex = Lexicon::builtin();
        let mut medical: Vec<&str> = lex
            .categories
            .iter()
            .filter(|(c, _)| c.as_str() != "conditions")
            .flat_map(|(_, ts)| ts.iter().map(String::as_str))
            .filter(|t| !t.contains(' '))
            .collect();
        medical.sort_unstable();
        medical.dedup();
        let (start, stride) = self.medical_ranks;
        let mut med = medical.into_iter();
        let mut pseudo = 0usize;
        (1..=self.vocabulary_size)
            .map(|rank| {
                if rank >= start && start > 0 && (rank - start) % stride == 0 {
                    if let Some(t) = med.next() {
                        return t.to_string();
                    }
                }
                pseudo += 1;
                zipf_word(pseudo)
            })
            .collect()
    }
}

const ONSETS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Pronounceable pseudo-word for a positive index: two or more
/// consonant-vowel syllables, distinct for distinct indices.
pub fn zipf_word(index: usize) -> String {
    let base = ONSETS.len() * VOWELS.len();
    let mut n = index - 1 + base; // at least two syllables
    let mut syl = Vec::new();
    loop {
        syl.push(n % base);
        n /= base;
        if n == 0 {
            break;
        }
    }
    let mut w = String::new();
    for s in syl.iter().rev() {
        w.push(ONSETS[s / VOWELS.len()] as char);
        w.push(VOWELS[s % VOWELS.len()] as char);
    }
    w
}

fn sample_labels<R: Rng>(spec: &ToyPopulationSpec, r: &mut R) -> Vec<usize> {
    let mut present = Vec::new();
    let mut anchor: Option<usize> = None;
    for j in 0..CONDITIONS.len() {
        let p = match anchor {
            Some(i) => spec.cooccurrence[i][j],
            None => spec.prevalence[j],
        };
        if r.random_bool(p.clamp(0.0, 1.0)) {
            present.push(j);
            anchor.get_or_insert(j);
        }
    }
    present
}

fn capitalized(words: &[&str]) -> String {
    let mut s = words.join(" ");
    if let Some(f) = s.get(0..1) {
        let up = f.to_uppercase();
        s.replace_range(0..1, &up);
    }
    s
}

fn render_labels<R: Rng>(labels: &[usize], r: &mut R) -> String {
    let mut sentences = Vec::new();
    if labels.is_empty() {
        sentences.push("No acute findings.".to_string());
    }
    for &l in labels {
        let c = CONDITIONS[l];
        let s = match r.random_range(0..3) {
            0 => format!("There is {c}."),
            1 => format!("Findings consistent with {c}."),
            _ => format!("{} is present.", capitalized(&[c])),
        };
        sentences.push(s);
    }
    let absent: Vec<usize> = (0..CONDITIONS.len()).filter(|i| !labels.contains(i)).collect();
    if !absent.is_empty() && r.random_bool(0.5) {
        let c = CONDITIONS[absent[r.random_range(0..absent.len())]];
        sentences.push(format!("No {c}."));
    }
    sentences.join(" ")
}

/// Generates a seeded toy corpus of `Real` documents.
pub fn synthesize_toy_corpus(spec: &ToyPopulationSpec) -> Result<Corpus> {
    spec.validate()?;
    let vocab = spec.vocabulary();
    let weights: Vec<f64> = (1..=spec.vocabulary_size)
        .map(|k| (k as f64).powf(-spec.zipf_exponent))
        .collect();
    let zipf = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;
    let age = Normal::new(spec.age_mean, spec.age_sd.max(1e-12)).map_err(|e| Error::Config(e.to_string()))?;
    let mut docs = Vec::with_capacity(spec.document_count);
    for i in 0..spec.document_count {
        let mut r = rng::stream(spec.seed, i as u64);
        let labels = sample_labels(spec, &mut r);
        let mut sections = Vec::with_capacity(spec.sections.len());
        for name in &spec.sections {
            let text = if spec.label_section.as_deref() == Some(name) {
                render_labels(&labels, &mut r)
            } else {
                let ns = r.random_range(spec.sentences_per_section.0..=spec.sentences_per_section.1);
                (0..ns)
                    .map(|_| {
                        let nw = r.random_range(spec.words_per_sentence.0..=spec.words_per_sentence.1);
                        let words: Vec<&str> = (0..nw).map(|_| vocab[zipf.sample(&mut r)].as_str()).collect();
                        format!("{}.", capitalized(&words))
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            sections.push((name.clone(), text));
        }
        let sex = if r.random_bool(spec.male_fraction) { Sex::Male } else { Sex::Female };
        let a = age.sample(&mut r).round().clamp(MIN_AGE as f64, MAX_AGE as f64) as u32;
        let doc = Document::new(format!("toy-{i:05}"), sections, Provenance::Real)?
            .with_labels(labels.iter().map(|&l| CONDITIONS[l]))
            .with_demographics(Demographics::new(sex, a)?);
        docs.push(doc);
    }
    Ok(Corpus::new(docs))
}
