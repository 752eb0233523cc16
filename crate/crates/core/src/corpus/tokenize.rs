//! Two tokenizations share one word rule (lowercase alphanumeric runs):
//!
//! * [`normalize_tokens`] feeds every metric; punctuation is dropped.
//! * [`stream_tokens`] feeds the generative kernels; it additionally keeps
//!   sentence punctuation and emits a marker token at each section start so
//!   generated streams can be turned back into sectioned documents.

use super::{Document, Section};

pub const SENTENCE_PUNCT: [&str; 3] = [".", "?", "!"];

/// Lowercase, split on non-alphanumeric characters, keep numerals.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn section_marker(name: &str) -> String {
    format!("<{name}>")
}

pub fn is_section_marker(token: &str) -> bool {
    token.len() > 2 && token.starts_with('<') && token.ends_with('>')
}

fn push_text_tokens(text: &str, out: &mut Vec<String>) {
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if matches!(c, '.' | '?' | '!') {
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
}

/// Kernel token stream of a document: `<Section>` markers, words and
/// sentence punctuation.
pub fn stream_tokens(doc: &Document) -> Vec<String> {
    let mut out = Vec::new();
    for Section { name, text } in doc.sections() {
        out.push(section_marker(name));
        push_text_tokens(text, &mut out);
    }
    out
}

/// Turns a kernel token stream back into (section, text) pairs. Words are
/// space separated, punctuation attaches to the preceding word, and the
/// first word of each sentence is capitalized. Tokens before any marker go
/// to a section named "Text".
pub fn detokenize_stream<S: AsRef<str>>(tokens: &[S]) -> Vec<(String, String)> {
    let mut sections: Vec<(String, String)> = Vec::new();
    let mut sentence_start = true;
    for tok in tokens {
        let tok = tok.as_ref();
        if is_section_marker(tok) {
            let name = tok[1..tok.len() - 1].to_string();
            if let Some(existing) = sections.iter().position(|(n, _)| *n == name) {
                // repeated marker: keep appending to the first occurrence
                let sec = sections.remove(existing);
                sections.push(sec);
            } else {
                sections.push((name, String::new()));
            }
            sentence_start = true;
            continue;
        }
        if sections.is_empty() {
            sections.push(("Text".into(), String::new()));
        }
        let text = &mut sections.last_mut().expect("non-empty").1;
        if SENTENCE_PUNCT.contains(&tok) {
            text.push_str(tok);
            sentence_start = true;
            continue;
        }
        if !text.is_empty() {
            text.push(' ');
        }
        if sentence_start {
            let mut cs = tok.chars();
            if let Some(f) = cs.next() {
                text.extend(f.to_uppercase());
                text.push_str(cs.as_str());
            }
        } else {
            text.push_str(tok);
        }
        sentence_start = false;
    }
    sections
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;

    #[test]
    fn normalizer() {
        assert_eq!(normalize_tokens("Don't STOP-now, 3x!"), ["don", "t", "stop", "now", "3x"]);
        assert!(normalize_tokens(" ,. ").is_empty());
    }

    #[test]
    fn stream_round_trip() {
        let d = Document::new(
            "a",
            vec![
                ("Findings".into(), "Lungs are clear. No effusion.".into()),
                ("Impression".into(), "Normal study.".into()),
            ],
            Provenance::Real,
        )
        .unwrap();
        let toks = stream_tokens(&d);
        assert_eq!(toks[0], "<Findings>");
        assert!(toks.contains(&".".to_string()));
        let back = detokenize_stream(&toks);
        assert_eq!(
            back,
            vec![
                ("Findings".to_string(), "Lungs are clear. No effusion.".to_string()),
                ("Impression".to_string(), "Normal study.".to_string())
            ]
        );
    }

    #[test]
    fn markerless_stream_goes_to_text() {
        assert_eq!(detokenize_stream(&["a", "b", "."]), vec![("Text".into(), "A b.".into())]);
    }
}
