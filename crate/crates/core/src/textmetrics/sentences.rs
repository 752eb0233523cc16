use crate::corpus::normalize_tokens;
use crate::error::{Error, Result};

/// Lowercased words that end in a period without ending a sentence.
pub const ABBREVIATIONS: [&str; 16] = [
    "dr", "mr", "mrs", "ms", "st", "vs", "etc", "approx", "e.g", "i.e", "fig", "no", "pt", "hx", "dx", "cf",
];

fn ends_with_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(|c: char| c.is_whitespace() || c == '(')
        .next()
        .unwrap_or("")
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Splits at `.`, `?` or `!` followed by whitespace and an uppercase letter
/// (or the end of text), skipping periods after listed abbreviations, and at
/// blank lines.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for para in text.split("\n\n") {
        let chars: Vec<(usize, char)> = para.char_indices().collect();
        let mut start = 0usize;
        for (k, &(i, c)) in chars.iter().enumerate() {
            if !matches!(c, '.' | '?' | '!') {
                continue;
            }
            let rest = &chars[k + 1..];
            let ws = rest.iter().take_while(|(_, ch)| ch.is_whitespace()).count();
            let boundary = match rest.get(ws) {
                None => true,
                Some(&(_, next)) => ws > 0 && next.is_uppercase(),
            };
            if !boundary || (c == '.' && ends_with_abbreviation(&para[start..i])) {
                continue;
            }
            let end = i + c.len_utf8();
            push(&mut out, &para[start..end]);
            start = end;
        }
        push(&mut out, &para[start..]);
    }
    out
}

fn push(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !normalize_tokens(s).is_empty() {
        out.push(s.to_string());
    }
}

/// Vowel groups (a e i o u y), minus a final silent `e` when another group
/// remains, at least one.
pub fn count_syllables(word: &str) -> usize {
    let w: Vec<char> = word.to_lowercase().chars().filter(|c| c.is_alphabetic()).collect();
    let vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0;
    let mut prev = false;
    for &c in &w {
        let v = vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = w.len();
    if groups > 1 && n >= 2 && w[n - 1] == 'e' && !vowel(w[n - 2]) && !(n >= 3 && w[n - 2] == 'l' && !vowel(w[n - 3])) {
        groups -= 1;
    }
    groups.max(1)
}

/// Flesch Reading Ease: 206.835 − 1.015·words/sentences − 84.6·syllables/words.
pub fn readability(text: &str) -> Result<f64> {
    let sentences = split_sentences(text);
    if sentences.is_empty() {
        return Err(Error::Empty("no sentences".into()));
    }
    let words = normalize_tokens(text);
    let syllables: usize = words.iter().map(|w| count_syllables(w)).sum();
    let (w, s) = (words.len() as f64, sentences.len() as f64);
    Ok(206.835 - 1.015 * (w / s) - 84.6 * (syllables as f64 / w))
}
