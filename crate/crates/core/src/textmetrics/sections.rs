use crate::corpus::Document;
use crate::error::{Error, Result};

/// Fraction of documents whose section is present and non-blank, per schema entry.
pub fn section_completeness(documents: &[Document], schema: &[String]) -> Result<Vec<(String, f64)>> {
    if schema.is_empty() {
        return Err(Error::Empty("section schema is empty".into()));
    }
    if documents.is_empty() {
        return Err(Error::Empty("no documents".into()));
    }
    Ok(schema
        .iter()
        .map(|s| {
            let complete = documents
                .iter()
                .filter(|d| d.section(s).is_some_and(|t| !t.trim().is_empty()))
                .count();
            (s.clone(), complete as f64 / documents.len() as f64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;

    fn doc(sections: &[(&str, &str)]) -> Document {
        Document::new("d", sections.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(), Provenance::Real).unwrap()
    }

    #[test]
    fn staggered_sections() {
        let schema: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        let docs = vec![doc(&[("A", "x"), ("B", "y")]), doc(&[("A", "x"), ("B", "  ")]), doc(&[("A", "x"), ("C", "z")])];
        let got = section_completeness(&docs, &schema).unwrap();
        let want = [1.0, 1.0 / 3.0, 1.0 / 3.0, 0.0];
        for ((_, g), w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }
        assert!(section_completeness(&docs, &[]).is_err());
    }
}
