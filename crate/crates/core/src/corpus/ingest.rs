//! Reading and writing document files.
//!
//! Two formats are supported (see `docs/formats.md`):
//!
//! * sectioned text: records separated by blank lines, `Name:` section
//!   headers, optional `#key=value` header lines (`id`, `provenance`,
//!   `labels`, `sex`, `age`);
//! * line records: one flat JSON object per line; reserved keys `id`,
//!   `provenance`, `generation`, `labels`, `sex`, `age`, every other key is a
//!   section name in file order.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use super::{Corpus, Demographics, Document, Provenance, Sex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    SectionedText,
    LineRecord,
}

impl InputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sectioned-text" | "text" => Some(Self::SectionedText),
            "line-record" | "jsonl" => Some(Self::LineRecord),
            _ => None,
        }
    }
}

pub fn ingest_documents(path: impl AsRef<Path>, format: InputFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_documents(&text, format)
}

pub fn parse_documents(text: &str, format: InputFormat) -> Result<Corpus> {
    let docs = match format {
        InputFormat::SectionedText => parse_sectioned(text)?,
        InputFormat::LineRecord => parse_line_records(text)?,
    };
    if docs.is_empty() {
        return Err(Error::Empty("no records in input".into()));
    }
    Ok(Corpus::new(docs))
}

struct Headers {
    id: Option<String>,
    provenance: Provenance,
    labels: Vec<String>,
    sex: Option<Sex>,
    age: Option<u32>,
}

impl Default for Headers {
    fn default() -> Self {
        Self {
            id: None,
            provenance: Provenance::Real,
            labels: Vec::new(),
            sex: None,
            age: None,
        }
    }
}

fn parse_provenance(value: &str, generation: Option<u32>) -> std::result::Result<Provenance, String> {
    let v = value.trim().to_ascii_lowercase();
    let mut parts = v.split([',', ':']).map(str::trim);
    match parts.next() {
        Some("real") => Ok(Provenance::Real),
        Some("synthetic") => {
            let mut gen = generation;
            for p in parts {
                let g = p.strip_prefix("gen=").unwrap_or(p);
                gen = Some(g.parse().map_err(|_| format!("bad generation {p:?}"))?);
            }
            gen.map(Provenance::Synthetic)
                .ok_or_else(|| "synthetic provenance needs a generation".to_string())
        }
        _ => Err(format!("unknown provenance {value:?}")),
    }
}

fn finish(
    index: usize,
    headers: Headers,
    sections: Vec<(String, String)>,
) -> Result<Document> {
    let malformed = |reason: String| Error::MalformedRecord { index, reason };
    let id = headers.id.unwrap_or_else(|| format!("doc-{index:06}"));
    let mut doc = Document::new(id, sections, headers.provenance).map_err(|e| malformed(e.to_string()))?;
    doc = doc.with_labels(headers.labels);
    match (headers.sex, headers.age) {
        (Some(sex), Some(age)) => {
            let d = Demographics::new(sex, age).map_err(|e| match e {
                Error::Range(r) => Error::Range(format!("record {index}: {r}")),
                other => other,
            })?;
            doc = doc.with_demographics(d);
        }
        (None, None) => {}
        _ => return Err(malformed("sex and age must be given together".into())),
    }
    Ok(doc)
}

fn section_header(line: &str) -> Option<(&str, &str)> {
    let (name, rest) = line.split_once(':')?;
    let name = name.trim_end();
    let first = name.chars().next()?;
    let ok = first.is_ascii_uppercase()
        && name.len() <= 48
        && name
            .chars()
            .all(|c| c.is_alphanumeric() || " /-_&()".contains(c));
    ok.then(|| (name, rest.trim()))
}

fn parse_sectioned(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut block: Vec<&str> = Vec::new();
    let flush = |block: &mut Vec<&str>, docs: &mut Vec<Document>| -> Result<()> {
        if block.is_empty() {
            return Ok(());
        }
        let index = docs.len();
        let malformed = |reason: String| Error::MalformedRecord { index, reason };
        let mut headers = Headers::default();
        let mut sections: Vec<(String, String)> = Vec::new();
        for line in block.drain(..) {
            let line = line.trim_end();
            if let Some(h) = line.strip_prefix('#') {
                let (k, v) = h
                    .split_once('=')
                    .ok_or_else(|| malformed(format!("header without '=': {line:?}")))?;
                match k.trim() {
                    "id" => headers.id = Some(v.trim().to_string()),
                    "provenance" => headers.provenance = parse_provenance(v, None).map_err(malformed)?,
                    "labels" => {
                        headers.labels = v
                            .split(',')
                            .map(|s| s.trim().to_lowercase())
                            .filter(|s| !s.is_empty())
                            .collect()
                    }
                    "sex" => {
                        headers.sex = Some(Sex::parse(v).ok_or_else(|| malformed(format!("bad sex {v:?}")))?)
                    }
                    "age" => {
                        headers.age = Some(v.trim().parse().map_err(|_| malformed(format!("bad age {v:?}")))?)
                    }
                    other => return Err(malformed(format!("unknown header {other:?}"))),
                }
            } else if let Some((name, rest)) = section_header(line) {
                if sections.iter().any(|(n, _)| n == name) {
                    return Err(malformed(format!("duplicate section {name:?}")));
                }
                sections.push((name.to_string(), rest.to_string()));
            } else {
                if sections.is_empty() {
                    sections.push(("Text".into(), String::new()));
                }
                let t = &mut sections.last_mut().expect("non-empty").1;
                if !t.is_empty() {
                    t.push(' ');
                }
                t.push_str(line.trim());
            }
        }
        docs.push(finish(index, headers, sections)?);
        Ok(())
    };
    for line in text.lines() {
        if line.trim().is_empty() {
            flush(&mut block, &mut docs)?;
        } else {
            block.push(line);
        }
    }
    flush(&mut block, &mut docs)?;
    Ok(docs)
}

const RESERVED: [&str; 6] = ["id", "provenance", "generation", "labels", "sex", "age"];

fn parse_line_records(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let index = docs.len();
        let malformed = |reason: String| Error::MalformedRecord { index, reason };
        let obj: Map<String, Value> = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let mut headers = Headers::default();
        let generation = match obj.get("generation") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_u64()
                    .and_then(|g| u32::try_from(g).ok())
                    .ok_or_else(|| malformed(format!("bad generation {v}")))?,
            ),
        };
        let str_field = |key: &str| -> Result<Option<String>> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(v) => Err(malformed(format!("{key} must be a string, found {v}"))),
            }
        };
        headers.id = str_field("id")?;
        if let Some(p) = str_field("provenance")? {
            headers.provenance = parse_provenance(&p, generation).map_err(malformed)?;
        }
        headers.labels = match obj.get("labels") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::String(s)) => s
                .split(',')
                .map(|x| x.trim().to_lowercase())
                .filter(|x| !x.is_empty())
                .collect(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().map(str::to_lowercase).ok_or_else(|| malformed("labels must be strings".into())))
                .collect::<Result<_>>()?,
            Some(v) => return Err(malformed(format!("bad labels {v}"))),
        };
        if let Some(s) = str_field("sex")? {
            headers.sex = Some(Sex::parse(&s).ok_or_else(|| malformed(format!("bad sex {s:?}")))?);
        }
        headers.age = match obj.get("age") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_u64()
                    .and_then(|a| u32::try_from(a).ok())
                    .ok_or_else(|| malformed(format!("bad age {v}")))?,
            ),
        };
        let mut sections = Vec::new();
        for (k, v) in &obj {
            if RESERVED.contains(&k.as_str()) {
                continue;
            }
            let t = v
                .as_str()
                .ok_or_else(|| malformed(format!("section {k:?} must be a string")))?;
            sections.push((k.clone(), t.to_string()));
        }
        docs.push(finish(index, headers, sections)?);
    }
    Ok(docs)
}

/// Serializes documents in either format; the output parses back to equal documents.
pub fn write_documents<'a, I>(docs: I, format: InputFormat) -> String
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut out = String::new();
    for doc in docs {
        match format {
            InputFormat::LineRecord => {
                let mut m = Map::new();
                m.insert("id".into(), Value::String(doc.id.clone()));
                match doc.provenance {
                    Provenance::Real => {
                        m.insert("provenance".into(), "real".into());
                    }
                    Provenance::Synthetic(g) => {
                        m.insert("provenance".into(), "synthetic".into());
                        m.insert("generation".into(), g.into());
                    }
                }
                if !doc.labels.is_empty() {
                    m.insert(
                        "labels".into(),
                        Value::Array(doc.labels.iter().cloned().map(Value::String).collect()),
                    );
                }
                if let Some(d) = doc.demographics {
                    m.insert("sex".into(), d.sex.as_str().into());
                    m.insert("age".into(), d.age.into());
                }
                for s in doc.sections() {
                    m.insert(s.name.clone(), Value::String(s.text.clone()));
                }
                out.push_str(&Value::Object(m).to_string());
                out.push('\n');
            }
            InputFormat::SectionedText => {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "#id={}", doc.id);
                match doc.provenance {
                    Provenance::Real => out.push_str("#provenance=real\n"),
                    Provenance::Synthetic(g) => {
                        let _ = writeln!(out, "#provenance=synthetic,gen={g}");
                    }
                }
                if !doc.labels.is_empty() {
                    let labels: Vec<&str> = doc.labels.iter().map(String::as_str).collect();
                    let _ = writeln!(out, "#labels={}", labels.join(","));
                }
                if let Some(d) = doc.demographics {
                    let _ = writeln!(out, "#sex={}\n#age={}", d.sex.as_str(), d.age);
                }
                for s in doc.sections() {
                    let text = s.text.split_whitespace().collect::<Vec<_>>().join(" ");
                    let _ = writeln!(out, "{}: {}", s.name, text);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_record_two_sections() {
        let c = parse_documents(
            "Findings: Lungs clear.\nImpression: No acute disease.\n",
            InputFormat::SectionedText,
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.documents[0].sections().len(), 2);
        assert_eq!(c.documents[0].provenance, Provenance::Real);
    }

    #[test]
    fn provenance_passthrough() {
        let c = parse_documents(
            "#provenance=synthetic,gen=2\nFindings: x\n",
            InputFormat::SectionedText,
        )
        .unwrap();
        assert_eq!(c.documents[0].provenance, Provenance::Synthetic(2));
        let j = parse_documents(
            r#"{"provenance":"synthetic","generation":2,"Findings":"x"}"#,
            InputFormat::LineRecord,
        )
        .unwrap();
        assert_eq!(j.documents[0].provenance, Provenance::Synthetic(2));
    }

    #[test]
    fn age_out_of_range() {
        let err = parse_documents("#sex=male\n#age=17\nFindings: x\n", InputFormat::SectionedText)
            .unwrap_err();
        assert!(matches!(err, Error::Range(_)), "{err}");
    }

    #[test]
    fn malformed_carries_index() {
        let text = "Findings: ok\n\n#age=abc\nFindings: bad\n";
        match parse_documents(text, InputFormat::SectionedText) {
            Err(Error::MalformedRecord { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
        match parse_documents("{\"Findings\":\"a\"}\n{not json", InputFormat::LineRecord) {
            Err(Error::MalformedRecord { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_input() {
        assert!(matches!(parse_documents("\n\n", InputFormat::SectionedText), Err(Error::Empty(_))));
        assert!(matches!(parse_documents("", InputFormat::LineRecord), Err(Error::Empty(_))));
    }

    #[test]
    fn write_then_read_back() {
        let d = Document::new(
            "r1",
            vec![("Findings".into(), "Small effusion.".into()), ("Impression".into(), "Effusion.".into())],
            Provenance::Synthetic(3),
        )
        .unwrap()
        .with_labels(["effusion"])
        .with_demographics(Demographics::new(Sex::Female, 71).unwrap());
        for fmt in [InputFormat::LineRecord, InputFormat::SectionedText] {
            let text = write_documents([&d, &d], fmt);
            let back = parse_documents(&text, fmt).unwrap();
            assert_eq!(back.documents, vec![d.clone(), d.clone()]);
        }
    }
}
