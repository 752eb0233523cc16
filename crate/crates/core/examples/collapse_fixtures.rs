//! Writes the shipped collapse fixtures: a labeled reference report set and
//! five generations of impressions that degrade the way recursive training
//! degrades radiology reports (findings dropped, reassuring boilerplate,
//! hedging and artifacts creep in, fabricated findings at a steady rate).
//!
//! cargo run -p collapselab --example collapse_fixtures -- fixtures/collapse

use std::path::PathBuf;

use rand::Rng;

use collapselab::corpus::{
    synthesize_toy_corpus, write_documents, Document, InputFormat, Provenance, ToyPopulationSpec, CONDITIONS,
};
use collapselab::rng;

const REPORTS: usize = 400;
const SEED: u64 = 20_240_917;
const GENERATIONS: u32 = 5;

// per-generation rates, generation 0..4
const MENTION: [f64; 5] = [0.95, 0.8, 0.65, 0.5, 0.35];
const REASSURE: [f64; 5] = [0.13, 0.16, 0.19, 0.22, 0.25];
const HALLUCINATE: f64 = 0.2;
const HEDGE: [f64; 5] = [0.05, 0.15, 0.25, 0.35, 0.45];
const ARTIFACT: [f64; 5] = [0.0, 0.04, 0.08, 0.12, 0.16];
const BOILERPLATE: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];

fn positive(c: &str, r: &mut impl Rng) -> String {
    match r.random_range(0..3) {
        0 => format!("There is {c}."),
        1 => format!("Findings consistent with {c}."),
        _ => {
            let mut s = c.to_string();
            s[..1].make_ascii_uppercase();
            format!("{s} is present.")
        }
    }
}

fn impression(labels: &[&str], g: usize, r: &mut impl Rng) -> String {
    let mut out = Vec::new();
    if r.random_bool(BOILERPLATE[g]) {
        out.push("No acute cardiopulmonary process.".into());
    } else {
        for c in labels {
            if r.random_bool(MENTION[g]) {
                out.push(positive(c, r));
            }
        }
        if labels.is_empty() || r.random_bool(REASSURE[g]) {
            out.push("No acute findings.".into());
        }
    }
    if r.random_bool(HALLUCINATE) {
        let absent: Vec<&str> = CONDITIONS.iter().copied().filter(|c| !labels.contains(c)).collect();
        out.push(positive(absent[r.random_range(0..absent.len())], r));
    }
    if r.random_bool(HEDGE[g]) {
        out.push("Clinical correlation is recommended.".into());
    }
    if r.random_bool(ARTIFACT[g]) {
        out.push("xxx".into());
    }
    if out.is_empty() {
        out.push("Study reviewed.".into());
    }
    out.join(" ")
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures/collapse".into()));
    std::fs::create_dir_all(&dir).expect("create fixture directory");
    let spec = ToyPopulationSpec { document_count: REPORTS, seed: SEED, ..Default::default() };
    let base = synthesize_toy_corpus(&spec).expect("toy corpus");
    let references: Vec<Document> = base
        .iter()
        .map(|d| {
            Document::new(d.id.clone(), vec![("Impression".into(), d.section("Impression").unwrap().into())], Provenance::Real)
                .unwrap()
                .with_labels(d.labels.iter().cloned())
        })
        .collect();
    std::fs::write(dir.join("references.txt"), write_documents(&references, InputFormat::SectionedText)).unwrap();
    for g in 0..GENERATIONS {
        let reports: Vec<Document> = references
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut r = rng::stream(rng::derive(SEED, g as u64), i as u64);
                let labels: Vec<&str> = d.labels.iter().map(String::as_str).collect();
                let text = impression(&labels, g as usize, &mut r);
                Document::new(format!("g{g}-{i:05}-{}", d.id), vec![("Impression".into(), text)], Provenance::Synthetic(g))
                    .unwrap()
                    .with_labels(d.labels.iter().cloned())
            })
            .collect();
        std::fs::write(dir.join(format!("gen-{g}.txt")), write_documents(&reports, InputFormat::SectionedText)).unwrap();
    }
    println!("wrote {} reports × {GENERATIONS} generations to {}", REPORTS, dir.display());
}
