//! Reported (F, P, R) triples in percent.

use std::path::Path;

pub struct Triple {
    pub label: String,
    pub f: f64,
    pub p: f64,
    pub r: f64,
}

pub fn load() -> Vec<Triple> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/table1_prf.tsv");
    let text = std::fs::read_to_string(&path).expect("fixture present");
    text.lines()
        .skip(1)
        .map(|line| {
            let c: Vec<&str> = line.split('\t').collect();
            Triple {
                label: c[..4].join("/"),
                f: c[4].parse().unwrap(),
                p: c[5].parse().unwrap(),
                r: c[6].parse().unwrap(),
            }
        })
        .collect()
}

/// Harmonic mean recomputed from the rounded percentages.
pub fn harmonic(p: f64, r: f64) -> f64 {
    2.0 * p * r / (p + r)
}
