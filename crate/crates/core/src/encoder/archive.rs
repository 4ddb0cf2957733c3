//! The `lrep v1` embedding archive: a JSON header line followed by one JSON
//! record per occurrence vector.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::repr::{LanguageRepresentation, TokenEmbeddingSet};
use crate::corpus::LanguageId;
use crate::error::{Error, Result};

pub const FORMAT: &str = "lrep";
pub const VERSION: u64 = 1;

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u64,
    language: String,
    dim: usize,
    encoder: String,
}

#[derive(Deserialize)]
struct Record {
    token: String,
    occ: u64,
    vec: Vec<f64>,
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

pub fn to_archive_text(rep: &LanguageRepresentation) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{{\"format\":\"{FORMAT}\",\"version\":{VERSION},\"language\":{},\"dim\":{},\"encoder\":{}}}",
        json_string(rep.language.as_str()),
        rep.dim,
        json_string(&rep.encoder_tag)
    );
    for set in rep.sets.values() {
        let mut rows: Vec<(u64, &Vec<f32>)> = set.occurrences.iter().copied().zip(&set.vectors).collect();
        rows.sort_by_key(|(occ, _)| *occ);
        for (occ, vector) in rows {
            if vector.len() != rep.dim {
                return Err(Error::WidthMismatch {
                    expected: rep.dim,
                    found: vector.len(),
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::Archive(format!("non-finite component in `{}` occurrence {occ}", set.token)));
            }
            let _ = write!(out, "{{\"token\":{},\"occ\":{occ},\"vec\":[", json_string(&set.token));
            for (i, x) in vector.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                // nine significant digits round-trips any f32
                let _ = write!(out, "{x:.8e}");
            }
            out.push_str("]}\n");
        }
    }
    Ok(out)
}

pub fn export_archive(rep: &LanguageRepresentation, path: &Path) -> Result<()> {
    let text = to_archive_text(rep)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_archive(text: &str) -> Result<LanguageRepresentation> {
    let mut lines = text.split('\n').enumerate().filter(|(_, l)| !l.is_empty());
    let (_, header_line) = lines.next().ok_or_else(|| Error::Archive("missing header record".into()))?;
    let header: Header =
        serde_json::from_str(header_line).map_err(|e| Error::Archive(format!("bad header record: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::Archive(format!("expected format `{FORMAT}`, found `{}`", header.format)));
    }
    if header.version != VERSION {
        return Err(Error::Version {
            what: "lrep",
            found: header.version,
            expected: VERSION,
        });
    }
    if header.dim == 0 {
        return Err(Error::Archive("dim must be positive".into()));
    }
    let language = LanguageId::new(header.language)?;
    let mut rep = LanguageRepresentation::new(language.clone(), header.encoder, header.dim);

    let mut seen = HashSet::new();
    let mut sets: BTreeMap<String, TokenEmbeddingSet> = BTreeMap::new();
    for (idx, line) in lines {
        let record: Record = serde_json::from_str(line)
            .map_err(|e| Error::Archive(format!("line {}: bad record: {e}", idx + 1)))?;
        if record.vec.len() != header.dim {
            return Err(Error::WidthMismatch {
                expected: header.dim,
                found: record.vec.len(),
            });
        }
        if !seen.insert((record.token.clone(), record.occ)) {
            return Err(Error::DuplicateRecord {
                token: record.token,
                occ: record.occ,
            });
        }
        let vector: Vec<f32> = record.vec.iter().map(|&x| x as f32).collect();
        if vector.iter().all(|&x| x == 0.0) {
            rep.diagnostics
                .push(format!("dropped all-zero vector for `{}` occurrence {}", record.token, record.occ));
            continue;
        }
        let set = sets.entry(record.token.clone()).or_insert_with(|| TokenEmbeddingSet {
            token: record.token.clone(),
            occurrences: Vec::new(),
            vectors: Vec::new(),
        });
        set.occurrences.push(record.occ);
        set.vectors.push(vector);
    }
    if sets.is_empty() {
        return Err(Error::DegenerateRepresentation(language.to_string()));
    }
    rep.sets = sets;
    Ok(rep)
}

pub fn import_archive(path: &Path) -> Result<LanguageRepresentation> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_archive(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rep() -> LanguageRepresentation {
        let mut rep = LanguageRepresentation::new(LanguageId::new("c").unwrap(), "toy", 3);
        rep.insert(TokenEmbeddingSet::new("x", vec![vec![0.1, -2.5, 3.0e-7], vec![1.0, 0.0, 0.0]]));
        rep.insert(TokenEmbeddingSet {
            token: "\"q\tz\"".into(),
            occurrences: vec![7],
            vectors: vec![vec![0.333_333_34, 1e10, -0.0]],
        });
        rep
    }

    #[test]
    fn header_is_exact() {
        let text = to_archive_text(&rep()).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, r#"{"format":"lrep","version":1,"language":"c","dim":3,"encoder":"toy"}"#);
        assert!(text.ends_with('\n') && !text.contains('\r'));
        assert!(text.contains(r#""vec":[1.00000000e0,0.00000000e0,0.00000000e0]"#));
    }

    #[test]
    fn round_trip_is_exact_for_f32() {
        let original = rep();
        let back = parse_archive(&to_archive_text(&original).unwrap()).unwrap();
        assert_eq!(back.sets, original.sets);
        assert_eq!(back.dim, 3);
        assert_eq!(back.encoder_tag, "toy");
    }

    #[test]
    fn structured_errors() {
        let header = r#"{"format":"lrep","version":1,"language":"c","dim":2,"encoder":"t"}"#;
        let mixed = format!("{header}\n{{\"token\":\"a\",\"occ\":0,\"vec\":[1,2]}}\n{{\"token\":\"a\",\"occ\":1,\"vec\":[1]}}\n");
        assert!(matches!(parse_archive(&mixed), Err(Error::WidthMismatch { expected: 2, found: 1 })));

        let dup = format!("{header}\n{{\"token\":\"a\",\"occ\":0,\"vec\":[1,2]}}\n{{\"token\":\"a\",\"occ\":0,\"vec\":[3,4]}}\n");
        assert!(matches!(parse_archive(&dup), Err(Error::DuplicateRecord { .. })));

        assert!(matches!(parse_archive(&format!("{header}\n")), Err(Error::DegenerateRepresentation(_))));

        let v2 = header.replace("\"version\":1", "\"version\":2");
        assert!(matches!(parse_archive(&format!("{v2}\n")), Err(Error::Version { found: 2, .. })));

        assert!(parse_archive("").is_err());
        assert!(parse_archive("{\"format\":\"npy\"}\n").is_err());
    }

    #[test]
    fn archive_of_widths_64_and_32() {
        let header = r#"{"format":"lrep","version":1,"language":"c","dim":64,"encoder":"t"}"#;
        let v64 = vec!["1"; 64].join(",");
        let v32 = vec!["1"; 32].join(",");
        let text = format!("{header}\n{{\"token\":\"a\",\"occ\":0,\"vec\":[{v64}]}}\n{{\"token\":\"b\",\"occ\":1,\"vec\":[{v32}]}}\n");
        assert!(matches!(parse_archive(&text), Err(Error::WidthMismatch { expected: 64, found: 32 })));
    }

    proptest! {
        #[test]
        fn round_trip_within_tolerance(vals in proptest::collection::vec(-1e3f32..1e3, 4..40)) {
            let dim = 4;
            let vectors: Vec<Vec<f32>> = vals.chunks_exact(dim).map(|c| c.to_vec()).filter(|v| v.iter().any(|&x| x != 0.0)).collect();
            prop_assume!(!vectors.is_empty());
            let mut rep = LanguageRepresentation::new(LanguageId::new("go").unwrap(), "p", dim);
            rep.insert(TokenEmbeddingSet::new("t", vectors.clone()));
            let back = parse_archive(&to_archive_text(&rep).unwrap()).unwrap();
            for (a, b) in back.sets["t"].vectors.iter().flatten().zip(vectors.iter().flatten()) {
                prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
            }
        }
    }
}
