//! Occurrence sampling from the test partition and the samples file format.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{LanguageCorpus, LanguageId, Partition};
use crate::error::{Error, Result};
use crate::escape::{escape_field, join_context, split_context, unescape_field};
use crate::lexer::Lexer;

pub const SAMPLES_HEADER: &str = "#plsim-samples v1";

/// One occurrence of a token with its surrounding lexemes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceSample {
    pub occ_id: u64,
    pub token: String,
    pub file_index: usize,
    /// Index of the token in the file's comment-inclusive token stream.
    pub position: usize,
    /// Lexemes `position - left ..= position + right`, clipped at file bounds.
    pub context: Vec<String>,
    pub target_offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub left: usize,
    pub right: usize,
}

/// Per-token seed, independent of which other tokens are sampled.
pub fn token_seed(seed: u64, token: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(token.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// The lexed test partition with the non-comment occurrences of selected tokens.
pub struct OccurrenceIndex {
    files: BTreeMap<usize, Vec<String>>,
    occurrences: BTreeMap<String, Vec<(usize, usize)>>,
}

impl OccurrenceIndex {
    /// Lexes every `Test` file. When `only` is given, occurrences of other
    /// tokens are not recorded.
    pub fn build(corpus: &LanguageCorpus, lexer: &Lexer, only: Option<&BTreeSet<String>>) -> Self {
        let spec = lexer.spec();
        let test: Vec<(usize, &crate::corpus::SourceFile)> = corpus.files_in(Partition::Test).collect();
        let lexed: Vec<Option<(usize, Vec<String>, Vec<(String, usize)>)>> = test
            .par_iter()
            .map(|&(idx, file)| {
                let lexed = match lexer.tokenize_checked(&file.text, &file.path) {
                    Ok(l) => l,
                    Err(e) => {
                        log::warn!("{e}");
                        return None;
                    }
                };
                let mut hits = Vec::new();
                for (pos, t) in lexed.tokens.iter().enumerate() {
                    if t.is_comment() {
                        continue;
                    }
                    let key = spec.vocab_key(&t.lexeme, t.kind);
                    if only.is_none_or(|set| set.contains(key.as_ref())) {
                        hits.push((key.into_owned(), pos));
                    }
                }
                let lexemes = lexed.tokens.into_iter().map(|t| t.lexeme).collect();
                Some((idx, lexemes, hits))
            })
            .collect();

        let mut files = BTreeMap::new();
        let mut occurrences: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
        for (idx, lexemes, hits) in lexed.into_iter().flatten() {
            for (key, pos) in hits {
                occurrences.entry(key).or_default().push((idx, pos));
            }
            files.insert(idx, lexemes);
        }
        OccurrenceIndex { files, occurrences }
    }

    pub fn count(&self, token: &str) -> usize {
        self.occurrences.get(token).map_or(0, Vec::len)
    }

    /// Draws `min(max_samples, available)` occurrences uniformly without
    /// replacement, returned in corpus order. Ids start at `first_id`.
    pub fn sample(
        &self,
        token: &str,
        max_samples: usize,
        seed: u64,
        window: ContextWindow,
        first_id: u64,
    ) -> Option<Vec<OccurrenceSample>> {
        let all = self.occurrences.get(token).filter(|v| !v.is_empty())?;
        let mut chosen: Vec<usize> = if all.len() <= max_samples {
            (0..all.len()).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(token_seed(seed, token));
            rand::seq::index::sample(&mut rng, all.len(), max_samples).into_vec()
        };
        chosen.sort_unstable();
        Some(
            chosen
                .into_iter()
                .enumerate()
                .map(|(k, i)| {
                    let (file_index, position) = all[i];
                    let lexemes = &self.files[&file_index];
                    let start = position.saturating_sub(window.left);
                    let end = (position + window.right + 1).min(lexemes.len());
                    OccurrenceSample {
                        occ_id: first_id + k as u64,
                        token: token.to_string(),
                        file_index,
                        position,
                        context: lexemes[start..end].to_vec(),
                        target_offset: position - start,
                    }
                })
                .collect(),
        )
    }
}

pub fn sample_occurrences(
    corpus: &LanguageCorpus,
    lexer: &Lexer,
    token: &str,
    max_samples: usize,
    seed: u64,
    window: ContextWindow,
) -> Result<Vec<OccurrenceSample>> {
    let only: BTreeSet<String> = [token.to_string()].into();
    OccurrenceIndex::build(corpus, lexer, Some(&only))
        .sample(token, max_samples, seed, window, 0)
        .ok_or_else(|| Error::TokenAbsent {
            language: corpus.language.to_string(),
            token: token.to_string(),
        })
}

/// Samples for every token of `tokens` present in the test partition, plus
/// the tokens that had to be dropped. Occurrence ids run across tokens in
/// ascending token order.
pub fn collect_samples(
    corpus: &LanguageCorpus,
    lexer: &Lexer,
    tokens: &[String],
    max_samples: usize,
    seed: u64,
    window: ContextWindow,
) -> (Vec<OccurrenceSample>, Vec<String>) {
    let wanted: BTreeSet<String> = tokens.iter().cloned().collect();
    let index = OccurrenceIndex::build(corpus, lexer, Some(&wanted));
    let mut samples = Vec::new();
    let mut dropped = Vec::new();
    for token in &wanted {
        match index.sample(token, max_samples, seed, window, samples.len() as u64) {
            Some(s) => samples.extend(s),
            None => dropped.push(token.clone()),
        }
    }
    (samples, dropped)
}

pub fn samples_to_text(language: &LanguageId, samples: &[OccurrenceSample]) -> String {
    let mut out = format!("{SAMPLES_HEADER} language={language}\n");
    for s in samples {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            s.occ_id,
            escape_field(&s.token),
            join_context(&s.context),
            s.target_offset
        ));
    }
    out
}

/// Parses a samples file. File index and position are not part of the
/// format and come back as zero.
pub fn samples_from_text(text: &str) -> Result<(LanguageId, Vec<OccurrenceSample>)> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or_default();
    let language = header
        .strip_prefix(SAMPLES_HEADER)
        .and_then(|r| r.trim().strip_prefix("language="))
        .ok_or_else(|| Error::parse("samples", 1, format!("expected `{SAMPLES_HEADER} language=<id>`")))?;
    let language = LanguageId::new(language)?;
    let mut samples = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = |m: &str| Error::parse("samples", idx + 1, m.to_string());
        let fields: Vec<&str> = line.split('\t').collect();
        let [occ, token, context, offset] = fields.as_slice() else {
            return Err(err("expected four tab-separated fields"));
        };
        let context = split_context(context)?;
        let target_offset: usize = offset.parse().map_err(|_| err("bad target offset"))?;
        let token = unescape_field(token)?;
        if target_offset >= context.len() {
            return Err(err("target offset outside context"));
        }
        samples.push(OccurrenceSample {
            occ_id: occ.parse().map_err(|_| err("bad occurrence id"))?,
            token,
            file_index: 0,
            position: 0,
            context,
            target_offset,
        });
    }
    Ok((language, samples))
}

pub fn write_samples(path: &Path, language: &LanguageId, samples: &[OccurrenceSample]) -> Result<()> {
    fs::write(path, samples_to_text(language, samples)).map_err(|e| Error::io(path, e))
}

pub fn read_samples(path: &Path) -> Result<(LanguageId, Vec<OccurrenceSample>)> {
    samples_from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::split;
    use crate::lexer::builtin;

    fn corpus(test_files: &[&str]) -> LanguageCorpus {
        let mut files = vec![("train.c".to_string(), "x x x x".to_string())];
        files.extend(test_files.iter().enumerate().map(|(i, t)| (format!("t{i}.c"), t.to_string())));
        let n = files.len();
        let c = LanguageCorpus::from_texts(LanguageId::new("c").unwrap(), files);
        split(&c, 1.0 / n as f64).unwrap()
    }

    fn lexer() -> Lexer {
        Lexer::new(builtin("c").unwrap()).unwrap()
    }

    const W: ContextWindow = ContextWindow { left: 2, right: 1 };

    #[test]
    fn takes_everything_when_short() {
        let c = corpus(&["a = b ; a ;", "a"]);
        let s = sample_occurrences(&c, &lexer(), "a", 5, 7, W).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].context, vec!["a", "="]);
        assert_eq!(s[0].target_offset, 0);
        assert_eq!(s[1].context, vec!["b", ";", "a", ";"]);
        assert_eq!(s[1].target_offset, 2);
        assert_eq!((s[2].file_index, s[2].position), (2, 0));
    }

    #[test]
    fn deterministic_subsets() {
        let c = corpus(&["t t t t t t t t t t"]);
        let a = sample_occurrences(&c, &lexer(), "t", 2, 42, W).unwrap();
        let b = sample_occurrences(&c, &lexer(), "t", 2, 42, W).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a, b);
    }

    #[test]
    fn comment_only_and_train_only_tokens_are_absent() {
        let c = corpus(&["y // x x x", "/* x */ y"]);
        assert!(matches!(
            sample_occurrences(&c, &lexer(), "x", 5, 1, W),
            Err(Error::TokenAbsent { .. })
        ));
    }

    #[test]
    fn context_includes_comments() {
        let c = corpus(&["/* c */ x // d"]);
        let s = sample_occurrences(&c, &lexer(), "x", 5, 1, W).unwrap();
        assert_eq!(s[0].context, vec!["/* c */", "x", "// d"]);
        assert_eq!(s[0].position, 1);
    }

    #[test]
    fn collect_reports_dropped_tokens() {
        let c = corpus(&["a b a"]);
        let tokens = vec!["b".to_string(), "a".to_string(), "zz".to_string()];
        let (samples, dropped) = collect_samples(&c, &lexer(), &tokens, 10, 3, W);
        assert_eq!(dropped, vec!["zz"]);
        let ids: Vec<u64> = samples.iter().map(|s| s.occ_id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert_eq!(samples[2].token, "b");
    }

    #[test]
    fn samples_file_round_trip() {
        let c = corpus(&["s = \"a b\" ; // hi there\ns"]);
        let (samples, _) = collect_samples(&c, &lexer(), &["s".to_string()], 10, 3, W);
        let text = samples_to_text(&c.language, &samples);
        assert!(text.starts_with("#plsim-samples v1 language=c\n"));
        let (lang, back) = samples_from_text(&text).unwrap();
        assert_eq!(lang, c.language);
        for (a, b) in back.iter().zip(&samples) {
            assert_eq!((a.occ_id, &a.token, &a.context, a.target_offset), (b.occ_id, &b.token, &b.context, b.target_offset));
        }
    }

    #[test]
    fn token_seeds_differ() {
        assert_ne!(token_seed(1, "a"), token_seed(1, "b"));
        assert_ne!(token_seed(1, "a"), token_seed(2, "a"));
        assert_eq!(token_seed(1, "a"), token_seed(1, "a"));
    }
}
