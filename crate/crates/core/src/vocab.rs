//! Token-count vocabularies and their cross-language intersection.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{LanguageCorpus, LanguageId};
use crate::error::{Error, Result};
use crate::escape::{escape_field, unescape_field};
use crate::lexer::{Lexer, TokenKind};

pub const VOCAB_HEADER: &str = "#plsim-vocab v1";
pub const COMMON_HEADER: &str = "#plsim-common v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub language: LanguageId,
    pub counts: BTreeMap<String, u64>,
    /// Files that could not be lexed.
    #[serde(default)]
    pub skipped: Vec<String>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{VOCAB_HEADER} language={}\n", self.language);
        for (token, count) in &self.counts {
            out.push_str(&format!("{count}\t{}\n", escape_field(token)));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l).unwrap_or_default();
        let language = header
            .strip_prefix(VOCAB_HEADER)
            .and_then(|rest| rest.trim().strip_prefix("language="))
            .ok_or_else(|| Error::parse("vocabulary", 1, format!("expected `{VOCAB_HEADER} language=<id>`")))?;
        let language = LanguageId::new(language)?;
        let mut counts = BTreeMap::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (count, token) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse("vocabulary", idx + 1, "expected `count<TAB>token`"))?;
            let count: u64 = count
                .parse()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| Error::parse("vocabulary", idx + 1, format!("bad count `{count}`")))?;
            let token = unescape_field(token).map_err(|_| Error::parse("vocabulary", idx + 1, "bad escape"))?;
            if counts.insert(token, count).is_some() {
                return Err(Error::parse("vocabulary", idx + 1, "duplicate token"));
            }
        }
        Ok(Vocabulary {
            language,
            counts,
            skipped: Vec::new(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Counts every non-comment token over all files of the corpus, both
/// partitions. `kinds` restricts the count to the listed token kinds.
pub fn build_vocabulary_filtered(corpus: &LanguageCorpus, lexer: &Lexer, kinds: Option<&[TokenKind]>) -> Vocabulary {
    let spec = lexer.spec();
    let per_file: Vec<std::result::Result<BTreeMap<String, u64>, String>> = corpus
        .files
        .par_iter()
        .map(|file| {
            let lexed = lexer.tokenize_checked(&file.text, &file.path).map_err(|e| {
                log::warn!("{e}");
                file.path.display().to_string()
            })?;
            let mut counts = BTreeMap::new();
            for t in lexed.tokens.iter().filter(|t| !t.is_comment()) {
                if kinds.is_some_and(|k| !k.contains(&t.kind)) {
                    continue;
                }
                *counts.entry(spec.vocab_key(&t.lexeme, t.kind).into_owned()).or_insert(0) += 1;
            }
            Ok(counts)
        })
        .collect();

    let mut vocab = Vocabulary {
        language: corpus.language.clone(),
        counts: BTreeMap::new(),
        skipped: Vec::new(),
    };
    for result in per_file {
        match result {
            Ok(counts) => {
                for (token, n) in counts {
                    *vocab.counts.entry(token).or_insert(0) += n;
                }
            }
            Err(path) => vocab.skipped.push(path),
        }
    }
    vocab
}

pub fn build_vocabulary(corpus: &LanguageCorpus, lexer: &Lexer) -> Vocabulary {
    build_vocabulary_filtered(corpus, lexer, None)
}

/// Tokens present in every language, ascending, with per-language counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommonVocabulary {
    pub tokens: Vec<String>,
    /// Counts aligned with `tokens`, keyed by language.
    pub per_language_counts: BTreeMap<LanguageId, Vec<u64>>,
}

impl CommonVocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn languages(&self) -> impl Iterator<Item = &LanguageId> {
        self.per_language_counts.keys()
    }

    pub fn to_text(&self) -> String {
        let langs: Vec<&str> = self.per_language_counts.keys().map(LanguageId::as_str).collect();
        let mut out = format!("{COMMON_HEADER}\n#languages\t{}\n", langs.join("\t"));
        for (i, token) in self.tokens.iter().enumerate() {
            for counts in self.per_language_counts.values() {
                out.push_str(&counts[i].to_string());
                out.push('\t');
            }
            out.push_str(&escape_field(token));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |line: usize, m: &str| Error::parse("common vocabulary", line, m.to_string());
        let mut lines = text.lines().enumerate();
        if lines.next().map(|(_, l)| l.trim()) != Some(COMMON_HEADER) {
            return Err(err(1, "missing header"));
        }
        let langs: Vec<LanguageId> = lines
            .next()
            .and_then(|(_, l)| l.strip_prefix("#languages\t"))
            .ok_or_else(|| err(2, "expected `#languages<TAB>...` row"))?
            .split('\t')
            .map(LanguageId::new)
            .collect::<Result<_>>()?;
        let mut tokens = Vec::new();
        let mut columns: Vec<Vec<u64>> = vec![Vec::new(); langs.len()];
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != langs.len() + 1 {
                return Err(err(idx + 1, "wrong number of columns"));
            }
            for (col, f) in columns.iter_mut().zip(&fields) {
                col.push(f.parse().map_err(|_| err(idx + 1, "bad count"))?);
            }
            tokens.push(unescape_field(fields[langs.len()]).map_err(|_| err(idx + 1, "bad escape"))?);
        }
        if tokens.windows(2).any(|w| w[0] >= w[1]) {
            return Err(err(0, "tokens must be sorted and unique"));
        }
        let mut per_language_counts = BTreeMap::new();
        for (lang, col) in langs.into_iter().zip(columns) {
            if per_language_counts.insert(lang.clone(), col).is_some() {
                return Err(Error::DuplicateLanguage(lang.to_string()));
            }
        }
        Ok(CommonVocabulary {
            tokens,
            per_language_counts,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

pub fn intersect(vocabularies: &[Vocabulary]) -> Result<CommonVocabulary> {
    if vocabularies.len() < 2 {
        return Err(Error::TooFewInputs {
            needed: 2,
            got: vocabularies.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for v in vocabularies {
        if !seen.insert(&v.language) {
            return Err(Error::DuplicateLanguage(v.language.to_string()));
        }
    }
    // Walk the smallest vocabulary; membership checks on the rest.
    let smallest = vocabularies.iter().min_by_key(|v| v.counts.len()).expect("non-empty");
    let tokens: Vec<String> = smallest
        .counts
        .keys()
        .filter(|t| vocabularies.iter().all(|v| v.counts.contains_key(*t)))
        .cloned()
        .collect();
    let per_language_counts = vocabularies
        .iter()
        .map(|v| (v.language.clone(), tokens.iter().map(|t| v.counts[t]).collect()))
        .collect();
    Ok(CommonVocabulary {
        tokens,
        per_language_counts,
    })
}
