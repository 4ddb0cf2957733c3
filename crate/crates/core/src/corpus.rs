//! Per-language file collections: manifests, ingestion, train/test
//! partitioning and statistics.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::lexer::{Lexer, TokenKind};

pub const MANIFEST_HEADER: &str = "#plsim-manifest v1";

/// Lowercase language identifier such as `cobol` or `c++`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageId(String);

impl LanguageId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let ok = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || "_-+#.".contains(c));
        if ok {
            Ok(LanguageId(name))
        } else {
            Err(Error::InvalidLanguage(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LanguageId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LanguageId::new(s)
    }
}

impl TryFrom<String> for LanguageId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        LanguageId::new(s)
    }
}

impl From<LanguageId> for String {
    fn from(id: LanguageId) -> String {
        id.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub byte_length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub language: LanguageId,
    pub entries: Vec<ManifestEntry>,
    /// `None` means unlimited.
    pub max_files: Option<usize>,
}

impl CorpusManifest {
    pub fn new(language: LanguageId, files: Vec<PathBuf>, max_files: Option<usize>) -> Result<Self> {
        let entries = files
            .into_iter()
            .map(|path| ManifestEntry { path, byte_length: 0 })
            .collect();
        let manifest = CorpusManifest {
            language,
            entries,
            max_files,
        };
        manifest.check_unique()?;
        Ok(manifest)
    }

    /// Every regular file under `root`, sorted lexicographically by full path.
    pub fn scan_dir(language: LanguageId, root: &Path, max_files: Option<usize>) -> Result<Self> {
        let mut entries = Vec::new();
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
                Error::io(path, e.into())
            })?;
            if entry.file_type().is_file() {
                let byte_length = entry.metadata().map(|m| m.len()).unwrap_or(0);
                entries.push(ManifestEntry {
                    path: entry.into_path(),
                    byte_length,
                });
            }
        }
        entries.sort_by(|a, b| a.path.as_os_str().cmp(b.path.as_os_str()));
        Ok(CorpusManifest {
            language,
            entries,
            max_files,
        })
    }

    pub fn files(&self) -> impl Iterator<Item = &Path> {
        self.entries.iter().map(|e| e.path.as_path())
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.path) {
                return Err(Error::parse(
                    "manifest",
                    0,
                    format!("duplicate path {}", e.path.display()),
                ));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse("manifest", 1, "empty manifest file"))?;
        let rest = header
            .strip_prefix(MANIFEST_HEADER)
            .ok_or_else(|| Error::parse("manifest", 1, format!("expected `{MANIFEST_HEADER}` header")))?;
        let mut language = None;
        let mut max_files = None;
        let mut saw_max = false;
        for field in rest.split_whitespace() {
            match field.split_once('=') {
                Some(("language", v)) => language = Some(LanguageId::new(v)?),
                Some(("max_files", "inf")) => saw_max = true,
                Some(("max_files", v)) => {
                    let n: usize = v
                        .parse()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or_else(|| Error::parse("manifest", 1, format!("bad max_files `{v}`")))?;
                    max_files = Some(n);
                    saw_max = true;
                }
                _ => return Err(Error::parse("manifest", 1, format!("unexpected header field `{field}`"))),
            }
        }
        let language = language.ok_or_else(|| Error::parse("manifest", 1, "header lacks language="))?;
        if !saw_max {
            return Err(Error::parse("manifest", 1, "header lacks max_files="));
        }
        let mut entries = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (path, len) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse("manifest", idx + 1, "expected `path<TAB>byte_length`"))?;
            let byte_length = len
                .parse()
                .map_err(|_| Error::parse("manifest", idx + 1, format!("bad byte length `{len}`")))?;
            entries.push(ManifestEntry {
                path: PathBuf::from(path),
                byte_length,
            });
        }
        let manifest = CorpusManifest {
            language,
            entries,
            max_files,
        };
        manifest.check_unique()?;
        Ok(manifest)
    }

    pub fn to_text(&self) -> String {
        let max = self.max_files.map(|n| n.to_string()).unwrap_or_else(|| "inf".into());
        let mut out = format!("{MANIFEST_HEADER} language={} max_files={max}\n", self.language);
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\n", e.path.display(), e.byte_length));
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: PathBuf,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageCorpus {
    pub language: LanguageId,
    pub files: Vec<SourceFile>,
    pub partition: Vec<Partition>,
    /// Per-file notes, e.g. lossy UTF-8 decoding.
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl LanguageCorpus {
    /// Builds an in-memory corpus with every file tagged `Train`.
    pub fn from_texts<P: Into<PathBuf>, S: Into<String>>(
        language: LanguageId,
        files: impl IntoIterator<Item = (P, S)>,
    ) -> Self {
        let files: Vec<SourceFile> = files
            .into_iter()
            .map(|(path, text)| SourceFile {
                path: path.into(),
                text: text.into(),
            })
            .collect();
        let partition = vec![Partition::Train; files.len()];
        LanguageCorpus {
            language,
            files,
            partition,
            diagnostics: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn train_count(&self) -> usize {
        self.partition.iter().filter(|&&p| p == Partition::Train).count()
    }

    pub fn test_count(&self) -> usize {
        self.len() - self.train_count()
    }

    /// `(index, file)` pairs of one partition in canonical order.
    pub fn files_in(&self, part: Partition) -> impl Iterator<Item = (usize, &SourceFile)> {
        self.files
            .iter()
            .enumerate()
            .filter(move |(i, _)| self.partition[*i] == part)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Reads the manifest's files in order, truncated to `max_files`.
///
/// Invalid UTF-8 is replaced with U+FFFD and noted in the corpus diagnostics.
pub fn ingest(manifest: &CorpusManifest) -> Result<LanguageCorpus> {
    if manifest.entries.is_empty() {
        return Err(Error::EmptyManifest(manifest.language.to_string()));
    }
    let take = manifest.max_files.unwrap_or(usize::MAX).min(manifest.entries.len());
    let read: Vec<Result<(SourceFile, Option<String>)>> = manifest.entries[..take]
        .par_iter()
        .map(|entry| {
            let bytes = fs::read(&entry.path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingFile(entry.path.clone()),
                _ => Error::io(&entry.path, e),
            })?;
            let (text, note) = match String::from_utf8(bytes) {
                Ok(text) => (text, None),
                Err(err) => {
                    let text = String::from_utf8_lossy(err.as_bytes()).into_owned();
                    let note = format!("{}: invalid UTF-8 replaced with U+FFFD", entry.path.display());
                    (text, Some(note))
                }
            };
            Ok((
                SourceFile {
                    path: entry.path.clone(),
                    text,
                },
                note,
            ))
        })
        .collect();

    let mut files = Vec::with_capacity(take);
    let mut diagnostics = Vec::new();
    for item in read {
        let (file, note) = item?;
        files.push(file);
        diagnostics.extend(note);
    }
    let partition = vec![Partition::Train; files.len()];
    Ok(LanguageCorpus {
        language: manifest.language.clone(),
        files,
        partition,
        diagnostics,
    })
}

/// Tags the first `floor(n * train_fraction)` files `Train` and the rest `Test`.
pub fn split(corpus: &LanguageCorpus, train_fraction: f64) -> Result<LanguageCorpus> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::TrainFraction(train_fraction));
    }
    let n = corpus.len();
    let n_train = train_count(n, train_fraction);
    let mut out = corpus.clone();
    out.partition = (0..n)
        .map(|i| if i < n_train { Partition::Train } else { Partition::Test })
        .collect();
    Ok(out)
}

fn train_count(n: usize, fraction: f64) -> usize {
    // Nudge so that e.g. 10 * 0.9 = 8.999999999999998 still floors to 9.
    let raw = n as f64 * fraction;
    let nudged = raw + raw.abs() * 1e-12;
    (nudged.floor() as usize).min(n)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub language: LanguageId,
    pub file_count: usize,
    /// All tokens, comments included.
    pub token_count: u64,
    pub comment_token_count: u64,
    pub skipped: Vec<PathBuf>,
}

pub fn compute_stats(corpus: &LanguageCorpus, lexer: &Lexer) -> CorpusStats {
    let per_file: Vec<Option<(u64, u64)>> = corpus
        .files
        .par_iter()
        .map(|f| match lexer.tokenize_checked(&f.text, &f.path) {
            Ok(lexed) => {
                let comments = lexed.tokens.iter().filter(|t| t.kind == TokenKind::Comment).count();
                Some((lexed.tokens.len() as u64, comments as u64))
            }
            Err(err) => {
                log::warn!("{err}");
                None
            }
        })
        .collect();

    let mut stats = CorpusStats {
        language: corpus.language.clone(),
        file_count: 0,
        token_count: 0,
        comment_token_count: 0,
        skipped: Vec::new(),
    };
    for (file, counts) in corpus.files.iter().zip(per_file) {
        match counts {
            Some((tokens, comments)) => {
                stats.file_count += 1;
                stats.token_count += tokens;
                stats.comment_token_count += comments;
            }
            None => stats.skipped.push(file.path.clone()),
        }
    }
    stats
}
