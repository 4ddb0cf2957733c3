//! Text formats for similarity results: CSV grids, the per-token TSV
//! breakdown and self-similarity score files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{PerTokenScore, SelfSimilarityDistribution, SimilarityMatrix};
use crate::corpus::LanguageId;
use crate::error::{Error, Result};
use crate::escape::{escape_field, unescape_field};

pub const SELFSIM_HEADER: &str = "#plsim-selfsim v1";
pub const DIRECTED_CSV: &str = "directed.csv";
pub const SYMMETRIZED_CSV: &str = "symmetrized.csv";
pub const PER_TOKEN_TSV: &str = "per_token.tsv";

/// Renders a square grid with a header row and column of language ids.
pub fn grid_to_csv(languages: &[LanguageId], grid: &[Vec<f64>], decimals: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["language".to_string()];
    header.extend(languages.iter().map(|l| l.to_string()));
    w.write_record(&header)?;
    for (lang, row) in languages.iter().zip(grid) {
        let mut record = vec![lang.to_string()];
        record.extend(row.iter().map(|v| format!("{v:.decimals$}")));
        w.write_record(&record)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Archive(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn grid_from_csv(text: &str) -> Result<(Vec<LanguageId>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let languages: Vec<LanguageId> = reader
        .headers()?
        .iter()
        .skip(1)
        .map(LanguageId::new)
        .collect::<Result<_>>()?;
    let mut grid = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let err = |m: String| Error::parse("matrix csv", i + 2, m);
        if record.len() != languages.len() + 1 {
            return Err(err("wrong number of columns".into()));
        }
        if languages.get(i).map(LanguageId::as_str) != record.get(0) {
            return Err(err("row label does not match header order".into()));
        }
        let row = record
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| err(format!("bad value `{v}`"))))
            .collect::<Result<Vec<f64>>>()?;
        grid.push(row);
    }
    if grid.len() != languages.len() {
        return Err(Error::parse("matrix csv", 0, "grid is not square"));
    }
    Ok((languages, grid))
}

pub fn per_token_to_tsv(rows: &[PerTokenScore], decimals: usize) -> String {
    let mut out = String::from("token\tlang_a\tlang_b\tscore\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.decimals$}\n",
            escape_field(&r.token),
            r.source,
            r.target,
            r.score
        ));
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `directed.csv`, `symmetrized.csv` and `per_token.tsv` into `dir`.
pub fn write_matrix_dir(matrix: &SimilarityMatrix, dir: &Path, decimals: usize) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join(DIRECTED_CSV), &grid_to_csv(&matrix.languages, &matrix.directed, decimals)?)?;
    write(&dir.join(SYMMETRIZED_CSV), &grid_to_csv(&matrix.languages, &matrix.symmetrized, decimals)?)?;
    write(&dir.join(PER_TOKEN_TSV), &per_token_to_tsv(&matrix.per_token, decimals))
}

/// Reads a matrix directory. Only `directed.csv` is required; the
/// symmetrized grid is recomputed from it.
pub fn read_matrix_dir(dir: &Path) -> Result<SimilarityMatrix> {
    let path = dir.join(DIRECTED_CSV);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let (languages, directed) = grid_from_csv(&text)?;
    Ok(SimilarityMatrix::from_directed(languages, directed))
}

pub fn selfsim_to_text(dist: &SelfSimilarityDistribution) -> String {
    let mut out = format!(
        "{SELFSIM_HEADER} language={} excluded_singletons={}\n",
        dist.language, dist.excluded_singletons
    );
    for (token, score) in &dist.per_token_scores {
        out.push_str(&format!("{score:.9}\t{}\n", escape_field(token)));
    }
    out
}

pub fn selfsim_from_text(text: &str) -> Result<SelfSimilarityDistribution> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or_default();
    let rest = header
        .strip_prefix(SELFSIM_HEADER)
        .ok_or_else(|| Error::parse("selfsim", 1, format!("expected `{SELFSIM_HEADER}` header")))?;
    let mut language = None;
    let mut singletons = 0;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("language", v)) => language = Some(LanguageId::new(v)?),
            Some(("excluded_singletons", v)) => {
                singletons = v.parse().map_err(|_| Error::parse("selfsim", 1, "bad excluded_singletons"))?
            }
            _ => return Err(Error::parse("selfsim", 1, format!("unexpected field `{field}`"))),
        }
    }
    let language = language.ok_or_else(|| Error::parse("selfsim", 1, "missing language="))?;
    let mut scores = BTreeMap::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (score, token) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse("selfsim", idx + 1, "expected `score<TAB>token`"))?;
        let score: f64 = score.parse().map_err(|_| Error::parse("selfsim", idx + 1, "bad score"))?;
        scores.insert(unescape_field(token)?, score);
    }
    if scores.is_empty() {
        return Err(Error::AllSingletons(language.to_string()));
    }
    Ok(SelfSimilarityDistribution::from_scores(language, scores, singletons))
}

pub fn write_selfsim(dist: &SelfSimilarityDistribution, path: &Path) -> Result<()> {
    write(path, &selfsim_to_text(dist))
}

pub fn read_selfsim(path: &Path) -> Result<SelfSimilarityDistribution> {
    selfsim_from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
