//! Ordering, heatmap rendering and self-similarity summaries.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageId;
use crate::error::{Error, Result};
use crate::similarity::io::{grid_to_csv, DIRECTED_CSV, SYMMETRIZED_CSV};
use crate::similarity::{SelfSimilarityDistribution, SimilarityMatrix};

pub const HEATMAP_SVG: &str = "heatmap.svg";
pub const SELFSIM_TSV: &str = "selfsim.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    #[default]
    AverageSimilarity,
    InputOrder,
}

impl FromStr for SortOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" | "average_similarity" => Ok(SortOrder::AverageSimilarity),
            "input" | "input_order" => Ok(SortOrder::InputOrder),
            _ => Err(Error::Unknown {
                what: "sort order",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub sort: SortOrder,
    pub color_low: [u8; 3],
    pub color_high: [u8; 3],
    pub decimals: usize,
    pub include_directed: bool,
    /// Color over the fixed range [-1, 1] instead of the matrix's own range.
    pub abs_scale: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            sort: SortOrder::AverageSimilarity,
            color_low: [247, 251, 255],
            color_high: [8, 48, 107],
            decimals: 6,
            include_directed: true,
            abs_scale: false,
        }
    }
}

impl ReportConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=9).contains(&self.decimals) {
            return Err(Error::ReportConfig(format!("decimals {} outside 1..=9", self.decimals)));
        }
        Ok(())
    }
}

/// Mean of each row's off-diagonal symmetrized scores. A lone language has
/// no partner and averages 0.
pub fn row_averages(matrix: &SimilarityMatrix) -> Vec<f64> {
    let n = matrix.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                return 0.0;
            }
            let sum: f64 = (0..n).filter(|&j| j != i).map(|j| matrix.symmetrized[i][j]).sum();
            sum / (n - 1) as f64
        })
        .collect()
}

/// Languages by descending average similarity to all others, ties broken by
/// ascending id.
pub fn order_languages(matrix: &SimilarityMatrix) -> Vec<LanguageId> {
    let avg = row_averages(matrix);
    let mut idx: Vec<usize> = (0..matrix.len()).collect();
    idx.sort_by(|&a, &b| {
        avg[b]
            .partial_cmp(&avg[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| matrix.languages[a].cmp(&matrix.languages[b]))
    });
    idx.into_iter().map(|i| matrix.languages[i].clone()).collect()
}

/// The matrix with rows and columns permuted into `order`.
pub fn reorder(matrix: &SimilarityMatrix, order: &[LanguageId]) -> Result<SimilarityMatrix> {
    let idx: Vec<usize> = order
        .iter()
        .map(|l| {
            matrix.index_of(l).ok_or_else(|| Error::Unknown {
                what: "language",
                name: l.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    if idx.len() != matrix.len() {
        return Err(Error::ReportConfig("order is not a permutation of the matrix languages".into()));
    }
    let permute = |grid: &[Vec<f64>]| -> Vec<Vec<f64>> {
        idx.iter().map(|&i| idx.iter().map(|&j| grid[i][j]).collect()).collect()
    };
    Ok(SimilarityMatrix {
        languages: order.to_vec(),
        directed: permute(&matrix.directed),
        symmetrized: permute(&matrix.symmetrized),
        per_token: matrix.per_token.clone(),
    })
}

/// Value range used for coloring: the off-diagonal min..max of the grid,
/// or [-1, 1] in absolute mode. Diagonal cells are clamped into it.
pub fn color_range(grid: &[Vec<f64>], abs_scale: bool) -> (f64, f64) {
    if abs_scale {
        return (-1.0, 1.0);
    }
    let n = grid.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, row) in grid.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i != j || n == 1 {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    (lo, hi)
}

/// Linear interpolation between the endpoints; an empty range maps
/// everything to `color_high`.
pub fn cell_color(value: f64, range: (f64, f64), config: &ReportConfig) -> [u8; 3] {
    let (lo, hi) = range;
    let t = if hi > lo { ((value - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 1.0 };
    let mut out = [0u8; 3];
    for (c, (&a, &b)) in out.iter_mut().zip(config.color_low.iter().zip(&config.color_high)) {
        *c = (f64::from(a) + t * (f64::from(b) - f64::from(a))).round() as u8;
    }
    out
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const CELL: usize = 48;
const MARGIN: usize = 96;

/// An SVG grid of the symmetrized scores in the matrix's current order.
pub fn heatmap_svg(matrix: &SimilarityMatrix, config: &ReportConfig) -> String {
    let n = matrix.len();
    let range = color_range(&matrix.symmetrized, config.abs_scale);
    let size = MARGIN + n * CELL + 8;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    for (k, lang) in matrix.languages.iter().enumerate() {
        let label = escape_xml(lang.as_str());
        let mid = MARGIN + k * CELL + CELL / 2;
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{mid}\" text-anchor=\"end\" dominant-baseline=\"middle\">{label}</text>",
            MARGIN - 6
        );
        let _ = writeln!(
            out,
            "<text x=\"{mid}\" y=\"{}\" text-anchor=\"start\" transform=\"rotate(-45 {mid} {})\">{label}</text>",
            MARGIN - 6,
            MARGIN - 6
        );
    }
    let text_digits = config.decimals.min(2);
    for (i, row) in matrix.symmetrized.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let [r, g, b] = cell_color(v, range, config);
            let (x, y) = (MARGIN + j * CELL, MARGIN + i * CELL);
            let luminance = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
            let ink = if luminance < 128.0 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                out,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"#{r:02x}{g:02x}{b:02x}\"><title>{} / {}: {v:.prec$}</title></rect>",
                escape_xml(matrix.languages[i].as_str()),
                escape_xml(matrix.languages[j].as_str()),
                prec = config.decimals
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" dominant-baseline=\"middle\" fill=\"{ink}\">{v:.text_digits$}</text>",
                x + CELL / 2,
                y + CELL / 2
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOutput {
    pub order: Vec<LanguageId>,
    pub files: Vec<PathBuf>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `symmetrized.csv`, optionally `directed.csv`, and `heatmap.svg`
/// into `dir`, all in the configured order.
pub fn render_heatmap(matrix: &SimilarityMatrix, config: &ReportConfig, dir: &Path) -> Result<HeatmapOutput> {
    config.validate()?;
    let order = match config.sort {
        SortOrder::AverageSimilarity => order_languages(matrix),
        SortOrder::InputOrder => matrix.languages.clone(),
    };
    let sorted = reorder(matrix, &order)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let path = dir.join(SYMMETRIZED_CSV);
    write(&path, &grid_to_csv(&sorted.languages, &sorted.symmetrized, config.decimals)?)?;
    files.push(path);
    if config.include_directed {
        let path = dir.join(DIRECTED_CSV);
        write(&path, &grid_to_csv(&sorted.languages, &sorted.directed, config.decimals)?)?;
        files.push(path);
    }
    let path = dir.join(HEATMAP_SVG);
    write(&path, &heatmap_svg(&sorted, config))?;
    files.push(path);
    Ok(HeatmapOutput { order, files })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarityRow {
    pub language: LanguageId,
    pub tokens: usize,
    pub excluded_singletons: usize,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Change in mean and variance against the baseline run, when given.
    pub delta_mean: Option<f64>,
    pub delta_variance: Option<f64>,
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One row per distribution. With a `baseline` (e.g. the from-scratch run
/// when `dists` are finetuned), rows for languages present in both get
/// deltas `dist - baseline`.
pub fn summarize_self_similarity(
    dists: &[SelfSimilarityDistribution],
    baseline: Option<&[SelfSimilarityDistribution]>,
) -> Vec<SelfSimilarityRow> {
    let base: BTreeMap<&LanguageId, &SelfSimilarityDistribution> =
        baseline.unwrap_or_default().iter().map(|d| (&d.language, d)).collect();
    dists
        .iter()
        .map(|d| {
            let mut scores: Vec<f64> = d.per_token_scores.values().copied().collect();
            scores.sort_by(f64::total_cmp);
            let b = base.get(&d.language);
            SelfSimilarityRow {
                language: d.language.clone(),
                tokens: scores.len(),
                excluded_singletons: d.excluded_singletons,
                mean: d.mean,
                variance: d.variance,
                min: scores.first().copied().unwrap_or(f64::NAN),
                q1: quantile(&scores, 0.25),
                median: quantile(&scores, 0.5),
                q3: quantile(&scores, 0.75),
                max: scores.last().copied().unwrap_or(f64::NAN),
                delta_mean: b.map(|b| d.mean - b.mean),
                delta_variance: b.map(|b| d.variance - b.variance),
            }
        })
        .collect()
}

pub fn selfsim_table_to_tsv(rows: &[SelfSimilarityRow], decimals: usize) -> String {
    let mut out = String::from("# variance is the population variance (divides by the number of tokens)\n");
    out.push_str("language\ttokens\texcluded_singletons\tmean\tvariance\tmin\tq1\tmedian\tq3\tmax\tdelta_mean\tdelta_variance\n");
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.decimals$}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.d$}\t{:.d$}\t{:.d$}\t{:.d$}\t{:.d$}\t{:.d$}\t{:.d$}\t{}\t{}",
            r.language,
            r.tokens,
            r.excluded_singletons,
            r.mean,
            r.variance,
            r.min,
            r.q1,
            r.median,
            r.q3,
            r.max,
            opt(r.delta_mean),
            opt(r.delta_variance),
            d = decimals
        );
    }
    out
}

pub fn write_selfsim_table(rows: &[SelfSimilarityRow], decimals: usize, path: &Path) -> Result<()> {
    write(path, &selfsim_table_to_tsv(rows, decimals))
}
