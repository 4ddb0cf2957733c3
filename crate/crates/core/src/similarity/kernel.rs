//! Pre-normalized set matching.
//!
//! Every set is turned into a row-major matrix of unit rows once, so a set
//! comparison becomes one matrix product followed by row maxima. Products
//! are taken in row blocks to bound the scratch matrix.

use std::collections::BTreeMap;

use ndarray::{s, Array2, ArrayView1, Axis};

use super::{check_width, LanguageComparison, SimilarityScore};
use crate::corpus::LanguageId;
use crate::encoder::LanguageRepresentation;
use crate::error::{Error, Result};

const ROW_BLOCK: usize = 256;

pub fn normalize_rows(vectors: &[Vec<f32>]) -> Result<Array2<f64>> {
    let dim = vectors.first().map(Vec::len).unwrap_or(0);
    let mut out = Array2::<f64>::zeros((vectors.len(), dim));
    for (mut row, v) in out.rows_mut().into_iter().zip(vectors) {
        check_width(dim, v.len())?;
        let norm = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        for (dst, &x) in row.iter_mut().zip(v) {
            *dst = f64::from(x) / norm;
        }
    }
    Ok(out)
}

fn dot_sequential(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).fold(0.0, |acc, p| acc + p)
}

/// Mean over rows of `source` of the best dot product with any row of `target`.
///
/// `strict` uses plain loops with a fixed summation order instead of the
/// blocked matrix product.
pub fn mean_of_row_maxima(source: &Array2<f64>, target: &Array2<f64>, strict: bool) -> f64 {
    let n = source.nrows();
    let mut total = 0.0;
    if strict {
        for row in source.rows() {
            let best = target
                .rows()
                .into_iter()
                .map(|t| dot_sequential(row, t))
                .fold(f64::NEG_INFINITY, f64::max);
            total += best;
        }
    } else {
        let target_t = target.t();
        for start in (0..n).step_by(ROW_BLOCK) {
            let end = (start + ROW_BLOCK).min(n);
            let block = source.slice(s![start..end, ..]).dot(&target_t);
            for row in block.axis_iter(Axis(0)) {
                total += row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
        }
    }
    total / n as f64
}

/// Mean over rows of the best dot product with any *other* row; `None` for
/// fewer than two rows.
pub fn self_excluded_mean(set: &Array2<f64>) -> Option<f64> {
    let n = set.nrows();
    if n < 2 {
        return None;
    }
    let mut total = 0.0;
    for start in (0..n).step_by(ROW_BLOCK) {
        let end = (start + ROW_BLOCK).min(n);
        let block = set.slice(s![start..end, ..]).dot(&set.t());
        for (offset, row) in block.axis_iter(Axis(0)).enumerate() {
            let me = start + offset;
            let best = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != me)
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            total += best.clamp(-1.0, 1.0);
        }
    }
    Some(total / n as f64)
}

/// A representation with every set normalized, ready for repeated comparisons.
pub struct PreparedRepresentation {
    pub language: LanguageId,
    pub dim: usize,
    sets: BTreeMap<String, Array2<f64>>,
}

impl PreparedRepresentation {
    pub fn new(rep: &LanguageRepresentation) -> Result<Self> {
        let mut sets = BTreeMap::new();
        for (token, set) in &rep.sets {
            super::check_set(set, rep.dim)?;
            sets.insert(token.clone(), normalize_rows(&set.vectors)?);
        }
        Ok(PreparedRepresentation {
            language: rep.language.clone(),
            dim: rep.dim,
            sets,
        })
    }

    pub fn sets(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.sets.iter().map(|(k, v)| (k.as_str(), v))
    }
}

pub fn compare(a: &PreparedRepresentation, b: &PreparedRepresentation, strict: bool) -> Result<LanguageComparison> {
    check_width(a.dim, b.dim)?;
    let mut per_token = Vec::new();
    for (token, sa) in &a.sets {
        if let Some(sb) = b.sets.get(token) {
            let score = mean_of_row_maxima(sa, sb, strict).clamp(-1.0, 1.0);
            per_token.push((token.clone(), score));
        }
    }
    if per_token.is_empty() {
        return Err(Error::NoSharedTokens(a.language.to_string(), b.language.to_string()));
    }
    let mean = per_token.iter().map(|(_, s)| s).sum::<f64>() / per_token.len() as f64;
    Ok(LanguageComparison {
        score: SimilarityScore::new(mean),
        only_in_source: a.sets.len() - per_token.len(),
        only_in_target: b.sets.len() - per_token.len(),
        per_token,
    })
}
