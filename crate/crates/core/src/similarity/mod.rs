//! Max-cosine set matching between token embedding sets.
//!
//! Scores are built in three levels:
//!
//! - vector to set: the best cosine between a vector and any member of the
//!   target set,
//! - set to set: the mean of those maxima over the source set,
//! - language to language: the mean set score over the tokens both
//!   languages kept.
//!
//! Everything is directional. [`pairwise_matrix`] stores both directions and
//! their arithmetic mean. The public functions run the pre-normalized
//! [`kernel`]; [`oracle`] holds the naive reference loops.

pub mod io;
pub mod kernel;
pub mod oracle;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::LanguageId;
use crate::encoder::{LanguageRepresentation, TokenEmbeddingSet};
use crate::error::{Error, Result};

/// A cosine-derived score, clamped to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub fn new(value: f64) -> Self {
        SimilarityScore(value.clamp(-1.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<SimilarityScore> for f64 {
    fn from(s: SimilarityScore) -> f64 {
        s.0
    }
}

pub(crate) fn check_width(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::WidthMismatch { expected, found })
    }
}

pub(crate) fn check_set(set: &TokenEmbeddingSet, dim: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptySet(set.token.clone()));
    }
    set.vectors.iter().try_for_each(|v| check_width(dim, v.len()))
}

/// `dot(u, v) / (|u| |v|)`, accumulated in f64.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<SimilarityScore> {
    check_width(u.len(), v.len())?;
    let (mut dot, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(SimilarityScore::new(dot / (uu.sqrt() * vv.sqrt())))
}

pub fn directed_token_similarity(v: &[f32], target: &TokenEmbeddingSet) -> Result<SimilarityScore> {
    check_set(target, v.len())?;
    let source = kernel::normalize_rows(std::slice::from_ref(&v.to_vec()))?;
    let target = kernel::normalize_rows(&target.vectors)?;
    Ok(SimilarityScore::new(kernel::mean_of_row_maxima(&source, &target, false)))
}

/// Mean over `source` vectors of their best match in `target`.
pub fn token_set_similarity(source: &TokenEmbeddingSet, target: &TokenEmbeddingSet) -> Result<SimilarityScore> {
    if source.token != target.token {
        return Err(Error::TokenMismatch(source.token.clone(), target.token.clone()));
    }
    let dim = source.dim().ok_or_else(|| Error::EmptySet(source.token.clone()))?;
    check_set(source, dim)?;
    check_set(target, dim)?;
    let a = kernel::normalize_rows(&source.vectors)?;
    let b = kernel::normalize_rows(&target.vectors)?;
    Ok(SimilarityScore::new(kernel::mean_of_row_maxima(&a, &b, false)))
}

/// The result of comparing one language with another in one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageComparison {
    pub score: SimilarityScore,
    /// Set similarity per shared token, ascending by token.
    pub per_token: Vec<(String, f64)>,
    /// Tokens kept by only one side and therefore skipped.
    pub only_in_source: usize,
    pub only_in_target: usize,
}

pub fn language_similarity(a: &LanguageRepresentation, b: &LanguageRepresentation) -> Result<LanguageComparison> {
    let pa = kernel::PreparedRepresentation::new(a)?;
    let pb = kernel::PreparedRepresentation::new(b)?;
    kernel::compare(&pa, &pb, false)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatrixOptions {
    /// Run the naive reference loops instead of the kernel.
    pub oracle: bool,
    /// Single-threaded, fixed summation order; bit-reproducible across machines.
    pub strict_fp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTokenScore {
    pub token: String,
    pub source: LanguageId,
    pub target: LanguageId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub languages: Vec<LanguageId>,
    /// `directed[a][b]` compares language `a` (source) against `b` (target).
    pub directed: Vec<Vec<f64>>,
    pub symmetrized: Vec<Vec<f64>>,
    #[serde(default)]
    pub per_token: Vec<PerTokenScore>,
}

impl SimilarityMatrix {
    /// Builds the symmetrized grid from a directed one.
    pub fn from_directed(languages: Vec<LanguageId>, directed: Vec<Vec<f64>>) -> Self {
        let n = languages.len();
        let symmetrized = (0..n)
            .map(|i| (0..n).map(|j| (directed[i][j] + directed[j][i]) / 2.0).collect())
            .collect();
        SimilarityMatrix {
            languages,
            directed,
            symmetrized,
            per_token: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    /// Highest minus lowest off-diagonal symmetrized score.
    pub fn spread(&self) -> Option<f64> {
        let off: Vec<f64> = self.off_diagonal().collect();
        let max = off.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = off.iter().copied().fold(f64::INFINITY, f64::min);
        (!off.is_empty()).then_some(max - min)
    }

    fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| self.symmetrized[i][j]))
    }

    pub fn index_of(&self, language: &LanguageId) -> Option<usize> {
        self.languages.iter().position(|l| l == language)
    }
}

pub fn pairwise_matrix(reps: &[LanguageRepresentation], options: MatrixOptions) -> Result<SimilarityMatrix> {
    if reps.len() < 2 {
        return Err(Error::TooFewInputs {
            needed: 2,
            got: reps.len(),
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in reps {
        check_width(reps[0].dim, r.dim)?;
        if !seen.insert(&r.language) {
            return Err(Error::DuplicateLanguage(r.language.to_string()));
        }
    }
    if options.oracle {
        return oracle::pairwise_matrix(reps);
    }

    let prepared: Vec<kernel::PreparedRepresentation> = if options.strict_fp {
        reps.iter().map(kernel::PreparedRepresentation::new).collect::<Result<_>>()?
    } else {
        reps.par_iter().map(kernel::PreparedRepresentation::new).collect::<Result<_>>()?
    };
    let n = reps.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let run = |&(i, j): &(usize, usize)| {
        kernel::compare(&prepared[i], &prepared[j], options.strict_fp).map_err(|e| Error::Pair {
            a: reps[i].language.to_string(),
            b: reps[j].language.to_string(),
            source: Box::new(e),
        })
    };
    let results: Vec<LanguageComparison> = if options.strict_fp {
        pairs.iter().map(run).collect::<Result<_>>()?
    } else {
        pairs.par_iter().map(run).collect::<Result<_>>()?
    };

    let mut directed = vec![vec![0.0; n]; n];
    let mut per_token = Vec::new();
    for (&(i, j), cmp) in pairs.iter().zip(results) {
        directed[i][j] = cmp.score.value();
        per_token.extend(cmp.per_token.into_iter().map(|(token, score)| PerTokenScore {
            token,
            source: reps[i].language.clone(),
            target: reps[j].language.clone(),
            score,
        }));
    }
    let mut matrix = SimilarityMatrix::from_directed(reps.iter().map(|r| r.language.clone()).collect(), directed);
    matrix.per_token = per_token;
    Ok(matrix)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarityDistribution {
    pub language: LanguageId,
    pub per_token_scores: BTreeMap<String, f64>,
    pub mean: f64,
    /// Population variance of the per-token scores.
    pub variance: f64,
    pub excluded_singletons: usize,
}

impl SelfSimilarityDistribution {
    pub fn from_scores(language: LanguageId, per_token_scores: BTreeMap<String, f64>, excluded_singletons: usize) -> Self {
        let n = per_token_scores.len() as f64;
        let mean = per_token_scores.values().sum::<f64>() / n;
        let variance = per_token_scores.values().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        SelfSimilarityDistribution {
            language,
            per_token_scores,
            mean,
            variance,
            excluded_singletons,
        }
    }
}

/// Set similarity of every token with itself, where each occurrence may not
/// match itself. Singleton sets are skipped and counted.
pub fn self_similarity(rep: &LanguageRepresentation) -> Result<SelfSimilarityDistribution> {
    let prepared = kernel::PreparedRepresentation::new(rep)?;
    let mut scores = BTreeMap::new();
    let mut singletons = 0;
    for (token, set) in prepared.sets() {
        match kernel::self_excluded_mean(set) {
            Some(score) => {
                scores.insert(token.to_string(), score);
            }
            None => singletons += 1,
        }
    }
    if scores.is_empty() {
        return Err(Error::AllSingletons(rep.language.to_string()));
    }
    Ok(SelfSimilarityDistribution::from_scores(rep.language.clone(), scores, singletons))
}
