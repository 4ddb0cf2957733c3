//! Naive reference implementation of every similarity level.
//!
//! Plain nested loops over the raw vectors with a fresh cosine per pair and
//! no normalization cache. Slow, but shares no code path with the kernel
//! beyond [`super::cosine`].

use std::collections::BTreeMap;

use super::{cosine, LanguageComparison, SelfSimilarityDistribution, SimilarityMatrix, SimilarityScore};
use crate::encoder::{LanguageRepresentation, TokenEmbeddingSet};
use crate::error::{Error, Result};

pub fn directed_token_similarity(v: &[f32], target: &TokenEmbeddingSet) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::EmptySet(target.token.clone()));
    }
    let mut best = f64::NEG_INFINITY;
    for t in &target.vectors {
        let c = cosine(v, t)?.value();
        if c > best {
            best = c;
        }
    }
    Ok(best)
}

pub fn token_set_similarity(source: &TokenEmbeddingSet, target: &TokenEmbeddingSet) -> Result<f64> {
    if source.is_empty() {
        return Err(Error::EmptySet(source.token.clone()));
    }
    let mut sum = 0.0;
    for v in &source.vectors {
        sum += directed_token_similarity(v, target)?;
    }
    Ok(sum / source.len() as f64)
}

pub fn language_similarity(a: &LanguageRepresentation, b: &LanguageRepresentation) -> Result<LanguageComparison> {
    if a.dim != b.dim {
        return Err(Error::WidthMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    let mut per_token = Vec::new();
    for (token, set) in &a.sets {
        if let Some(other) = b.sets.get(token) {
            per_token.push((token.clone(), token_set_similarity(set, other)?));
        }
    }
    if per_token.is_empty() {
        return Err(Error::NoSharedTokens(a.language.to_string(), b.language.to_string()));
    }
    let mean = per_token.iter().map(|(_, s)| *s).sum::<f64>() / per_token.len() as f64;
    Ok(LanguageComparison {
        score: SimilarityScore::new(mean),
        only_in_source: a.sets.len() - per_token.len(),
        only_in_target: b.sets.len() - per_token.len(),
        per_token,
    })
}

pub fn pairwise_matrix(reps: &[LanguageRepresentation]) -> Result<SimilarityMatrix> {
    let n = reps.len();
    let mut directed = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            directed[i][j] = language_similarity(&reps[i], &reps[j])
                .map_err(|e| Error::Pair {
                    a: reps[i].language.to_string(),
                    b: reps[j].language.to_string(),
                    source: Box::new(e),
                })?
                .score
                .value();
        }
    }
    Ok(SimilarityMatrix::from_directed(
        reps.iter().map(|r| r.language.clone()).collect(),
        directed,
    ))
}

pub fn self_similarity(rep: &LanguageRepresentation) -> Result<SelfSimilarityDistribution> {
    let mut scores = BTreeMap::new();
    let mut singletons = 0;
    for (token, set) in &rep.sets {
        if set.len() < 2 {
            singletons += 1;
            continue;
        }
        let mut sum = 0.0;
        for (i, v) in set.vectors.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for (j, w) in set.vectors.iter().enumerate() {
                if i != j {
                    best = best.max(cosine(v, w)?.value());
                }
            }
            sum += best;
        }
        scores.insert(token.clone(), sum / set.len() as f64);
    }
    if scores.is_empty() {
        return Err(Error::AllSingletons(rep.language.to_string()));
    }
    Ok(SelfSimilarityDistribution::from_scores(rep.language.clone(), scores, singletons))
}
