use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageId;

/// The contextual vectors of one token's sampled occurrences in one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEmbeddingSet {
    pub token: String,
    /// Occurrence ids, parallel to `vectors`.
    pub occurrences: Vec<u64>,
    pub vectors: Vec<Vec<f32>>,
}

impl TokenEmbeddingSet {
    pub fn new(token: impl Into<String>, vectors: Vec<Vec<f32>>) -> Self {
        let occurrences = (0..vectors.len() as u64).collect();
        TokenEmbeddingSet {
            token: token.into(),
            occurrences,
            vectors,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(Vec::len)
    }
}

/// One language as a map from common token to its embedding set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageRepresentation {
    pub language: LanguageId,
    pub encoder_tag: String,
    pub dim: usize,
    pub sets: BTreeMap<String, TokenEmbeddingSet>,
    /// Common tokens with no usable occurrence in the test partition.
    pub dropped: Vec<String>,
    pub diagnostics: Vec<String>,
}

impl LanguageRepresentation {
    pub fn new(language: LanguageId, encoder_tag: impl Into<String>, dim: usize) -> Self {
        LanguageRepresentation {
            language,
            encoder_tag: encoder_tag.into(),
            dim,
            sets: BTreeMap::new(),
            dropped: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn insert(&mut self, set: TokenEmbeddingSet) {
        self.sets.insert(set.token.clone(), set);
    }

    pub fn vector_count(&self) -> usize {
        self.sets.values().map(TokenEmbeddingSet::len).sum()
    }
}
