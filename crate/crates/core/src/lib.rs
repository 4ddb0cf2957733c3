//! Measure how similarly a contextual code encoder represents the same
//! tokens across programming languages.
//!
//! The pipeline runs in stages, each with its own module:
//!
//! - [`corpus`]: manifests, ingestion, train/test partitioning, corpus statistics
//! - [`lexer`]: declarative comment-aware lexers for many languages
//! - [`vocab`]: per-language token counts and their common intersection
//! - [`encoder`]: a small masked-LM transformer, occurrence sampling and
//!   contextual embedding, plus the `lrep` archive format
//! - [`similarity`]: max-cosine set matching at vector, set and language level
//! - [`report`]: ordering, heatmaps and self-similarity summaries
//!
//! [`synth`] generates toy languages for experiments and [`pipeline`] wires the
//! stages together end to end.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod escape;
pub mod lexer;
pub mod pipeline;
pub mod report;
pub mod similarity;
pub mod synth;
pub mod vocab;

pub use corpus::{ingest, split, compute_stats, CorpusManifest, CorpusStats, LanguageCorpus, LanguageId, Partition};
pub use encoder::{
    build_representation, embed_occurrence, sample_occurrences, train_encoder, Encoder, EncoderConfig,
    LanguageRepresentation, OccurrenceSample, TokenEmbeddingSet,
};
pub use error::{Error, Result};
pub use lexer::{strip_comments, tokenize, LexerSpec, Token, TokenKind};
pub use report::{order_languages, render_heatmap, summarize_self_similarity, ReportConfig};
pub use similarity::{
    cosine, directed_token_similarity, language_similarity, pairwise_matrix, self_similarity,
    token_set_similarity, SelfSimilarityDistribution, SimilarityMatrix, SimilarityScore,
};
pub use vocab::{build_vocabulary, intersect, CommonVocabulary, Vocabulary};
