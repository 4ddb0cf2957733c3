//! The contextual encoder: subword tokenizer, masked-LM training, occurrence
//! sampling and embedding into per-language representations.

mod archive;
pub mod bpe;
pub mod model;
pub mod nn;
mod repr;
mod sample;
pub mod train;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use archive::{export_archive, import_archive, parse_archive, to_archive_text};
pub use bpe::SubwordTokenizer;
pub use model::{ModelShape, Params};
pub use repr::{LanguageRepresentation, TokenEmbeddingSet};
pub use sample::{
    collect_samples, read_samples, sample_occurrences, samples_from_text, samples_to_text, token_seed, write_samples,
    ContextWindow, OccurrenceIndex, OccurrenceSample, SAMPLES_HEADER,
};
pub use train::fit_tokenizer;

use crate::corpus::{LanguageCorpus, LanguageId};
use crate::error::{Error, Result};
use crate::lexer::Lexer;
use crate::vocab::CommonVocabulary;

pub const CHECKPOINT_FORMAT: &str = "plsim-encoder";
pub const CHECKPOINT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    /// Lexer tokens of context on each side of a sampled occurrence.
    pub left_context: usize,
    pub right_context: usize,
    /// Longest subword sequence the model accepts.
    pub max_positions: usize,
    pub subword_vocab_size: usize,
    pub mask_fraction: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 64,
            layers: 2,
            heads: 4,
            ff_dim: 256,
            left_context: 64,
            right_context: 64,
            max_positions: 160,
            subword_vocab_size: 4096,
            mask_fraction: 0.15,
            steps: 2000,
            batch_size: 8,
            learning_rate: 1e-3,
            warmup_steps: 100,
            weight_decay: 0.01,
            grad_clip: 1.0,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::EncoderConfig(m));
        if self.dim == 0 || self.heads == 0 || self.dim % self.heads != 0 {
            return bad(format!("dim {} must be a positive multiple of heads {}", self.dim, self.heads));
        }
        if self.layers == 0 || self.ff_dim == 0 {
            return bad("layers and ff_dim must be positive".into());
        }
        if self.max_positions < 2 {
            return bad("max_positions must be at least 2".into());
        }
        if self.subword_vocab_size <= bpe::SPECIALS.len() {
            return bad(format!("subword vocabulary of {} leaves no room", self.subword_vocab_size));
        }
        if !(self.mask_fraction > 0.0 && self.mask_fraction < 1.0) {
            return bad(format!("mask fraction {} is outside (0, 1)", self.mask_fraction));
        }
        if self.steps == 0 || self.batch_size == 0 {
            return bad("steps and batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0) || !(self.grad_clip > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning rate and clip must be positive, weight decay non-negative".into());
        }
        Ok(())
    }

    pub fn shape(&self, vocab: usize) -> ModelShape {
        ModelShape {
            vocab,
            dim: self.dim,
            layers: self.layers,
            heads: self.heads,
            ff: self.ff_dim,
            max_positions: self.max_positions,
        }
    }

    pub fn window(&self) -> ContextWindow {
        ContextWindow {
            left: self.left_context,
            right: self.right_context,
        }
    }
}

/// Which hidden state an embedding is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerChoice {
    /// Output of the final LayerNorm.
    #[default]
    Last,
    /// Residual stream after block `k`; 0 is the embedding sum.
    Index(usize),
}

impl std::str::FromStr for LayerChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(LayerChoice::Last),
            _ => s
                .parse()
                .map(LayerChoice::Index)
                .map_err(|_| Error::EncoderConfig(format!("layer must be `last` or an index, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Mean,
    First,
}

impl std::str::FromStr for Pooling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "first" => Ok(Pooling::First),
            _ => Err(Error::EncoderConfig(format!("pooling must be `mean` or `first`, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedOptions {
    pub layer: LayerChoice,
    /// Replace the target's pieces with `[MASK]` before the forward pass.
    pub masked_target: bool,
    pub pooling: Pooling,
}

/// A trained encoder with its tokenizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub tag: String,
    pub config: EncoderConfig,
    pub tokenizer: SubwordTokenizer,
    pub params: Params<f32>,
    pub loss_history: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u64,
    tag: String,
    config: EncoderConfig,
    tokenizer: SubwordTokenizer,
    shape: ModelShape,
    params: Vec<Vec<f32>>,
    loss_history: Vec<f32>,
}

/// The piece sequence fed to the model for one occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedInput {
    pub ids: Vec<u32>,
    /// Piece range of the target lexeme within `ids`.
    pub target: std::ops::Range<usize>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f32>,
    pub truncated: bool,
}

/// Keeps `cap` ids around `target`, splitting the excess evenly between the
/// two sides; a target longer than `cap` keeps its first pieces.
fn center_truncate(len: usize, target: std::ops::Range<usize>, cap: usize) -> std::ops::Range<usize> {
    if len <= cap {
        return 0..len;
    }
    let tl = target.len();
    if tl >= cap {
        return target.start..target.start + cap;
    }
    let extra = cap - tl;
    let left_avail = target.start;
    let right_avail = len - target.end;
    let mut left = (extra / 2).min(left_avail);
    let right = (extra - left).min(right_avail);
    left = (extra - right).min(left_avail);
    target.start - left..target.end + right
}

impl Encoder {
    pub fn default_tag(language: &LanguageId, config: &EncoderConfig) -> String {
        format!(
            "plsim-mlm/{language}/d{}-l{}-h{}/seed{}",
            config.dim, config.layers, config.heads, config.seed
        )
    }

    pub fn shape(&self) -> ModelShape {
        self.params.shape
    }

    /// Continues masked-LM training of this encoder on another corpus.
    pub fn finetune(&self, corpus: &LanguageCorpus, lexer: &Lexer, config: &EncoderConfig) -> Result<Encoder> {
        let out = train::run(corpus, lexer, &self.tokenizer, config, Some(self.params.clone()))?;
        Ok(Encoder {
            tag: format!("{}+ft/{}", self.tag, corpus.language),
            config: config.clone(),
            tokenizer: self.tokenizer.clone(),
            params: out.params,
            loss_history: out.loss_history,
        })
    }

    pub fn prepare(&self, sample: &OccurrenceSample, options: &EmbedOptions) -> PreparedInput {
        let mut ids = Vec::new();
        let mut target = 0..0;
        for (i, lexeme) in sample.context.iter().enumerate() {
            let pieces = self.tokenizer.encode(lexeme);
            if i == sample.target_offset {
                target = ids.len()..ids.len() + pieces.len();
            }
            ids.extend(pieces);
        }
        let keep = center_truncate(ids.len(), target.clone(), self.params.shape.max_positions);
        let truncated = keep.len() < ids.len();
        let target = target.start - keep.start..target.end.min(keep.end) - keep.start;
        let mut ids = ids[keep].to_vec();
        if options.masked_target {
            ids[target.clone()].fill(bpe::MASK);
        }
        PreparedInput { ids, target, truncated }
    }

    /// Hidden states, one row per input piece, at the chosen layer.
    pub fn hidden_states(&self, ids: &[u32], layer: LayerChoice) -> Result<ndarray::Array2<f32>> {
        let mut fwd = self.params.forward(ids);
        match layer {
            LayerChoice::Last => Ok(fwd.hidden),
            LayerChoice::Index(k) if k < fwd.residual.len() => Ok(fwd.residual.swap_remove(k)),
            LayerChoice::Index(k) => Err(Error::EncoderConfig(format!(
                "layer {k} out of range 0..={}",
                self.params.shape.layers
            ))),
        }
    }

    pub fn embed(&self, sample: &OccurrenceSample, options: &EmbedOptions) -> Result<Embedding> {
        let input = self.prepare(sample, options);
        if input.target.is_empty() {
            return Err(Error::EncoderConfig(format!("token `{}` encodes to no pieces", sample.token)));
        }
        let hidden = self.hidden_states(&input.ids, options.layer)?;
        let vector = match options.pooling {
            Pooling::First => hidden.row(input.target.start).to_vec(),
            Pooling::Mean => {
                let rows = hidden.slice(ndarray::s![input.target.clone(), ..]);
                rows.mean_axis(ndarray::Axis(0)).expect("non-empty").to_vec()
            }
        };
        Ok(Embedding {
            vector,
            truncated: input.truncated,
        })
    }

    /// Embeds `samples` and groups them into token sets. Zero vectors are
    /// dropped with a diagnostic.
    pub fn represent(
        &self,
        language: &LanguageId,
        samples: &[OccurrenceSample],
        dropped: Vec<String>,
        options: &EmbedOptions,
    ) -> Result<LanguageRepresentation> {
        let embedded: Vec<Embedding> = samples
            .par_iter()
            .map(|s| self.embed(s, options))
            .collect::<Result<_>>()?;
        let mut rep = LanguageRepresentation::new(language.clone(), self.tag.clone(), self.params.shape.dim);
        rep.dropped = dropped;
        let mut grouped: BTreeMap<String, TokenEmbeddingSet> = BTreeMap::new();
        for (s, e) in samples.iter().zip(embedded) {
            if e.truncated {
                rep.diagnostics
                    .push(format!("context of `{}` occurrence {} truncated", s.token, s.occ_id));
            }
            if e.vector.iter().all(|&x| x == 0.0) {
                rep.diagnostics
                    .push(format!("dropped zero vector for `{}` occurrence {}", s.token, s.occ_id));
                continue;
            }
            let set = grouped.entry(s.token.clone()).or_insert_with(|| TokenEmbeddingSet {
                token: s.token.clone(),
                occurrences: Vec::new(),
                vectors: Vec::new(),
            });
            set.occurrences.push(s.occ_id);
            set.vectors.push(e.vector);
        }
        for token in samples.iter().map(|s| &s.token) {
            if !grouped.contains_key(token) && !rep.dropped.contains(token) {
                rep.dropped.push(token.clone());
            }
        }
        rep.dropped.sort();
        rep.sets = grouped;
        if rep.sets.is_empty() {
            return Err(Error::DegenerateRepresentation(language.to_string()));
        }
        Ok(rep)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            tag: self.tag.clone(),
            config: self.config.clone(),
            tokenizer: self.tokenizer.clone(),
            shape: self.params.shape,
            params: self.params.to_vecs(),
            loss_history: self.loss_history.clone(),
        };
        fs::write(path, serde_json::to_string(&ck)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Encoder> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                what: "checkpoint",
                found: ck.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if ck.shape.vocab != ck.tokenizer.vocab_size() {
            return Err(Error::Checkpoint("tokenizer and embedding table disagree".into()));
        }
        let params = Params::from_vecs(ck.shape, &ck.params)
            .ok_or_else(|| Error::Checkpoint("parameter tensors do not match the shape".into()))?;
        Ok(Encoder {
            tag: ck.tag,
            config: ck.config,
            tokenizer: ck.tokenizer,
            params,
            loss_history: ck.loss_history,
        })
    }
}

/// Trains an encoder from scratch on the train partition of `corpus`, with a
/// tokenizer learned from the same partition.
pub fn train_encoder(corpus: &LanguageCorpus, lexer: &Lexer, config: &EncoderConfig) -> Result<Encoder> {
    config.validate()?;
    let tokenizer = fit_tokenizer(&[(corpus, lexer)], config.subword_vocab_size);
    train_with_tokenizer(corpus, lexer, tokenizer, config)
}

/// Trains with a given tokenizer, e.g. one shared across languages.
pub fn train_with_tokenizer(
    corpus: &LanguageCorpus,
    lexer: &Lexer,
    tokenizer: SubwordTokenizer,
    config: &EncoderConfig,
) -> Result<Encoder> {
    let out = train::run(corpus, lexer, &tokenizer, config, None)?;
    Ok(Encoder {
        tag: Encoder::default_tag(&corpus.language, config),
        config: config.clone(),
        tokenizer,
        params: out.params,
        loss_history: out.loss_history,
    })
}

pub fn embed_occurrence(encoder: &Encoder, sample: &OccurrenceSample) -> Result<Vec<f32>> {
    encoder.embed(sample, &EmbedOptions::default()).map(|e| e.vector)
}

/// Samples up to `max_samples` occurrences of every common token from the
/// test partition and embeds them.
pub fn build_representation(
    encoder: &Encoder,
    corpus: &LanguageCorpus,
    lexer: &Lexer,
    common: &CommonVocabulary,
    max_samples: usize,
    seed: u64,
    options: &EmbedOptions,
) -> Result<LanguageRepresentation> {
    let (samples, dropped) = collect_samples(corpus, lexer, &common.tokens, max_samples, seed, encoder.config.window());
    encoder.represent(&corpus.language, &samples, dropped, options)
}
