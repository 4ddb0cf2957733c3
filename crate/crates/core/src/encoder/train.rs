//! Masked-LM training: sequence sampling, BERT-style masking and AdamW.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bpe::{self, SubwordTokenizer};
use super::model::{MaskedSequence, Params};
use super::nn::Real;
use super::EncoderConfig;
use crate::corpus::{LanguageCorpus, Partition};
use crate::error::{Error, Result};
use crate::lexer::Lexer;

/// Lexeme counts (comments included) over the train partitions of the given
/// corpora, the input for subword learning.
pub fn train_lexeme_counts(corpora: &[(&LanguageCorpus, &Lexer)]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for (corpus, lexer) in corpora {
        for (_, file) in corpus.files_in(Partition::Train) {
            let Ok(lexed) = lexer.tokenize_checked(&file.text, &file.path) else {
                continue;
            };
            for t in lexed.tokens {
                *counts.entry(t.lexeme).or_insert(0) += 1;
            }
        }
    }
    counts
}

pub fn fit_tokenizer(corpora: &[(&LanguageCorpus, &Lexer)], vocab_size: usize) -> SubwordTokenizer {
    SubwordTokenizer::learn(&train_lexeme_counts(corpora), vocab_size)
}

/// Piece streams of the train partition, one per file.
pub struct TrainingData {
    streams: Vec<Vec<u32>>,
    cumulative: Vec<usize>,
}

impl TrainingData {
    pub fn new(corpus: &LanguageCorpus, lexer: &Lexer, tokenizer: &SubwordTokenizer) -> Self {
        let mut cache: HashMap<String, Vec<u32>> = HashMap::new();
        let mut streams = Vec::new();
        for (_, file) in corpus.files_in(Partition::Train) {
            let Ok(lexed) = lexer.tokenize_checked(&file.text, &file.path) else {
                continue;
            };
            let mut stream = Vec::new();
            for t in lexed.tokens {
                let ids = cache.entry(t.lexeme).or_insert_with_key(|lexeme| tokenizer.encode(lexeme));
                stream.extend_from_slice(ids);
            }
            if stream.len() >= 2 {
                streams.push(stream);
            }
        }
        let mut cumulative = Vec::with_capacity(streams.len() + 1);
        let mut total = 0;
        cumulative.push(0);
        for s in &streams {
            total += s.len();
            cumulative.push(total);
        }
        TrainingData { streams, cumulative }
    }

    pub fn total_pieces(&self) -> usize {
        *self.cumulative.last().unwrap_or(&0)
    }

    /// Number of disjoint `seq_len` windows the data splits into.
    pub fn chunk_count(&self, seq_len: usize) -> usize {
        self.streams.iter().map(|s| s.len().div_ceil(seq_len)).sum()
    }

    /// A window of up to `seq_len` pieces starting at a uniformly chosen piece.
    pub fn sample_window<R: Rng>(&self, rng: &mut R, seq_len: usize) -> &[u32] {
        let g = rng.random_range(0..self.total_pieces());
        let file = self.cumulative.partition_point(|&c| c <= g) - 1;
        let stream = &self.streams[file];
        let len = stream.len().min(seq_len);
        let start = (g - self.cumulative[file]).min(stream.len() - len);
        &stream[start..start + len]
    }
}

/// Picks each position with probability `fraction` (at least one), then
/// replaces 80% of picks with `[MASK]`, 10% with a random piece and leaves 10%.
pub fn mask_sequence<R: Rng>(ids: &[u32], fraction: f64, vocab: usize, first_regular: u32, rng: &mut R) -> MaskedSequence {
    let mut input = ids.to_vec();
    let mut picks: Vec<usize> = (0..ids.len()).filter(|_| rng.random_bool(fraction)).collect();
    if picks.is_empty() {
        picks.push(rng.random_range(0..ids.len()));
    }
    let mut targets = Vec::with_capacity(picks.len());
    for pos in picks {
        targets.push((pos, ids[pos]));
        let r: f64 = rng.random();
        if r < 0.8 {
            input[pos] = bpe::MASK;
        } else if r < 0.9 {
            input[pos] = rng.random_range(first_regular..vocab as u32);
        }
    }
    MaskedSequence { input, targets }
}

struct AdamW<F> {
    m: Params<F>,
    v: Params<F>,
    decay: Vec<bool>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl<F: Real> AdamW<F> {
    fn new(params: &Params<F>) -> Self {
        AdamW {
            m: Params::zeros(params.shape),
            v: Params::zeros(params.shape),
            decay: params.decay_mask(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut Params<F>, grads: &Params<F>, lr: f64, weight_decay: f64) {
        self.t += 1;
        let (b1, b2) = (F::lit(BETA1), F::lit(BETA2));
        let c1 = F::one() - b1.powi(self.t);
        let c2 = F::one() - b2.powi(self.t);
        let lr = F::lit(lr);
        let wd = F::lit(weight_decay);
        let eps = F::lit(ADAM_EPS);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(&self.decay);
        for ((((p, g), m), v), &decay) in tensors {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (F::one() - b1) * g[i];
                v[i] = b2 * v[i] + (F::one() - b2) * g[i] * g[i];
                let update = (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                if decay {
                    p[i] -= lr * wd * p[i];
                }
                p[i] -= lr * update;
            }
        }
    }
}

fn learning_rate(config: &EncoderConfig, step: usize) -> f64 {
    let warmup = config.warmup_steps.min(config.steps / 2).max(1);
    if step < warmup {
        config.learning_rate * (step + 1) as f64 / warmup as f64
    } else {
        let progress = (step - warmup) as f64 / (config.steps - warmup).max(1) as f64;
        config.learning_rate * (1.0 - 0.9 * progress)
    }
}

pub struct TrainOutcome {
    pub params: Params<f32>,
    pub loss_history: Vec<f32>,
}

/// Runs `config.steps` optimizer steps starting from `init`, or from a
/// fresh seeded initialization.
pub fn run(
    corpus: &LanguageCorpus,
    lexer: &Lexer,
    tokenizer: &SubwordTokenizer,
    config: &EncoderConfig,
    init: Option<Params<f32>>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if corpus.train_count() == 0 {
        return Err(Error::CorpusTooSmall {
            chunks: 0,
            batch: config.batch_size,
        });
    }
    let data = TrainingData::new(corpus, lexer, tokenizer);
    let chunks = data.chunk_count(config.max_positions);
    if chunks < config.batch_size {
        return Err(Error::CorpusTooSmall {
            chunks,
            batch: config.batch_size,
        });
    }

    let shape = config.shape(tokenizer.vocab_size());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = match init {
        Some(p) if p.shape == shape => p,
        Some(p) => {
            return Err(Error::EncoderConfig(format!(
                "checkpoint shape {:?} does not match config shape {shape:?}",
                p.shape
            )))
        }
        None => Params::init(shape, &mut rng),
    };
    rng.set_stream(1);

    let mut grads = Params::<f32>::zeros(shape);
    let mut opt = AdamW::new(&params);
    let mut history = Vec::with_capacity(config.steps);
    let first_regular = tokenizer.first_regular_id();

    for step in 0..config.steps {
        let batch: Vec<MaskedSequence> = (0..config.batch_size)
            .map(|_| {
                let window = data.sample_window(&mut rng, config.max_positions).to_vec();
                mask_sequence(&window, config.mask_fraction, shape.vocab, first_regular, &mut rng)
            })
            .collect();
        let n_targets: usize = batch.iter().map(|s| s.targets.len()).sum();
        let scale = 1.0 / n_targets as f32;
        grads.fill_zero();
        let mut loss = 0.0f32;
        for seq in &batch {
            loss += params.loss_and_grad(seq, scale, &mut grads);
        }
        history.push(loss * scale);

        let norm = grads
            .tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|&g| f64::from(g) * f64::from(g))
            .sum::<f64>()
            .sqrt();
        if norm > config.grad_clip {
            let factor = (config.grad_clip / norm) as f32;
            for t in grads.tensors_mut() {
                t.iter_mut().for_each(|g| *g *= factor);
            }
        }
        opt.step(&mut params, &grads, learning_rate(config, step), config.weight_decay);
        if (step + 1) % 500 == 0 {
            log::debug!("step {} loss {:.4}", step + 1, history[step]);
        }
    }
    Ok(TrainOutcome {
        params,
        loss_history: history,
    })
}

/// The gradient of the mean masked-LM loss over `batch`, for checking.
pub fn batch_gradient<F: Real>(params: &Params<F>, batch: &[MaskedSequence]) -> (F, Params<F>) {
    let n: usize = batch.iter().map(|s| s.targets.len()).sum();
    let scale = F::one() / F::from_usize(n).expect("fits");
    let mut grads = Params::zeros(params.shape);
    let mut loss = F::zero();
    for seq in batch {
        loss += params.loss_and_grad(seq, scale, &mut grads);
    }
    (loss * scale, grads)
}

pub fn batch_loss<F: Real>(params: &Params<F>, batch: &[MaskedSequence]) -> F {
    let n: usize = batch.iter().map(|s| s.targets.len()).sum();
    batch.iter().map(|s| params.loss(s)).sum::<F>() / F::from_usize(n).expect("fits")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masking_keeps_targets_and_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ids: Vec<u32> = (5..45).collect();
        let seq = mask_sequence(&ids, 0.15, 50, 5, &mut rng);
        assert_eq!(seq.input.len(), ids.len());
        assert!(!seq.targets.is_empty());
        for &(pos, label) in &seq.targets {
            assert_eq!(label, ids[pos]);
        }
        let untouched = (0..ids.len()).filter(|i| !seq.targets.iter().any(|t| t.0 == *i));
        for i in untouched {
            assert_eq!(seq.input[i], ids[i]);
        }
        // at least one target even when the draw picks nothing
        let one = mask_sequence(&[7, 8], 1e-9, 50, 5, &mut rng);
        assert_eq!(one.targets.len(), 1);
    }

    #[test]
    fn schedule_warms_up_then_decays() {
        let config = EncoderConfig {
            steps: 100,
            warmup_steps: 10,
            learning_rate: 1.0,
            ..EncoderConfig::default()
        };
        assert!((learning_rate(&config, 0) - 0.1).abs() < 1e-12);
        assert!((learning_rate(&config, 9) - 1.0).abs() < 1e-12);
        assert!(learning_rate(&config, 99) < learning_rate(&config, 50));
        assert!(learning_rate(&config, 99) >= 0.1);
    }
}
