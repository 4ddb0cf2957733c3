use std::collections::BTreeMap;

use plsim_core::encoder::{
    collect_samples, export_archive, fit_tokenizer, import_archive, read_samples, train_with_tokenizer,
    write_samples, ContextWindow, EmbedOptions, LayerChoice, Params, Pooling, SubwordTokenizer,
};
use plsim_core::lexer::{builtin, Lexer};
use plsim_core::synth::{generate_corpus, Grammar};
use plsim_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lang(s: &str) -> LanguageId {
    LanguageId::new(s).unwrap()
}

fn c_lexer() -> Lexer {
    Lexer::new(builtin("c").unwrap()).unwrap()
}

fn small_config(steps: usize) -> EncoderConfig {
    EncoderConfig {
        steps,
        ff_dim: 128,
        max_positions: 32,
        left_context: 8,
        right_context: 8,
        seed: 5,
        ..EncoderConfig::default()
    }
}

fn toy_corpus(files: usize) -> LanguageCorpus {
    split(&generate_corpus(lang("toy"), Grammar::CLike, files, 21), 0.9).unwrap()
}

fn toy_encoder(steps: usize) -> (LanguageCorpus, Encoder) {
    let corpus = toy_corpus(60);
    let lexer = c_lexer();
    let encoder = train_encoder(&corpus, &lexer, &small_config(steps)).unwrap();
    (corpus, encoder)
}

#[test]
fn training_reduces_loss() {
    let corpus = toy_corpus(200);
    let config = small_config(2000);
    let encoder = train_encoder(&corpus, &c_lexer(), &config).unwrap();
    assert_eq!(encoder.loss_history.len(), 2000);
    let first = encoder.loss_history[0];
    let tail: f32 = encoder.loss_history[1900..].iter().sum::<f32>() / 100.0;
    assert!(tail < first, "loss went from {first} to {tail}");
    assert!(tail < 0.6 * first, "loss went from {first} to {tail}");
}

#[test]
fn same_seed_gives_bit_identical_parameters() {
    let (_, a) = toy_encoder(30);
    let (_, b) = toy_encoder(30);
    assert_eq!(a.params, b.params);
    assert_eq!(
        a.loss_history.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        b.loss_history.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
    let corpus = toy_corpus(60);
    let other = train_encoder(&corpus, &c_lexer(), &EncoderConfig { seed: 6, ..small_config(30) }).unwrap();
    assert_ne!(a.params, other.params);
}

#[test]
fn corpus_smaller_than_a_batch_is_rejected() {
    let corpus = split(&LanguageCorpus::from_texts(lang("c"), [("a.c", "x = 1;"), ("b.c", "y")]), 0.5).unwrap();
    let err = train_encoder(&corpus, &c_lexer(), &small_config(5)).unwrap_err();
    assert!(matches!(err, Error::CorpusTooSmall { chunks: 1, batch: 8 }));
}

#[test]
fn embeddings_have_model_width_and_are_deterministic() {
    let (corpus, encoder) = toy_encoder(20);
    let samples = sample_occurrences(&corpus, &c_lexer(), "x", 5, 1, encoder.config.window()).unwrap();
    assert!(!samples.is_empty());
    for s in &samples {
        let v = embed_occurrence(&encoder, s).unwrap();
        assert_eq!(v.len(), encoder.config.dim);
        assert_eq!(v, embed_occurrence(&encoder, s).unwrap());
    }
}

/// An encoder whose tokenizer only knows single characters, so every
/// multi-character lexeme splits into one piece per character.
fn char_level_encoder() -> Encoder {
    let words: BTreeMap<String, u64> = [("abc".to_string(), 1), ("xyz".to_string(), 1)].into();
    let tokenizer = SubwordTokenizer::learn(&words, 0);
    let config = EncoderConfig {
        dim: 16,
        heads: 2,
        ff_dim: 32,
        max_positions: 12,
        ..EncoderConfig::default()
    };
    let shape = config.shape(tokenizer.vocab_size());
    let params = Params::<f32>::init(shape, &mut ChaCha8Rng::seed_from_u64(9));
    Encoder {
        tag: "char-level".into(),
        config,
        tokenizer,
        params,
        loss_history: Vec::new(),
    }
}

fn sample(context: &[&str], target_offset: usize) -> OccurrenceSample {
    OccurrenceSample {
        occ_id: 0,
        token: context[target_offset].to_string(),
        file_index: 0,
        position: 0,
        context: context.iter().map(|s| s.to_string()).collect(),
        target_offset,
    }
}

#[test]
fn mean_pooling_averages_the_target_pieces() {
    let encoder = char_level_encoder();
    let s = sample(&["x", "abc", "y"], 1);

    // independent path: lay out the pieces by hand and run the raw forward pass
    let ids: Vec<u32> = ["x", "a", "b", "c", "y"].iter().map(|p| encoder.tokenizer.id(p).unwrap()).collect();
    let fwd = encoder.params.forward(&ids);
    let per_piece: Vec<Vec<f32>> = (1..4).map(|r| fwd.hidden.row(r).to_vec()).collect();
    let expected: Vec<f32> = (0..16)
        .map(|d| (per_piece[0][d] + per_piece[1][d] + per_piece[2][d]) / 3.0)
        .collect();

    let got = embed_occurrence(&encoder, &s).unwrap();
    for (g, e) in got.iter().zip(&expected) {
        assert!((g - e).abs() < 1e-6, "{g} vs {e}");
    }

    let first = encoder
        .embed(&s, &EmbedOptions { pooling: Pooling::First, ..EmbedOptions::default() })
        .unwrap();
    assert_eq!(first.vector, per_piece[0]);

    let layer0 = encoder
        .embed(&s, &EmbedOptions { layer: LayerChoice::Index(0), ..EmbedOptions::default() })
        .unwrap();
    for (d, &x) in layer0.vector.iter().enumerate() {
        let mean = (1..4).map(|r| fwd.residual[0][[r, d]]).sum::<f32>() / 3.0;
        assert!((x - mean).abs() < 1e-6);
    }

    // single-piece targets pool identically under mean and first
    let single = sample(&["abc", "y", "x"], 1);
    let mean = encoder.embed(&single, &EmbedOptions::default()).unwrap();
    let first = encoder
        .embed(&single, &EmbedOptions { pooling: Pooling::First, ..EmbedOptions::default() })
        .unwrap();
    assert_eq!(mean.vector, first.vector);
}

#[test]
fn long_contexts_are_truncated_around_the_target() {
    let encoder = char_level_encoder();
    let context: Vec<&str> = std::iter::repeat_n("xyz", 6).chain(["abc"]).chain(std::iter::repeat_n("xyz", 6)).collect();
    let s = sample(&context, 6);
    let input = encoder.prepare(&s, &EmbedOptions::default());
    assert!(input.truncated);
    assert_eq!(input.ids.len(), 12);
    assert_eq!(input.target, 4..7);
    assert!(encoder.embed(&s, &EmbedOptions::default()).unwrap().truncated);

    let masked = encoder.prepare(&s, &EmbedOptions { masked_target: true, ..EmbedOptions::default() });
    assert!(masked.ids[masked.target.clone()].iter().all(|&id| id == plsim_core::encoder::bpe::MASK));
}

fn tiny_trained(corpus: &LanguageCorpus) -> Encoder {
    let lexer = c_lexer();
    let tokenizer = fit_tokenizer(&[(corpus, &lexer)], 64);
    let config = EncoderConfig {
        dim: 16,
        heads: 2,
        ff_dim: 32,
        max_positions: 16,
        batch_size: 1,
        steps: 3,
        left_context: 2,
        right_context: 2,
        ..EncoderConfig::default()
    };
    train_with_tokenizer(corpus, &lexer, tokenizer, &config).unwrap()
}

#[test]
fn representation_groups_samples_by_token() {
    let corpus = split(
        &LanguageCorpus::from_texts(
            lang("c"),
            [
                ("train.c", "a = b; c = a; zz = 1;"),
                ("test.c", "a = b + a; // c c"),
            ],
        ),
        0.5,
    )
    .unwrap();
    let encoder = tiny_trained(&corpus);
    let common = CommonVocabulary {
        tokens: vec!["a".into(), "b".into(), "c".into(), "zz".into()],
        per_language_counts: BTreeMap::new(),
    };
    let rep = build_representation(&encoder, &corpus, &c_lexer(), &common, 50, 3, &EmbedOptions::default()).unwrap();
    assert_eq!(rep.sets.keys().collect::<Vec<_>>(), vec!["a", "b"]);
    assert_eq!(rep.sets["a"].len(), 2);
    assert_eq!(rep.sets["b"].len(), 1);
    assert_eq!(rep.dropped, vec!["c".to_string(), "zz".to_string()]);
    assert_eq!(rep.dim, 16);

    let again = build_representation(&encoder, &corpus, &c_lexer(), &common, 50, 3, &EmbedOptions::default()).unwrap();
    assert_eq!(rep, again);

    // archive round trip
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.lrep");
    export_archive(&rep, &path).unwrap();
    let back = import_archive(&path).unwrap();
    assert_eq!(back.language, rep.language);
    assert_eq!(back.encoder_tag, rep.encoder_tag);
    for (token, set) in &rep.sets {
        let other = &back.sets[token];
        assert_eq!(other.occurrences, set.occurrences);
        for (u, v) in set.vectors.iter().zip(&other.vectors) {
            for (x, y) in u.iter().zip(v) {
                assert!((x - y).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn samples_file_reproduces_embeddings() {
    let corpus = toy_corpus(60);
    let lexer = c_lexer();
    let encoder = tiny_trained(&corpus);
    let window = ContextWindow { left: 3, right: 3 };
    let tokens = vec!["x".to_string(), "(".to_string(), "missing".to_string()];
    let (samples, dropped) = collect_samples(&corpus, &lexer, &tokens, 4, 8, window);
    assert_eq!(dropped, vec!["missing".to_string()]);
    assert_eq!(samples.len(), 8);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.samples");
    write_samples(&path, &corpus.language, &samples).unwrap();
    let (language, back) = read_samples(&path).unwrap();
    assert_eq!(language, corpus.language);
    assert_eq!(back.len(), samples.len());
    for (a, b) in samples.iter().zip(&back) {
        assert_eq!((a.occ_id, &a.token, &a.context, a.target_offset), (b.occ_id, &b.token, &b.context, b.target_offset));
        assert_eq!(embed_occurrence(&encoder, a).unwrap(), embed_occurrence(&encoder, b).unwrap());
    }

    let rep = encoder.represent(&language, &back, Vec::new(), &EmbedOptions::default()).unwrap();
    assert_eq!(rep.vector_count(), samples.len());
}

#[test]
fn checkpoint_round_trip_and_finetune() {
    let (corpus, encoder) = toy_encoder(10);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("enc.json");
    encoder.save(&path).unwrap();
    let loaded = Encoder::load(&path).unwrap();
    assert_eq!(loaded, encoder);

    let tuned = loaded.finetune(&corpus, &c_lexer(), &small_config(5)).unwrap();
    assert_ne!(tuned.params, encoder.params);
    assert_eq!(tuned.tokenizer, encoder.tokenizer);
    assert!(tuned.tag.starts_with(&encoder.tag));

    std::fs::write(&path, "{\"format\":\"other\"}").unwrap();
    assert!(Encoder::load(&path).is_err());
}
