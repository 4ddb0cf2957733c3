//! End-to-end runs driven by a TOML config: ingest, lex, common vocabulary,
//! training, embedding, similarity and reporting.
//!
//! ```toml
//! seed = 7
//! train_fraction = 0.9
//! max_samples = 50
//! strict_fp = true
//!
//! [encoder]
//! steps = 500
//!
//! [[languages]]
//! id = "c"
//! spec = "c"
//! dir = "corpora/c"
//!
//! [[languages]]
//! id = "toy"
//! spec = "lisp"
//! synth = { grammar = "lisp-like", files = 200, seed = 3 }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{ingest, split, CorpusManifest, LanguageCorpus, LanguageId};
use crate::encoder::{
    build_representation, export_archive, fit_tokenizer, train_with_tokenizer, EmbedOptions, EncoderConfig,
    LanguageRepresentation,
};
use crate::error::{Error, Result};
use crate::lexer::{load_spec, Lexer};
use crate::report::{render_heatmap, summarize_self_similarity, write_selfsim_table, ReportConfig, SELFSIM_TSV};
use crate::similarity::io::{write_matrix_dir, write_selfsim};
use crate::similarity::{pairwise_matrix, self_similarity, MatrixOptions, SelfSimilarityDistribution, SimilarityMatrix};
use crate::synth::{generate_corpus, Grammar};
use crate::vocab::{build_vocabulary, intersect, CommonVocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSource {
    pub grammar: String,
    pub files: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageSource {
    pub id: String,
    /// Builtin lexer spec name or path to a spec file.
    pub spec: String,
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub synth: Option<SynthSource>,
    #[serde(default)]
    pub max_files: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub train_fraction: f64,
    pub max_samples: usize,
    pub strict_fp: bool,
    /// One subword vocabulary learned over all train partitions instead of
    /// one per language.
    pub shared_tokenizer: bool,
    pub encoder: EncoderConfig,
    pub embed: EmbedOptions,
    pub report: ReportConfig,
    pub languages: Vec<LanguageSource>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            train_fraction: 0.9,
            max_samples: 50,
            strict_fp: false,
            shared_tokenizer: true,
            encoder: EncoderConfig::default(),
            embed: EmbedOptions::default(),
            report: ReportConfig::default(),
            languages: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("pipeline config", 0, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Loads one language's unsplit corpus. Relative paths resolve against `base`.
pub fn load_corpus(source: &LanguageSource, base: &Path) -> Result<LanguageCorpus> {
    let language = LanguageId::new(&source.id)?;
    let given = [source.manifest.is_some(), source.dir.is_some(), source.synth.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(Error::parse(
            "pipeline config",
            0,
            format!("language `{language}` needs exactly one of manifest, dir or synth"),
        ));
    }
    if let Some(s) = &source.synth {
        let grammar: Grammar = s.grammar.parse()?;
        let mut corpus = generate_corpus(language, grammar, s.files, s.seed);
        if let Some(max) = source.max_files {
            corpus.files.truncate(max);
            corpus.partition.truncate(max);
        }
        return Ok(corpus);
    }
    let manifest = match (&source.manifest, &source.dir) {
        (Some(path), _) => {
            let mut m = CorpusManifest::read(&base.join(path))?;
            if m.language != language {
                return Err(Error::parse(
                    "pipeline config",
                    0,
                    format!("manifest is for `{}`, config says `{language}`", m.language),
                ));
            }
            m.max_files = source.max_files.or(m.max_files);
            m
        }
        (None, Some(dir)) => CorpusManifest::scan_dir(language, &base.join(dir), source.max_files)?,
        (None, None) => unreachable!("checked above"),
    };
    ingest(&manifest)
}

pub struct PipelineOutput {
    pub common: CommonVocabulary,
    pub representations: Vec<LanguageRepresentation>,
    pub matrix: SimilarityMatrix,
    pub self_similarity: Vec<SelfSimilarityDistribution>,
}

/// Runs every stage and writes results under `out`:
/// `common.tsv`, `encoders/<id>.json`, `archives/<id>.lrep`, `matrix/`,
/// `selfsim/<id>.tsv` and `report/`.
pub fn run_pipeline(config: &PipelineConfig, base: &Path, out: &Path) -> Result<PipelineOutput> {
    config.encoder.validate()?;
    config.report.validate()?;
    if config.languages.len() < 2 {
        return Err(Error::TooFewInputs {
            needed: 2,
            got: config.languages.len(),
        });
    }
    let mut corpora = Vec::new();
    let mut lexers = Vec::new();
    for source in &config.languages {
        let corpus = load_corpus(source, base)?;
        corpora.push(split(&corpus, config.train_fraction)?);
        lexers.push(Lexer::new(load_spec(&source.spec)?)?);
        log::info!("loaded `{}`: {} files", source.id, corpus.len());
    }

    let vocabularies: Vec<_> = corpora.iter().zip(&lexers).map(|(c, l)| build_vocabulary(c, l)).collect();
    let common = intersect(&vocabularies)?;
    log::info!("{} common tokens", common.len());

    for sub in ["encoders", "archives", "selfsim"] {
        let dir = out.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    common.write(&out.join("common.tsv"))?;

    let pairs: Vec<_> = corpora.iter().zip(&lexers).collect();
    let shared = config
        .shared_tokenizer
        .then(|| fit_tokenizer(&pairs, config.encoder.subword_vocab_size));

    let mut representations = Vec::new();
    for (corpus, lexer) in &pairs {
        let tokenizer = match &shared {
            Some(t) => t.clone(),
            None => fit_tokenizer(&[(corpus, lexer)], config.encoder.subword_vocab_size),
        };
        let encoder = train_with_tokenizer(corpus, lexer, tokenizer, &config.encoder)?;
        encoder.save(&out.join("encoders").join(format!("{}.json", corpus.language)))?;
        let rep = build_representation(&encoder, corpus, lexer, &common, config.max_samples, config.seed, &config.embed)?;
        export_archive(&rep, &out.join("archives").join(format!("{}.lrep", corpus.language)))?;
        representations.push(rep);
    }

    let matrix = pairwise_matrix(
        &representations,
        MatrixOptions {
            oracle: false,
            strict_fp: config.strict_fp,
        },
    )?;
    write_matrix_dir(&matrix, &out.join("matrix"), config.report.decimals)?;

    let mut dists = Vec::new();
    for rep in &representations {
        match self_similarity(rep) {
            Ok(d) => {
                write_selfsim(&d, &out.join("selfsim").join(format!("{}.tsv", rep.language)))?;
                dists.push(d);
            }
            Err(Error::AllSingletons(l)) => log::warn!("no self-similarity for `{l}`: every set is a singleton"),
            Err(e) => return Err(e),
        }
    }

    let report_dir = out.join("report");
    render_heatmap(&matrix, &config.report, &report_dir)?;
    let rows = summarize_self_similarity(&dists, None);
    write_selfsim_table(&rows, config.report.decimals, &report_dir.join(SELFSIM_TSV))?;

    Ok(PipelineOutput {
        common,
        representations,
        matrix,
        self_similarity: dists,
    })
}
