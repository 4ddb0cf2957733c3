use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use plsim_core::encoder::{
    collect_samples, export_archive, import_archive, read_samples, write_samples, EmbedOptions, LayerChoice, Pooling,
};
use plsim_core::escape::escape_field;
use plsim_core::lexer::{load_spec, Lexer};
use plsim_core::pipeline::{run_pipeline, PipelineConfig};
use plsim_core::report::{summarize_self_similarity, write_selfsim_table, SortOrder, SELFSIM_TSV};
use plsim_core::similarity::io::{read_matrix_dir, read_selfsim, write_matrix_dir, write_selfsim};
use plsim_core::similarity::{oracle, MatrixOptions};
use plsim_core::synth::{generate_files, write_files, Grammar};
use plsim_core::vocab::build_vocabulary_filtered;
use plsim_core::*;

const CORPUS_JSON: &str = "corpus.json";
const MANIFEST_TXT: &str = "manifest.txt";

#[derive(Parser)]
#[command(name = "plsim", version, about = "Cross-language token representation similarity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a language's files into a corpus directory
    Ingest(IngestArgs),
    /// Tokenize one source file
    Lex(LexArgs),
    /// Print corpus statistics as JSON
    Stats(CorpusArgs),
    /// Count tokens of a corpus
    Vocab(VocabArgs),
    /// Intersect vocabulary files
    Common(CommonArgs),
    /// Train (or fine-tune) a masked-LM encoder
    Train(TrainArgs),
    /// Embed common-token occurrences into an lrep archive
    Embed(EmbedArgs),
    /// Pairwise similarity between archives
    Sim(SimArgs),
    /// Self-similarity distribution of one archive
    Selfsim(SelfsimArgs),
    /// Heatmap and self-similarity table
    Report(ReportArgs),
    /// Generate a synthetic corpus
    Synth(SynthArgs),
    /// Run the whole pipeline from a TOML config
    Run(RunArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    language: Option<String>,
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    root: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    max_files: Option<usize>,
    #[arg(long, default_value_t = 0.9)]
    train_fraction: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LexArgs {
    /// Built-in spec name or spec file
    #[arg(long)]
    spec: String,
    source: PathBuf,
    #[arg(long)]
    strip_comments: bool,
    #[arg(long, default_value = "tsv", value_parser = ["tsv"])]
    format: String,
}

#[derive(Args)]
struct CorpusArgs {
    /// Directory written by `plsim ingest`
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    spec: String,
}

#[derive(Args)]
struct VocabArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Comma-separated token kinds to keep, e.g. `identifier`
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<TokenKind>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, num_args = 2.., required = true)]
    vocab: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// TOML file with encoder settings; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint to fine-tune instead of training from scratch
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    /// Checkpoint written by `plsim train`
    #[arg(long)]
    encoder: PathBuf,
    #[arg(long, required_unless_present = "from_samples")]
    corpus: Option<PathBuf>,
    #[arg(long, required_unless_present = "from_samples")]
    spec: Option<String>,
    /// Common vocabulary file
    #[arg(long, required_unless_present = "from_samples")]
    tokens: Option<PathBuf>,
    /// Occurrences sampled per token
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the sampled contexts as a samples file
    #[arg(long)]
    export_samples: Option<PathBuf>,
    /// Embed the contexts of an existing samples file
    #[arg(long, conflicts_with_all = ["corpus", "tokens", "export_samples"])]
    from_samples: Option<PathBuf>,
    /// `last` or a residual-stream index
    #[arg(long, default_value = "last")]
    layer: LayerChoice,
    #[arg(long)]
    masked_target: bool,
    #[arg(long, default_value = "mean")]
    pooling: Pooling,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, num_args = 2.., required = true)]
    archives: Vec<PathBuf>,
    /// Use the slow reference implementation
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    strict_fp: bool,
    #[arg(long, default_value_t = 6)]
    decimals: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelfsimArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory written by `plsim sim`
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long = "self", num_args = 0..)]
    self_files: Vec<PathBuf>,
    #[arg(long, default_value = "average")]
    sort: SortOrder,
    #[arg(long)]
    abs_scale: bool,
    #[arg(long, default_value_t = 6)]
    decimals: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    grammar: Grammar,
    #[arg(long, default_value_t = 200)]
    files: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn lexer_for(spec: &str) -> Result<Lexer> {
    Ok(Lexer::new(load_spec(spec)?)?)
}

fn read_corpus(dir: &Path) -> Result<LanguageCorpus> {
    LanguageCorpus::read_json(&dir.join(CORPUS_JSON)).with_context(|| format!("reading corpus in {}", dir.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn ingest_cmd(args: IngestArgs) -> Result<()> {
    let manifest = match (&args.root, &args.manifest) {
        (Some(root), None) => {
            let Some(language) = &args.language else {
                bail!("--language is required with --root");
            };
            CorpusManifest::scan_dir(LanguageId::new(language.as_str())?, root, args.max_files)?
        }
        (None, Some(path)) => {
            let mut manifest = CorpusManifest::read(path)?;
            if args.max_files.is_some() {
                manifest.max_files = args.max_files;
            }
            manifest
        }
        _ => unreachable!("clap enforces exactly one source"),
    };
    let corpus = split(&ingest(&manifest)?, args.train_fraction)?;
    for d in &corpus.diagnostics {
        log::warn!("{d}");
    }
    create_dir(&args.out)?;
    fs::write(args.out.join(MANIFEST_TXT), manifest.to_text())?;
    corpus.write_json(&args.out.join(CORPUS_JSON))?;
    println!(
        "{}: {} files ({} train, {} test)",
        corpus.language,
        corpus.len(),
        corpus.train_count(),
        corpus.test_count()
    );
    Ok(())
}

fn lex_cmd(args: LexArgs) -> Result<()> {
    let lexer = lexer_for(&args.spec)?;
    let text = fs::read_to_string(&args.source).with_context(|| format!("reading {}", args.source.display()))?;
    let lexed = lexer.tokenize_checked(&text, &args.source)?;
    for d in &lexed.diagnostics {
        log::warn!("{}: {d}", args.source.display());
    }
    let tokens = if args.strip_comments {
        strip_comments(&lexed.tokens)
    } else {
        lexed.tokens
    };
    let mut out = String::new();
    for t in tokens {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", t.kind, t.start, t.end, escape_field(&t.lexeme)));
    }
    print!("{out}");
    Ok(())
}

fn stats_cmd(args: CorpusArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let stats = compute_stats(&corpus, &lexer_for(&args.spec)?);
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn vocab_cmd(args: VocabArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus.corpus)?;
    let lexer = lexer_for(&args.corpus.spec)?;
    let vocab = build_vocabulary_filtered(&corpus, &lexer, args.kinds.as_deref());
    vocab.write(&args.out)?;
    println!("{}: {} distinct tokens", vocab.language, vocab.len());
    Ok(())
}

fn common_cmd(args: CommonArgs) -> Result<()> {
    let vocabs = args.vocab.iter().map(|p| Vocabulary::read(p)).collect::<plsim_core::Result<Vec<_>>>()?;
    let common = intersect(&vocabs)?;
    common.write(&args.out)?;
    println!("{} common tokens", common.len());
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let mut config: EncoderConfig = match &args.config {
        Some(path) => toml::from_str(&fs::read_to_string(path)?).with_context(|| format!("parsing {}", path.display()))?,
        None => EncoderConfig::default(),
    };
    if let Some(v) = args.steps {
        config.steps = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.dim {
        config.dim = v;
    }
    if let Some(v) = args.layers {
        config.layers = v;
    }
    config.validate()?;
    let corpus = read_corpus(&args.corpus.corpus)?;
    let lexer = lexer_for(&args.corpus.spec)?;
    let encoder = match &args.init {
        Some(path) => Encoder::load(path)?.finetune(&corpus, &lexer, &config)?,
        None => train_encoder(&corpus, &lexer, &config)?,
    };
    encoder.save(&args.out)?;
    let last = encoder.loss_history.last().copied().unwrap_or(f32::NAN);
    println!("{}: {} steps, final loss {last:.4}", encoder.tag, encoder.loss_history.len());
    Ok(())
}

fn embed_cmd(args: EmbedArgs) -> Result<()> {
    let encoder = Encoder::load(&args.encoder)?;
    let options = EmbedOptions {
        layer: args.layer,
        masked_target: args.masked_target,
        pooling: args.pooling,
    };
    let (language, samples, dropped) = match &args.from_samples {
        Some(path) => {
            let (language, samples) = read_samples(path)?;
            (language, samples, Vec::new())
        }
        None => {
            let corpus = read_corpus(args.corpus.as_deref().expect("required by clap"))?;
            let lexer = lexer_for(args.spec.as_deref().expect("required by clap"))?;
            let common = CommonVocabulary::read(args.tokens.as_deref().expect("required by clap"))?;
            let (samples, dropped) =
                collect_samples(&corpus, &lexer, &common.tokens, args.samples, args.seed, encoder.config.window());
            if let Some(path) = &args.export_samples {
                write_samples(path, &corpus.language, &samples)?;
            }
            (corpus.language, samples, dropped)
        }
    };
    for token in &dropped {
        log::warn!("`{token}` has no test-partition occurrences");
    }
    let rep = encoder.represent(&language, &samples, dropped, &options)?;
    export_archive(&rep, &args.out)?;
    println!("{}: {} tokens, {} vectors", rep.language, rep.sets.len(), rep.vector_count());
    Ok(())
}

fn sim_cmd(args: SimArgs) -> Result<()> {
    let reps = args.archives.iter().map(|p| import_archive(p)).collect::<plsim_core::Result<Vec<_>>>()?;
    let matrix = if args.oracle {
        oracle::pairwise_matrix(&reps)?
    } else {
        pairwise_matrix(
            &reps,
            MatrixOptions {
                oracle: false,
                strict_fp: args.strict_fp,
            },
        )?
    };
    write_matrix_dir(&matrix, &args.out, args.decimals)?;
    if let Some(spread) = matrix.spread() {
        println!("{} languages, spread {spread:.6}", matrix.len());
    }
    Ok(())
}

fn selfsim_cmd(args: SelfsimArgs) -> Result<()> {
    let rep = import_archive(&args.archive)?;
    let dist = self_similarity(&rep)?;
    write_selfsim(&dist, &args.out)?;
    println!(
        "{}: mean {:.6}, {} tokens, {} singletons excluded",
        dist.language,
        dist.mean,
        dist.per_token_scores.len(),
        dist.excluded_singletons
    );
    Ok(())
}

fn report_cmd(args: ReportArgs) -> Result<()> {
    let config = ReportConfig {
        sort: args.sort,
        abs_scale: args.abs_scale,
        decimals: args.decimals,
        ..ReportConfig::default()
    };
    config.validate()?;
    let matrix = read_matrix_dir(&args.matrix)?;
    let heatmap = render_heatmap(&matrix, &config, &args.out)?;
    let dists = args.self_files.iter().map(|p| read_selfsim(p)).collect::<plsim_core::Result<Vec<_>>>()?;
    if !dists.is_empty() {
        let rows = summarize_self_similarity(&dists, None);
        write_selfsim_table(&rows, config.decimals, &args.out.join(SELFSIM_TSV))?;
    }
    let order: Vec<&str> = heatmap.order.iter().map(LanguageId::as_str).collect();
    println!("order: {}", order.join(", "));
    Ok(())
}

fn synth_cmd(args: SynthArgs) -> Result<()> {
    let files = generate_files(args.grammar, args.files, args.seed);
    write_files(&args.out, &files)?;
    println!("wrote {} files to {}", files.len(), args.out.display());
    Ok(())
}

fn run_cmd(args: RunArgs) -> Result<()> {
    let config = PipelineConfig::read(&args.config)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let out = run_pipeline(&config, base, &args.out)?;
    println!("{} common tokens, {} languages", out.common.len(), out.matrix.len());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Ingest(a) => ingest_cmd(a),
        Command::Lex(a) => lex_cmd(a),
        Command::Stats(a) => stats_cmd(a),
        Command::Vocab(a) => vocab_cmd(a),
        Command::Common(a) => common_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Embed(a) => embed_cmd(a),
        Command::Sim(a) => sim_cmd(a),
        Command::Selfsim(a) => selfsim_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Run(a) => run_cmd(a),
    }
}
