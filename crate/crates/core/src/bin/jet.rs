use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use jet::embeddings::{EmbeddingSet, Format, PointKind};
use jet::eval::{self, AnalogyMode, SimSetting, WsdOptions};
use jet::matcher::{write_annotations, MatchAutomaton};
use jet::output::write_atomically;
use jet::terminology::Terminology;
use jet::trainer::{train_with, TrainConfig};
use jet::Corpus;

#[derive(Parser)]
#[command(name = "jet", version, about = "Joint word, term and entity embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train embeddings on a corpus with a terminology.
    Train(TrainArgs),
    /// Write the corpus polysemy of every matched entity.
    Polysemy(PolysemyArgs),
    /// Dump term occurrences found in the corpus.
    Annotate(AnnotateArgs),
    /// Print the nearest neighbors of a point.
    Neighbors(NeighborsArgs),
    /// Run an evaluation protocol.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Args)]
struct InputArgs {
    /// Plain-text corpus, one document per line.
    #[arg(long, env = "JET_CORPUS")]
    corpus: PathBuf,
    /// Terminology TSV (surface TAB entity-id).
    #[arg(long, env = "JET_TERMINOLOGY")]
    terminology: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output embeddings file.
    #[arg(long, env = "JET_OUT")]
    out: PathBuf,
    /// Output format: binary or text.
    #[arg(long, env = "JET_FORMAT", default_value = "binary")]
    format: Format,
    /// Maximum context window radius.
    #[arg(long, env = "JET_WINDOW", default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    window: u64,
    /// Negative samples per context word.
    #[arg(long, env = "JET_NEGATIVES", default_value_t = 5)]
    negatives: usize,
    /// Initial learning rate.
    #[arg(long, env = "JET_LR", default_value_t = 0.05)]
    lr: f64,
    /// Passes over the corpus.
    #[arg(long, env = "JET_EPOCHS", default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    /// Minimum frequency for words and terms.
    #[arg(long, env = "JET_MIN_COUNT", default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    min_count: u64,
    /// Frequent-word subsampling coefficient.
    #[arg(long, env = "JET_SUBSAMPLE", default_value_t = 1e-5)]
    subsample: f64,
    /// Embedding dimensionality.
    #[arg(long, env = "JET_DIM", default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    /// Seed for all randomness.
    #[arg(long, env = "JET_SEED", default_value_t = 1)]
    seed: u64,
    /// Training threads; more than one is not deterministic.
    #[arg(long, env = "JET_WORKERS", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    /// Directory for per-epoch binary checkpoints.
    #[arg(long, env = "JET_CHECKPOINT")]
    checkpoint: Option<PathBuf>,
    /// Also write the vocabulary dump here.
    #[arg(long, env = "JET_VOCAB")]
    vocab: Option<PathBuf>,
}

#[derive(Args)]
struct PolysemyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output TSV (entity, CP, mention count).
    #[arg(long, env = "JET_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct AnnotateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output TSV; standard output if omitted.
    #[arg(long, env = "JET_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NeighborsArgs {
    /// Embeddings file (binary or text).
    #[arg(long, env = "JET_EMBEDDINGS")]
    embeddings: PathBuf,
    /// Namespaced query key, e.g. ent:C0009443 or word:fever.
    #[arg(long)]
    query: String,
    /// Kinds to search: comma-separated word, term, entity.
    #[arg(long, default_value = "word,term,entity", value_delimiter = ',')]
    kinds: Vec<PointKind>,
    #[arg(long, default_value_t = 10)]
    topk: usize,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Similarity/relatedness ranking (Spearman's rho).
    Simrel(SimrelArgs),
    /// Analogy completion (top-1 accuracy).
    Analogy(AnalogyArgs),
    /// Unsupervised entity disambiguation.
    Wsd(WsdArgs),
}

#[derive(Args)]
struct EvalInput {
    /// Embeddings file (binary or text).
    #[arg(long, env = "JET_EMBEDDINGS")]
    embeddings: PathBuf,
    /// Dataset TSV.
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct SimrelArgs {
    #[command(flatten)]
    input: EvalInput,
    /// entity, word, term, entity+word or cross.
    #[arg(long, default_value = "entity")]
    setting: SimSetting,
    /// Restrict to pairs covered by all of these settings.
    #[arg(long, value_delimiter = ',')]
    filter: Vec<SimSetting>,
}

#[derive(Args)]
struct AnalogyArgs {
    #[command(flatten)]
    input: EvalInput,
    /// entity, word or oracle (oracle also prints both components).
    #[arg(long, default_value = "entity")]
    mode: AnalogyMode,
}

#[derive(Args)]
struct WsdArgs {
    #[command(flatten)]
    input: EvalInput,
    /// Definitions TSV (entity TAB text).
    #[arg(long)]
    definitions: Option<PathBuf>,
    /// Add definition scores to entity scores.
    #[arg(long, requires = "definitions")]
    use_definitions: bool,
    /// Do not use entity vectors (definitions only).
    #[arg(long, requires = "use_definitions")]
    no_entities: bool,
    /// Weight by the cosine between entity and mention.
    #[arg(long)]
    surface: bool,
    /// Print entity, definition and oracle accuracies.
    #[arg(long, requires = "definitions")]
    oracle: bool,
    /// Also print per-mention accuracy.
    #[arg(long)]
    per_mention: bool,
    /// Seed for the random baseline.
    #[arg(long, env = "JET_SEED", default_value_t = 1)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<jet::Error> for Failure {
    fn from(e: jet::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn require_readable(path: &Path, what: &str) -> CmdResult {
    match std::fs::metadata(path) {
        Ok(m) if m.is_file() => Ok(()),
        Ok(_) => Err(Failure::Usage(format!("{what} {} is not a file", path.display()))),
        Err(e) => Err(Failure::Usage(format!("cannot read {what} {}: {e}", path.display()))),
    }
}

fn require_writable_dir(path: &Path, what: &str) -> CmdResult {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{what} {}: directory {} does not exist",
            path.display(),
            dir.display()
        )))
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn load_inputs(input: &InputArgs) -> anyhow::Result<(Corpus, Terminology)> {
    let name = input.terminology.display().to_string();
    let (terminology, report) =
        Terminology::load(&name, open(&input.terminology)?).map_err(|e| e.in_file(&input.terminology))?;
    log::info!(
        "terminology: {} terms, {} entities ({} malformed lines skipped)",
        terminology.n_terms(),
        terminology.n_entities(),
        report.errors.len()
    );
    let lines = open(&input.corpus)?
        .lines()
        .collect::<io::Result<Vec<String>>>()
        .with_context(|| format!("reading {}", input.corpus.display()))?;
    let corpus = Corpus::from_documents(lines);
    log::info!("corpus: {} documents, {} tokens", corpus.n_docs(), corpus.n_tokens());
    Ok((corpus, terminology))
}

fn check_inputs(input: &InputArgs) -> CmdResult {
    require_readable(&input.corpus, "corpus")?;
    require_readable(&input.terminology, "terminology")
}

fn cmd_train(args: TrainArgs) -> CmdResult {
    let cfg = TrainConfig {
        window: args.window as usize,
        negatives: args.negatives,
        lr0: args.lr,
        epochs: args.epochs as usize,
        min_count: args.min_count,
        subsample_coeff: args.subsample,
        dim: args.dim as usize,
        seed: args.seed,
        workers: args.workers as usize,
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    check_inputs(&args.input)?;
    require_writable_dir(&args.out, "output")?;
    if let Some(dir) = &args.checkpoint {
        if !dir.is_dir() {
            return Err(Failure::Usage(format!("checkpoint directory {} does not exist", dir.display())));
        }
    }
    if let Some(v) = &args.vocab {
        require_writable_dir(v, "vocabulary output")?;
    }

    let (corpus, terminology) = load_inputs(&args.input)?;
    let checkpoint = args.checkpoint.clone();
    let model = train_with(&corpus, &terminology, &cfg, |stats, vocab, params| {
        if let Some(dir) = &checkpoint {
            let path = dir.join(format!("epoch-{}.bin", stats.epoch + 1));
            EmbeddingSet::from_model(vocab, params)?.save(&path, Format::Binary)?;
            log::info!("checkpoint written to {}", path.display());
        }
        Ok(())
    })?;
    if let Some(path) = &args.vocab {
        write_atomically(path, |w| model.vocab.write_tsv(w))?;
    }
    let set = EmbeddingSet::from_model(&model.vocab, &model.params)?;
    set.save(&args.out, args.format)?;
    log::info!("embeddings written to {}", args.out.display());
    Ok(())
}

fn cmd_polysemy(args: PolysemyArgs) -> CmdResult {
    check_inputs(&args.input)?;
    require_writable_dir(&args.out, "output")?;
    let (corpus, terminology) = load_inputs(&args.input)?;
    let automaton = MatchAutomaton::build(&terminology)?;
    let mut freqs = std::collections::HashMap::new();
    for doc in corpus.annotate(&automaton) {
        for occ in doc {
            *freqs.entry(occ.term as usize).or_insert(0u64) += 1;
        }
    }
    let report = terminology.corpus_polysemy(&freqs);
    if report.per_entity.is_empty() {
        log::warn!("no terminology matches in the corpus; polysemy report is empty");
    }
    write_atomically(&args.out, |w| report.write_tsv(w))?;
    let mut out = io::stdout().lock();
    writeln!(out, "band\tentities").context("writing to stdout")?;
    for (band, n) in report.histogram() {
        writeln!(out, "{band}\t{n}").context("writing to stdout")?;
    }
    Ok(())
}

fn cmd_annotate(args: AnnotateArgs) -> CmdResult {
    check_inputs(&args.input)?;
    if let Some(out) = &args.out {
        require_writable_dir(out, "output")?;
    }
    let (corpus, terminology) = load_inputs(&args.input)?;
    let automaton = MatchAutomaton::build(&terminology)?;
    let annotations = corpus.annotate(&automaton);
    let dump = |w: &mut dyn Write| -> jet::Result<()> {
        for (i, occs) in annotations.iter().enumerate() {
            write_annotations(&mut *w, &terminology, i, occs)?;
        }
        Ok(())
    };
    match &args.out {
        Some(path) => write_atomically(path, dump)?,
        None => {
            let mut out = io::BufWriter::new(io::stdout().lock());
            dump(&mut out)?;
            out.flush().context("writing to stdout")?;
        }
    }
    Ok(())
}

fn load_embeddings(path: &Path) -> std::result::Result<EmbeddingSet, Failure> {
    require_readable(path, "embeddings")?;
    Ok(EmbeddingSet::load(path)?)
}

fn cmd_neighbors(args: NeighborsArgs) -> CmdResult {
    let set = load_embeddings(&args.embeddings)?;
    let query = set.lookup(&args.query)?;
    let (kind, key) = jet::embeddings::parse_key(&args.query)?;
    let exclude: HashSet<String> = [format!("{}:{key}", kind.prefix())].into();
    let neighbors = set.nearest(&query, &args.kinds, args.topk, &exclude)?;
    let mut out = io::stdout().lock();
    writeln!(out, "rank\tkey\tcosine").context("writing to stdout")?;
    for (i, n) in neighbors.iter().enumerate() {
        writeln!(out, "{}\t{}\t{:.6}", i + 1, n.namespaced(), n.cosine).context("writing to stdout")?;
    }
    Ok(())
}

fn read_dataset<T>(path: &Path, read: impl FnOnce(BufReader<File>) -> jet::Result<T>) -> std::result::Result<T, Failure> {
    require_readable(path, "dataset")?;
    Ok(read(open(path)?).map_err(|e| e.in_file(path))?)
}

fn cmd_simrel(args: SimrelArgs) -> CmdResult {
    let set = load_embeddings(&args.input.embeddings)?;
    let pairs = read_dataset(&args.input.dataset, eval::read_simrel)?;
    let result = if args.filter.is_empty() {
        eval::eval_simrel(&pairs, &set, args.setting)?
    } else {
        let methods: Vec<_> = args.filter.iter().map(|&s| (&set, s)).collect();
        eval::eval_simrel_filtered(&pairs, &set, args.setting, &methods)?
    };
    let mut out = io::stdout().lock();
    writeln!(out, "rho\tcovered\ttotal\tcoverage").context("writing to stdout")?;
    writeln!(
        out,
        "{:.6}\t{}\t{}\t{:.4}",
        result.rho,
        result.covered,
        result.total,
        result.coverage()
    )
    .context("writing to stdout")?;
    Ok(())
}

fn cmd_analogy(args: AnalogyArgs) -> CmdResult {
    let set = load_embeddings(&args.input.embeddings)?;
    let instances = read_dataset(&args.input.dataset, eval::read_analogies)?;
    let modes: &[(&str, AnalogyMode)] = match args.mode {
        AnalogyMode::Entity => &[("entity", AnalogyMode::Entity)],
        AnalogyMode::Word => &[("word", AnalogyMode::Word)],
        AnalogyMode::Oracle => &[
            ("entity", AnalogyMode::Entity),
            ("word", AnalogyMode::Word),
            ("oracle", AnalogyMode::Oracle),
        ],
    };
    let mut out = io::stdout().lock();
    writeln!(out, "mode\taccuracy\tcorrect\ttotal\tunrepresentable").context("writing to stdout")?;
    for &(name, mode) in modes {
        let r = eval::eval_analogy(&instances, &set, mode);
        writeln!(
            out,
            "{name}\t{:.4}\t{}\t{}\t{}",
            r.accuracy(),
            r.correct,
            r.total,
            r.unrepresentable
        )
        .context("writing to stdout")?;
    }
    Ok(())
}

fn cmd_wsd(args: WsdArgs) -> CmdResult {
    let set = load_embeddings(&args.input.embeddings)?;
    let instances = read_dataset(&args.input.dataset, eval::read_wsd)?;
    let defs = match &args.definitions {
        Some(p) => read_dataset(p, eval::read_definitions)?,
        None => eval::Definitions::new(),
    };
    let mut rows = Vec::new();
    if args.oracle {
        let r = eval::eval_wsd_oracle(&instances, &set, &defs, args.surface);
        rows.push(("entity", r.entity));
        rows.push(("definitions", r.definitions));
        rows.push(("oracle", r.oracle));
    } else {
        let opts = WsdOptions {
            use_entities: !args.no_entities,
            use_definitions: args.use_definitions,
            use_surface: args.surface,
        };
        rows.push(("model", eval::eval_wsd(&instances, &set, &defs, opts)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    rows.push(("random", eval::random_baseline(&instances, &mut rng)));
    rows.push(("majority", eval::majority_baseline(&instances)));

    let mut out = io::stdout().lock();
    writeln!(out, "method\taccuracy\tcorrect\ttotal").context("writing to stdout")?;
    for (name, r) in &rows {
        writeln!(out, "{name}\t{:.4}\t{}\t{}", r.accuracy(), r.correct, r.total).context("writing to stdout")?;
    }
    if args.per_mention {
        writeln!(out, "\nmethod\tmention\taccuracy\tcorrect\ttotal").context("writing to stdout")?;
        for (name, r) in &rows {
            for (mention, (c, t)) in &r.per_mention {
                writeln!(out, "{name}\t{mention}\t{:.4}\t{c}\t{t}", *c as f64 / *t as f64)
                    .context("writing to stdout")?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // --help and --version exit 0, parse errors exit 2
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Polysemy(a) => cmd_polysemy(a),
        Command::Annotate(a) => cmd_annotate(a),
        Command::Neighbors(a) => cmd_neighbors(a),
        Command::Eval(EvalCommand::Simrel(a)) => cmd_simrel(a),
        Command::Eval(EvalCommand::Analogy(a)) => cmd_analogy(a),
        Command::Eval(EvalCommand::Wsd(a)) => cmd_wsd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
