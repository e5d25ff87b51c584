use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use segcue::corpus::{synthesize, Corpus, Delimiters, PhonemeInventory};
use segcue::cues::{corpus_cues, CueKind, CueOptions, CueTrack};
use segcue::evaluator::{
    discordant_counts, mcnemar, mcnemar_from_counts, score, LabelledTracks, McNemarMethod,
};
use segcue::pipeline::{build_predictor, parallel_grid, predictive_embeddings, PredictorSpec};
use segcue::probe::{build_probe_dataset, train_probe, ProbeConfig};
use segcue::report::{self, CorpusStats, ProbeRow};
use segcue::segmenter::{tune, Segmentation, Strategy};
use segcue::tokenizer::{train_cue_merges, train_freq_bpe, MergeCue, ScoredStream, TrainOptions};
use segcue::trace_io::{load_tracks, records_from_tracks, TraceTracks, TraceWriter};
use segcue::{merges_io, model_io};

/// Word segmentation from prediction-derived cues.
#[derive(Parser, Serialize)]
#[command(name = "segcue", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize)]
struct Global {
    /// Separator between phonemes inside a word (`\t`, `\s` and `\\` escapes allowed).
    #[arg(long, global = true, default_value = " ")]
    phoneme_delim: String,
    /// Separator between words.
    #[arg(long, global = true, default_value = "\\t")]
    word_delim: String,
    /// Keep only the longest prefix of utterances with at most this many phonemes.
    #[arg(long, global = true)]
    max_tokens: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker cap for the grid (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Echo the resolved configuration as JSON on stderr before running.
    #[arg(long, global = true)]
    dump_config: bool,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Validate and normalize a corpus, optionally splitting it.
    Ingest(IngestArgs),
    /// Generate a corpus from a lexicon of words.
    Synth(SynthArgs),
    /// Train an n-gram model and save it.
    TrainNgram(TrainNgramArgs),
    /// Compute per-position cues and write a trace.
    Cues(CuesArgs),
    /// Segment a corpus from a trace with one cue and strategy.
    Segment(SegmentArgs),
    /// Learn the threshold or relative parameter on a labelled corpus.
    Tune(TuneArgs),
    /// Score a predicted segmentation against gold.
    Eval(EvalArgs),
    /// Run all cue x strategy combinations.
    Grid(GridArgs),
    /// Train and score a word-final linear probe on trace embeddings.
    Probe(ProbeArgs),
    /// Positional phoneme statistics across corpora.
    Analyze(AnalyzeArgs),
    /// McNemar test between two segmentations.
    Mcnemar(McnemarArgs),
    /// Learn a cue-driven or frequency merge table.
    TokTrain(TokTrainArgs),
    /// Encode a corpus with a merge table.
    TokEncode(TokEncodeArgs),
}

#[derive(Args, Serialize)]
struct IngestArgs {
    input: PathBuf,
    /// Output path; with --split, a prefix for PREFIX.{train,dev,test}.txt.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Train/dev/test fractions, e.g. 0.8,0.1,0.1.
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    /// One word per line, phonemes separated by the phoneme delimiter.
    #[arg(long)]
    lexicon: PathBuf,
    /// Number of utterances.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    min_words: usize,
    #[arg(long, default_value_t = 8)]
    max_words: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TrainNgramArgs {
    corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    order: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct CuesArgs {
    corpus: PathBuf,
    /// ngram[:N], random[:ALPHA] or model:PATH.
    #[arg(long, default_value = "ngram:5")]
    predictor: String,
    /// Training corpus for ngram predictors (default: the corpus itself).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Surprisal cap in bits for zero-probability tokens.
    #[arg(long, default_value_t = 64.0)]
    loss_ceiling: f64,
    /// Attach log2 next-token distributions as embeddings.
    #[arg(long)]
    embed: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SegmentArgs {
    corpus: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "ubp")]
    cue: String,
    #[arg(long, default_value = "peak")]
    strategy: String,
    /// Threshold or relative parameter.
    #[arg(long, allow_negative_numbers = true)]
    param: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TuneArgs {
    corpus: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "ubp")]
    cue: String,
    #[arg(long, default_value = "threshold")]
    strategy: String,
    #[arg(long, default_value_t = 512)]
    candidates: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GridArgs {
    corpus: PathBuf,
    /// Compute cues with this predictor on a seeded split of the corpus
    /// (default ngram:5 when no --trace is given).
    #[arg(long, conflicts_with = "trace")]
    predictor: Option<String>,
    /// Precomputed trace for the corpus; the corpus is then evaluated whole.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Labelled corpus for tuning, with --tune-trace (default: tune on the evaluation data).
    #[arg(long, requires = "tune_trace", requires = "trace")]
    tune_corpus: Option<PathBuf>,
    #[arg(long, requires = "tune_corpus")]
    tune_trace: Option<PathBuf>,
    /// Train/dev/test fractions for predictor mode.
    #[arg(long, default_value = "0.9,0.05,0.05")]
    split: String,
    #[arg(long, default_value_t = 512)]
    candidates: usize,
    #[arg(long, default_value_t = 64.0)]
    loss_ceiling: f64,
    /// Grid CSV (default: stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-cell parameters and counts.
    #[arg(long)]
    details: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ProbeArgs {
    corpus: PathBuf,
    /// Trace with embeddings.
    #[arg(long)]
    trace: PathBuf,
    /// Trace of an untrained predictor, reported as the chance baseline.
    #[arg(long)]
    baseline_trace: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    #[arg(required = true)]
    corpora: Vec<PathBuf>,
    /// Scalar statistics CSV (default: stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-phoneme word-final and other-position frequencies.
    #[arg(long)]
    phonemes: Option<PathBuf>,
    /// Correlation matrix of the statistics across corpora.
    #[arg(long)]
    correlation: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TestMethod {
    /// Exact binomial up to 100 discordant pairs, chi-square above.
    Auto,
    Exact,
    ChiSquare,
}

#[derive(Args, Serialize)]
struct McnemarArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_enum, default_value_t = TestMethod::Auto)]
    method: TestMethod,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TokTrainArgs {
    corpus: PathBuf,
    /// ubp, entropy or frequency.
    #[arg(long, default_value = "ubp")]
    cue: String,
    /// Trace supplying cue values (required unless --cue frequency).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    vocab_size: usize,
    #[arg(long, default_value_t = 1)]
    min_pair_count: usize,
    #[arg(long)]
    merges: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
}

#[derive(Args, Serialize)]
struct TokEncodeArgs {
    corpus: PathBuf,
    #[arg(long)]
    merges: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<segcue::Error> for Failure {
    fn from(e: segcue::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<segcue::CoreError> for Failure {
    fn from(e: segcue::CoreError) -> Self {
        Failure::Data(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

type Outcome<T = ()> = Result<T, Failure>;

fn unescape(s: &str) -> Outcome<String> {
    let mut out = String::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('s') => out.push(' '),
            Some('\\') => out.push('\\'),
            other => return Err(usage(format!("bad escape `\\{}` in delimiter", other.map(String::from).unwrap_or_default()))),
        }
    }
    Ok(out)
}

struct Ctx {
    delims: Delimiters,
    max_tokens: Option<usize>,
    seed: u64,
    threads: usize,
}

impl Ctx {
    fn read_text(&self, path: &Path) -> Outcome<String> {
        fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
    }

    fn require(&self, path: &Path) -> Outcome<()> {
        if path.is_file() {
            Ok(())
        } else {
            Err(usage(format!("input {} does not exist", path.display())))
        }
    }

    fn corpus_with(&self, path: &Path, inventory: PhonemeInventory) -> Outcome<Corpus> {
        let text = self.read_text(path)?;
        let mut corpus = Corpus::ingest_with_inventory(&text, &self.delims, inventory)
            .with_context(|| format!("reading {}", path.display()))?;
        if let Some(max) = self.max_tokens {
            corpus = corpus.subsample(max).with_context(|| format!("subsampling {}", path.display()))?;
        }
        let tag = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(corpus.with_language_tag(tag))
    }

    fn corpus(&self, path: &Path) -> Outcome<Corpus> {
        self.corpus_with(path, PhonemeInventory::new())
    }

    fn tracks(&self, path: &Path, corpus: &Corpus) -> Outcome<TraceTracks> {
        self.require(path)?;
        Ok(load_tracks(path, corpus).with_context(|| format!("reading trace {}", path.display()))?)
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Outcome<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).context("writing stdout")?;
        }
    }
    Ok(())
}

fn parse_split(s: &str) -> Outcome<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad split `{s}`; expected three fractions like 0.8,0.1,0.1")))?;
    match parts[..] {
        [a, b, c] => Ok([a, b, c]),
        _ => Err(usage(format!("split `{s}` needs exactly three fractions"))),
    }
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Outcome<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| usage(format!("bad {what} `{s}`: {e}")))
}

fn gold_and_pred(ctx: &Ctx, gold: &Path, pred: &Path) -> Outcome<(Corpus, Corpus)> {
    let gold = ctx.corpus(gold)?;
    let pred_c = ctx.corpus_with(pred, gold.inventory().clone())?;
    same_phonemes(&gold, &pred_c, pred)?;
    Ok((gold, pred_c))
}

fn same_phonemes(gold: &Corpus, other: &Corpus, path: &Path) -> Outcome<()> {
    if gold.utterances().len() != other.utterances().len() {
        return Err(anyhow!(
            "{} has {} utterances, gold has {}",
            path.display(),
            other.utterances().len(),
            gold.utterances().len()
        )
        .into());
    }
    for (u, (g, o)) in gold.utterances().iter().zip(other.utterances()).enumerate() {
        if g.tokens() != o.tokens() {
            return Err(anyhow!("{}: utterance {} differs from gold in its phonemes", path.display(), u + 1).into());
        }
    }
    Ok(())
}

fn run_ingest(ctx: &Ctx, a: &IngestArgs) -> Outcome {
    let corpus = ctx.corpus(&a.input)?;
    log::info!(
        "{} utterances, {} phonemes, {} words, {} symbols",
        corpus.utterances().len(),
        corpus.token_count(),
        corpus.word_count(),
        corpus.inventory().len() - 1
    );
    match &a.split {
        None => emit(a.output.as_deref(), corpus.render(&ctx.delims).as_bytes()),
        Some(s) => {
            let fractions = parse_split(s)?;
            let prefix = a.output.as_ref().ok_or_else(|| usage("--split needs -o PREFIX"))?;
            let splits = corpus.split(fractions, ctx.seed).context("splitting corpus")?;
            for (name, part) in [("train", &splits.train), ("dev", &splits.dev), ("test", &splits.test)] {
                let mut path = prefix.clone().into_os_string();
                path.push(format!(".{name}.txt"));
                emit(Some(Path::new(&path)), part.render(&ctx.delims).as_bytes())?;
            }
            Ok(())
        }
    }
}

fn run_synth(ctx: &Ctx, a: &SynthArgs) -> Outcome {
    let text = ctx.read_text(&a.lexicon)?;
    let lexicon: Vec<Vec<&str>> = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(ctx.delims.phoneme.as_str()).collect())
        .collect();
    if a.min_words == 0 || a.min_words > a.max_words {
        return Err(usage("need 1 <= --min-words <= --max-words"));
    }
    let corpus = synthesize(&lexicon, a.min_words..=a.max_words, a.n, ctx.seed).context("synthesizing corpus")?;
    emit(a.output.as_deref(), corpus.render(&ctx.delims).as_bytes())
}

fn run_train_ngram(ctx: &Ctx, a: &TrainNgramArgs) -> Outcome {
    let corpus = ctx.corpus(&a.corpus)?;
    if a.order == 0 {
        return Err(usage("--order must be at least 1"));
    }
    let model = segcue::predictor::NGramModel::train(&corpus.strip_boundaries(), a.order, corpus.inventory().len())
        .context("training n-gram model")?;
    model_io::save_model(&a.output, &model, corpus.inventory())?;
    Ok(())
}

/// Ingests the corpus to score (and a training corpus if any) with a
/// shared inventory that also matches a saved model.
fn predictor_inputs(ctx: &Ctx, spec: &PredictorSpec, corpus: &Path, train: Option<&Path>) -> Outcome<(Corpus, Option<Corpus>)> {
    match spec {
        PredictorSpec::Model { path } => {
            ctx.require(path)?;
            let (_, inventory) = model_io::load_model(path)?;
            let n = inventory.len();
            let c = ctx.corpus_with(corpus, inventory)?;
            if c.inventory().len() != n {
                let unknown = &c.inventory().symbols()[n..];
                return Err(anyhow!("symbols missing from the model inventory: {}", unknown.join(" ")).into());
            }
            Ok((c, None))
        }
        _ => match train {
            Some(t) => {
                let train = ctx.corpus(t)?;
                let c = ctx.corpus_with(corpus, train.inventory().clone())?;
                // re-read training data so both share the final inventory
                let train = ctx.corpus_with(t, c.inventory().clone())?;
                Ok((c, Some(train)))
            }
            None => {
                let c = ctx.corpus(corpus)?;
                Ok((c.clone(), Some(c)))
            }
        },
    }
}

fn run_cues(ctx: &Ctx, a: &CuesArgs) -> Outcome {
    let spec: PredictorSpec = parse(&a.predictor, "predictor")?;
    let (corpus, train) = predictor_inputs(ctx, &spec, &a.corpus, a.train.as_deref())?;
    let predictor = build_predictor(&spec, train.as_ref(), corpus.inventory().len(), ctx.seed)?;
    let options = CueOptions { loss_ceiling: a.loss_ceiling };
    let tracks = corpus_cues(&*predictor, &corpus, &options).context("computing cues")?;
    let embeddings = a.embed.then(|| predictive_embeddings(&*predictor, &corpus, a.loss_ceiling));
    let records = records_from_tracks(&corpus, &tracks, embeddings.as_deref())?;
    let mut w = TraceWriter::new(Vec::new())?;
    for r in &records {
        w.write(r)?;
    }
    emit(a.output.as_deref(), &w.finish()?)
}

fn cue_and_strategy(cue: &str, strategy: &str) -> Outcome<(CueKind, Strategy)> {
    Ok((parse(cue, "cue")?, parse(strategy, "strategy")?))
}

fn run_segment(ctx: &Ctx, a: &SegmentArgs) -> Outcome {
    let (cue, strategy) = cue_and_strategy(&a.cue, &a.strategy)?;
    if strategy.is_tunable() && a.param.is_none() {
        return Err(usage(format!("--strategy {strategy} needs --param")));
    }
    let corpus = ctx.corpus(&a.corpus)?;
    let tracks = ctx.tracks(&a.trace, &corpus)?.tracks;
    let seg = Segmentation::from_tracks(&tracks, cue, strategy, a.param).context("segmenting")?;
    let text = corpus.render_with(&seg.boundaries, &ctx.delims).context("rendering")?;
    emit(a.output.as_deref(), text.as_bytes())
}

fn values(tracks: &[CueTrack], cue: CueKind) -> Vec<Vec<f64>> {
    tracks.iter().map(|t| t.values(cue)).collect()
}

fn run_tune(ctx: &Ctx, a: &TuneArgs) -> Outcome {
    let (cue, strategy) = cue_and_strategy(&a.cue, &a.strategy)?;
    if !strategy.is_tunable() {
        return Err(usage("peak has no parameter to tune"));
    }
    let corpus = ctx.corpus(&a.corpus)?;
    let tracks = ctx.tracks(&a.trace, &corpus)?.tracks;
    let t = tune(strategy, &values(&tracks, cue), &corpus.gold_boundaries(), a.candidates).context("tuning")?;
    let text = format!(
        "cue,strategy,parameter,f1\n{cue},{strategy},{},{:.6}\n",
        segcue::format_f64(t.parameter),
        t.score.f1
    );
    emit(a.report.as_deref(), text.as_bytes())
}

fn run_eval(ctx: &Ctx, a: &EvalArgs) -> Outcome {
    let (gold, pred) = gold_and_pred(ctx, &a.gold, &a.pred)?;
    let s = score(&gold.gold_boundaries(), &pred.gold_boundaries()).context("scoring")?;
    emit(a.report.as_deref(), report::score_csv(&s).as_bytes())
}

fn run_grid(ctx: &Ctx, a: &GridArgs) -> Outcome {
    let options = CueOptions { loss_ceiling: a.loss_ceiling };
    let (tune_gold, tune_tracks, eval_gold, eval_tracks) = if let Some(trace) = &a.trace {
        let corpus = ctx.corpus(&a.corpus)?;
        let tracks = ctx.tracks(trace, &corpus)?.tracks;
        let (tg, tt) = match (&a.tune_corpus, &a.tune_trace) {
            (Some(c), Some(t)) => {
                let tc = ctx.corpus(c)?;
                let tt = ctx.tracks(t, &tc)?.tracks;
                (tc.gold_boundaries(), tt)
            }
            _ => (corpus.gold_boundaries(), tracks.clone()),
        };
        (tg, tt, corpus.gold_boundaries(), tracks)
    } else {
        let spec: PredictorSpec = parse(a.predictor.as_deref().unwrap_or("ngram:5"), "predictor")?;
        let fractions = parse_split(&a.split)?;
        let corpus = match &spec {
            PredictorSpec::Model { .. } => predictor_inputs(ctx, &spec, &a.corpus, None)?.0,
            _ => ctx.corpus(&a.corpus)?,
        };
        let splits = corpus.split(fractions, ctx.seed).context("splitting corpus")?;
        let predictor = build_predictor(&spec, Some(&splits.train), corpus.inventory().len(), ctx.seed)?;
        let dev = corpus_cues(&*predictor, &splits.dev, &options).context("dev cues")?;
        let test = corpus_cues(&*predictor, &splits.test, &options).context("test cues")?;
        (splits.dev.gold_boundaries(), dev, splits.test.gold_boundaries(), test)
    };
    let tuning = LabelledTracks::new(&tune_gold, &tune_tracks).context("tuning data")?;
    let evaluation = LabelledTracks::new(&eval_gold, &eval_tracks).context("evaluation data")?;
    let grid = parallel_grid(tuning, evaluation, a.candidates, ctx.threads)?;
    if let Some(p) = &a.details {
        emit(Some(p), report::grid_details_csv(&grid).as_bytes())?;
    }
    emit(a.report.as_deref(), report::grid_csv(&grid).as_bytes())
}

fn probe_row(label: &str, corpus: &Corpus, embeddings: &[Vec<Vec<f64>>], seed: u64, config: &ProbeConfig) -> Outcome<ProbeRow> {
    let data = build_probe_dataset(embeddings, corpus, seed).context("building probe dataset")?;
    let probe = train_probe(&data.train, config).context("training probe")?;
    let train_acc = probe.accuracy(&data.train).accuracy;
    let test = probe.accuracy(&data.test);
    Ok(ProbeRow::new(label, &data, train_acc, test))
}

fn run_probe(ctx: &Ctx, a: &ProbeArgs) -> Outcome {
    let corpus = ctx.corpus(&a.corpus)?;
    let config = ProbeConfig { learning_rate: a.learning_rate, epochs: a.epochs };
    let mut rows = Vec::new();
    let mut sources = vec![("trace", &a.trace)];
    if let Some(b) = &a.baseline_trace {
        sources.push(("baseline", b));
    }
    for (label, path) in sources {
        let embs = ctx
            .tracks(path, &corpus)?
            .embeddings
            .ok_or_else(|| anyhow!("{} has no embeddings", path.display()))?;
        rows.push(probe_row(label, &corpus, &embs, ctx.seed, &config)?);
    }
    emit(a.report.as_deref(), report::probe_csv(&rows).as_bytes())
}

fn run_analyze(ctx: &Ctx, a: &AnalyzeArgs) -> Outcome {
    let mut stats = Vec::new();
    for p in &a.corpora {
        let c = ctx.corpus(p)?;
        stats.push(CorpusStats::compute(c.language_tag(), &c));
    }
    if let Some(p) = &a.phonemes {
        emit(Some(p), report::phoneme_csv(&stats).as_bytes())?;
    }
    if let Some(p) = &a.correlation {
        emit(Some(p), report::correlation_csv(&stats).as_bytes())?;
    }
    emit(a.report.as_deref(), report::stats_csv(&stats).as_bytes())
}

fn run_mcnemar(ctx: &Ctx, a: &McnemarArgs) -> Outcome {
    let (gold, pa) = gold_and_pred(ctx, &a.gold, &a.a)?;
    let pb = ctx.corpus_with(&a.b, gold.inventory().clone())?;
    same_phonemes(&gold, &pb, &a.b)?;
    let (g, x, y) = (gold.gold_boundaries(), pa.gold_boundaries(), pb.gold_boundaries());
    let m = match a.method {
        TestMethod::Auto => mcnemar(&g, &x, &y).context("mcnemar")?,
        TestMethod::Exact | TestMethod::ChiSquare => {
            let (b, c) = discordant_counts(&g, &x, &y).context("mcnemar")?;
            let method = if matches!(a.method, TestMethod::Exact) { McNemarMethod::Exact } else { McNemarMethod::ChiSquare };
            mcnemar_from_counts(b, c, method)
        }
    };
    emit(a.report.as_deref(), report::mcnemar_csv(&m).as_bytes())
}

fn run_tok_train(ctx: &Ctx, a: &TokTrainArgs) -> Outcome {
    let cue: MergeCue = parse(&a.cue, "merge cue")?;
    let corpus = ctx.corpus(&a.corpus)?;
    let names = corpus.inventory().symbols();
    let ub = corpus.inventory().ub_id();
    let options = TrainOptions { target_vocab: a.vocab_size, min_pair_count: a.min_pair_count };
    let out = match cue.cue_kind() {
        None => train_freq_bpe(corpus.strip_boundaries(), names, ub, &options),
        Some(kind) => {
            let trace = a.trace.as_ref().ok_or_else(|| usage(format!("--cue {cue} needs --trace")))?;
            let tracks = ctx.tracks(trace, &corpus)?.tracks;
            let stream = ScoredStream::from_tracks(&corpus, &tracks, kind).context("building scored stream")?;
            train_cue_merges(stream, names, ub, cue, &options)
        }
    }
    .context("training merges")?;
    log::info!(
        "{} merges, vocabulary {}, stream {} -> {} tokens",
        out.table.merges().len(),
        out.table.vocab().len(),
        corpus.token_count() + corpus.utterances().len() + 1,
        out.stream.len()
    );
    merges_io::save_merges(&a.merges, &a.vocab, &out.table)?;
    Ok(())
}

fn run_tok_encode(ctx: &Ctx, a: &TokEncodeArgs) -> Outcome {
    ctx.require(&a.merges)?;
    ctx.require(&a.vocab)?;
    let table = merges_io::load_merges(&a.merges, &a.vocab)?;
    let inventory = PhonemeInventory::from_symbols(table.initial_names().iter().map(String::as_str))
        .map_err(|e| anyhow!("vocabulary: {e}"))?;
    let n = inventory.len();
    let corpus = ctx.corpus_with(&a.corpus, inventory)?;
    if corpus.inventory().len() != n {
        let unknown = &corpus.inventory().symbols()[n..];
        return Err(anyhow!("symbols missing from the vocabulary: {}", unknown.join(" ")).into());
    }
    let mut text = String::new();
    for utt in corpus.utterances() {
        let encoded = table.encode(utt.tokens()).context("encoding")?;
        let names: Vec<&str> = encoded.iter().map(|&t| table.vocab().name(t).unwrap_or_default()).collect();
        text.push_str(&names.join(&ctx.delims.phoneme));
        text.push('\n');
    }
    emit(a.output.as_deref(), text.as_bytes())
}

fn run(cli: &Cli) -> Outcome {
    let g = &cli.global;
    let delims = Delimiters { word: unescape(&g.word_delim)?, phoneme: unescape(&g.phoneme_delim)? };
    if delims.word.is_empty() || delims.phoneme.is_empty() || delims.word == delims.phoneme {
        return Err(usage("delimiters must be non-empty and distinct"));
    }
    if g.dump_config {
        let json = serde_json::to_string(cli).map_err(|e| anyhow!(e))?;
        eprintln!("{json}");
    }
    let ctx = Ctx { delims, max_tokens: g.max_tokens, seed: g.seed, threads: g.threads };
    match &cli.command {
        Command::Ingest(a) => run_ingest(&ctx, a),
        Command::Synth(a) => run_synth(&ctx, a),
        Command::TrainNgram(a) => run_train_ngram(&ctx, a),
        Command::Cues(a) => run_cues(&ctx, a),
        Command::Segment(a) => run_segment(&ctx, a),
        Command::Tune(a) => run_tune(&ctx, a),
        Command::Eval(a) => run_eval(&ctx, a),
        Command::Grid(a) => run_grid(&ctx, a),
        Command::Probe(a) => run_probe(&ctx, a),
        Command::Analyze(a) => run_analyze(&ctx, a),
        Command::Mcnemar(a) => run_mcnemar(&ctx, a),
        Command::TokTrain(a) => run_tok_train(&ctx, a),
        Command::TokEncode(a) => run_tok_encode(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
