use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lscd::alignment::AlignConfig;
use lscd::baselines::Baseline;
use lscd::change::{ChangeScores, StdMode, ThresholdDecision, ThresholdMethod};
use lscd::corpus::read_corpus;
use lscd::evaluation::{load_gold, load_labels};
use lscd::pipeline::{self, BaselineInputs, RunConfig};
use lscd::sgns::{load_vocab_counts, Hyperparams};
use lscd::synth::{generate, SynthSpec};
use lscd::{tsv, ErrorKind, LscdError};

#[derive(Parser)]
#[command(name = "lscd", version, about = "Detect lexical semantic change between two corpora")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train skip-gram embeddings on one corpus.
    Train(TrainArgs),
    /// Align two embedding files with an orthogonal map.
    Align(AlignArgs),
    /// Cosine distance of every shared word.
    Score(ScoreArgs),
    /// Pick a change threshold from scores.
    Threshold(ThresholdArgs),
    /// Binary labels for the targets.
    Label(LabelArgs),
    /// Accuracy and average precision against gold labels.
    Eval(EvalArgs),
    /// Run a reference baseline.
    Baseline(BaselineArgs),
    /// Generate a synthetic corpus pair with known changes.
    Synth(SynthArgs),
    /// Run the whole pipeline from a config file and/or flags.
    Run(RunArgs),
}

#[derive(Args, Default)]
struct HpArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    /// Negative samples per pair.
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Subsampling threshold; `inf` disables it.
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    ns_exponent: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    deterministic: Option<bool>,
    #[arg(long)]
    threads: Option<usize>,
    /// Always use the full window instead of sampling its size.
    #[arg(long)]
    fixed_window: bool,
}

impl HpArgs {
    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        put("dim", self.dim.map(|v| v.to_string()));
        put("window", self.window.map(|v| v.to_string()));
        put("negatives", self.negatives.map(|v| v.to_string()));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("subsample", self.subsample.map(|v| v.to_string()));
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("min_count", self.min_count.map(|v| v.to_string()));
        put("ns_exponent", self.ns_exponent.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("deterministic", self.deterministic.map(|v| v.to_string()));
        put("threads", self.threads.map(|v| v.to_string()));
        put("dynamic_window", self.fixed_window.then(|| "false".to_string()));
        out
    }

    fn hyperparams(&self) -> lscd::Result<Hyperparams> {
        let mut hp = Hyperparams::default();
        if let Some(v) = self.dim {
            hp.dim = v;
        }
        if let Some(v) = self.window {
            hp.window = v;
        }
        if let Some(v) = self.negatives {
            hp.negatives = v;
        }
        if let Some(v) = self.alpha {
            hp.alpha = v;
        }
        if let Some(v) = self.subsample {
            hp.subsample = v;
        }
        if let Some(v) = self.epochs {
            hp.epochs = v;
        }
        if let Some(v) = self.min_count {
            hp.min_count = v;
        }
        if let Some(v) = self.ns_exponent {
            hp.ns_exponent = v;
        }
        if let Some(v) = self.seed {
            hp.seed = v;
        }
        if let Some(v) = self.deterministic {
            hp.deterministic = v;
        }
        if let Some(v) = self.threads {
            hp.threads = v;
        }
        hp.dynamic_window = !self.fixed_window;
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output embedding file; counts go to `<stem>.vocab.tsv` beside it.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hp: HpArgs,
}

#[derive(Args, Default)]
struct AlignFlags {
    /// Fit the map on the N most frequent shared words only.
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    no_center: bool,
    #[arg(long)]
    no_renormalize: bool,
}

impl AlignFlags {
    fn config(&self) -> AlignConfig {
        AlignConfig {
            normalize: !self.no_normalize,
            center: !self.no_center,
            renormalize: !self.no_renormalize,
            top_n: self.top_n,
        }
    }
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    emb1: PathBuf,
    #[arg(long)]
    emb2: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    flags: AlignFlags,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    aligned1: PathBuf,
    #[arg(long)]
    aligned2: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Vocabulary counts of the first corpus, used to explain missing targets.
    #[arg(long)]
    vocab1: Option<PathBuf>,
    #[arg(long)]
    vocab2: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, default_value = "mean-std")]
    threshold_method: ThresholdMethod,
    #[arg(long, default_value = "population")]
    std_mode: StdMode,
    #[arg(long, default_value_t = 1.0)]
    std_coef: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    /// Threshold record written by `threshold`.
    #[arg(long)]
    threshold: PathBuf,
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    bins: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    labels: PathBuf,
    /// Score file used for average precision.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    baseline: Baseline,
    #[arg(long)]
    corpus1: PathBuf,
    #[arg(long)]
    corpus2: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Context window of the collocation baseline.
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Frequency baseline on raw counts instead of per-million rates.
    #[arg(long)]
    raw_counts: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    sentences: Option<usize>,
    #[arg(long, default_value_t = 10)]
    targets: usize,
    #[arg(long, default_value_t = 5)]
    changed: usize,
    /// Share of a changed target's second-corpus uses moved to a new cluster.
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
}

#[derive(Args)]
struct RunArgs {
    /// `key=value` config; flags override its settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus1: Option<PathBuf>,
    #[arg(long)]
    corpus2: Option<PathBuf>,
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    hp: HpArgs,
    #[arg(long)]
    threshold_method: Option<ThresholdMethod>,
    #[arg(long)]
    std_mode: Option<StdMode>,
    #[arg(long)]
    std_coef: Option<f64>,
    /// Baselines to run alongside; repeatable.
    #[arg(long)]
    baseline: Vec<Baseline>,
    #[arg(long)]
    bins: Option<usize>,
    /// Extra `key=value` settings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Error carrying the stage that failed.
struct Failure {
    stage: &'static str,
    kind: ErrorKind,
    error: anyhow::Error,
}

trait Staged<T> {
    fn at(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Staged<T> for lscd::Result<T> {
    fn at(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            stage,
            kind: e.kind(),
            error: e.into(),
        })
    }
}

fn ensure_dir(dir: &Path) -> lscd::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| LscdError::io(dir, e))
}

fn require_file(name: &str, path: &Path) -> lscd::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(LscdError::Config(format!("{name} file {} does not exist", path.display())))
    }
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    require_file("corpus", &args.corpus).at("train")?;
    let hp = args.hp.hyperparams().at("train")?;
    let corpus = read_corpus(&args.corpus).at("train")?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir).at("train")?;
    }
    pipeline::train_stage(&corpus, &hp, &args.out).at("train")?;
    Ok(())
}

fn align(args: AlignArgs) -> Result<(), Failure> {
    require_file("emb1", &args.emb1).at("align")?;
    require_file("emb2", &args.emb2).at("align")?;
    let a = pipeline::load_embeddings_with_counts(&args.emb1).at("align")?;
    let b = pipeline::load_embeddings_with_counts(&args.emb2).at("align")?;
    ensure_dir(&args.out_dir).at("align")?;
    let aligned = pipeline::align_stage(&a, &b, &args.flags.config(), &args.out_dir).at("align")?;
    log::info!(
        "aligned {} shared words, orthogonality error {:e}",
        aligned.map.len(),
        aligned.w.orthogonality_error()
    );
    Ok(())
}

fn score(args: ScoreArgs) -> Result<(), Failure> {
    require_file("targets", &args.targets).at("score")?;
    let targets = tsv::read_word_list(&args.targets).at("score")?;
    let a = pipeline::load_embeddings_with_counts(&args.aligned1).at("score")?;
    let b = pipeline::load_embeddings_with_counts(&args.aligned2).at("score")?;
    let vocabs = match (&args.vocab1, &args.vocab2) {
        (Some(v1), Some(v2)) => Some((load_vocab_counts(v1).at("score")?, load_vocab_counts(v2).at("score")?)),
        (None, None) => None,
        _ => {
            return Err(LscdError::Config("--vocab1 and --vocab2 go together".into())).at("score");
        }
    };
    let scores = pipeline::score_spaces(&a, &b, &targets, vocabs.as_ref().map(|(x, y)| (x, y))).at("score")?;
    ensure_dir(&args.out_dir).at("score")?;
    pipeline::save_scores(&scores, &args.out_dir).at("score")?;
    Ok(())
}

fn threshold(args: ThresholdArgs) -> Result<(), Failure> {
    require_file("targets", &args.targets).at("threshold")?;
    let targets = tsv::read_word_list(&args.targets).at("threshold")?;
    let scores = ChangeScores::load(&args.scores, &targets).at("threshold")?;
    let decision =
        pipeline::threshold_stage(&scores, args.threshold_method, args.std_mode, args.std_coef).at("threshold")?;
    decision.save(&args.out).at("threshold")?;
    println!("{}", decision.value);
    Ok(())
}

fn label(args: LabelArgs) -> Result<(), Failure> {
    require_file("targets", &args.targets).at("label")?;
    let targets = tsv::read_word_list(&args.targets).at("label")?;
    let scores = ChangeScores::load(&args.scores, &targets).at("label")?;
    let decision = ThresholdDecision::load(&args.threshold).at("label")?;
    let gold = args.gold.as_ref().map(load_gold).transpose().at("label")?;
    ensure_dir(&args.out_dir).at("label")?;
    pipeline::label_stage(&scores, &decision, gold.as_ref(), args.bins, &args.out_dir).at("label")?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    require_file("gold", &args.gold).at("evaluate")?;
    let gold = load_gold(&args.gold).at("evaluate")?;
    let labels = load_labels(&args.labels).at("evaluate")?;
    let scores = ChangeScores::load(&args.scores, gold.targets()).at("evaluate")?;
    let report = pipeline::eval_stage(&labels, &pipeline::ranking_scores(&scores), &gold, &args.out).at("evaluate")?;
    print!("{}", report.to_tsv());
    Ok(())
}

fn baseline(args: BaselineArgs) -> Result<(), Failure> {
    for (name, p) in [("corpus1", &args.corpus1), ("corpus2", &args.corpus2), ("targets", &args.targets)] {
        require_file(name, p).at("baseline")?;
    }
    let targets = tsv::read_word_list(&args.targets).at("baseline")?;
    let gold = args.gold.as_ref().map(load_gold).transpose().at("baseline")?;
    let c1 = read_corpus(&args.corpus1).at("baseline")?;
    let c2 = read_corpus(&args.corpus2).at("baseline")?;
    ensure_dir(&args.out_dir).at("baseline")?;
    let inputs = BaselineInputs {
        corpus1: &c1,
        corpus2: &c2,
        targets: &targets,
        window: args.window,
        raw_counts: args.raw_counts,
        gold: gold.as_ref(),
    };
    let outcome = pipeline::baseline_stage(args.baseline, &inputs, &args.out_dir).at("baseline")?;
    if let Some(r) = outcome.report {
        print!("{}", r.to_tsv());
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), Failure> {
    let mut spec = SynthSpec::with_targets(args.targets, args.changed, args.ratio);
    if let Some(v) = args.vocab_size {
        spec.vocab_size = v;
    }
    if let Some(s) = args.sentences {
        spec.sentences = s;
    }
    let corpus = generate(&spec, args.seed).at("synth")?;
    corpus.write_to(&args.out_dir).at("synth")?;
    Ok(())
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut map = match &args.config {
        Some(p) => pipeline::read_kv_file(p).at("config")?,
        None => BTreeMap::new(),
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let mut overrides: Vec<(&str, Option<String>)> = vec![
        ("corpus1", path(&args.corpus1)),
        ("corpus2", path(&args.corpus2)),
        ("targets", path(&args.targets)),
        ("gold", path(&args.gold)),
        ("out_dir", path(&args.out_dir)),
        ("threshold_method", args.threshold_method.map(|m| m.to_string())),
        ("std_mode", args.std_mode.map(|m| m.to_string())),
        ("std_coef", args.std_coef.map(|v| v.to_string())),
        ("bins", args.bins.map(|v| v.to_string())),
    ];
    if !args.baseline.is_empty() {
        let names: Vec<String> = args.baseline.iter().map(|b| b.to_string()).collect();
        overrides.push(("baselines", Some(names.join(","))));
    }
    for (k, v) in overrides {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    for (k, v) in args.hp.entries() {
        map.insert(k.to_string(), v);
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| LscdError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))
            .at("config")?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let config = RunConfig::from_map(&map).at("config")?;
    let summary = pipeline::run_pipeline(&config).map_err(|e| Failure {
        stage: e.stage,
        kind: e.kind(),
        error: e.source.into(),
    })?;
    println!("threshold\t{}", summary.threshold.value);
    let changed = summary.labels.iter().filter(|l| l.1 == 1).count();
    println!("changed\t{changed}/{}", summary.labels.len());
    if let Some(r) = summary.report {
        print!("{}", r.to_tsv());
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Align(a) => align(a),
        Command::Score(a) => score(a),
        Command::Threshold(a) => threshold(a),
        Command::Label(a) => label(a),
        Command::Eval(a) => eval(a),
        Command::Baseline(a) => baseline(a),
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let error = f.error.context(format!("{} stage failed", f.stage));
            eprintln!("error: {error:#}");
            ExitCode::from(exit_code(f.kind))
        }
    }
}
