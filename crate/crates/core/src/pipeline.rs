//! End-to-end runs: train both corpora, align, score, threshold, label and
//! evaluate, writing every intermediate artifact and a replayable manifest.
//!
//! Each stage is also exposed on its own so that stages can be composed
//! through files; `run` produces exactly what chaining the stages does.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use log::info;

use crate::alignment::{align, AlignConfig, AlignedPair};
use crate::baselines::{collocation_baseline, frequency_baseline, majority_baseline, Baseline};
use crate::change::{
    binarize, cosine_distance, export_histogram, save_labels, threshold_mean_std_values,
    threshold_median_split, ChangeScores, MissingReason, StdMode, ThresholdDecision,
    ThresholdMethod,
};
use crate::corpus::{read_corpus, CorpusStats, Sentence, Vocabulary};
use crate::error::{ErrorKind, LscdError, Result};
use crate::evaluation::{report, EvalReport, GoldData};
use crate::sgns::{
    load_embeddings, load_vocab_counts, save_embeddings, save_vocab_counts, train_sgns, EmbeddingMatrix,
    Hyperparams,
};
use crate::tsv;

pub const EMB1: &str = "emb1.vec";
pub const EMB2: &str = "emb2.vec";
pub const ALIGNED1: &str = "aligned1.vec";
pub const ALIGNED2: &str = "aligned2.vec";
pub const ALIGN_MAP: &str = "w.txt";
pub const SHARED_VOCAB: &str = "shared_vocab.tsv";
pub const SCORES: &str = "scores.tsv";
pub const MISSING: &str = "missing.tsv";
pub const THRESHOLD: &str = "threshold.tsv";
pub const LABELS: &str = "labels.tsv";
pub const HISTOGRAM: &str = "histogram.tsv";
pub const REPORT: &str = "report.tsv";
pub const MANIFEST: &str = "manifest.txt";

/// Keys written to the manifest that are not configuration.
const META_KEYS: [&str; 3] = ["status", "failed_stage", "error"];

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus1: PathBuf,
    pub corpus2: PathBuf,
    pub targets: PathBuf,
    pub gold: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub hp: Hyperparams,
    pub align: AlignConfig,
    pub threshold_method: ThresholdMethod,
    pub std_mode: StdMode,
    pub std_coef: f64,
    pub baselines: Vec<Baseline>,
    pub bins: usize,
    pub colloc_window: usize,
    pub raw_counts: bool,
}

/// Training seed of the second corpus; the two spaces are trained with
/// independent random streams.
pub fn second_seed(seed: u64) -> u64 {
    seed.wrapping_add(1)
}

/// Sidecar frequency file next to an embedding file.
pub fn vocab_sidecar(vec_path: &Path) -> PathBuf {
    vec_path.with_extension("vocab.tsv")
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| LscdError::Config(format!("invalid value {v:?} for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(LscdError::Config(format!("invalid boolean {v:?} for {key}"))),
    }
}

/// Parses a flat `key=value` file. `#` starts a comment line.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| LscdError::Config(format!("line {}: expected key=value", i + 1)))?;
        map.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(map)
}

pub fn read_kv_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LscdError::io(path, e))?;
    parse_kv(&text).map_err(|e| LscdError::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// Builds a config from `key=value` settings over the defaults.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut hp = Hyperparams {
            dim: 300,
            ..Hyperparams::default()
        };
        let mut align_cfg = AlignConfig::default();
        let mut colloc_window = None;
        let (mut corpus1, mut corpus2, mut targets, mut gold, mut out_dir) = (None, None, None, None, None);
        let mut threshold_method = ThresholdMethod::MeanStd;
        let mut std_mode = StdMode::Population;
        let mut std_coef = 1.0;
        let mut baselines = Vec::new();
        let mut bins = 40;
        let mut raw_counts = false;
        for (k, v) in map {
            let key = k.as_str();
            match key {
                "corpus1" => corpus1 = Some(PathBuf::from(v)),
                "corpus2" => corpus2 = Some(PathBuf::from(v)),
                "targets" => targets = Some(PathBuf::from(v)),
                "gold" => gold = (!v.is_empty()).then(|| PathBuf::from(v)),
                "out_dir" => out_dir = Some(PathBuf::from(v)),
                "dim" => hp.dim = parse_value(key, v)?,
                "window" => hp.window = parse_value(key, v)?,
                "negatives" => hp.negatives = parse_value(key, v)?,
                "alpha" => hp.alpha = parse_value(key, v)?,
                "subsample" => hp.subsample = parse_value(key, v)?,
                "epochs" => hp.epochs = parse_value(key, v)?,
                "min_count" => hp.min_count = parse_value(key, v)?,
                "ns_exponent" => hp.ns_exponent = parse_value(key, v)?,
                "seed" => hp.seed = parse_value(key, v)?,
                "deterministic" => hp.deterministic = parse_bool(key, v)?,
                "threads" => hp.threads = parse_value(key, v)?,
                "dynamic_window" => hp.dynamic_window = parse_bool(key, v)?,
                "threshold_method" => threshold_method = v.parse()?,
                "std_mode" => std_mode = v.parse()?,
                "std_coef" => std_coef = parse_value(key, v)?,
                "baselines" => {
                    baselines = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?
                }
                "bins" => bins = parse_value(key, v)?,
                "align_normalize" => align_cfg.normalize = parse_bool(key, v)?,
                "align_center" => align_cfg.center = parse_bool(key, v)?,
                "align_renormalize" => align_cfg.renormalize = parse_bool(key, v)?,
                "align_top_n" => {
                    align_cfg.top_n = match v.as_str() {
                        "" | "all" => None,
                        n => Some(parse_value(key, n)?),
                    }
                }
                "colloc_window" => colloc_window = Some(parse_value(key, v)?),
                "raw_counts" => raw_counts = parse_bool(key, v)?,
                k if META_KEYS.contains(&k) => {}
                other => return Err(LscdError::Config(format!("unknown setting {other:?}"))),
            }
        }
        let need = |p: Option<PathBuf>, name: &str| {
            p.ok_or_else(|| LscdError::Config(format!("missing required setting {name}")))
        };
        let config = RunConfig {
            corpus1: need(corpus1, "corpus1")?,
            corpus2: need(corpus2, "corpus2")?,
            targets: need(targets, "targets")?,
            gold,
            out_dir: need(out_dir, "out_dir")?,
            colloc_window: colloc_window.unwrap_or(hp.window),
            hp,
            align: align_cfg,
            threshold_method,
            std_mode,
            std_coef,
            baselines,
            bins,
            raw_counts,
        };
        config.hp.validate()?;
        if config.bins == 0 {
            return Err(LscdError::Config("bins must be at least 1".into()));
        }
        if !config.std_coef.is_finite() {
            return Err(LscdError::Config("std_coef must be finite".into()));
        }
        Ok(config)
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        let hp = &self.hp;
        let p = |p: &Path| p.display().to_string();
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_owned(), v);
        };
        put("corpus1", p(&self.corpus1));
        put("corpus2", p(&self.corpus2));
        put("targets", p(&self.targets));
        put("gold", self.gold.as_deref().map(p).unwrap_or_default());
        put("out_dir", p(&self.out_dir));
        put("dim", hp.dim.to_string());
        put("window", hp.window.to_string());
        put("negatives", hp.negatives.to_string());
        put("alpha", hp.alpha.to_string());
        put("subsample", hp.subsample.to_string());
        put("epochs", hp.epochs.to_string());
        put("min_count", hp.min_count.to_string());
        put("ns_exponent", hp.ns_exponent.to_string());
        put("seed", hp.seed.to_string());
        put("deterministic", hp.deterministic.to_string());
        put("threads", hp.threads.to_string());
        put("dynamic_window", hp.dynamic_window.to_string());
        put("threshold_method", self.threshold_method.to_string());
        put("std_mode", self.std_mode.to_string());
        put("std_coef", self.std_coef.to_string());
        put(
            "baselines",
            self.baselines.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","),
        );
        put("bins", self.bins.to_string());
        put("align_normalize", self.align.normalize.to_string());
        put("align_center", self.align.center.to_string());
        put("align_renormalize", self.align.renormalize.to_string());
        put(
            "align_top_n",
            self.align.top_n.map_or_else(|| "all".to_string(), |n| n.to_string()),
        );
        put("colloc_window", self.colloc_window.to_string());
        put("raw_counts", self.raw_counts.to_string());
        m
    }

    /// Checks that every input exists.
    pub fn validate_paths(&self) -> Result<()> {
        let mut inputs = vec![
            ("corpus1", &self.corpus1),
            ("corpus2", &self.corpus2),
            ("targets", &self.targets),
        ];
        if let Some(g) = &self.gold {
            inputs.push(("gold", g));
        }
        for (name, path) in inputs {
            if !path.is_file() {
                return Err(LscdError::Config(format!(
                    "{name} file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

/// A failure tagged with the pipeline stage it came from.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: LscdError,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl StageError {
    pub fn kind(&self) -> ErrorKind {
        self.source.kind()
    }
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| LscdError::io(dir, e))
}

/// Trains one corpus and writes `<out>` plus its vocabulary sidecar.
pub fn train_stage(corpus: &[Sentence], hp: &Hyperparams, out: &Path) -> Result<EmbeddingMatrix> {
    let model = train_sgns(corpus, hp)?.without_contexts();
    save_embeddings(&model, out)?;
    save_vocab_counts(&model.vocab, vocab_sidecar(out))?;
    Ok(model)
}

/// Loads an embedding file, attaching sidecar counts when present.
pub fn load_embeddings_with_counts(path: &Path) -> Result<EmbeddingMatrix> {
    let model = load_embeddings(path)?;
    let sidecar = vocab_sidecar(path);
    if sidecar.is_file() {
        let vocab = load_vocab_counts(&sidecar)?;
        model.with_vocabulary(vocab)
    } else {
        Ok(model)
    }
}

/// Aligns and writes `aligned1.vec`, `aligned2.vec`, `w.txt` and
/// `shared_vocab.tsv` into `out_dir`.
pub fn align_stage(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
    config: &AlignConfig,
    out_dir: &Path,
) -> Result<AlignedPair> {
    let aligned = align(a, b, config)?;
    let (ea, eb) = aligned.to_embeddings()?;
    save_embeddings(&ea, out_dir.join(ALIGNED1))?;
    save_embeddings(&eb, out_dir.join(ALIGNED2))?;
    aligned.w.save(out_dir.join(ALIGN_MAP))?;
    let lines: Vec<String> = (0..aligned.map.len())
        .map(|i| {
            format!(
                "{}\t{}\t{}",
                aligned.map.words[i], aligned.map.rows_a[i], aligned.map.rows_b[i]
            )
        })
        .collect();
    tsv::write_lines(out_dir.join(SHARED_VOCAB), lines.iter().map(String::as_str))?;
    Ok(aligned)
}

/// Scores two row-aligned spaces. Words present in only one of them are
/// ignored; targets outside both are reported missing.
pub fn score_spaces(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
    targets: &[String],
    vocabs: Option<(&Vocabulary, &Vocabulary)>,
) -> Result<ChangeScores> {
    let mut scores = Vec::with_capacity(a.len());
    let mut zero = std::collections::HashSet::new();
    for (i, word) in a.vocab.words().iter().enumerate() {
        let Some(j) = b.vocab.index_of(word) else {
            continue;
        };
        let u = a.word_vectors.row(i);
        let v = b.word_vectors.row(j);
        match cosine_distance(u.as_slice().expect("row"), v.as_slice().expect("row")) {
            Ok(cd) => scores.push((word.clone(), cd)),
            Err(LscdError::Undefined(_)) => {
                zero.insert(word.clone());
            }
            Err(e) => return Err(e),
        }
    }
    let mut result = ChangeScores::new(scores, targets)?;
    if let Some((v1, v2)) = vocabs {
        result = result.explain_missing(|w| v1.contains(w), |w| v2.contains(w));
    }
    for m in &mut result.missing {
        if zero.contains(&m.word) {
            m.reason = MissingReason::ZeroVector;
        }
    }
    Ok(result)
}

/// Writes `scores.tsv` and `missing.tsv`.
pub fn save_scores(scores: &ChangeScores, out_dir: &Path) -> Result<()> {
    scores.save(out_dir.join(SCORES))?;
    scores.save_missing(out_dir.join(MISSING))
}

pub fn threshold_stage(
    scores: &ChangeScores,
    method: ThresholdMethod,
    std_mode: StdMode,
    std_coef: f64,
) -> Result<ThresholdDecision> {
    match method {
        ThresholdMethod::MeanStd => {
            let values: Vec<f64> = scores.distances().collect();
            threshold_mean_std_values(&values, std_mode, std_coef)
        }
        ThresholdMethod::MedianSplit => threshold_median_split(&scores.target_scores()),
    }
}

/// Labels targets; writes `labels.tsv` and `histogram.tsv`.
pub fn label_stage(
    scores: &ChangeScores,
    threshold: &ThresholdDecision,
    gold: Option<&GoldData>,
    bins: usize,
    out_dir: &Path,
) -> Result<Vec<(String, u8)>> {
    let labels = binarize(scores, threshold.value);
    save_labels(out_dir.join(LABELS), &labels)?;
    export_histogram(scores, bins, threshold.value, gold)?.save(out_dir.join(HISTOGRAM))?;
    Ok(labels)
}

/// Target scores for ranking metrics; unscored targets rank at 0.
pub fn ranking_scores(scores: &ChangeScores) -> Vec<(String, f64)> {
    scores
        .targets
        .iter()
        .map(|t| (t.clone(), scores.get(t).unwrap_or(0.0)))
        .collect()
}

pub fn eval_stage(
    labels: &[(String, u8)],
    ranking: &[(String, f64)],
    gold: &GoldData,
    out: &Path,
) -> Result<EvalReport> {
    let r = report(labels, ranking, gold)?;
    r.save(out)?;
    Ok(r)
}

/// Result of one baseline over the target list.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub baseline: Baseline,
    pub scores: Vec<(String, f64)>,
    pub labels: Vec<(String, u8)>,
    pub report: Option<EvalReport>,
}

pub struct BaselineInputs<'a> {
    pub corpus1: &'a [Sentence],
    pub corpus2: &'a [Sentence],
    pub targets: &'a [String],
    pub window: usize,
    pub raw_counts: bool,
    pub gold: Option<&'a GoldData>,
}

/// Runs a baseline, labels it with μ+σ over its own target scores and
/// writes `baseline_<name>_{scores,labels,report}.tsv`.
pub fn baseline_stage(which: Baseline, input: &BaselineInputs<'_>, out_dir: &Path) -> Result<BaselineOutcome> {
    let targets = input.targets;
    let (scores, labels) = match which {
        Baseline::Majority => {
            let m = majority_baseline(targets);
            (
                m.iter().map(|(w, _, s)| (w.clone(), *s)).collect::<Vec<_>>(),
                m.iter().map(|(w, l, _)| (w.clone(), *l)).collect::<Vec<_>>(),
            )
        }
        Baseline::Frequency | Baseline::Collocation => {
            let scores = if which == Baseline::Frequency {
                let stats = CorpusStats::from_corpora(input.corpus1, input.corpus2)?;
                frequency_baseline(&stats, targets, input.raw_counts)
            } else {
                let r = collocation_baseline(input.corpus1, input.corpus2, targets, input.window)?;
                for m in &r.missing {
                    log::warn!("collocation baseline: target {m:?} lacks contexts in one corpus, scored 0");
                }
                let found: std::collections::HashMap<String, f64> = r.scores.into_iter().collect();
                targets
                    .iter()
                    .map(|t| (t.clone(), found.get(t).copied().unwrap_or(0.0)))
                    .collect()
            };
            let values: Vec<f64> = scores.iter().map(|s| s.1).collect();
            let labels = match threshold_mean_std_values(&values, StdMode::Population, 1.0) {
                Ok(th) => scores
                    .iter()
                    .map(|(w, s)| (w.clone(), crate::change::label(*s, th.value)))
                    .collect(),
                Err(_) => scores.iter().map(|(w, _)| (w.clone(), 0)).collect(),
            };
            (scores, labels)
        }
    };
    let name = which.to_string();
    let mut sorted = scores.clone();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let lines: Vec<String> = sorted.iter().map(|(w, s)| format!("{w}\t{s}")).collect();
    tsv::write_lines(
        out_dir.join(format!("baseline_{name}_scores.tsv")),
        lines.iter().map(String::as_str),
    )?;
    save_labels(out_dir.join(format!("baseline_{name}_labels.tsv")), &labels)?;
    let report = match input.gold {
        Some(g) => Some(eval_stage(
            &labels,
            &scores,
            g,
            &out_dir.join(format!("baseline_{name}_report.tsv")),
        )?),
        None => None,
    };
    Ok(BaselineOutcome {
        baseline: which,
        scores,
        labels,
        report,
    })
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scores: ChangeScores,
    pub threshold: ThresholdDecision,
    pub labels: Vec<(String, u8)>,
    pub report: Option<EvalReport>,
    pub baselines: Vec<BaselineOutcome>,
}

fn write_manifest(config: &RunConfig, status: &str, failure: Option<&StageError>) -> Result<()> {
    let mut map = config.to_map();
    map.insert("status".into(), status.into());
    if let Some(f) = failure {
        map.insert("failed_stage".into(), f.stage.into());
        map.insert("error".into(), f.source.to_string().replace('\n', " "));
    }
    let mut text = String::new();
    for (k, v) in map {
        text += &format!("{k}={v}\n");
    }
    tsv::write_string(config.out_dir.join(MANIFEST), &text)
}

/// Runs every stage. A manifest is written before the first stage and
/// finalized with `status=OK` or `status=FAILED` and the failing stage.
pub fn run_pipeline(config: &RunConfig) -> std::result::Result<RunSummary, StageError> {
    config.validate_paths().stage("validate")?;
    ensure_dir(&config.out_dir).stage("validate")?;
    write_manifest(config, "RUNNING", None).stage("manifest")?;
    match run_stages(config) {
        Ok(summary) => {
            write_manifest(config, "OK", None).stage("manifest")?;
            Ok(summary)
        }
        Err(e) => {
            // keep the original error even if the manifest cannot be updated
            let _ = write_manifest(config, "FAILED", Some(&e));
            Err(e)
        }
    }
}

fn run_stages(config: &RunConfig) -> std::result::Result<RunSummary, StageError> {
    let out = &config.out_dir;
    let targets = tsv::read_word_list(&config.targets).stage("read-inputs")?;
    let gold = match &config.gold {
        Some(p) => Some(crate::evaluation::load_gold(p).stage("read-inputs")?),
        None => None,
    };
    let c1 = read_corpus(&config.corpus1).stage("read-inputs")?;
    let c2 = read_corpus(&config.corpus2).stage("read-inputs")?;

    info!("training both corpora");
    let hp1 = config.hp.clone();
    let hp2 = Hyperparams {
        seed: second_seed(config.hp.seed),
        ..config.hp.clone()
    };
    let (m1, m2) = std::thread::scope(|s| {
        let h1 = s.spawn(|| train_stage(&c1, &hp1, &out.join(EMB1)));
        let h2 = s.spawn(|| train_stage(&c2, &hp2, &out.join(EMB2)));
        (
            h1.join().expect("training thread panicked"),
            h2.join().expect("training thread panicked"),
        )
    });
    let (m1, m2) = (m1.stage("train")?, m2.stage("train")?);

    info!("aligning");
    let aligned = align_stage(&m1, &m2, &config.align, out).stage("align")?;
    let (a1, a2) = aligned.to_embeddings().stage("align")?;

    let scores = score_spaces(&a1, &a2, &targets, Some((&m1.vocab, &m2.vocab))).stage("score")?;
    save_scores(&scores, out).stage("score")?;

    let threshold =
        threshold_stage(&scores, config.threshold_method, config.std_mode, config.std_coef).stage("threshold")?;
    threshold.save(out.join(THRESHOLD)).stage("threshold")?;

    let labels = label_stage(&scores, &threshold, gold.as_ref(), config.bins, out).stage("label")?;

    let report = match &gold {
        Some(g) => Some(eval_stage(&labels, &ranking_scores(&scores), g, &out.join(REPORT)).stage("evaluate")?),
        None => None,
    };

    let inputs = BaselineInputs {
        corpus1: &c1,
        corpus2: &c2,
        targets: &targets,
        window: config.colloc_window,
        raw_counts: config.raw_counts,
        gold: gold.as_ref(),
    };
    let baselines = config
        .baselines
        .iter()
        .map(|&b| baseline_stage(b, &inputs, out))
        .collect::<Result<Vec<_>>>()
        .stage("baseline")?;

    Ok(RunSummary {
        scores,
        threshold,
        labels,
        report,
        baselines,
    })
}
