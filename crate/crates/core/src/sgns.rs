//! Skip-gram with negative sampling.
//!
//! Each word `w` has a word vector `v_w` and a context vector `v_c`. For an
//! observed pair `(w, c)` and `k` noise contexts `c_1..c_k` drawn from the
//! unigram distribution, training ascends
//!
//! ```text
//! log σ(v_c · v_w) + Σ_i log σ(-v_{c_i} · v_w)
//! ```
//!
//! with plain SGD and a linearly decaying learning rate. A lock-free
//! multi-threaded mode is available for large corpora; it gives up bitwise
//! reproducibility.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use log::{debug, info};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    build_vocabulary, emit_window_pairs, keep_probabilities, subsample_into, PairConfig, Sentence,
    TrainingPair, Vocabulary,
};
use crate::error::{LscdError, Result};

/// Training hyperparameters. Defaults follow the d=300 reference setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub alpha: f64,
    pub subsample: f64,
    pub epochs: usize,
    pub min_count: u64,
    pub ns_exponent: f64,
    pub seed: u64,
    /// Draw the effective window from `1..=window` at every position.
    pub dynamic_window: bool,
    /// Worker threads; only honored when `deterministic` is false.
    pub threads: usize,
    pub deterministic: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dim: 300,
            window: 10,
            negatives: 5,
            alpha: 0.025,
            subsample: 0.001,
            epochs: 5,
            min_count: 5,
            ns_exponent: 1.0,
            seed: 1,
            dynamic_window: true,
            threads: 1,
            deterministic: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(LscdError::Config(m));
        if self.dim == 0 {
            return fail("dim must be at least 1".into());
        }
        if self.window == 0 {
            return fail("window must be at least 1".into());
        }
        if self.negatives == 0 {
            return fail("negatives must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.subsample > 0.0) {
            return fail(format!("subsample must be positive, got {}", self.subsample));
        }
        if self.min_count == 0 {
            return fail("min_count must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.ns_exponent) {
            return fail(format!(
                "ns_exponent must lie in [0, 1], got {}",
                self.ns_exponent
            ));
        }
        if self.threads == 0 {
            return fail("threads must be at least 1".into());
        }
        Ok(())
    }

    pub fn pair_config(&self) -> PairConfig {
        PairConfig {
            window: self.window,
            subsample: self.subsample,
            dynamic_window: self.dynamic_window,
        }
    }
}

/// Logistic function, stable over the whole finite range.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without forming σ(x) first.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Noise distribution over vocabulary indices, proportional to
/// `count^exponent`.
#[derive(Debug, Clone)]
pub struct UnigramSampler {
    cumulative: Vec<f64>,
}

impl UnigramSampler {
    pub fn new(counts: &[u64], exponent: f64) -> Result<Self> {
        if counts.is_empty() {
            return Err(LscdError::EmptyVocabulary);
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(exponent)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(LscdError::Domain(
                "unigram weights must have a positive finite sum".into(),
            ));
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(UnigramSampler { cumulative })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn probability(&self, idx: usize) -> f64 {
        if idx == 0 {
            self.cumulative[0]
        } else {
            self.cumulative[idx] - self.cumulative[idx - 1]
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.probability(i)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1) as u32
    }
}

/// Draws `k` independent noise contexts. Collisions with the observed
/// context are kept.
pub fn negative_sample<R: Rng + ?Sized>(sampler: &UnigramSampler, k: usize, rng: &mut R) -> Vec<u32> {
    (0..k).map(|_| sampler.sample(rng)).collect()
}

/// Word vectors for a vocabulary, plus context vectors while training.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub vocab: Vocabulary,
    pub word_vectors: Array2<f64>,
    pub context_vectors: Option<Array2<f64>>,
}

impl EmbeddingMatrix {
    pub fn new(vocab: Vocabulary, word_vectors: Array2<f64>) -> Result<Self> {
        if word_vectors.nrows() != vocab.len() {
            return Err(LscdError::Domain(format!(
                "{} rows for a vocabulary of {} words",
                word_vectors.nrows(),
                vocab.len()
            )));
        }
        if word_vectors.iter().any(|x| !x.is_finite()) {
            return Err(LscdError::Numeric("embedding contains non-finite values".into()));
        }
        Ok(EmbeddingMatrix {
            vocab,
            word_vectors: word_vectors.as_standard_layout().into_owned(),
            context_vectors: None,
        })
    }

    /// Word vectors drawn uniformly from `[-0.5/d, 0.5/d)`, zero contexts.
    pub fn initialize<R: Rng + ?Sized>(vocab: Vocabulary, dim: usize, rng: &mut R) -> Self {
        let n = vocab.len();
        let scale = 1.0 / dim as f64;
        let word_vectors = Array2::from_shape_simple_fn((n, dim), || (rng.random::<f64>() - 0.5) * scale);
        EmbeddingMatrix {
            vocab,
            word_vectors,
            context_vectors: Some(Array2::zeros((n, dim))),
        }
    }

    pub fn dim(&self) -> usize {
        self.word_vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.word_vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.vocab.index_of(word).map(|i| row(&self.word_vectors, i))
    }

    /// Replaces the vocabulary with one carrying real counts. The word order
    /// must match.
    pub fn with_vocabulary(mut self, vocab: Vocabulary) -> Result<Self> {
        if vocab.words() != self.vocab.words() {
            return Err(LscdError::Domain(
                "vocabulary does not match embedding rows".into(),
            ));
        }
        self.vocab = vocab;
        Ok(self)
    }

    pub fn without_contexts(mut self) -> Self {
        self.context_vectors = None;
        self
    }
}

pub(crate) fn row(m: &Array2<f64>, i: usize) -> &[f64] {
    let d = m.ncols();
    &m.as_slice().expect("standard layout")[i * d..(i + 1) * d]
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row access used by the update kernel, so the same arithmetic drives
/// both the single-threaded and the lock-free trainer.
trait RowStore {
    fn load(&self, row: usize, out: &mut [f64]);
    fn add_scaled(&mut self, row: usize, scale: f64, x: &[f64]);
}

struct DenseRows<'a>(&'a mut Array2<f64>);

impl RowStore for DenseRows<'_> {
    fn load(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(row(self.0, i));
    }

    fn add_scaled(&mut self, i: usize, scale: f64, x: &[f64]) {
        let d = self.0.ncols();
        let r = &mut self.0.as_slice_mut().expect("standard layout")[i * d..(i + 1) * d];
        for (a, b) in r.iter_mut().zip(x) {
            *a += scale * b;
        }
    }
}

/// Parameter matrix shared between hogwild workers. Entries are f64 bit
/// patterns in relaxed atomics: concurrent updates to one row may be lost,
/// but no read ever observes a torn value.
struct SharedMatrix {
    data: Vec<AtomicU64>,
    cols: usize,
}

impl SharedMatrix {
    fn from_array(m: &Array2<f64>) -> Self {
        SharedMatrix {
            data: m.iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
            cols: m.ncols(),
        }
    }

    fn into_array(self, rows: usize) -> Array2<f64> {
        let v: Vec<f64> = self
            .data
            .into_iter()
            .map(|a| f64::from_bits(a.into_inner()))
            .collect();
        Array2::from_shape_vec((rows, self.cols), v).expect("shape")
    }
}

impl RowStore for &SharedMatrix {
    fn load(&self, i: usize, out: &mut [f64]) {
        let r = &self.data[i * self.cols..(i + 1) * self.cols];
        for (o, a) in out.iter_mut().zip(r) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn add_scaled(&mut self, i: usize, scale: f64, x: &[f64]) {
        let r = &self.data[i * self.cols..(i + 1) * self.cols];
        for (a, b) in r.iter().zip(x) {
            let cur = f64::from_bits(a.load(Ordering::Relaxed));
            a.store((cur + scale * b).to_bits(), Ordering::Relaxed);
        }
    }
}

struct Scratch {
    word: Vec<f64>,
    context: Vec<f64>,
    grad_word: Vec<f64>,
    coefs: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            word: vec![0.0; dim],
            context: vec![0.0; dim],
            grad_word: vec![0.0; dim],
            coefs: Vec::new(),
        }
    }
}

/// One gradient-ascent step on a pair and its negatives. All coefficients
/// are computed from pre-update parameters before anything is written.
/// Returns the pair's objective value before the update.
fn update_pair<W: RowStore, C: RowStore>(
    words: &mut W,
    contexts: &mut C,
    pair: TrainingPair,
    negatives: &[u32],
    alpha: f64,
    s: &mut Scratch,
) -> Result<f64> {
    words.load(pair.word as usize, &mut s.word);
    s.grad_word.iter_mut().for_each(|g| *g = 0.0);
    s.coefs.clear();
    let mut objective = 0.0;
    let targets = std::iter::once((pair.context, true)).chain(negatives.iter().map(|&n| (n, false)));
    for (target, positive) in targets {
        contexts.load(target as usize, &mut s.context);
        let score = dot(&s.word, &s.context);
        if !score.is_finite() {
            return Err(LscdError::Divergence(format!(
                "non-finite score for word {} / context {}",
                pair.word, target
            )));
        }
        let (g, obj) = if positive {
            (1.0 - sigmoid(score), log_sigmoid(score))
        } else {
            (-sigmoid(score), log_sigmoid(-score))
        };
        objective += obj;
        for (gw, c) in s.grad_word.iter_mut().zip(&s.context) {
            *gw += g * c;
        }
        s.coefs.push(g);
    }
    if s.grad_word.iter().any(|g| !g.is_finite()) {
        return Err(LscdError::Divergence(format!(
            "non-finite gradient for word {}",
            pair.word
        )));
    }
    let targets = std::iter::once(pair.context).chain(negatives.iter().copied());
    for (target, &g) in targets.zip(&s.coefs) {
        contexts.add_scaled(target as usize, alpha * g, &s.word);
    }
    words.add_scaled(pair.word as usize, alpha, &s.grad_word);
    Ok(objective)
}

/// Applies one SGD step for `pair` with the given negatives, in place.
///
/// With `g_pos = 1 - σ(v_c·v_w)` and `g_i = -σ(v_{c_i}·v_w)`:
/// `v_w += α(g_pos v_c + Σ g_i v_{c_i})`, `v_c += α g_pos v_w`,
/// `v_{c_i} += α g_i v_w`, all from pre-update values. Returns the pair's
/// objective before the step.
pub fn sgd_step(
    pair: TrainingPair,
    negatives: &[u32],
    model: &mut EmbeddingMatrix,
    alpha: f64,
) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(LscdError::Domain(format!("learning rate must be >= 0, got {alpha}")));
    }
    let n = model.len();
    let check = |i: u32| -> Result<()> {
        if (i as usize) < n {
            Ok(())
        } else {
            Err(LscdError::Domain(format!("index {i} out of range for {n} words")))
        }
    };
    check(pair.word)?;
    check(pair.context)?;
    negatives.iter().try_for_each(|&i| check(i))?;
    let dim = model.dim();
    let contexts = model
        .context_vectors
        .as_mut()
        .ok_or_else(|| LscdError::Domain("model has no context vectors".into()))?;
    let mut scratch = Scratch::new(dim);
    update_pair(
        &mut DenseRows(&mut model.word_vectors),
        &mut DenseRows(contexts),
        pair,
        negatives,
        alpha,
        &mut scratch,
    )
}

/// Objective value of one pair and its negatives under the current model.
pub fn pair_objective(model: &EmbeddingMatrix, pair: TrainingPair, negatives: &[u32]) -> Result<f64> {
    let contexts = model
        .context_vectors
        .as_ref()
        .ok_or_else(|| LscdError::Domain("model has no context vectors".into()))?;
    let w = row(&model.word_vectors, pair.word as usize);
    let mut value = log_sigmoid(dot(w, row(contexts, pair.context as usize)));
    for &n in negatives {
        value += log_sigmoid(-dot(w, row(contexts, n as usize)));
    }
    Ok(value)
}

/// Trains embeddings on a corpus. The returned matrix keeps its context
/// vectors; drop them with [`EmbeddingMatrix::without_contexts`].
pub fn train_sgns(corpus: &[Sentence], hp: &Hyperparams) -> Result<EmbeddingMatrix> {
    hp.validate()?;
    let vocab = build_vocabulary(corpus, hp.min_count)?;
    let encoded: Vec<Vec<u32>> = corpus
        .iter()
        .map(|s| vocab.encode(s))
        .filter(|ids| !ids.is_empty())
        .collect();
    info!(
        "vocabulary: {} words, {} tokens, {} sentences",
        vocab.len(),
        vocab.total_tokens(),
        encoded.len()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let model = EmbeddingMatrix::initialize(vocab, hp.dim, &mut rng);
    if hp.deterministic || hp.threads == 1 {
        train_sequential(model, &encoded, hp, &mut rng)
    } else {
        train_hogwild(model, &encoded, hp)
    }
}

struct Schedule {
    alpha: f64,
    total: f64,
}

impl Schedule {
    fn new(hp: &Hyperparams, encoded: &[Vec<u32>]) -> Self {
        let tokens: usize = encoded.iter().map(Vec::len).sum();
        Schedule {
            alpha: hp.alpha,
            total: (tokens * hp.epochs).max(1) as f64,
        }
    }

    /// Linear decay over processed in-vocabulary tokens, floored at
    /// `alpha * 1e-4`.
    fn rate(&self, processed: u64) -> f64 {
        let progress = processed as f64 / self.total;
        self.alpha * (1.0 - progress).max(1e-4)
    }
}

fn train_sequential(
    mut model: EmbeddingMatrix,
    encoded: &[Vec<u32>],
    hp: &Hyperparams,
    rng: &mut ChaCha8Rng,
) -> Result<EmbeddingMatrix> {
    let keep = keep_probabilities(&model.vocab, hp.subsample)?;
    let sampler = UnigramSampler::new(model.vocab.counts(), hp.ns_exponent)?;
    let schedule = Schedule::new(hp, encoded);
    let pair_config = hp.pair_config();
    let mut scratch = Scratch::new(hp.dim);
    let mut kept = Vec::new();
    let mut pairs = Vec::new();
    let mut negatives = vec![0u32; hp.negatives];
    let mut processed = 0u64;
    let mut contexts = model.context_vectors.take().expect("fresh model");
    for epoch in 0..hp.epochs {
        let mut objective = 0.0;
        let mut n_pairs = 0usize;
        for ids in encoded {
            let alpha = schedule.rate(processed);
            subsample_into(ids, &keep, rng, &mut kept);
            pairs.clear();
            emit_window_pairs(&kept, &pair_config, rng, &mut pairs);
            for &pair in &pairs {
                for n in negatives.iter_mut() {
                    *n = sampler.sample(rng);
                }
                objective += update_pair(
                    &mut DenseRows(&mut model.word_vectors),
                    &mut DenseRows(&mut contexts),
                    pair,
                    &negatives,
                    alpha,
                    &mut scratch,
                )?;
            }
            n_pairs += pairs.len();
            processed += ids.len() as u64;
        }
        debug!(
            "epoch {}: {} pairs, mean objective {:.4}",
            epoch + 1,
            n_pairs,
            objective / n_pairs.max(1) as f64
        );
    }
    model.context_vectors = Some(contexts);
    Ok(model)
}

fn train_hogwild(
    mut model: EmbeddingMatrix,
    encoded: &[Vec<u32>],
    hp: &Hyperparams,
) -> Result<EmbeddingMatrix> {
    let keep = keep_probabilities(&model.vocab, hp.subsample)?;
    let sampler = UnigramSampler::new(model.vocab.counts(), hp.ns_exponent)?;
    let schedule = Schedule::new(hp, encoded);
    let pair_config = hp.pair_config();
    let n = model.len();
    let words = SharedMatrix::from_array(&model.word_vectors);
    let contexts = SharedMatrix::from_array(model.context_vectors.as_ref().expect("fresh model"));
    let processed = AtomicU64::new(0);
    let threads = hp.threads;

    let results: Vec<Result<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (words, contexts, processed) = (&words, &contexts, &processed);
                let (keep, sampler, schedule) = (&keep, &sampler, &schedule);
                scope.spawn(move || -> Result<()> {
                    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
                    rng.set_stream(t as u64 + 1);
                    let mut scratch = Scratch::new(hp.dim);
                    let mut kept = Vec::new();
                    let mut pairs = Vec::new();
                    let mut negatives = vec![0u32; hp.negatives];
                    let (mut w, mut c) = (words, contexts);
                    for _ in 0..hp.epochs {
                        for ids in encoded.iter().skip(t).step_by(threads) {
                            let alpha = schedule.rate(processed.load(Ordering::Relaxed));
                            subsample_into(ids, keep, &mut rng, &mut kept);
                            pairs.clear();
                            emit_window_pairs(&kept, &pair_config, &mut rng, &mut pairs);
                            for &pair in &pairs {
                                for n in negatives.iter_mut() {
                                    *n = sampler.sample(&mut rng);
                                }
                                update_pair(&mut w, &mut c, pair, &negatives, alpha, &mut scratch)?;
                            }
                            processed.fetch_add(ids.len() as u64, Ordering::Relaxed);
                        }
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training worker panicked"))
            .collect()
    });
    results.into_iter().collect::<Result<()>>()?;
    model.word_vectors = words.into_array(n);
    model.context_vectors = Some(contexts.into_array(n));
    Ok(model)
}

/// Writes word vectors as text: a `<rows> <dim>` header, then one
/// `word v1 .. vd` line per word in vocabulary order.
pub fn save_embeddings(model: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e| LscdError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    write_embeddings(model, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

fn write_embeddings<W: Write>(model: &EmbeddingMatrix, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{} {}", model.len(), model.dim())?;
    for (i, word) in model.vocab.words().iter().enumerate() {
        out.write_all(word.as_bytes())?;
        for x in row(&model.word_vectors, i) {
            write!(out, " {x}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads the text format written by [`save_embeddings`]. Frequencies are
/// not stored there, so the vocabulary gets rank-derived counts; attach real
/// ones with [`load_vocab_counts`] and [`EmbeddingMatrix::with_vocabulary`].
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| LscdError::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| LscdError::parse(path, 1, e.to_string()))?,
        None => return Err(LscdError::parse(path, 1, "missing header")),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str| s.parse::<usize>().ok();
    let (rows, dim) = match fields.as_slice() {
        [r, d] => match (parse_usize(r), parse_usize(d)) {
            (Some(r), Some(d)) if d > 0 => (r, d),
            _ => return Err(LscdError::parse(path, 1, format!("malformed header {header:?}"))),
        },
        _ => return Err(LscdError::parse(path, 1, format!("malformed header {header:?}"))),
    };
    let mut words = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dim);
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| LscdError::parse(path, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        if words.len() == rows {
            return Err(LscdError::parse(
                path,
                lineno,
                format!("more rows than the {rows} declared in the header"),
            ));
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-empty line");
        let before = data.len();
        for part in parts {
            let x: f64 = part.parse().map_err(|_| {
                LscdError::parse(path, lineno, format!("row {word:?}: invalid number {part:?}"))
            })?;
            data.push(x);
        }
        let got = data.len() - before;
        if got != dim {
            return Err(LscdError::parse(
                path,
                lineno,
                format!("row {word:?} has {got} values, expected {dim}"),
            ));
        }
        words.push(word.to_owned());
    }
    if words.len() != rows {
        return Err(LscdError::parse(
            path,
            rows + 1,
            format!("expected {rows} rows, found {}", words.len()),
        ));
    }
    let vocab = Vocabulary::from_ranked_words(words)
        .map_err(|e| LscdError::parse(path, 1, e.to_string()))?;
    let matrix = Array2::from_shape_vec((rows, dim), data).expect("shape checked");
    EmbeddingMatrix::new(vocab, matrix)
}

/// Vocabulary sidecar: `#total_tokens`, `#min_count`, then `word<TAB>count`.
pub fn save_vocab_counts(vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e| LscdError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    (|| -> std::io::Result<()> {
        writeln!(out, "#total_tokens\t{}", vocab.total_tokens())?;
        writeln!(out, "#min_count\t{}", vocab.min_count())?;
        for (word, count) in vocab.words().iter().zip(vocab.counts()) {
            writeln!(out, "{word}\t{count}")?;
        }
        out.flush()
    })()
    .map_err(io_err)
}

pub fn load_vocab_counts(path: impl AsRef<Path>) -> Result<Vocabulary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| LscdError::io(path, e))?;
    let mut total = None;
    let mut min_count = 1;
    let mut counts = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| LscdError::parse(path, lineno, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('\t')
            .ok_or_else(|| LscdError::parse(path, lineno, "expected two tab-separated fields"))?;
        let value: u64 = value
            .parse()
            .map_err(|_| LscdError::parse(path, lineno, format!("invalid count {value:?}")))?;
        match key {
            "#total_tokens" => total = Some(value),
            "#min_count" => min_count = value,
            word => counts.push((word.to_owned(), value)),
        }
    }
    let total = total.ok_or_else(|| LscdError::parse(path, 1, "missing #total_tokens line"))?;
    Vocabulary::from_counts(counts, total, min_count).map_err(|e| LscdError::parse(path, 1, e.to_string()))
}
