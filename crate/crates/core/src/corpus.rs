//! Corpus ingestion, vocabulary construction, frequent-word subsampling and
//! skip-gram pair extraction.
//!
//! Corpora are pre-tokenized: one sentence per line, tokens separated by
//! spaces. Files may be plain UTF-8 or gzip-compressed.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use rand::Rng;

use crate::error::{LscdError, Result};

/// One pre-tokenized line of a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    /// Returns `None` when no tokens remain.
    pub fn new(tokens: Vec<String>) -> Option<Self> {
        if tokens.is_empty() {
            None
        } else {
            Some(Sentence { tokens })
        }
    }

    pub fn parse(line: &str) -> Option<Self> {
        Sentence::new(line.split_whitespace().map(str::to_owned).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Plain,
    Gzip,
}

impl CorpusFormat {
    /// Sniffs the gzip magic bytes. Empty or short files are plain text.
    pub fn detect(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut file = File::open(path).map_err(|e| LscdError::io(path, e))?;
        let mut magic = [0u8; 2];
        let mut read = 0;
        while read < 2 {
            match file.read(&mut magic[read..]) {
                Ok(0) => break,
                Ok(n) => read += n,
                Err(e) => return Err(LscdError::io(path, e)),
            }
        }
        if read == 2 && magic == [0x1f, 0x8b] {
            Ok(CorpusFormat::Gzip)
        } else {
            Ok(CorpusFormat::Plain)
        }
    }
}

/// Streaming sentence reader over a corpus file.
pub struct CorpusReader {
    path: PathBuf,
    reader: Box<dyn BufRead>,
    line: usize,
    buf: Vec<u8>,
    done: bool,
}

impl Iterator for CorpusReader {
    type Item = Result<Sentence>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {
                    self.line += 1;
                    let text = match std::str::from_utf8(&self.buf) {
                        Ok(text) => text,
                        Err(e) => {
                            self.done = true;
                            return Some(Err(LscdError::parse(
                                &self.path,
                                self.line,
                                format!("invalid UTF-8: {e}"),
                            )));
                        }
                    };
                    if let Some(sentence) = Sentence::parse(text) {
                        return Some(Ok(sentence));
                    }
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(LscdError::io(&self.path, e)));
                }
            }
        }
        None
    }
}

/// Opens a corpus for streaming. Empty lines are skipped.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<CorpusReader> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| LscdError::io(path, e))?;
    let reader: Box<dyn BufRead> = match format {
        CorpusFormat::Plain => Box::new(BufReader::new(file)),
        CorpusFormat::Gzip => Box::new(BufReader::new(MultiGzDecoder::new(file))),
    };
    Ok(CorpusReader {
        path: path.to_path_buf(),
        reader,
        line: 0,
        buf: Vec::new(),
        done: false,
    })
}

/// Reads a whole corpus into memory, detecting gzip compression.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Sentence>> {
    let format = CorpusFormat::detect(&path)?;
    load_corpus(path, format)?.collect()
}

/// Bidirectional word/index map with raw frequencies.
///
/// Indices are dense and ordered by descending count, ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    total_tokens: u64,
    min_count: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from explicit counts. Entries below `min_count`
    /// are dropped; `total_tokens` must cover at least the kept counts.
    pub fn from_counts(
        counts: impl IntoIterator<Item = (String, u64)>,
        total_tokens: u64,
        min_count: u64,
    ) -> Result<Self> {
        if min_count == 0 {
            return Err(LscdError::Domain("min_count must be at least 1".into()));
        }
        let mut entries: Vec<(String, u64)> =
            counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        if entries.is_empty() {
            return Err(LscdError::EmptyVocabulary);
        }
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let kept: u64 = entries.iter().map(|(_, c)| c).sum();
        if total_tokens < kept {
            return Err(LscdError::Domain(format!(
                "total token count {total_tokens} is below the sum of word counts {kept}"
            )));
        }
        let mut index = HashMap::with_capacity(entries.len());
        let mut words = Vec::with_capacity(entries.len());
        let mut word_counts = Vec::with_capacity(entries.len());
        for (i, (word, count)) in entries.into_iter().enumerate() {
            if index.insert(word.clone(), i).is_some() {
                return Err(LscdError::Domain(format!("duplicate word {word:?}")));
            }
            words.push(word);
            word_counts.push(count);
        }
        Ok(Vocabulary {
            words,
            counts: word_counts,
            index,
            total_tokens,
            min_count,
        })
    }

    /// Vocabulary for an ordered word list whose frequencies are unknown.
    /// Counts are rank-derived (`len - index`) so that the given order is kept.
    pub fn from_ranked_words(words: Vec<String>) -> Result<Self> {
        let n = words.len() as u64;
        let mut index = HashMap::with_capacity(words.len());
        for (i, word) in words.iter().enumerate() {
            if index.insert(word.clone(), i).is_some() {
                return Err(LscdError::Domain(format!("duplicate word {word:?}")));
            }
        }
        if words.is_empty() {
            return Err(LscdError::EmptyVocabulary);
        }
        let counts: Vec<u64> = (0..n).map(|i| n - i).collect();
        let total_tokens = counts.iter().sum();
        Ok(Vocabulary {
            words,
            counts,
            index,
            total_tokens,
            min_count: 1,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count_of(&self, word: &str) -> u64 {
        self.index_of(word).map_or(0, |i| self.counts[i])
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Relative frequency against the full (pre-filter) token count.
    pub fn relative_frequency(&self, idx: usize) -> f64 {
        self.counts[idx] as f64 / self.total_tokens as f64
    }

    /// Maps a sentence to vocabulary indices, dropping unknown tokens.
    pub fn encode(&self, sentence: &Sentence) -> Vec<u32> {
        sentence
            .tokens()
            .iter()
            .filter_map(|t| self.index_of(t).map(|i| i as u32))
            .collect()
    }
}

/// Counts every token and keeps the words seen at least `min_count` times.
pub fn build_vocabulary<'a, I>(corpus: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let (counts, total) = count_tokens(corpus);
    Vocabulary::from_counts(counts, total, min_count)
}

pub(crate) fn count_tokens<'a, I>(corpus: I) -> (HashMap<String, u64>, u64)
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total = 0u64;
    for sentence in corpus {
        for token in sentence.tokens() {
            total += 1;
            match counts.get_mut(token.as_str()) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(token.clone(), 1);
                }
            }
        }
    }
    (counts, total)
}

/// Probability of keeping a token with relative frequency `f` under
/// subsampling threshold `t`: `min(1, sqrt(t / f))`.
///
/// `t = f64::INFINITY` disables subsampling.
pub fn subsample_keep_probability(f: f64, t: f64) -> Result<f64> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(LscdError::Domain(format!(
            "relative frequency must lie in (0, 1], got {f}"
        )));
    }
    if !(t > 0.0) {
        return Err(LscdError::Domain(format!(
            "subsample threshold must be positive, got {t}"
        )));
    }
    Ok((t / f).sqrt().min(1.0))
}

/// An observed (word, context) co-occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrainingPair {
    pub word: u32,
    pub context: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    /// Maximum distance between word and context.
    pub window: usize,
    /// Subsampling threshold; infinity keeps every token.
    pub subsample: f64,
    /// Draw the effective window uniformly from `1..=window` per position.
    pub dynamic_window: bool,
}

impl PairConfig {
    pub fn new(window: usize, subsample: f64) -> Self {
        PairConfig {
            window,
            subsample,
            dynamic_window: true,
        }
    }
}

/// Per-word keep probabilities for a vocabulary.
pub fn keep_probabilities(vocab: &Vocabulary, t: f64) -> Result<Vec<f64>> {
    (0..vocab.len())
        .map(|i| subsample_keep_probability(vocab.relative_frequency(i), t))
        .collect()
}

/// Emits training pairs for one sentence.
///
/// Out-of-vocabulary tokens are removed first, then each surviving token is
/// kept with its subsampling probability, and finally every remaining
/// position pairs with all positions within its effective window.
pub fn extract_pairs<R: Rng + ?Sized>(
    sentence: &Sentence,
    vocab: &Vocabulary,
    config: &PairConfig,
    rng: &mut R,
) -> Result<Vec<TrainingPair>> {
    if config.window == 0 {
        return Err(LscdError::Domain("window must be at least 1".into()));
    }
    let keep = keep_probabilities(vocab, config.subsample)?;
    let ids = vocab.encode(sentence);
    let mut kept = Vec::with_capacity(ids.len());
    let mut out = Vec::new();
    extract_index_pairs(&ids, &keep, config, rng, &mut kept, &mut out);
    Ok(out)
}

/// Index-level pair extraction shared with the trainer. `kept` is scratch.
pub(crate) fn extract_index_pairs<R: Rng + ?Sized>(
    ids: &[u32],
    keep: &[f64],
    config: &PairConfig,
    rng: &mut R,
    kept: &mut Vec<u32>,
    out: &mut Vec<TrainingPair>,
) {
    subsample_into(ids, keep, rng, kept);
    emit_window_pairs(kept, config, rng, out);
}

pub(crate) fn subsample_into<R: Rng + ?Sized>(
    ids: &[u32],
    keep: &[f64],
    rng: &mut R,
    kept: &mut Vec<u32>,
) {
    kept.clear();
    for &id in ids {
        let p = keep[id as usize];
        if p >= 1.0 || rng.random::<f64>() < p {
            kept.push(id);
        }
    }
}

pub(crate) fn emit_window_pairs<R: Rng + ?Sized>(
    kept: &[u32],
    config: &PairConfig,
    rng: &mut R,
    out: &mut Vec<TrainingPair>,
) {
    let n = kept.len();
    for i in 0..n {
        let b = if config.dynamic_window && config.window > 1 {
            rng.random_range(1..=config.window)
        } else {
            config.window
        };
        let lo = i.saturating_sub(b);
        let hi = (i + b).min(n - 1);
        for j in lo..=hi {
            if j != i {
                out.push(TrainingPair {
                    word: kept[i],
                    context: kept[j],
                });
            }
        }
    }
}

/// Raw token counts of a diachronic corpus pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub counts1: HashMap<String, u64>,
    pub counts2: HashMap<String, u64>,
    pub n1: u64,
    pub n2: u64,
}

impl CorpusStats {
    pub fn from_corpora(c1: &[Sentence], c2: &[Sentence]) -> Result<Self> {
        let (counts1, n1) = count_tokens(c1);
        let (counts2, n2) = count_tokens(c2);
        if n1 == 0 || n2 == 0 {
            return Err(LscdError::Domain("corpus has no tokens".into()));
        }
        Ok(CorpusStats {
            counts1,
            counts2,
            n1,
            n2,
        })
    }

    pub fn count1(&self, word: &str) -> u64 {
        self.counts1.get(word).copied().unwrap_or(0)
    }

    pub fn count2(&self, word: &str) -> u64 {
        self.counts2.get(word).copied().unwrap_or(0)
    }

    pub fn swapped(&self) -> CorpusStats {
        CorpusStats {
            counts1: self.counts2.clone(),
            counts2: self.counts1.clone(),
            n1: self.n2,
            n2: self.n1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn sent(s: &str) -> Sentence {
        Sentence::parse(s).unwrap()
    }

    fn toks(ws: &[&str]) -> Vec<Sentence> {
        vec![Sentence::new(ws.iter().map(|w| w.to_string()).collect()).unwrap()]
    }

    #[test]
    fn parses_lines_and_skips_blank() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "il gatto dorme\n\ncane\n").unwrap();
        let got = read_corpus(&path).unwrap();
        assert_eq!(got, vec![sent("il gatto dorme"), sent("cane")]);
    }

    #[test]
    fn empty_file_is_empty_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "").unwrap();
        assert!(read_corpus(&path).unwrap().is_empty());
    }

    #[test]
    fn gzip_matches_plain() {
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("c.txt");
        let gz = dir.path().join("c.txt.gz");
        let text = "il gatto dorme\n\ncane abbaia forte\nla piovra\r\n";
        std::fs::write(&plain, text).unwrap();
        let mut enc =
            flate2::write::GzEncoder::new(File::create(&gz).unwrap(), flate2::Compression::default());
        enc.write_all(text.as_bytes()).unwrap();
        enc.finish().unwrap();
        assert_eq!(CorpusFormat::detect(&gz).unwrap(), CorpusFormat::Gzip);
        assert_eq!(read_corpus(&plain).unwrap(), read_corpus(&gz).unwrap());
    }

    #[test]
    fn invalid_utf8_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, b"ok line\nbad \xff byte\n").unwrap();
        match read_corpus(&path) {
            Err(LscdError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_corpus("/nonexistent/corpus.txt").unwrap_err();
        assert!(matches!(err, LscdError::Io { .. }));
    }

    #[test]
    fn vocabulary_counts_and_order() {
        let c = toks(&["c", "b", "a", "a", "b", "a"]);
        let v = build_vocabulary(&c, 2).unwrap();
        assert_eq!(v.words(), &["a".to_string(), "b".to_string()]);
        assert_eq!(v.counts(), &[3, 2]);
        assert_eq!(v.total_tokens(), 6);

        let v = build_vocabulary(&c, 1).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.word(2), "c");

        assert!(matches!(
            build_vocabulary(&c, 4),
            Err(LscdError::EmptyVocabulary)
        ));
    }

    #[test]
    fn vocabulary_ties_are_lexicographic() {
        let c = toks(&["z", "y", "x", "y", "z", "x"]);
        let v = build_vocabulary(&c, 1).unwrap();
        assert_eq!(v.words(), &["x", "y", "z"]);
    }

    #[test]
    fn keep_probability_values() {
        assert_eq!(subsample_keep_probability(0.001, 0.001).unwrap(), 1.0);
        let p = subsample_keep_probability(0.01, 0.001).unwrap();
        assert!((p - 0.1f64.sqrt()).abs() < 1e-12);
        assert!((p - 0.3162).abs() < 1e-4);
        assert_eq!(subsample_keep_probability(0.0001, 0.001).unwrap(), 1.0);
        assert_eq!(subsample_keep_probability(0.5, f64::INFINITY).unwrap(), 1.0);
        assert!(matches!(
            subsample_keep_probability(0.0, 0.001),
            Err(LscdError::Domain(_))
        ));
        assert!(subsample_keep_probability(-0.1, 0.001).is_err());
    }

    #[test]
    fn pairs_window_one() {
        let c = toks(&["a", "b", "c"]);
        let v = build_vocabulary(&c, 1).unwrap();
        let cfg = PairConfig::new(1, f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs = extract_pairs(&c[0], &v, &cfg, &mut rng).unwrap();
        let named: Vec<(&str, &str)> = pairs
            .iter()
            .map(|p| (v.word(p.word as usize), v.word(p.context as usize)))
            .collect();
        assert_eq!(named, vec![("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")]);
    }

    #[test]
    fn single_token_has_no_pairs() {
        let c = toks(&["a"]);
        let v = build_vocabulary(&c, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = PairConfig::new(5, f64::INFINITY);
        assert!(extract_pairs(&c[0], &v, &cfg, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn oov_tokens_removed_before_windowing() {
        let c = toks(&["a", "b", "a", "b", "x"]);
        let v = build_vocabulary(&c, 2).unwrap();
        let s = sent("a x b");
        let cfg = PairConfig {
            window: 1,
            subsample: f64::INFINITY,
            dynamic_window: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs = extract_pairs(&s, &v, &cfg, &mut rng).unwrap();
        // x is dropped, so a and b become adjacent
        assert_eq!(pairs.len(), 2);
    }

    #[test]
    fn fixed_window_two_matches_enumeration() {
        let c = toks(&["a", "b", "c", "d"]);
        let v = build_vocabulary(&c, 1).unwrap();
        let cfg = PairConfig {
            window: 2,
            subsample: f64::INFINITY,
            dynamic_window: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut got = extract_pairs(&c[0], &v, &cfg, &mut rng).unwrap();
        let ids = v.encode(&c[0]);
        let mut expected = Vec::new();
        for i in 0..ids.len() {
            for j in 0..ids.len() {
                if i != j && i.abs_diff(j) <= 2 {
                    expected.push(TrainingPair {
                        word: ids[i],
                        context: ids[j],
                    });
                }
            }
        }
        got.sort();
        expected.sort();
        assert_eq!(got.len(), 10);
        assert_eq!(got, expected);
    }

    #[test]
    fn zero_window_rejected() {
        let c = toks(&["a", "b"]);
        let v = build_vocabulary(&c, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = PairConfig::new(0, 1e-3);
        assert!(extract_pairs(&c[0], &v, &cfg, &mut rng).is_err());
    }

    #[test]
    fn corpus_stats_counts() {
        let c1 = toks(&["a", "a", "b"]);
        let c2 = toks(&["b"]);
        let s = CorpusStats::from_corpora(&c1, &c2).unwrap();
        assert_eq!((s.count1("a"), s.count2("a"), s.n1, s.n2), (2, 0, 3, 1));
        let sw = s.swapped();
        assert_eq!(sw.count2("a"), 2);
    }
}
