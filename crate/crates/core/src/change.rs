//! Graded change scores, thresholds and binary labels.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;

use crate::alignment::AlignedPair;
use crate::error::{LscdError, Result};
use crate::evaluation::GoldData;
use crate::sgns::dot;
use crate::tsv;

/// `1 − cos(u, v)`, clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(LscdError::Domain(format!(
            "vector lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu = dot(u, u);
    let nv = dot(v, v);
    if nu == 0.0 || nv == 0.0 {
        return Err(LscdError::Undefined("undefined distance for zero vector".into()));
    }
    if u == v {
        return Ok(0.0);
    }
    let cd = 1.0 - dot(u, v) / (nu * nv).sqrt();
    Ok(cd.clamp(0.0, 2.0))
}

/// Cosine distance between sparse count vectors.
pub fn cosine_distance_sparse(u: &HashMap<u32, u64>, v: &HashMap<u32, u64>) -> Result<f64> {
    let norm = |m: &HashMap<u32, u64>| m.values().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(LscdError::Undefined("undefined distance for zero vector".into()));
    }
    let (small, large) = if u.len() <= v.len() { (u, v) } else { (v, u) };
    let dot: f64 = small
        .iter()
        .filter_map(|(k, &a)| large.get(k).map(|&b| (a * b) as f64))
        .sum();
    Ok((1.0 - dot / (nu * nv)).clamp(0.0, 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingReason {
    AbsentFromC1,
    AbsentFromC2,
    AbsentFromBoth,
    /// Not among the scored words; the source vocabularies were not consulted.
    NotShared,
    /// Present in both spaces but one of its vectors is zero.
    ZeroVector,
}

impl fmt::Display for MissingReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissingReason::AbsentFromC1 => "absent-from-c1",
            MissingReason::AbsentFromC2 => "absent-from-c2",
            MissingReason::AbsentFromBoth => "absent-from-both",
            MissingReason::NotShared => "not-shared",
            MissingReason::ZeroVector => "zero-vector",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordScore {
    pub word: String,
    pub cd: f64,
    pub is_target: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissingTarget {
    pub word: String,
    pub reason: MissingReason,
}

/// Cosine distances for every shared word, with target bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeScores {
    pub entries: Vec<WordScore>,
    pub targets: Vec<String>,
    pub missing: Vec<MissingTarget>,
    index: HashMap<String, usize>,
}

impl ChangeScores {
    pub fn new(scores: Vec<(String, f64)>, targets: &[String]) -> Result<Self> {
        let target_set: std::collections::HashSet<&str> = targets.iter().map(String::as_str).collect();
        let mut index = HashMap::with_capacity(scores.len());
        let mut entries = Vec::with_capacity(scores.len());
        for (word, cd) in scores {
            if !(0.0..=2.0 + 1e-9).contains(&cd) {
                return Err(LscdError::Domain(format!("distance {cd} for {word:?} outside [0, 2]")));
            }
            if index.insert(word.clone(), entries.len()).is_some() {
                return Err(LscdError::Domain(format!("duplicate score for {word:?}")));
            }
            let is_target = target_set.contains(word.as_str());
            entries.push(WordScore { word, cd, is_target });
        }
        let missing = targets
            .iter()
            .filter(|t| !index.contains_key(t.as_str()))
            .map(|t| MissingTarget {
                word: t.clone(),
                reason: MissingReason::NotShared,
            })
            .collect();
        Ok(ChangeScores {
            entries,
            targets: targets.to_vec(),
            missing,
            index,
        })
    }

    /// Refines `NotShared` reasons using the source vocabularies.
    pub fn explain_missing(mut self, in_c1: impl Fn(&str) -> bool, in_c2: impl Fn(&str) -> bool) -> Self {
        for m in &mut self.missing {
            if m.reason != MissingReason::NotShared {
                continue;
            }
            m.reason = match (in_c1(&m.word), in_c2(&m.word)) {
                (false, false) => MissingReason::AbsentFromBoth,
                (false, true) => MissingReason::AbsentFromC1,
                (true, false) => MissingReason::AbsentFromC2,
                (true, true) => MissingReason::NotShared,
            };
        }
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.index.get(word).map(|&i| self.entries[i].cd)
    }

    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.cd)
    }

    /// Scored targets in target-list order.
    pub fn target_scores(&self) -> Vec<(String, f64)> {
        self.targets
            .iter()
            .filter_map(|t| self.get(t).map(|cd| (t.clone(), cd)))
            .collect()
    }

    /// All scores sorted by descending distance, ties by word.
    pub fn ranking(&self) -> Vec<&WordScore> {
        let mut r: Vec<&WordScore> = self.entries.iter().collect();
        r.sort_by(|a, b| b.cd.total_cmp(&a.cd).then_with(|| a.word.cmp(&b.word)));
        r
    }

    /// Writes `word<TAB>cd` rows in ranking order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let lines: Vec<String> = self
            .ranking()
            .iter()
            .map(|e| format!("{}\t{}", e.word, e.cd))
            .collect();
        tsv::write_lines(path, lines.iter().map(String::as_str))
    }

    pub fn load(path: impl AsRef<Path>, targets: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let rows = tsv::read_pairs::<f64>(path)?;
        let mut seen = std::collections::HashSet::new();
        for (lineno, word, cd) in &rows {
            if !(0.0..=2.0 + 1e-9).contains(cd) {
                return Err(LscdError::parse(path, *lineno, format!("distance {cd} outside [0, 2]")));
            }
            if !seen.insert(word.as_str()) {
                return Err(LscdError::parse(path, *lineno, format!("duplicate word {word:?}")));
            }
        }
        ChangeScores::new(rows.into_iter().map(|(_, w, cd)| (w, cd)).collect(), targets)
    }

    /// Writes `word<TAB>reason` rows for targets without a score.
    pub fn save_missing(&self, path: impl AsRef<Path>) -> Result<()> {
        let lines: Vec<String> = self
            .missing
            .iter()
            .map(|m| format!("{}\t{}", m.word, m.reason))
            .collect();
        tsv::write_lines(path, lines.iter().map(String::as_str))
    }
}

/// Distance of every shared word between the two aligned spaces.
///
/// Targets outside the shared vocabulary are reported in `missing`.
pub fn score_all(aligned: &AlignedPair, targets: &[String]) -> Result<ChangeScores> {
    let mut scores = Vec::with_capacity(aligned.map.len());
    let mut zero = Vec::new();
    let d = aligned.a.ncols();
    let a = aligned.a.as_standard_layout();
    let b = aligned.b.as_standard_layout();
    let (a, b) = (a.as_slice().expect("contiguous"), b.as_slice().expect("contiguous"));
    for (i, word) in aligned.map.words.iter().enumerate() {
        match cosine_distance(&a[i * d..(i + 1) * d], &b[i * d..(i + 1) * d]) {
            Ok(cd) => scores.push((word.clone(), cd)),
            Err(LscdError::Undefined(_)) => zero.push(word.clone()),
            Err(e) => return Err(e),
        }
    }
    if !zero.is_empty() {
        warn!("{} shared words have zero vectors and are not scored", zero.len());
    }
    let mut result = ChangeScores::new(scores, targets)?;
    for m in &mut result.missing {
        if zero.contains(&m.word) {
            m.reason = MissingReason::ZeroVector;
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMethod {
    MeanStd,
    MedianSplit,
}

impl fmt::Display for ThresholdMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdMethod::MeanStd => "mean-std",
            ThresholdMethod::MedianSplit => "median-split",
        })
    }
}

impl FromStr for ThresholdMethod {
    type Err = LscdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-std" | "mean_std" => Ok(ThresholdMethod::MeanStd),
            "median-split" | "median_split" => Ok(ThresholdMethod::MedianSplit),
            other => Err(LscdError::Config(format!("unknown threshold method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StdMode {
    #[default]
    Population,
    Sample,
}

impl fmt::Display for StdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StdMode::Population => "population",
            StdMode::Sample => "sample",
        })
    }
}

impl FromStr for StdMode {
    type Err = LscdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "population" => Ok(StdMode::Population),
            "sample" => Ok(StdMode::Sample),
            other => Err(LscdError::Config(format!("unknown std mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdDecision {
    pub method: ThresholdMethod,
    pub value: f64,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    /// Multiplier on sigma; 1 gives the plain mean plus one deviation.
    pub coef: Option<f64>,
    pub std_mode: Option<StdMode>,
}

impl ThresholdDecision {
    pub fn to_tsv(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| v.to_string());
        let mut s = format!("method\t{}\n", self.method);
        s += &format!("mu\t{}\n", opt(self.mu));
        s += &format!("sigma\t{}\n", opt(self.sigma));
        s += &format!("coef\t{}\n", opt(self.coef));
        s += &format!(
            "std_mode\t{}\n",
            self.std_mode.map_or_else(|| "NA".to_string(), |m| m.to_string())
        );
        s += &format!("value\t{}\n", self.value);
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        tsv::write_string(path, &self.to_tsv())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rows = tsv::read_pairs::<String>(path)?;
        let mut fields: HashMap<String, (usize, String)> = HashMap::new();
        for (lineno, key, value) in rows {
            fields.insert(key, (lineno, value));
        }
        let get = |key: &str| {
            fields
                .get(key)
                .ok_or_else(|| LscdError::parse(path, 1, format!("missing field {key:?}")))
        };
        let num = |key: &str| -> Result<Option<f64>> {
            let (lineno, v) = get(key)?;
            if v == "NA" {
                return Ok(None);
            }
            v.parse()
                .map(Some)
                .map_err(|_| LscdError::parse(path, *lineno, format!("invalid number {v:?}")))
        };
        let (lineno, method) = get("method")?;
        let method = method
            .parse()
            .map_err(|_| LscdError::parse(path, *lineno, format!("unknown method {method:?}")))?;
        let value = num("value")?.ok_or_else(|| LscdError::parse(path, 1, "threshold value is NA"))?;
        let std_mode = match fields.get("std_mode") {
            Some((_, v)) if v != "NA" => Some(v.parse().map_err(|e: LscdError| LscdError::parse(path, 1, e.to_string()))?),
            _ => None,
        };
        Ok(ThresholdDecision {
            method,
            value,
            mu: num("mu")?,
            sigma: num("sigma")?,
            coef: num("coef")?,
            std_mode,
        })
    }
}

/// Mean and standard deviation of a sample.
pub fn mean_std(values: &[f64], mode: StdMode) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(LscdError::Domain(format!("need at least 2 scores, got {n}")));
    }
    if values.iter().all(|&x| x == values[0]) {
        return Ok((values[0], 0.0));
    }
    // summing in sorted order makes the result independent of input order
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mu = sorted.iter().sum::<f64>() / n as f64;
    let ss: f64 = sorted.iter().map(|x| (x - mu) * (x - mu)).sum();
    let denom = match mode {
        StdMode::Population => n as f64,
        StdMode::Sample => (n - 1) as f64,
    };
    Ok((mu, (ss / denom).sqrt()))
}

/// `μ + σ` over all scored words, population deviation.
pub fn threshold_mean_std(scores: &ChangeScores) -> Result<ThresholdDecision> {
    threshold_mean_std_with(scores, StdMode::Population, 1.0)
}

/// `μ + coef·σ` over all scored words.
pub fn threshold_mean_std_with(scores: &ChangeScores, mode: StdMode, coef: f64) -> Result<ThresholdDecision> {
    let values: Vec<f64> = scores.distances().collect();
    threshold_mean_std_values(&values, mode, coef)
}

pub fn threshold_mean_std_values(values: &[f64], mode: StdMode, coef: f64) -> Result<ThresholdDecision> {
    if !coef.is_finite() {
        return Err(LscdError::Config(format!("std coefficient must be finite, got {coef}")));
    }
    let (mu, sigma) = mean_std(values, mode)?;
    Ok(ThresholdDecision {
        method: ThresholdMethod::MeanStd,
        value: mu + coef * sigma,
        mu: Some(mu),
        sigma: Some(sigma),
        coef: Some(coef),
        std_mode: Some(mode),
    })
}

/// Threshold splitting targets into two equal halves (the larger half gets
/// label 0 when the count is odd).
pub fn threshold_median_split(target_scores: &[(String, f64)]) -> Result<ThresholdDecision> {
    let n = target_scores.len();
    if n < 2 {
        return Err(LscdError::Domain(format!("need at least 2 targets, got {n}")));
    }
    let mut v: Vec<f64> = target_scores.iter().map(|t| t.1).collect();
    v.sort_by(f64::total_cmp);
    if v[0] == v[n - 1] {
        return Err(LscdError::Undefined("no split point".into()));
    }
    let k = n.div_ceil(2);
    Ok(ThresholdDecision {
        method: ThresholdMethod::MedianSplit,
        value: (v[k - 1] + v[k]) / 2.0,
        mu: None,
        sigma: None,
        coef: None,
        std_mode: None,
    })
}

pub fn label(cd: f64, threshold: f64) -> u8 {
    u8::from(cd >= threshold)
}

/// Labels every target in target-list order. Missing targets get 0.
pub fn binarize(scores: &ChangeScores, threshold: f64) -> Vec<(String, u8)> {
    for m in &scores.missing {
        warn!("target {:?} has no score ({}), labeled 0", m.word, m.reason);
    }
    scores
        .targets
        .iter()
        .map(|t| (t.clone(), scores.get(t).map_or(0, |cd| label(cd, threshold))))
        .collect()
}

pub fn save_labels(path: impl AsRef<Path>, labels: &[(String, u8)]) -> Result<()> {
    let lines: Vec<String> = labels.iter().map(|(w, l)| format!("{w}\t{l}")).collect();
    tsv::write_lines(path, lines.iter().map(String::as_str))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramTarget {
    pub word: String,
    pub cd: f64,
    /// Whether the predicted label matches gold, when gold is known.
    pub correct: Option<bool>,
}

/// Distance histogram over `[0, 2]` with target overlays.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: Vec<(f64, f64, usize)>,
    pub targets: Vec<HistogramTarget>,
    pub threshold: f64,
}

pub fn export_histogram(
    scores: &ChangeScores,
    bins: usize,
    threshold: f64,
    gold: Option<&GoldData>,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(LscdError::Config("bins must be at least 1".into()));
    }
    let width = 2.0 / bins as f64;
    let mut counts = vec![0usize; bins];
    for cd in scores.distances() {
        let idx = ((cd / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 * width, (i + 1) as f64 * width, c))
        .collect();
    let targets = scores
        .target_scores()
        .into_iter()
        .map(|(word, cd)| {
            let correct = gold
                .and_then(|g| g.label(&word))
                .map(|g| g == label(cd, threshold));
            HistogramTarget { word, cd, correct }
        })
        .collect();
    Ok(Histogram {
        bins,
        targets,
        threshold,
    })
}

impl Histogram {
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (lo, hi, c) in &self.bins {
            s += &format!("{lo}\t{hi}\t{c}\n");
        }
        for t in &self.targets {
            let flag = match t.correct {
                Some(true) => "1",
                Some(false) => "0",
                None => "NA",
            };
            s += &format!("target\t{}\t{}\t{}\n", t.word, t.cd, flag);
        }
        s += &format!("threshold\t{}\n", self.threshold);
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        tsv::write_string(path, &self.to_tsv())
    }
}
