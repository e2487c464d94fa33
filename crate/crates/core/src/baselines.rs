//! Reference baselines: frequency difference, bag-of-words collocation
//! vectors compared by cosine distance, and the all-zero majority class.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::change::cosine_distance_sparse;
use crate::corpus::{CorpusStats, Sentence};
use crate::error::{LscdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Frequency,
    Collocation,
    Majority,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Frequency => "freq",
            Baseline::Collocation => "colloc",
            Baseline::Majority => "majority",
        })
    }
}

impl FromStr for Baseline {
    type Err = LscdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "freq" => Ok(Baseline::Frequency),
            "colloc" => Ok(Baseline::Collocation),
            "majority" => Ok(Baseline::Majority),
            other => Err(LscdError::Config(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Absolute difference of relative frequencies, per million tokens unless
/// `raw_counts` is set.
pub fn frequency_baseline(stats: &CorpusStats, targets: &[String], raw_counts: bool) -> Vec<(String, f64)> {
    targets
        .iter()
        .map(|t| {
            let (c1, c2) = (stats.count1(t) as f64, stats.count2(t) as f64);
            let score = if raw_counts {
                (c1 - c2).abs()
            } else {
                (c1 / stats.n1 as f64 - c2 / stats.n2 as f64).abs() * 1e6
            };
            (t.clone(), score)
        })
        .collect()
}

/// Sparse co-occurrence counts keyed by column index.
pub type CountVector = HashMap<u32, u64>;

/// Column vocabulary shared by both corpora.
#[derive(Debug, Default)]
struct Columns {
    index: HashMap<String, u32>,
}

impl Columns {
    fn id(&mut self, word: &str) -> u32 {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        let i = self.index.len() as u32;
        self.index.insert(word.to_owned(), i);
        i
    }
}

fn count_contexts(
    corpus: &[Sentence],
    targets: &HashMap<&str, usize>,
    window: usize,
    columns: &mut Columns,
) -> Vec<CountVector> {
    let mut vectors = vec![CountVector::new(); targets.len()];
    let mut ids = Vec::new();
    for sentence in corpus {
        let tokens = sentence.tokens();
        ids.clear();
        ids.extend(tokens.iter().map(|t| columns.id(t)));
        for (i, token) in tokens.iter().enumerate() {
            let Some(&slot) = targets.get(token.as_str()) else {
                continue;
            };
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(tokens.len() - 1);
            for (j, &col) in ids.iter().enumerate().take(hi + 1).skip(lo) {
                if j != i {
                    *vectors[slot].entry(col).or_insert(0) += 1;
                }
            }
        }
    }
    vectors
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationScores {
    pub scores: Vec<(String, f64)>,
    /// Targets with an empty context vector in either corpus.
    pub missing: Vec<String>,
}

/// Cosine distance between each target's raw context-count vectors in the
/// two corpora.
pub fn collocation_baseline(
    c1: &[Sentence],
    c2: &[Sentence],
    targets: &[String],
    window: usize,
) -> Result<CollocationScores> {
    if window == 0 {
        return Err(LscdError::Config("collocation window must be at least 1".into()));
    }
    let slots: HashMap<&str, usize> = targets.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut columns = Columns::default();
    let v1 = count_contexts(c1, &slots, window, &mut columns);
    let v2 = count_contexts(c2, &slots, window, &mut columns);
    let mut scores = Vec::new();
    let mut missing = Vec::new();
    for (i, t) in targets.iter().enumerate() {
        if v1[i].is_empty() || v2[i].is_empty() {
            missing.push(t.clone());
            continue;
        }
        scores.push((t.clone(), cosine_distance_sparse(&v1[i], &v2[i])?));
    }
    Ok(CollocationScores { scores, missing })
}

/// Every target labeled unchanged with the same score.
pub fn majority_baseline(targets: &[String]) -> Vec<(String, u8, f64)> {
    targets.iter().map(|t| (t.clone(), 0, 0.0)).collect()
}
