//! Synthetic diachronic corpus pairs with planted semantic change.
//!
//! Regular words are split into topic clusters; every sentence draws its
//! words from one cluster (Zipfian within the cluster). Pseudoword targets
//! are inserted into sentences of a source cluster: unchanged targets use
//! the same cluster in both corpora, changed targets switch to a different
//! cluster in the second corpus with probability `ratio`.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::corpus::Sentence;
use crate::error::{LscdError, Result};
use crate::evaluation::GoldData;
use crate::tsv;

#[derive(Debug, Clone, PartialEq)]
pub struct PseudowordSpec {
    pub name: String,
    pub changed: bool,
    /// Share of second-corpus occurrences moved to the new cluster.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Number of regular (non-target) words.
    pub vocab_size: usize,
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub clusters: usize,
    pub zipf_exponent: f64,
    /// Probability that a sentence carries a target.
    pub target_rate: f64,
    pub targets: Vec<PseudowordSpec>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec::with_targets(10, 5, 1.0)
    }
}

impl SynthSpec {
    /// Default corpus shape with `n` targets of which the first `changed`
    /// (interleaved with unchanged ones) switch cluster at `ratio`.
    pub fn with_targets(n: usize, changed: usize, ratio: f64) -> Self {
        let mut flags = vec![false; n];
        let mut placed = 0;
        for i in (0..n).step_by(2).chain((1..n).step_by(2)) {
            if placed == changed {
                break;
            }
            flags[i] = true;
            placed += 1;
        }
        SynthSpec {
            vocab_size: 2000,
            sentences: 50_000,
            min_len: 8,
            max_len: 15,
            clusters: 4,
            zipf_exponent: 1.0,
            target_rate: 0.1,
            targets: flags
                .into_iter()
                .enumerate()
                .map(|(i, changed)| PseudowordSpec {
                    name: format!("target{i:02}"),
                    changed,
                    ratio: if changed { ratio } else { 0.0 },
                })
                .collect(),
        }
    }

    pub fn word_name(&self, idx: usize) -> String {
        let width = self.vocab_size.saturating_sub(1).to_string().len().max(4);
        format!("w{idx:0width$}")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(LscdError::InvalidSpec(m));
        if self.clusters == 0 {
            return fail("at least one cluster is required".into());
        }
        if self.vocab_size < self.clusters {
            return fail(format!(
                "vocabulary of {} words cannot fill {} clusters",
                self.vocab_size, self.clusters
            ));
        }
        if self.sentences == 0 {
            return fail("sentence count must be positive".into());
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return fail(format!(
                "sentence lengths must satisfy 1 <= min ({}) <= max ({})",
                self.min_len, self.max_len
            ));
        }
        if !(0.0..=1.0).contains(&self.target_rate) {
            return fail(format!("target rate {} outside [0, 1]", self.target_rate));
        }
        if !self.zipf_exponent.is_finite() || self.zipf_exponent < 0.0 {
            return fail(format!("invalid Zipf exponent {}", self.zipf_exponent));
        }
        let words: HashSet<String> = (0..self.vocab_size).map(|i| self.word_name(i)).collect();
        let mut names = HashSet::new();
        for t in &self.targets {
            if t.name.is_empty() || t.name.chars().any(char::is_whitespace) {
                return fail(format!("invalid target name {:?}", t.name));
            }
            if words.contains(&t.name) || !names.insert(t.name.as_str()) {
                return fail(format!("target name {:?} is not unique", t.name));
            }
            if !(0.0..=1.0).contains(&t.ratio) {
                return fail(format!("mixing ratio {} of {:?} outside [0, 1]", t.ratio, t.name));
            }
            if t.changed && t.ratio == 0.0 {
                return fail(format!(
                    "{:?} is marked changed but its ratio 0 leaves both contexts identical",
                    t.name
                ));
            }
            if t.changed && self.clusters < 2 {
                return fail("changed targets need at least two clusters".into());
            }
        }
        Ok(())
    }

    /// Topic cluster of regular word `idx`.
    pub fn cluster_of_word(&self, idx: usize) -> usize {
        idx * self.clusters / self.vocab_size
    }

    fn source_clusters(&self, target: usize) -> (usize, usize) {
        let x = target % self.clusters;
        let y = if self.targets[target].changed {
            (x + 1) % self.clusters
        } else {
            x
        };
        (x, y)
    }
}

/// Generator output: corpora, target list and gold labels.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus1: Vec<Sentence>,
    pub corpus2: Vec<Sentence>,
    pub targets: Vec<String>,
    pub gold: GoldData,
    /// Smallest homogeneity p-value over unchanged targets' context words.
    pub min_unchanged_p: Option<f64>,
}

impl SynthCorpus {
    /// Writes `corpus1.txt`, `corpus2.txt`, `targets.txt` and `gold.tsv`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| LscdError::io(dir, e))?;
        for (name, corpus) in [("corpus1.txt", &self.corpus1), ("corpus2.txt", &self.corpus2)] {
            let lines: Vec<String> = corpus.iter().map(|s| s.tokens().join(" ")).collect();
            tsv::write_lines(dir.join(name), lines.iter().map(String::as_str))?;
        }
        tsv::write_word_list(dir.join("targets.txt"), &self.targets)?;
        self.gold.save(dir.join("gold.tsv"))
    }
}

struct Clusters {
    members: Vec<Vec<usize>>,
    samplers: Vec<WeightedIndex<f64>>,
}

impl Clusters {
    fn new(spec: &SynthSpec) -> Result<Self> {
        let mut members = vec![Vec::new(); spec.clusters];
        for w in 0..spec.vocab_size {
            members[spec.cluster_of_word(w)].push(w);
        }
        let samplers = members
            .iter()
            .map(|m| {
                let weights = (0..m.len()).map(|r| ((r + 1) as f64).powf(-spec.zipf_exponent));
                WeightedIndex::new(weights).map_err(|e| LscdError::InvalidSpec(e.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(Clusters { members, samplers })
    }

    fn draw<R: Rng>(&self, cluster: usize, rng: &mut R) -> usize {
        self.members[cluster][self.samplers[cluster].sample(rng)]
    }
}

fn generate_corpus(
    spec: &SynthSpec,
    clusters: &Clusters,
    names: &[String],
    second: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<Sentence> {
    let mut out = Vec::with_capacity(spec.sentences);
    for _ in 0..spec.sentences {
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let with_target = !spec.targets.is_empty() && rng.random::<f64>() < spec.target_rate;
        let (cluster, target) = if with_target {
            let t = rng.random_range(0..spec.targets.len());
            let (x, y) = spec.source_clusters(t);
            let c = if second && spec.targets[t].changed && rng.random::<f64>() < spec.targets[t].ratio {
                y
            } else {
                x
            };
            (c, Some(t))
        } else {
            (rng.random_range(0..spec.clusters), None)
        };
        let mut tokens: Vec<String> = (0..len)
            .map(|_| names[clusters.draw(cluster, rng)].clone())
            .collect();
        if let Some(t) = target {
            let pos = rng.random_range(0..=len);
            tokens.insert(pos, spec.targets[t].name.clone());
        }
        out.push(Sentence::new(tokens).expect("min_len >= 1"));
    }
    out
}

/// Homogeneity test of a target's sentence-mate counts between corpora.
/// Sparse words are pooled so every pooled cell has at least 20 combined
/// observations.
fn context_homogeneity(target: &str, c1: &[Sentence], c2: &[Sentence]) -> Option<f64> {
    fn count<'a>(corpus: &'a [Sentence], target: &str) -> HashMap<&'a str, f64> {
        let mut m = HashMap::new();
        for s in corpus.iter().filter(|s| s.tokens().iter().any(|t| t == target)) {
            for tok in s.tokens().iter().filter(|t| *t != target) {
                *m.entry(tok.as_str()).or_insert(0.0) += 1.0;
            }
        }
        m
    }
    let (m1, m2) = (count(c1, target), count(c2, target));
    let mut words: Vec<&str> = m1.keys().chain(m2.keys()).copied().collect::<HashSet<_>>().into_iter().collect();
    words.sort_by(|a, b| {
        let ca = m1.get(a).unwrap_or(&0.0) + m2.get(a).unwrap_or(&0.0);
        let cb = m1.get(b).unwrap_or(&0.0) + m2.get(b).unwrap_or(&0.0);
        cb.total_cmp(&ca).then_with(|| a.cmp(b))
    });
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for w in words {
        acc.0 += m1.get(w).unwrap_or(&0.0);
        acc.1 += m2.get(w).unwrap_or(&0.0);
        if acc.0 + acc.1 >= 20.0 {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    if cells.len() < 2 {
        return None;
    }
    let (t1, t2): (f64, f64) = cells.iter().fold((0.0, 0.0), |a, c| (a.0 + c.0, a.1 + c.1));
    if t1 == 0.0 || t2 == 0.0 {
        return None;
    }
    let total = t1 + t2;
    let stat: f64 = cells
        .iter()
        .map(|&(a, b)| {
            let row = a + b;
            let (e1, e2) = (row * t1 / total, row * t2 / total);
            (a - e1).powi(2) / e1 + (b - e2).powi(2) / e2
        })
        .sum();
    let dist = ChiSquared::new((cells.len() - 1) as f64).ok()?;
    Some(1.0 - dist.cdf(stat))
}

/// Generates a corpus pair; deterministic in `seed`.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthCorpus> {
    spec.validate()?;
    let clusters = Clusters::new(spec)?;
    let names: Vec<String> = (0..spec.vocab_size).map(|i| spec.word_name(i)).collect();
    let mut rng1 = ChaCha8Rng::seed_from_u64(seed);
    rng1.set_stream(1);
    let mut rng2 = ChaCha8Rng::seed_from_u64(seed);
    rng2.set_stream(2);
    let corpus1 = generate_corpus(spec, &clusters, &names, false, &mut rng1);
    let corpus2 = generate_corpus(spec, &clusters, &names, true, &mut rng2);

    let mut min_p: Option<f64> = None;
    for t in spec.targets.iter().filter(|t| !t.changed) {
        if let Some(p) = context_homogeneity(&t.name, &corpus1, &corpus2) {
            if p < 1e-6 {
                return Err(LscdError::InvalidSpec(format!(
                    "unchanged target {:?} failed the context homogeneity check (p = {p:e})",
                    t.name
                )));
            }
            min_p = Some(min_p.map_or(p, |m| m.min(p)));
        }
    }
    let gold = GoldData::new(spec.targets.iter().map(|t| (t.name.clone(), u8::from(t.changed))))?;
    Ok(SynthCorpus {
        corpus1,
        corpus2,
        targets: spec.targets.iter().map(|t| t.name.clone()).collect(),
        gold,
        min_unchanged_p: min_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            vocab_size: 200,
            sentences: 3000,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn default_shape() {
        let s = SynthSpec::default();
        assert_eq!((s.vocab_size, s.sentences, s.clusters, s.targets.len()), (2000, 50_000, 4, 10));
        assert_eq!(s.targets.iter().filter(|t| t.changed).count(), 5);
        assert!(s.targets.iter().filter(|t| t.changed).all(|t| t.ratio == 1.0));
        s.validate().unwrap();
    }

    #[test]
    fn no_changed_targets_gives_zero_gold() {
        let spec = SynthSpec {
            targets: SynthSpec::with_targets(6, 0, 1.0).targets,
            ..small()
        };
        let g = generate(&spec, 1).unwrap();
        assert_eq!(g.gold.n_positive(), 0);
        assert_eq!(g.gold.len(), 6);
    }

    #[test]
    fn zero_ratio_change_is_rejected() {
        let mut spec = small();
        spec.targets[0].ratio = 0.0;
        assert!(spec.targets[0].changed);
        assert!(matches!(generate(&spec, 1), Err(LscdError::InvalidSpec(_))));
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            SynthSpec { clusters: 1, ..small() },
            SynthSpec { min_len: 0, ..small() },
            SynthSpec { min_len: 9, max_len: 3, ..small() },
            SynthSpec { target_rate: 1.5, ..small() },
            SynthSpec { vocab_size: 2, ..small() },
        ];
        for spec in bad {
            assert!(spec.validate().is_err(), "{spec:?}");
        }
        let mut dup = small();
        dup.targets[1].name = dup.targets[0].name.clone();
        assert!(dup.validate().is_err());
        let mut clash = small();
        clash.targets[0].name = clash.word_name(3);
        assert!(clash.validate().is_err());
    }

    #[test]
    fn deterministic() {
        let a = generate(&small(), 9).unwrap();
        let b = generate(&small(), 9).unwrap();
        assert_eq!(a.corpus1, b.corpus1);
        assert_eq!(a.corpus2, b.corpus2);
        let c = generate(&small(), 10).unwrap();
        assert_ne!(a.corpus1, c.corpus1);
    }

    #[test]
    fn planted_contexts() {
        let spec = small();
        let g = generate(&spec, 3).unwrap();
        let cluster_of = |tok: &str| -> Option<usize> {
            tok.strip_prefix('w')
                .and_then(|n| n.parse::<usize>().ok())
                .map(|i| spec.cluster_of_word(i))
        };
        for (ti, t) in spec.targets.iter().enumerate() {
            let (x, y) = spec.source_clusters(ti);
            for (corpus, expected) in [(&g.corpus1, x), (&g.corpus2, y)] {
                let mut seen = 0;
                for s in corpus.iter().filter(|s| s.tokens().contains(&t.name)) {
                    for tok in s.tokens().iter().filter_map(|tok| cluster_of(tok)) {
                        assert_eq!(tok, expected, "{}", t.name);
                    }
                    seen += 1;
                }
                assert!(seen > 0);
            }
            if t.changed {
                assert_ne!(x, y);
            } else {
                assert_eq!(x, y);
            }
        }
        assert!(g.min_unchanged_p.unwrap() > 1e-6);
    }

    #[test]
    fn partial_ratio_mixes_clusters() {
        let mut spec = small();
        spec.targets[0].ratio = 0.5;
        let g = generate(&spec, 4).unwrap();
        let (x, y) = spec.source_clusters(0);
        let name = &spec.targets[0].name;
        let mut hits = [0usize; 2];
        for s in g.corpus2.iter().filter(|s| s.tokens().contains(name)) {
            let other = s.tokens().iter().find(|t| *t != name).unwrap();
            let c = spec.cluster_of_word(other[1..].parse().unwrap());
            if c == x {
                hits[0] += 1;
            } else if c == y {
                hits[1] += 1;
            }
        }
        assert!(hits[0] > 0 && hits[1] > 0, "{hits:?}");
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let g = generate(&small(), 5).unwrap();
        g.write_to(dir.path()).unwrap();
        for f in ["corpus1.txt", "corpus2.txt", "targets.txt", "gold.tsv"] {
            assert!(dir.path().join(f).exists());
        }
        let back = crate::corpus::read_corpus(dir.path().join("corpus1.txt")).unwrap();
        assert_eq!(back, g.corpus1);
        let gold = crate::evaluation::load_gold(dir.path().join("gold.tsv")).unwrap();
        assert_eq!(gold, g.gold);
    }
}
