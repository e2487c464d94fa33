//! Accuracy and average precision against binary gold labels.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::error::{LscdError, Result};
use crate::tsv;

/// Binary gold labels in file order. Label 1 means changed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldData {
    order: Vec<String>,
    labels: HashMap<String, u8>,
}

impl GoldData {
    pub fn new(pairs: impl IntoIterator<Item = (String, u8)>) -> Result<Self> {
        let mut order = Vec::new();
        let mut labels = HashMap::new();
        for (word, label) in pairs {
            if label > 1 {
                return Err(LscdError::Domain(format!("label {label} for {word:?} is not 0 or 1")));
            }
            if labels.insert(word.clone(), label).is_some() {
                return Err(LscdError::Domain(format!("duplicate gold word {word:?}")));
            }
            order.push(word);
        }
        Ok(GoldData { order, labels })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn targets(&self) -> &[String] {
        &self.order
    }

    pub fn label(&self, word: &str) -> Option<u8> {
        self.labels.get(word).copied()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.values().filter(|&&l| l == 1).count()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let lines: Vec<String> = self
            .order
            .iter()
            .map(|w| format!("{w}\t{}", self.labels[w]))
            .collect();
        tsv::write_lines(path, lines.iter().map(String::as_str))
    }

    fn check_same_targets<'a>(&self, words: impl Iterator<Item = &'a str>) -> Result<()> {
        let mut seen = BTreeSet::new();
        for w in words {
            if !seen.insert(w) {
                return Err(LscdError::TargetMismatch(format!("duplicate prediction for {w:?}")));
            }
        }
        let gold: BTreeSet<&str> = self.order.iter().map(String::as_str).collect();
        if seen != gold {
            let extra: Vec<&&str> = seen.difference(&gold).collect();
            let absent: Vec<&&str> = gold.difference(&seen).collect();
            return Err(LscdError::TargetMismatch(format!(
                "not in gold: {extra:?}; without prediction: {absent:?}"
            )));
        }
        Ok(())
    }
}

/// Reads a `word<TAB>{0|1}` gold file.
pub fn load_gold(path: impl AsRef<Path>) -> Result<GoldData> {
    let path = path.as_ref();
    let mut seen = HashMap::new();
    let mut pairs = Vec::new();
    for (lineno, line) in tsv::read_lines(path)? {
        if line.trim().is_empty() {
            continue;
        }
        let (word, label) = line
            .split_once('\t')
            .ok_or_else(|| LscdError::parse(path, lineno, "expected word<TAB>label"))?;
        let label = match label.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(LscdError::parse(path, lineno, format!("label {other:?} is not 0 or 1"))),
        };
        if let Some(first) = seen.insert(word.to_owned(), lineno) {
            return Err(LscdError::parse(
                path,
                lineno,
                format!("duplicate word {word:?} (first on line {first})"),
            ));
        }
        pairs.push((word.to_owned(), label));
    }
    GoldData::new(pairs)
}

/// Reads a `word<TAB>{0|1}` prediction file.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<(String, u8)>> {
    let gold = load_gold(path)?;
    Ok(gold
        .targets()
        .iter()
        .map(|w| (w.clone(), gold.label(w).unwrap()))
        .collect())
}

/// Fraction of targets whose predicted label matches gold.
pub fn accuracy(pred: &[(String, u8)], gold: &GoldData) -> Result<f64> {
    gold.check_same_targets(pred.iter().map(|p| p.0.as_str()))?;
    if pred.is_empty() {
        return Err(LscdError::Undefined("accuracy undefined for zero targets".into()));
    }
    let hits = pred
        .iter()
        .filter(|(w, l)| gold.label(w) == Some(*l))
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Average precision with one step per distinct score value.
///
/// Items sharing a score enter the prediction set together, so a ranking
/// of all-equal scores yields the positive rate.
pub fn average_precision(scores: &[(String, f64)], gold: &GoldData) -> Result<f64> {
    gold.check_same_targets(scores.iter().map(|p| p.0.as_str()))?;
    if scores.iter().any(|s| s.1.is_nan()) {
        return Err(LscdError::Domain("NaN score".into()));
    }
    let n_pos = gold.n_positive();
    if n_pos == 0 {
        return Err(LscdError::Undefined("AP undefined without positive gold labels".into()));
    }
    let mut ranked: Vec<(f64, u8)> = scores
        .iter()
        .map(|(w, s)| (*s, gold.label(w).expect("checked")))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < ranked.len() {
        let value = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == value {
            if ranked[i].1 == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `None` when gold has no positive label.
    pub average_precision: Option<f64>,
    pub n_targets: usize,
    pub n_positive: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn report(pred: &[(String, u8)], scores: &[(String, f64)], gold: &GoldData) -> Result<EvalReport> {
    let acc = accuracy(pred, gold)?;
    let ap = match average_precision(scores, gold) {
        Ok(ap) => Some(ap),
        Err(LscdError::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (w, l) in pred {
        match (*l, gold.label(w).expect("checked")) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    Ok(EvalReport {
        accuracy: acc,
        average_precision: ap,
        n_targets: pred.len(),
        n_positive: tp + fn_,
        tp,
        fp,
        tn,
        fn_,
    })
}

impl EvalReport {
    pub fn to_tsv(&self) -> String {
        let ap = self
            .average_precision
            .map_or_else(|| "NA".to_string(), |v| v.to_string());
        format!(
            "accuracy\t{}\naverage_precision\t{}\nn_targets\t{}\nn_positive\t{}\ntp\t{}\nfp\t{}\ntn\t{}\nfn\t{}\n",
            self.accuracy, ap, self.n_targets, self.n_positive, self.tp, self.fp, self.tn, self.fn_
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        tsv::write_string(path, &self.to_tsv())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gold(labels: &[u8]) -> GoldData {
        GoldData::new(labels.iter().enumerate().map(|(i, &l)| (format!("w{i}"), l))).unwrap()
    }

    fn named<T: Copy>(vals: &[T]) -> Vec<(String, T)> {
        vals.iter().enumerate().map(|(i, &v)| (format!("w{i}"), v)).collect()
    }

    #[test]
    fn accuracy_examples() {
        let mut g = vec![0u8; 18];
        g[..6].fill(1);
        let gd = gold(&g);
        let mut pred = g.clone();
        pred[10] = 1;
        assert!((accuracy(&named(&pred), &gd).unwrap() - 17.0 / 18.0).abs() < 1e-12);
        assert!((accuracy(&named(&pred), &gd).unwrap() - 0.944).abs() < 5e-4);
        let zeros = vec![0u8; 18];
        assert!((accuracy(&named(&zeros), &gd).unwrap() - 0.6667).abs() < 5e-5);
        assert_eq!(accuracy(&named(&g), &gd).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_mismatch_lists_difference() {
        let gd = gold(&[1, 0]);
        let pred = vec![("w0".to_string(), 1), ("other".to_string(), 0)];
        match accuracy(&pred, &gd) {
            Err(LscdError::TargetMismatch(msg)) => {
                assert!(msg.contains("other") && msg.contains("w1"), "{msg}");
            }
            r => panic!("expected mismatch, got {r:?}"),
        }
    }

    #[test]
    fn ap_examples() {
        let mut g = vec![0u8; 18];
        g[..6].fill(1);
        let ap = average_precision(&named(&[0.0; 18]), &gold(&g)).unwrap();
        assert!((ap - 1.0 / 3.0).abs() < 1e-12);

        let perfect: Vec<f64> = (0..18).map(|i| 18.0 - i as f64).collect();
        assert!((average_precision(&named(&perfect), &gold(&g)).unwrap() - 1.0).abs() < 1e-12);

        let ap = average_precision(&named(&[0.9, 0.8, 0.7]), &gold(&[1, 0, 1])).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        assert!((ap - 0.8333).abs() < 1e-4);

        assert!(matches!(
            average_precision(&named(&[0.1, 0.2]), &gold(&[0, 0])),
            Err(LscdError::Undefined(_))
        ));
    }

    #[test]
    fn gold_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gold.tsv");
        let mut text = String::new();
        for i in 0..18 {
            text += &format!("t{i}\t{}\n", u8::from(i % 3 == 0));
        }
        std::fs::write(&p, &text).unwrap();
        let g = load_gold(&p).unwrap();
        assert_eq!((g.len(), g.n_positive()), (18, 6));

        std::fs::write(&p, "a\t1\nb\t2\n").unwrap();
        assert!(matches!(load_gold(&p), Err(LscdError::Parse { line: 2, .. })));
        std::fs::write(&p, "a\t1\na\t0\n").unwrap();
        assert!(matches!(load_gold(&p), Err(LscdError::Parse { line: 2, .. })));
    }

    #[test]
    fn report_perfect() {
        let gd = gold(&[1, 0, 1, 0]);
        let pred = named(&[1u8, 0, 1, 0]);
        let scores = named(&[0.9, 0.1, 0.8, 0.2]);
        let r = report(&pred, &scores, &gd).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.average_precision, Some(1.0));
        assert_eq!((r.tp, r.fp, r.tn, r.fn_, r.n_positive), (2, 0, 2, 0, 2));
        assert!(r.to_tsv().starts_with("accuracy\t1\naverage_precision\t1\n"));
    }
}
