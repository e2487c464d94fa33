//! Orthogonal Procrustes alignment of two embedding spaces.
//!
//! Rows of both matrices are restricted to the shared vocabulary,
//! preprocessed (unit length, mean-centered, unit length again) and the
//! second space is rotated onto the first with `W* = U Vᵀ` where
//! `Bᵀ A = U Σ Vᵀ`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Axis};

use crate::corpus::Vocabulary;
use crate::error::{LscdError, Result};
use crate::sgns::EmbeddingMatrix;

/// Words present in both vocabularies, with their row in each matrix.
///
/// Ordered by descending joint frequency, ties lexicographic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedVocabMap {
    pub words: Vec<String>,
    pub rows_a: Vec<usize>,
    pub rows_b: Vec<usize>,
}

impl SharedVocabMap {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.words.iter().position(|w| w == word)
    }
}

/// A d×d matrix with `WᵀW = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMap {
    pub w: Array2<f64>,
}

impl OrthogonalMap {
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// `‖WᵀW − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let gram = self.w.t().dot(&self.w);
        let eye = Array2::<f64>::eye(self.dim());
        (&gram - &eye).mapv(|x| x * x).sum().sqrt()
    }

    /// Writes `W*` as d lines of d space-separated values.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |e| LscdError::io(path, e);
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        for r in self.w.rows() {
            let line: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| LscdError::io(path, e))?;
        let mut data = Vec::new();
        let mut rows = 0;
        let mut cols = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LscdError::parse(path, i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| {
                    s.parse()
                        .map_err(|_| LscdError::parse(path, i + 1, format!("invalid number {s:?}")))
                })
                .collect::<Result<_>>()?;
            if *cols.get_or_insert(vals.len()) != vals.len() {
                return Err(LscdError::parse(path, i + 1, "ragged matrix row"));
            }
            data.extend(vals);
            rows += 1;
        }
        let cols = cols.unwrap_or(0);
        if rows != cols || rows == 0 {
            return Err(LscdError::parse(path, 1, format!("expected a square matrix, got {rows}x{cols}")));
        }
        Ok(OrthogonalMap {
            w: Array2::from_shape_vec((rows, cols), data).expect("shape"),
        })
    }
}

/// Preprocessing toggles and the optional fitting subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignConfig {
    pub normalize: bool,
    pub center: bool,
    pub renormalize: bool,
    /// Fit `W*` on the first `n` shared words only (all rows are mapped).
    pub top_n: Option<usize>,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            normalize: true,
            center: true,
            renormalize: true,
            top_n: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlignedPair {
    /// Preprocessed A rows over the shared vocabulary.
    pub a: Array2<f64>,
    /// Preprocessed B rows times `W*`.
    pub b: Array2<f64>,
    pub map: SharedVocabMap,
    pub w: OrthogonalMap,
    /// Zero rows met during length normalization.
    pub zero_rows: usize,
}

impl AlignedPair {
    /// Both sides as embedding matrices over the shared vocabulary, rows in
    /// shared order.
    pub fn to_embeddings(&self) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
        let vocab = Vocabulary::from_ranked_words(self.map.words.clone())?;
        Ok((
            EmbeddingMatrix::new(vocab.clone(), self.a.clone())?,
            EmbeddingMatrix::new(vocab, self.b.clone())?,
        ))
    }
}

/// Scales every nonzero row to unit Euclidean norm. Returns the number of
/// zero rows, which are left untouched.
pub fn length_normalize(m: &mut Array2<f64>) -> usize {
    let mut zero = 0;
    for mut r in m.rows_mut() {
        let norm = r.dot(&r).sqrt();
        if norm > 0.0 {
            r.mapv_inplace(|x| x / norm);
        } else {
            zero += 1;
        }
    }
    if zero > 0 {
        warn!("{zero} zero rows left unnormalized");
    }
    zero
}

/// Subtracts the column means from every row.
pub fn mean_center(m: &mut Array2<f64>) {
    if m.nrows() == 0 {
        return;
    }
    let mean: Array1<f64> = m.mean_axis(Axis(0)).expect("non-empty");
    *m -= &mean;
}

/// Shared words of two embedding matrices in deterministic order.
pub fn intersect_vocab(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<SharedVocabMap> {
    let mut shared: Vec<(u64, &str, usize, usize)> = a
        .vocab
        .words()
        .iter()
        .enumerate()
        .filter_map(|(ia, w)| {
            b.vocab
                .index_of(w)
                .map(|ib| (a.vocab.count(ia) + b.vocab.count(ib), w.as_str(), ia, ib))
        })
        .collect();
    if shared.is_empty() {
        return Err(LscdError::NoSharedVocabulary);
    }
    shared.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.cmp(y.1)));
    Ok(SharedVocabMap {
        words: shared.iter().map(|s| s.1.to_owned()).collect(),
        rows_a: shared.iter().map(|s| s.2).collect(),
        rows_b: shared.iter().map(|s| s.3).collect(),
    })
}

fn to_nalgebra(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Solves `argmin_{W ∈ O(d)} ‖B W − A‖_F` for row-aligned `a` and `b`.
pub fn orthogonal_procrustes(a: &Array2<f64>, b: &Array2<f64>) -> Result<OrthogonalMap> {
    if a.dim() != b.dim() {
        return Err(LscdError::Domain(format!(
            "matrix shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(LscdError::Domain("cannot align empty matrices".into()));
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(LscdError::Numeric("non-finite input to Procrustes".into()));
    }
    let cross = to_nalgebra(&b.t().dot(a));
    let svd = cross
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| LscdError::Numeric("SVD did not converge".into()))?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(LscdError::Numeric("SVD factors missing".into())),
    };
    let w = u * v_t;
    let d = w.nrows();
    let w = Array2::from_shape_fn((d, d), |(i, j)| w[(i, j)]);
    if w.iter().any(|x| !x.is_finite()) {
        return Err(LscdError::Numeric("non-finite Procrustes solution".into()));
    }
    Ok(OrthogonalMap { w })
}

fn gather_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    m.select(Axis(0), rows)
}

fn preprocess(m: &mut Array2<f64>, config: &AlignConfig) -> usize {
    let mut zero = 0;
    if config.normalize {
        zero += length_normalize(m);
    }
    if config.center {
        mean_center(m);
    }
    if config.renormalize {
        zero += length_normalize(m);
    }
    zero
}

/// Aligns `b` onto `a` over their shared vocabulary.
pub fn align(a: &EmbeddingMatrix, b: &EmbeddingMatrix, config: &AlignConfig) -> Result<AlignedPair> {
    if a.dim() != b.dim() {
        return Err(LscdError::Domain(format!(
            "embedding dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let map = intersect_vocab(a, b)?;
    let mut pa = gather_rows(&a.word_vectors, &map.rows_a);
    let mut pb = gather_rows(&b.word_vectors, &map.rows_b);
    let zero_rows = preprocess(&mut pa, config) + preprocess(&mut pb, config);
    let fit_rows = config.top_n.map_or(map.len(), |n| n.clamp(1, map.len()));
    let w = if fit_rows == map.len() {
        orthogonal_procrustes(&pa, &pb)?
    } else {
        let head = pa.slice(ndarray::s![..fit_rows, ..]).to_owned();
        let head_b = pb.slice(ndarray::s![..fit_rows, ..]).to_owned();
        orthogonal_procrustes(&head, &head_b)?
    };
    let b_op = pb.dot(&w.w);
    Ok(AlignedPair {
        a: pa,
        b: b_op,
        map,
        w,
        zero_rows,
    })
}

/// Frobenius residual `‖B W − A‖_F`.
pub fn procrustes_residual(a: &Array2<f64>, b: &Array2<f64>, w: &Array2<f64>) -> f64 {
    (b.dot(w) - a).mapv(|x| x * x).sum().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn emb(words: &[(&str, u64)], rows: Array2<f64>) -> EmbeddingMatrix {
        let total = words.iter().map(|w| w.1).sum();
        let v = Vocabulary::from_counts(words.iter().map(|(w, c)| (w.to_string(), *c)), total, 1).unwrap();
        // from_counts sorts; rows are given in that order
        EmbeddingMatrix::new(v, rows).unwrap()
    }

    #[test]
    fn normalize_rows() {
        let mut m = array![[3.0, 4.0], [0.0, 0.0]];
        let zero = length_normalize(&mut m);
        assert_eq!(zero, 1);
        assert!((m[[0, 0]] - 0.6).abs() < 1e-15 && (m[[0, 1]] - 0.8).abs() < 1e-15);
        assert_eq!(m.row(1).to_vec(), vec![0.0, 0.0]);

        let mut unit = array![[1.0, 0.0], [0.6, 0.8]];
        let before = unit.clone();
        length_normalize(&mut unit);
        for (a, b) in unit.iter().zip(before.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn centering() {
        let mut m = array![[2.0, 5.0], [2.0, 5.0]];
        mean_center(&mut m);
        assert!(m.iter().all(|&x| x == 0.0));

        let mut m = array![[1.0, 0.0], [-1.0, 0.0]];
        mean_center(&mut m);
        assert_eq!(m, array![[1.0, 0.0], [-1.0, 0.0]]);

        let mut m = array![[1.0, 2.0], [3.0, 4.0]];
        mean_center(&mut m);
        assert_eq!(m, array![[-1.0, -1.0], [1.0, 1.0]]);
    }

    #[test]
    fn intersection_order_and_errors() {
        let a = emb(&[("a", 5), ("b", 3), ("c", 2)], Array2::ones((3, 2)));
        let b = emb(&[("d", 9), ("c", 8), ("b", 1)], Array2::ones((3, 2)));
        let map = intersect_vocab(&a, &b).unwrap();
        assert_eq!(map.words, vec!["c", "b"]);
        assert_eq!(map.rows_a, vec![2, 1]);
        assert_eq!(map.rows_b, vec![1, 2]);

        let full = intersect_vocab(&a, &a).unwrap();
        assert_eq!(full.words, vec!["a", "b", "c"]);

        let c = emb(&[("x", 1)], Array2::ones((1, 2)));
        assert!(matches!(intersect_vocab(&a, &c), Err(LscdError::NoSharedVocabulary)));
    }

    #[test]
    fn identity_recovery() {
        let a = array![[1.0, 0.2, 0.0], [0.3, -1.0, 0.5], [0.0, 0.4, 2.0], [1.0, 1.0, 1.0]];
        let w = orthogonal_procrustes(&a, &a).unwrap();
        let eye = Array2::<f64>::eye(3);
        assert!((&w.w - &eye).mapv(f64::abs).sum() < 1e-6);
        assert!(procrustes_residual(&a, &a, &w.w) < 1e-6);
        assert!(w.orthogonality_error() < 1e-6);
    }

    #[test]
    fn rejects_non_finite() {
        let a = array![[f64::NAN, 0.0]];
        assert!(matches!(
            orthogonal_procrustes(&a, &a),
            Err(LscdError::Numeric(_))
        ));
    }

    #[test]
    fn map_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.txt");
        let m = OrthogonalMap {
            w: array![[0.0, -1.0], [1.0, 0.0]],
        };
        m.save(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 2);
        assert_eq!(OrthogonalMap::load(&p).unwrap(), m);
    }
}
