#![allow(dead_code)]

use lscd::corpus::Vocabulary;
use lscd::sgns::EmbeddingMatrix;
use lscd::synth::SynthSpec;
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of R's diagonal folded into Q.
pub fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> Array2<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    Array2::from_shape_fn((d, d), |(i, j)| q[(i, j)] * r[(j, j)].signum())
}

pub fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

pub fn embeddings(names: &[String], m: Array2<f64>) -> EmbeddingMatrix {
    let vocab = Vocabulary::from_ranked_words(names.to_vec()).unwrap();
    EmbeddingMatrix::new(vocab, m).unwrap()
}

/// Small synthetic spec that trains in well under a second.
pub fn small_spec() -> SynthSpec {
    SynthSpec {
        vocab_size: 200,
        sentences: 4000,
        ..SynthSpec::with_targets(6, 3, 1.0)
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu * nv)
}
