//! Word-embedding training on a co-occurrence matrix.
//!
//! The objective is `Σ f(X_ij) (w_i·w̃_j + b_i + b̃_j − ln X_ij)²` over all
//! nonzero entries, with `f(x) = (x/x_max)^α` below `x_max` and 1 above.
//! Parameters are trained with AdaGrad over shuffled entries; the exported
//! vector for a word is `w_i + w̃_i`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cooccur::{CooccurrenceAccumulator, Vocabulary};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub dim: usize,
    pub x_max: f64,
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// 1 gives bit-reproducible training; more workers update shared
    /// parameters without synchronization.
    pub workers: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            dim: 200,
            x_max: 100.0,
            alpha: 0.75,
            learning_rate: 0.05,
            epochs: 25,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if !(self.x_max > 0.0) {
            return Err(Error::Config(format!("x_max must be positive, got {}", self.x_max)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// Saturating pair weight.
    pub fn weight(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("weight requires x > 0, got {x}")));
        }
        Ok(if x < self.x_max {
            (x / self.x_max).powf(self.alpha)
        } else {
            1.0
        })
    }
}

/// Two embedding sets and their biases, row-major `V × dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub dim: usize,
    pub w: Vec<f64>,
    pub w_tilde: Vec<f64>,
    pub b: Vec<f64>,
    pub b_tilde: Vec<f64>,
}

impl EmbeddingModel {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        Self {
            dim,
            w: vec![0.0; vocab_size * dim],
            w_tilde: vec![0.0; vocab_size * dim],
            b: vec![0.0; vocab_size],
            b_tilde: vec![0.0; vocab_size],
        }
    }

    /// Uniform initialization in `(-0.5/dim, 0.5/dim)`.
    pub fn initialize(vocab_size: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| (rng.random::<f64>() - 0.5) / dim as f64).collect()
        };
        let w = draw(vocab_size * dim);
        let w_tilde = draw(vocab_size * dim);
        let b = draw(vocab_size);
        let b_tilde = draw(vocab_size);
        Self { dim, w, w_tilde, b, b_tilde }
    }

    pub fn vocab_size(&self) -> usize {
        self.b.len()
    }

    pub fn w_row(&self, i: u32) -> &[f64] {
        let i = i as usize;
        &self.w[i * self.dim..(i + 1) * self.dim]
    }

    pub fn w_tilde_row(&self, j: u32) -> &[f64] {
        let j = j as usize;
        &self.w_tilde[j * self.dim..(j + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        [&self.w, &self.w_tilde, &self.b, &self.b_tilde]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// `w_i·w̃_j + b_i + b̃_j`.
    pub fn reconstruct(&self, i: u32, j: u32) -> f64 {
        dot(self.w_row(i), self.w_tilde_row(j)) + self.b[i as usize] + self.b_tilde[j as usize]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss of one `(i, j)` term and the gradient of that loss with respect to
/// each parameter it touches.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryGradients {
    pub loss: f64,
    pub w_i: Vec<f64>,
    pub w_tilde_j: Vec<f64>,
    pub b_i: f64,
    pub b_tilde_j: f64,
}

/// Returns `(f(x)·d², 2·f(x)·d)` for residual `d`.
fn entry_terms(w_i: &[f64], w_tilde_j: &[f64], b_i: f64, b_tilde_j: f64, x: f64, config: &TrainingConfig) -> Result<(f64, f64)> {
    let fx = config.weight(x)?;
    let d = dot(w_i, w_tilde_j) + b_i + b_tilde_j - x.ln();
    Ok((fx * d * d, 2.0 * fx * d))
}

pub fn loss_and_gradients(
    model: &EmbeddingModel,
    config: &TrainingConfig,
    i: u32,
    j: u32,
    x: f64,
) -> Result<EntryGradients> {
    let (w_i, w_tilde_j) = (model.w_row(i), model.w_tilde_row(j));
    let (loss, g) = entry_terms(w_i, w_tilde_j, model.b[i as usize], model.b_tilde[j as usize], x, config)?;
    if !(loss.is_finite() && g.is_finite()) {
        return Err(Error::NonFinite(format!("loss term ({i}, {j})")));
    }
    Ok(EntryGradients {
        loss,
        w_i: w_tilde_j.iter().map(|v| g * v).collect(),
        w_tilde_j: w_i.iter().map(|v| g * v).collect(),
        b_i: g,
        b_tilde_j: g,
    })
}

/// Total weighted loss over every nonzero entry of the full matrix.
pub fn objective(model: &EmbeddingModel, acc: &CooccurrenceAccumulator, config: &TrainingConfig) -> Result<f64> {
    acc.full_entries()
        .into_iter()
        .map(|(i, j, x)| loss_and_gradients(model, config, i, j, x).map(|g| g.loss))
        .sum()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub epochs_completed: usize,
    /// Weighted loss accumulated over each epoch's updates.
    pub epoch_losses: Vec<f64>,
}

/// Parameters shared between workers. Relaxed atomics give lock-free
/// unsynchronized updates; with one worker they behave like plain memory.
struct SharedParams {
    dim: usize,
    w: Vec<AtomicU64>,
    w_tilde: Vec<AtomicU64>,
    b: Vec<AtomicU64>,
    b_tilde: Vec<AtomicU64>,
    gsq_w: Vec<AtomicU64>,
    gsq_w_tilde: Vec<AtomicU64>,
    gsq_b: Vec<AtomicU64>,
    gsq_b_tilde: Vec<AtomicU64>,
}

fn atomics(values: &[f64]) -> Vec<AtomicU64> {
    values.iter().map(|v| AtomicU64::new(v.to_bits())).collect()
}

fn load(a: &AtomicU64) -> f64 {
    f64::from_bits(a.load(Ordering::Relaxed))
}

fn store(a: &AtomicU64, v: f64) {
    a.store(v.to_bits(), Ordering::Relaxed)
}

fn snapshot(values: &[AtomicU64]) -> Vec<f64> {
    values.iter().map(load).collect()
}

impl SharedParams {
    fn new(model: &EmbeddingModel) -> Self {
        let ones = |n: usize| atomics(&vec![1.0; n]);
        Self {
            dim: model.dim,
            w: atomics(&model.w),
            w_tilde: atomics(&model.w_tilde),
            b: atomics(&model.b),
            b_tilde: atomics(&model.b_tilde),
            gsq_w: ones(model.w.len()),
            gsq_w_tilde: ones(model.w_tilde.len()),
            gsq_b: ones(model.b.len()),
            gsq_b_tilde: ones(model.b_tilde.len()),
        }
    }

    fn into_model(self) -> EmbeddingModel {
        EmbeddingModel {
            dim: self.dim,
            w: snapshot(&self.w),
            w_tilde: snapshot(&self.w_tilde),
            b: snapshot(&self.b),
            b_tilde: snapshot(&self.b_tilde),
        }
    }

    fn adagrad(param: &AtomicU64, gsq: &AtomicU64, grad: f64, lr: f64) {
        let g2 = load(gsq) + grad * grad;
        store(gsq, g2);
        store(param, load(param) - lr * grad / g2.sqrt());
    }

    /// Applies one AdaGrad step for entry `(i, j)` and returns its loss.
    fn step(&self, i: u32, j: u32, x: f64, config: &TrainingConfig, wi: &mut [f64], wj: &mut [f64]) -> Result<f64> {
        let (ri, rj) = (i as usize * self.dim, j as usize * self.dim);
        for k in 0..self.dim {
            wi[k] = load(&self.w[ri + k]);
            wj[k] = load(&self.w_tilde[rj + k]);
        }
        let (loss, g) = entry_terms(wi, wj, load(&self.b[i as usize]), load(&self.b_tilde[j as usize]), x, config)?;
        let lr = config.learning_rate;
        for k in 0..self.dim {
            Self::adagrad(&self.w[ri + k], &self.gsq_w[ri + k], g * wj[k], lr);
            Self::adagrad(&self.w_tilde[rj + k], &self.gsq_w_tilde[rj + k], g * wi[k], lr);
        }
        Self::adagrad(&self.b[i as usize], &self.gsq_b[i as usize], g, lr);
        Self::adagrad(&self.b_tilde[j as usize], &self.gsq_b_tilde[j as usize], g, lr);
        Ok(loss)
    }

    fn run(&self, entries: &[(u32, u32, f64)], config: &TrainingConfig) -> Result<f64> {
        let mut wi = vec![0.0; self.dim];
        let mut wj = vec![0.0; self.dim];
        let mut total = 0.0;
        for &(i, j, x) in entries {
            total += self.step(i, j, x, config, &mut wi, &mut wj)?;
        }
        Ok(total)
    }
}

/// Trains embeddings on every nonzero entry of `acc`.
pub fn train(
    acc: &CooccurrenceAccumulator,
    vocab: &Vocabulary,
    config: &TrainingConfig,
) -> Result<(EmbeddingModel, TrainingState)> {
    config.validate()?;
    if acc.is_empty() {
        return Err(Error::InsufficientData("co-occurrence matrix is empty".into()));
    }
    if acc.vocab_size() != vocab.len() {
        return Err(Error::VocabularyMismatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = EmbeddingModel::initialize(vocab.len(), config.dim, &mut rng);
    let params = SharedParams::new(&init);
    let mut entries = acc.full_entries();
    let mut state = TrainingState::default();
    let workers = config.workers.max(1);

    for epoch in 0..config.epochs {
        entries.shuffle(&mut rng);
        let loss = if workers == 1 {
            params.run(&entries, config)?
        } else {
            let chunk = entries.len().div_ceil(workers);
            std::thread::scope(|scope| {
                let handles: Vec<_> = entries
                    .chunks(chunk)
                    .map(|part| scope.spawn(|| params.run(part, config)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .sum::<Result<f64>>()
            })?
        };
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        info!("epoch {epoch}: weighted loss {loss:.6}");
        state.epoch_losses.push(loss);
        state.epochs_completed = epoch + 1;
    }
    Ok((params.into_model(), state))
}

/// Word vectors `w_i + w̃_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

pub fn finalize(model: &EmbeddingModel, vocab: &Vocabulary) -> EmbeddingTable {
    let vectors = model.w.iter().zip(&model.w_tilde).map(|(a, b)| a + b).collect();
    EmbeddingTable::from_parts(model.dim, vocab.words().to_vec(), vectors)
}

impl EmbeddingTable {
    pub fn from_parts(dim: usize, words: Vec<String>, vectors: Vec<f64>) -> Self {
        assert_eq!(words.len() * dim, vectors.len(), "vector storage must be words × dim");
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { dim, words, index, vectors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Multiplies every vector by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::from_parts(self.dim, self.words.clone(), self.vectors.iter().map(|v| v * c).collect())
    }

    /// One line per word: `word v1 … vd`, each value with 6 significant
    /// digits (C `%g` style), space separated, LF terminated.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, word) in self.words.iter().enumerate() {
            w.write_all(word.as_bytes())?;
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                w.write_all(b" ")?;
                w.write_all(format_g6(*v).as_bytes())?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, source: &str) -> Result<Self> {
        let mut words = Vec::new();
        let mut vectors = Vec::new();
        let mut dim = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let location = || format!("{source}:{}", lineno + 1);
            let mut parts = line.split(' ');
            let word = parts.next().filter(|w| !w.is_empty()).ok_or_else(|| Error::invalid(location(), "empty line"))?;
            let before = vectors.len();
            for p in parts {
                let v: f64 = p.parse().map_err(|_| Error::invalid(location(), format!("bad value `{p}`")))?;
                vectors.push(v);
            }
            let d = vectors.len() - before;
            match dim {
                None if d == 0 => return Err(Error::invalid(location(), "no vector values")),
                None => dim = Some(d),
                Some(expected) if expected != d => {
                    return Err(Error::invalid(location(), format!("expected {expected} values, found {d}")))
                }
                _ => {}
            }
            words.push(word.to_string());
        }
        Ok(Self::from_parts(dim.unwrap_or(0), words, vectors))
    }
}

/// Formats like C's `%.6g`.
pub fn format_g6(v: f64) -> String {
    const PRECISION: i32 = 6;
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
