//! Vocabulary construction and windowed word–word co-occurrence counts.
//!
//! Counts are kept as exact fixed-point integers: with inverse-distance
//! weighting every contribution `1/d` is stored as `L/d` where `L` is the
//! least common multiple of `1..=window`. Sums are therefore independent of
//! accumulation order, so sharded accumulation, merges and document
//! permutations all give bit-identical matrices.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Exec, Result};

/// Largest supported window; keeps the fixed-point scale below 2^53.
pub const MAX_WINDOW: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Each pair at distance `d` contributes `1/d`.
    InverseDistance,
    /// Each pair contributes 1 regardless of distance.
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CooccurConfig {
    pub window: usize,
    pub weighting: Weighting,
    pub min_count: u64,
}

impl Default for CooccurConfig {
    fn default() -> Self {
        Self {
            window: 15,
            weighting: Weighting::InverseDistance,
            min_count: 5,
        }
    }
}

impl CooccurConfig {
    fn scale(&self) -> Result<u128> {
        if self.window == 0 || self.window > MAX_WINDOW {
            return Err(Error::Config(format!(
                "window must be in 1..={MAX_WINDOW}, got {}",
                self.window
            )));
        }
        Ok(match self.weighting {
            Weighting::Flat => 1,
            Weighting::InverseDistance => (1..=self.window as u128).fold(1, lcm),
        })
    }
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u128, b: u128) -> u128 {
    a / gcd(a, b) * b
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
    freq: Vec<u64>,
}

impl Vocabulary {
    fn from_sorted(entries: Vec<(String, u64)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i as u32))
            .collect();
        let (words, freq) = entries.into_iter().unzip();
        Self { words, index, freq }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, index: u32) -> &str {
        &self.words[index as usize]
    }

    pub fn frequency(&self, index: u32) -> u64 {
        self.freq[index as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.words.hash(&mut h);
        h.finish()
    }

    /// `word<TAB>index<TAB>freq`, one line per word in index order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, (word, freq)) in self.words.iter().zip(&self.freq).enumerate() {
            writeln!(w, "{word}\t{i}\t{freq}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R, source: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let bad = || Error::invalid(format!("{source}:{}", lineno + 1), "expected word<TAB>index<TAB>freq");
            let mut parts = line.split('\t');
            let (Some(word), Some(idx), Some(freq), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            let idx: usize = idx.parse().map_err(|_| bad())?;
            if idx != entries.len() {
                return Err(Error::invalid(format!("{source}:{}", lineno + 1), "indices must be dense and ordered"));
            }
            entries.push((word.to_string(), freq.parse().map_err(|_| bad())?));
        }
        Ok(Self::from_sorted(entries))
    }
}

/// Counts tokens and keeps words with frequency ≥ `min_count`, indexed by
/// descending frequency with ties broken lexicographically.
pub fn build_vocab<'a, I, S>(streams: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a [S]>,
    S: AsRef<str> + 'a,
{
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for stream in streams {
        for tok in stream {
            *counts.entry(tok.as_ref()).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut entries: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(w, c)| (w.to_string(), c))
        .collect();
    if entries.is_empty() {
        return Err(Error::InsufficientData(format!("no word occurs at least {min_count} times")));
    }
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(Vocabulary::from_sorted(entries))
}

/// Sparse symmetric co-occurrence matrix. Only the upper triangle (`i ≤ j`)
/// is stored; zero entries are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceAccumulator {
    vocab_size: usize,
    vocab_fingerprint: u64,
    window: usize,
    weighting: Weighting,
    scale: u128,
    counts: HashMap<(u32, u32), u128>,
}

impl CooccurrenceAccumulator {
    pub fn new(vocab: &Vocabulary, config: &CooccurConfig) -> Result<Self> {
        Ok(Self {
            vocab_size: vocab.len(),
            vocab_fingerprint: vocab.fingerprint(),
            window: config.window,
            weighting: config.weighting,
            scale: config.scale()?,
            counts: HashMap::new(),
        })
    }

    /// Adds every in-window pair of one document. Out-of-vocabulary tokens
    /// still occupy positions. Windows never extend past the document.
    pub fn add_document<S: AsRef<str>>(&mut self, tokens: &[S], vocab: &Vocabulary) {
        let ids: Vec<Option<u32>> = tokens.iter().map(|t| vocab.index_of(t.as_ref())).collect();
        for (p, center) in ids.iter().enumerate() {
            let Some(a) = *center else { continue };
            for d in 1..=self.window {
                let Some(Some(b)) = ids.get(p + d) else {
                    if p + d >= ids.len() {
                        break;
                    }
                    continue;
                };
                // both X[a][b] and X[b][a] grow by w; the diagonal therefore by 2w
                let w = self.unit_weight(d);
                let key = (a.min(*b), a.max(*b));
                *self.counts.entry(key).or_default() += if a == *b { 2 * w } else { w };
            }
        }
    }

    fn unit_weight(&self, distance: usize) -> u128 {
        match self.weighting {
            Weighting::Flat => 1,
            Weighting::InverseDistance => self.scale / distance as u128,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of stored upper-triangle entries.
    pub fn nnz(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, i: u32, j: u32) -> f64 {
        self.counts
            .get(&(i.min(j), i.max(j)))
            .map_or(0.0, |&c| self.to_value(c))
    }

    fn to_value(&self, count: u128) -> f64 {
        count as f64 / self.scale as f64
    }

    /// Upper-triangle entries `(i, j, x)` with `i ≤ j`, sorted.
    pub fn upper_entries(&self) -> Vec<(u32, u32, f64)> {
        let mut keys: Vec<_> = self.counts.iter().map(|(&k, &c)| (k, c)).collect();
        keys.sort_unstable_by_key(|&(k, _)| k);
        keys.into_iter().map(|((i, j), c)| (i, j, self.to_value(c))).collect()
    }

    /// Every nonzero entry of the full matrix, both orientations, sorted.
    pub fn full_entries(&self) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::with_capacity(self.counts.len() * 2);
        for (i, j, x) in self.upper_entries() {
            out.push((i, j, x));
            if i != j {
                out.push((j, i, x));
            }
        }
        out.sort_unstable_by_key(|&(i, j, _)| (i, j));
        out
    }

    /// Sum over all entries of the full matrix.
    pub fn total_mass(&self) -> f64 {
        let units: u128 = self
            .counts
            .iter()
            .map(|(&(i, j), &c)| if i == j { c } else { 2 * c })
            .sum();
        self.to_value(units)
    }

    fn compatible(&self, other: &Self) -> bool {
        self.vocab_fingerprint == other.vocab_fingerprint
            && self.vocab_size == other.vocab_size
            && self.window == other.window
            && self.weighting == other.weighting
    }

    /// Entrywise sum.
    pub fn merge(mut self, other: &Self) -> Result<Self> {
        if !self.compatible(other) {
            return Err(Error::VocabularyMismatch);
        }
        for (&k, &c) in &other.counts {
            *self.counts.entry(k).or_default() += c;
        }
        Ok(self)
    }

    /// `i<TAB>j<TAB>x` lines with `i ≤ j`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, j, x) in self.upper_entries() {
            writeln!(w, "{i}\t{j}\t{x}")?;
        }
        Ok(())
    }

    /// Reads a spill written by [`write_tsv`](Self::write_tsv) for the same
    /// vocabulary and configuration.
    pub fn read_tsv<R: BufRead>(r: R, vocab: &Vocabulary, config: &CooccurConfig, source: &str) -> Result<Self> {
        let mut acc = Self::new(vocab, config)?;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let bad = |msg: &str| Error::invalid(format!("{source}:{}", lineno + 1), msg.to_string());
            let mut parts = line.split('\t');
            let (Some(i), Some(j), Some(x), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected i<TAB>j<TAB>x"));
            };
            let i: u32 = i.parse().map_err(|_| bad("bad row index"))?;
            let j: u32 = j.parse().map_err(|_| bad("bad column index"))?;
            let x: f64 = x.parse().map_err(|_| bad("bad value"))?;
            if i > j || j as usize >= acc.vocab_size {
                return Err(bad("index out of range or not upper triangular"));
            }
            if !(x > 0.0 && x.is_finite()) {
                return Err(bad("values must be positive"));
            }
            acc.counts.insert((i, j), (x * acc.scale as f64).round() as u128);
        }
        Ok(acc)
    }
}

/// Accumulates a set of documents.
pub fn accumulate<S: AsRef<str>>(
    documents: &[Vec<S>],
    vocab: &Vocabulary,
    config: &CooccurConfig,
) -> Result<CooccurrenceAccumulator> {
    let mut acc = CooccurrenceAccumulator::new(vocab, config)?;
    for doc in documents {
        acc.add_document(doc, vocab);
    }
    Ok(acc)
}

/// Splits documents into `shards` contiguous groups, accumulates each
/// independently and merges. The result equals [`accumulate`] exactly.
pub fn accumulate_sharded<S: AsRef<str> + Sync>(
    documents: &[Vec<S>],
    vocab: &Vocabulary,
    config: &CooccurConfig,
    shards: usize,
    exec: Exec,
) -> Result<CooccurrenceAccumulator> {
    let shards = shards.max(1);
    let chunk = documents.len().div_ceil(shards).max(1);
    let groups: Vec<&[Vec<S>]> = documents.chunks(chunk).collect();
    let partials = exec.map(&groups, |g| accumulate(g, vocab, config));
    let mut total = CooccurrenceAccumulator::new(vocab, config)?;
    for part in partials {
        total = total.merge(&part?)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(words: &str) -> Vec<String> {
        words.split_whitespace().map(str::to_string).collect()
    }

    fn cfg(window: usize) -> CooccurConfig {
        CooccurConfig { window, min_count: 1, ..Default::default() }
    }

    #[test]
    fn vocab_ordering_and_threshold() {
        let streams = [doc("a b a")];
        let v = build_vocab(streams.iter().map(Vec::as_slice), 1).unwrap();
        assert_eq!(v.words(), ["a", "b"]);
        assert_eq!((v.frequency(0), v.frequency(1)), (2, 1));
        let v2 = build_vocab(streams.iter().map(Vec::as_slice), 2).unwrap();
        assert_eq!(v2.words(), ["a"]);
        let ties = [doc("z y x z y x q")];
        assert_eq!(build_vocab(ties.iter().map(Vec::as_slice), 1).unwrap().words(), ["x", "y", "z", "q"]);
    }

    #[test]
    fn empty_corpus_is_error() {
        let none: [Vec<String>; 0] = [];
        assert!(matches!(build_vocab(none.iter().map(Vec::as_slice), 1), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn hand_enumerated_small_window() {
        let corpus = [doc("a b a")];
        let v = build_vocab(corpus.iter().map(Vec::as_slice), 1).unwrap();
        let acc = accumulate(&corpus, &v, &cfg(2)).unwrap();
        let (a, b) = (v.index_of("a").unwrap(), v.index_of("b").unwrap());
        assert_eq!(acc.get(a, b), 2.0);
        assert_eq!(acc.get(b, a), 2.0);
        assert_eq!(acc.get(a, a), 1.0);
        assert_eq!(acc.get(b, b), 0.0);
    }

    #[test]
    fn single_token_gives_nothing() {
        let corpus = [doc("a")];
        let v = build_vocab(corpus.iter().map(Vec::as_slice), 1).unwrap();
        assert!(accumulate(&corpus, &v, &cfg(15)).unwrap().is_empty());
    }

    #[test]
    fn out_of_vocabulary_tokens_hold_positions() {
        let corpus = [doc("a rare b")];
        let v = build_vocab([doc("a b")].iter().map(Vec::as_slice), 1).unwrap();
        let acc = accumulate(&corpus, &v, &cfg(15)).unwrap();
        assert_eq!(acc.get(0, 1), 0.5);
    }

    #[test]
    fn merge_identity_doubling_and_mismatch() {
        let corpus = [doc("a b c a b"), doc("c c a")];
        let v = build_vocab(corpus.iter().map(Vec::as_slice), 1).unwrap();
        let x = accumulate(&corpus, &v, &cfg(3)).unwrap();
        let empty = CooccurrenceAccumulator::new(&v, &cfg(3)).unwrap();
        assert_eq!(x.clone().merge(&empty).unwrap(), x);
        let doubled = x.clone().merge(&x).unwrap();
        for (i, j, val) in x.upper_entries() {
            assert_eq!(doubled.get(i, j), 2.0 * val);
        }
        let other_vocab = build_vocab([doc("q r")].iter().map(Vec::as_slice), 1).unwrap();
        let y = CooccurrenceAccumulator::new(&other_vocab, &cfg(3)).unwrap();
        assert!(matches!(x.clone().merge(&y), Err(Error::VocabularyMismatch)));
        let flat = CooccurConfig { weighting: Weighting::Flat, ..cfg(3) };
        let z = CooccurrenceAccumulator::new(&v, &flat).unwrap();
        assert!(x.merge(&z).is_err());
    }

    #[test]
    fn flat_weighting_counts_pairs() {
        let corpus = [doc("a b a")];
        let v = build_vocab(corpus.iter().map(Vec::as_slice), 1).unwrap();
        let flat = CooccurConfig { weighting: Weighting::Flat, ..cfg(2) };
        let acc = accumulate(&corpus, &v, &flat).unwrap();
        assert_eq!(acc.get(0, 1), 2.0);
        assert_eq!(acc.get(0, 0), 2.0);
    }

    #[test]
    fn window_bounds_checked() {
        let v = build_vocab([doc("a")].iter().map(Vec::as_slice), 1).unwrap();
        assert!(CooccurrenceAccumulator::new(&v, &cfg(0)).is_err());
        assert!(CooccurrenceAccumulator::new(&v, &cfg(MAX_WINDOW + 1)).is_err());
        assert!(CooccurrenceAccumulator::new(&v, &cfg(MAX_WINDOW)).is_ok());
    }

    #[test]
    fn spill_round_trip() {
        let corpus = [doc("the cat sat on the mat the end"), doc("a cat and a mat")];
        let v = build_vocab(corpus.iter().map(Vec::as_slice), 1).unwrap();
        let acc = accumulate(&corpus, &v, &cfg(15)).unwrap();
        let mut buf = Vec::new();
        acc.write_tsv(&mut buf).unwrap();
        assert_eq!(CooccurrenceAccumulator::read_tsv(buf.as_slice(), &v, &cfg(15), "x").unwrap(), acc);
        let mut vbuf = Vec::new();
        v.write_tsv(&mut vbuf).unwrap();
        assert_eq!(Vocabulary::read_tsv(vbuf.as_slice(), "v").unwrap(), v);
    }
}
