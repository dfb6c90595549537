//! Independent reference computations and fixtures shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use lanlan_core::classify::{LabeledDataset, Sample};
use lanlan_core::cooccur::Vocabulary;
use lanlan_core::Label;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random corpus of up to `max_tokens` tokens drawn from a small alphabet,
/// split into a few documents.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_tokens: usize) -> Vec<Vec<String>> {
    let alphabet = rng.random_range(2..12);
    let total = rng.random_range(1..=max_tokens);
    let docs = rng.random_range(1..=4);
    let mut out = vec![Vec::new(); docs];
    for _ in 0..total {
        let d = rng.random_range(0..docs);
        out[d].push(format!("w{}", rng.random_range(0..alphabet)));
    }
    out
}

/// `X[a][b] += 1/d` for every ordered pair of in-vocabulary tokens at
/// distance `1 ≤ d ≤ window` within a document, in exact rationals.
pub fn brute_cooccurrence(docs: &[Vec<String>], vocab: &Vocabulary, window: usize, flat: bool) -> BTreeMap<(u32, u32), Ratio<i64>> {
    let mut x = BTreeMap::new();
    for doc in docs {
        for p in 0..doc.len() {
            for q in 0..doc.len() {
                let d = p.abs_diff(q);
                if d == 0 || d > window {
                    continue;
                }
                let (Some(a), Some(b)) = (vocab.index_of(&doc[p]), vocab.index_of(&doc[q])) else {
                    continue;
                };
                let w = if flat { Ratio::from_integer(1) } else { Ratio::new(1, d as i64) };
                *x.entry((a, b)).or_insert_with(|| Ratio::from_integer(0)) += w;
            }
        }
    }
    x
}

pub fn ratio_to_f64(r: &Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// AUROC by enumerating every positive/negative pair.
pub fn auroc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let mut twice_wins = 0u64;
    let mut pairs = 0u64;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                twice_wins += 2;
            } else if scores[i] == scores[j] {
                twice_wins += 1;
            }
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

/// U statistic of `a` by pair counting (ties 1/2).
pub fn mw_u(a: &[f64], b: &[f64]) -> f64 {
    let mut twice = 0u64;
    for x in a {
        for y in b {
            twice += if x > y { 2 } else if x == y { 1 } else { 0 };
        }
    }
    twice as f64 / 2.0
}

/// Exact two-sided Mann-Whitney p by enumerating every relabelling of the
/// pooled sample.
pub fn mw_enumerate(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let observed = (2.0 * mw_u(a, b)) as i64;
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let (sa, sb): (Vec<f64>, Vec<f64>) = {
            let mut sa = Vec::new();
            let mut sb = Vec::new();
            for (k, v) in pooled.iter().enumerate() {
                if mask & (1 << k) != 0 { sa.push(*v) } else { sb.push(*v) }
            }
            (sa, sb)
        };
        let u = (2.0 * mw_u(&sa, &sb)) as i64;
        total += 1;
        le += u64::from(u <= observed);
        ge += u64::from(u >= observed);
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

/// Exact two-sided signed-rank p and V by enumerating all sign patterns of
/// the non-zero differences.
pub fn signed_rank_enumerate(d: &[f64]) -> (f64, f64) {
    let nz: Vec<f64> = d.iter().copied().filter(|&v| v != 0.0).collect();
    let abs: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
    // midranks by counting
    let twice_rank: Vec<i64> = abs
        .iter()
        .map(|&v| {
            let less = abs.iter().filter(|&&w| w < v).count() as i64;
            let equal = abs.iter().filter(|&&w| w == v).count() as i64;
            2 * less + equal + 1
        })
        .collect();
    let observed: i64 = twice_rank.iter().zip(&nz).filter(|(_, &v)| v > 0.0).map(|(r, _)| r).sum();
    let m = nz.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << m) {
        let s: i64 = (0..m).filter(|k| mask & (1 << k) != 0).map(|k| twice_rank[k]).sum();
        le += u64::from(s <= observed);
        ge += u64::from(s >= observed);
    }
    let p = if m == 0 { 1.0 } else { (2.0 * le.min(ge) as f64 / (1u64 << m) as f64).min(1.0) };
    (observed as f64 / 2.0, p)
}

/// Multiple R² by modified Gram-Schmidt on `[1, columns...]`.
pub fn gram_schmidt_r2(columns: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut cols = vec![vec![1.0; n]];
    cols.extend(columns.iter().cloned());
    for mut c in cols {
        for q in &basis {
            let proj: f64 = c.iter().zip(q).map(|(a, b)| a * b).sum();
            for (ci, qi) in c.iter_mut().zip(q) {
                *ci -= proj * qi;
            }
        }
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        basis.push(c.into_iter().map(|v| v / norm).collect());
    }
    let mut resid = y.to_vec();
    for q in &basis {
        let proj: f64 = resid.iter().zip(q).map(|(a, b)| a * b).sum();
        for (r, qi) in resid.iter_mut().zip(q) {
            *r -= proj * qi;
        }
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    1.0 - resid.iter().map(|v| v * v).sum::<f64>() / sst
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `n` points in `dim` dimensions, `positives` of them positive, separated
/// by a gap of `2 * shift` along a random unit direction.
pub fn separable_dataset(n: usize, positives: usize, dim: usize, shift: f64, seed: u64) -> LabeledDataset {
    let mut rng = rng(seed);
    let mut u: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= norm);
    let mut labels: Vec<bool> = (0..n).map(|i| i < positives).collect();
    labels.shuffle(&mut rng);
    let samples = labels
        .into_iter()
        .enumerate()
        .map(|(i, positive)| {
            let mut x: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
            let along: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
            // remove the noise along u so the classes cannot overlap
            let target = if positive { shift } else { -shift };
            for (xi, ui) in x.iter_mut().zip(&u) {
                *xi += (target - along) * ui;
            }
            Sample { id: i as u64, features: x, label: Label::from_positive(positive) }
        })
        .collect();
    LabeledDataset::new("separable", samples).unwrap()
}

/// Thirty labeled questions for the keyword baseline, as
/// `(title, body, label)`. Keyword matches (whole tokens bug/problem/fix
/// after normalization) are marked per row in the comment.
pub fn keyword_fixture() -> Vec<(&'static str, &'static str, Label)> {
    use Label::{ProblemReport as P, SupportRequest as S};
    vec![
        ("Crash when loading file", "This looks like a bug in the parser", P),          // match
        ("Problem with export", "Output is truncated", P),                               // match
        ("Wrong result", "Is there a fix planned? Version 2.1", P),                      // match
        ("BUG: plot fails", "Error raised on empty input", P),                           // match
        ("Segfault", "It crashed with bug123 in the log", P),                            // match (bug123 -> bug)
        ("Null pointer exception", "Happens every time I call run()", P),                // no
        ("Incorrect totals", "The sums are off by one, a problem since 3.0", P),         // match
        ("Regression in 1.4", "Worked in 1.3, now fails", P),                            // no
        ("Memory leak", "Could someone fix this?", P),                                   // match
        ("Bugs in the importer", "Several rows are dropped", P),                         // no (bugs)
        ("Wrong encoding", "Unicode problem. Characters are garbled", P),                // match
        ("Test failure", "<code>assert x == 1</code> fails on Windows", P),              // no
        ("Freeze on exit", "Program hangs. bug?", P),                                    // match
        ("Timeout error", "Fixed in dev? It still fails for me", P),                     // no (fixed)
        ("How do I read a CSV?", "I want to load a table", S),                           // no
        ("Best way to plot", "What function should I use", S),                           // no
        ("Is this a bug or my mistake?", "The docs are unclear", S),                     // match
        ("Installing on Linux", "Which dependencies are needed", S),                     // no
        ("Quick fix for formatting", "How do I change the date format", S),              // match
        ("Problem understanding options", "What does verbose do", S),                    // match
        ("Converting types", "How to convert a list to a vector", S),                    // no
        ("Using the debugger", "How can I debug my script", S),                          // no (debug)
        ("Filtering rows", "Select rows where value is 0", S),                           // no
        ("Merge two tables", "What is the join syntax", S),                              // no
        ("Reading docs", "Where is the tutorial", S),                                    // no
        ("Performance tips", "No problem so far, but is it fast enough", S),             // match
        ("Custom themes", "Can I define my own colors", S),                              // no
        ("Parallel runs", "How to use several cores", S),                                // no
        ("Saving results", "Which format is recommended", S),                            // no
        ("Fixing axis labels", "How to rotate labels", S),                               // no (fixing)
    ]
}

/// Hand count for [`keyword_fixture`]: (tp, fp, tn, fn).
pub const KEYWORD_CONFUSION: (usize, usize, usize, usize) = (9, 4, 12, 5);

/// Reference per-feature p-values (problem reports, support requests) with
/// "<.001" entered as 0.001.
pub const REFERENCE_FEATURE_P: [(&str, f64, f64); 29] = [
    ("Churn.Adds", 0.031, 0.016),
    ("Churn.Dels", 0.024, 0.012),
    ("Churn.Adds.per.Week", 0.010, 0.002),
    ("Churn.Dels.per.Week", 0.017, 0.005),
    ("R.Files", 0.001, 0.001),
    ("R.Blanks", 0.001, 0.001),
    ("R.Comments", 0.028, 0.001),
    ("R.LOC", 0.001, 0.001),
    ("R.LOC.per.File", 0.369, 0.499),
    ("R.Blanks.per.LOC", 0.298, 0.335),
    ("R.Comments.per.LOC", 0.682, 0.494),
    ("Compiled.Files", 0.247, 0.113),
    ("Compiled.Blanks", 0.459, 0.199),
    ("Compiled.Comments", 0.361, 0.163),
    ("Compiled.LOC", 0.649, 0.400),
    ("Compiled.LOC.per.File", 0.348, 0.500),
    ("Compiled.Blanks.per.LOC", 0.874, 0.565),
    ("Compiled.Comments.per.LOC", 0.670, 0.938),
    ("Max.Cyclomatic.Complexity", 0.392, 0.063),
    ("Mean.Cyclomatic.Complexity", 0.307, 0.532),
    ("Count.Cyclomatic.Complexity", 0.066, 0.003),
    ("Total.Cyclomatic.Complexity", 0.001, 0.001),
    ("Codetools.Problems", 0.001, 0.001),
    ("Test.Coverage", 0.642, 0.234),
    ("Goodpractice.Problems", 0.235, 0.171),
    ("Vignettes", 0.001, 0.001),
    ("Depends", 0.026, 0.022),
    ("Imports", 0.001, 0.001),
    ("Suggests", 0.001, 0.001),
];

pub const REFERENCE_PROBLEM_SIGNIFICANT: [&str; 8] = [
    "R.Files",
    "R.Blanks",
    "R.LOC",
    "Total.Cyclomatic.Complexity",
    "Codetools.Problems",
    "Vignettes",
    "Imports",
    "Suggests",
];

/// Growth curve at κ = 83.7, β = 0.036, δ = −23.2, evaluated in 50-digit
/// arithmetic at t = 0 and t = 100.
pub const ARRAYEXPRESS_Y0: f64 = 4.871_042_253_607_649_6;
pub const ARRAYEXPRESS_Y100: f64 = 78.855_848_705_130_527;

/// A 20-observation, 3-predictor regression and its reference fit
/// (coefficients, standard errors, t, p for intercept, x1, x2, x3; R²).
pub struct OlsFixture {
    pub x: [[f64; 20]; 3],
    pub y: [f64; 20],
    pub coef: [f64; 4],
    pub se: [f64; 4],
    pub t: [f64; 4],
    pub p: [f64; 4],
    pub r2: f64,
}

pub const OLS_FIXTURE: OlsFixture = OlsFixture {
    x: [
        [3., 7., 1., 9., 4., 6., 2., 8., 5., 10., 3., 6., 7., 2., 9., 4., 1., 8., 5., 6.],
        [12.5, 10.1, 14.2, 8.8, 11.0, 13.3, 9.7, 12.0, 10.4, 7.9, 15.1, 11.8, 9.2, 13.9, 8.1, 12.7, 10.9, 9.9, 14.4, 11.3],
        [0., 1., 0., 1., 1., 0., 0., 1., 0., 1., 1., 0., 1., 0., 0., 1., 1., 0., 1., 0.],
    ],
    y: [20.1, 27.4, 15.2, 30.8, 22.9, 24.1, 16.0, 29.5, 21.7, 33.0, 22.3, 23.8, 27.9, 16.4, 30.2, 24.0, 18.5, 27.1, 26.6, 22.2],
    coef: [11.32829417805878, 1.7317411718813736, 0.17718055576982006, 2.931412994849573],
    se: [1.7457612713111847, 0.09561407813266717, 0.12142015283453322, 0.39983696315656364],
    t: [6.489028233253488, 18.111780249332476, 1.4592351568793938, 7.331520757128508],
    p: [7.470745485482022e-06, 4.389274692002705e-12, 0.16385406329082947, 1.6876817794877851e-06],
    r2: 0.9752165720216411,
};

/// Hand-derived normalization cases: input, classification mode flag, and
/// the expected space-joined tokens.
pub const NORMALIZATION_GOLDEN: &[(&str, bool, &str)] = &[
    ("Hello World", false, "hello world"),
    ("Version 3.14 released", false, "version 0 released"),
    ("1,000,000 rows", false, "0 rows"),
    ("Call foo() twice.", false, "call foo twice ."),
    ("Is it broken?", false, "is it broken ?"),
    ("Wow!!", false, "wow ! !"),
    ("java.lang.NullPointerException", false, "java . lang . exception"),
    ("java.lang.NullPointerException", true, "java lang exception"),
    ("IOError in read", false, "error in read"),
    ("Segmentation fault (core dumped)", false, "segmentation fault core dumped"),
    ("see <code> below", false, "see <code> below"),
    ("see <code> below", true, "see below"),
    ("x <- c(1, 2, 3)", false, "x c 0 0 0"),
    ("Error: object 'df' not found", false, "error object df not found"),
    ("TypeError raised", false, "error raised"),
    ("Exceptions are thrown", false, "exceptions are thrown"),
    ("ValueErrors", false, "valueerrors"),
    ("R 3.2.1 on Ubuntu 14.04", false, "r 0 on ubuntu 0"),
    ("R 3.2.1 on Ubuntu 14.04", true, "r on ubuntu"),
    ("md5 hash", false, "md hash"),
    ("\u{dc}ber caf\u{e9}", false, "ber caf"),
    ("tab\tseparated\nlines", false, "tab separated lines"),
    ("e.g. this", false, "e . g . this"),
    ("3.14.", false, "0 ."),
    ("-42", false, "0"),
    ("#include <stdio.h>", false, "include stdio . h"),
    ("", false, ""),
    ("A<code>B<code>C", false, "a <code> b <code> c"),
    ("A<code>B<code>C", true, "a b c"),
    ("What's up?", true, "what s up"),
    ("no_such_file_Error", false, "no such file error"),
    ("123abc", false, "abc"),
    ("Error42Exception", false, "exception"),
];

/// Random text mixing letters, digits, punctuation, whitespace, non-ASCII
/// characters and fragments of the code sentinel.
pub fn random_text(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    const PIECES: &[&str] = &[
        "a", "Z", "q", "error", "Exception", "7", "3.5", "1,2", ".", ",", "?", "!", " ", "\t", "\n", "<", ">",
        "<code>", "<cod", "_", "-", "'", "\u{e9}", "\u{3b1}", "\u{1f600}", "(", ")", "/",
    ];
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| PIECES[rng.random_range(0..PIECES.len())]).collect()
}
