//! Per-question features: mean title/body embeddings, and the keyword
//! baselines (`bug`, `problem`, `fix`).

use std::io::{BufRead, Write};

use log::warn;

use crate::embed::{format_g6, EmbeddingTable};
use crate::textprep::{normalize, Mode};
use crate::{Error, Label, Result};

pub const KEYWORDS: [&str; 3] = ["bug", "problem", "fix"];

/// Classification-mode tokens of one question.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuestionTokens {
    pub title: Vec<String>,
    pub body: Vec<String>,
}

impl QuestionTokens {
    pub fn from_text(title: &str, body: &str) -> Self {
        Self {
            title: normalize(title, Mode::Classification).tokens,
            body: normalize(body, Mode::Classification).tokens,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuestionFeatures {
    /// Mean title embedding followed by mean body embedding.
    pub values: Vec<f64>,
    pub title_empty: bool,
    pub body_empty: bool,
}

/// Mean of the in-vocabulary token vectors, or `None` when no token is known.
fn mean_embedding(tokens: &[String], table: &EmbeddingTable) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0usize;
    for v in tokens.iter().filter_map(|t| table.get(t)) {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

/// Returns `None` (with a warning) when neither title nor body has a known
/// word.
pub fn featurize(tokens: &QuestionTokens, table: &EmbeddingTable) -> Option<QuestionFeatures> {
    let title = mean_embedding(&tokens.title, table);
    let body = mean_embedding(&tokens.body, table);
    if title.is_none() && body.is_none() {
        warn!("question has no in-vocabulary tokens; excluded");
        return None;
    }
    let (title_empty, body_empty) = (title.is_none(), body.is_none());
    let zeros = || vec![0.0; table.dim()];
    let mut values = title.unwrap_or_else(zeros);
    values.extend(body.unwrap_or_else(zeros));
    Some(QuestionFeatures {
        values,
        title_empty,
        body_empty,
    })
}

/// Keyword counts: `[title bug, title problem, title fix, body bug, body problem, body fix]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct KeywordFeatures(pub [u32; 6]);

impl KeywordFeatures {
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| f64::from(c)).collect()
    }
}

pub fn keyword_counts(tokens: &QuestionTokens) -> KeywordFeatures {
    let mut counts = [0u32; 6];
    for (offset, field) in [(0, &tokens.title), (3, &tokens.body)] {
        for tok in field {
            if let Some(k) = KEYWORDS.iter().position(|k| k == tok) {
                counts[offset + k] += 1;
            }
        }
    }
    KeywordFeatures(counts)
}

/// Keyword-matching baseline: a problem report iff any keyword occurs.
pub fn keyword_match(tokens: &QuestionTokens) -> bool {
    tokens
        .title
        .iter()
        .chain(&tokens.body)
        .any(|t| KEYWORDS.contains(&t.as_str()))
}

/// One row of a feature matrix file.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub id: u64,
    pub label: Option<Label>,
    pub values: Vec<f64>,
}

/// Writes `question_id, label, f0..` with a header row; unlabeled rows carry `?`.
pub fn write_feature_matrix<W: Write>(mut w: W, rows: &[FeatureRow], prefix: &str) -> Result<()> {
    let width = rows.first().map_or(0, |r| r.values.len());
    write!(w, "question_id\tlabel")?;
    for k in 0..width {
        write!(w, "\t{prefix}{k}")?;
    }
    writeln!(w)?;
    for row in rows {
        write!(w, "{}\t{}", row.id, row.label.map_or("?", Label::as_str))?;
        for v in &row.values {
            write!(w, "\t{}", format_g6(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_feature_matrix<R: BufRead>(r: R, source: &str) -> Result<Vec<FeatureRow>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.ok_or_else(|| Error::invalid(source, "missing header"))?;
    let width = header.split('\t').count().saturating_sub(2);
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let location = || format!("{source}:{}", i + 2);
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != width + 2 {
            return Err(Error::invalid(location(), format!("expected {} columns", width + 2)));
        }
        let id = cells[0].parse().map_err(|_| Error::invalid(location(), "bad question id"))?;
        let label = match cells[1] {
            "?" => None,
            l => Some(l.parse().map_err(|_| Error::invalid(location(), "bad label"))?),
        };
        let values = cells[2..]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| Error::invalid(location(), format!("bad value `{c}`"))))
            .collect::<Result<_>>()?;
        rows.push(FeatureRow { id, label, values });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &str) -> Vec<String> {
        words.split_whitespace().map(str::to_string).collect()
    }

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_parts(
            2,
            vec!["a".into(), "b".into(), "bug".into()],
            vec![1.0, 0.0, 3.0, 0.0, -1.0, 5.0],
        )
    }

    #[test]
    fn single_word_title_is_that_vector() {
        let q = QuestionTokens { title: toks("bug"), body: toks("a") };
        let f = featurize(&q, &table()).unwrap();
        assert_eq!(&f.values[..2], table().get("bug").unwrap());
        assert_eq!(f.values.len(), 4);
    }

    #[test]
    fn means_and_multiplicity() {
        let t = table();
        let ab = featurize(&QuestionTokens { title: toks("a b"), body: vec![] }, &t).unwrap();
        assert_eq!(ab.values, [2.0, 0.0, 0.0, 0.0]);
        assert!(ab.body_empty && !ab.title_empty);
        let aa = featurize(&QuestionTokens { title: toks("a a"), body: vec![] }, &t).unwrap();
        let a = featurize(&QuestionTokens { title: toks("a"), body: vec![] }, &t).unwrap();
        assert_eq!(aa, a);
    }

    #[test]
    fn oov_skipped_and_all_empty_excluded() {
        let t = table();
        let f = featurize(&QuestionTokens { title: toks("zzz a"), body: toks("b qqq") }, &t).unwrap();
        assert_eq!(f.values, [1.0, 0.0, 3.0, 0.0]);
        assert!(featurize(&QuestionTokens { title: toks("zzz"), body: vec![] }, &t).is_none());
    }

    #[test]
    fn keyword_examples() {
        let q = QuestionTokens { title: toks("i found a bug"), body: toks("bug fix") };
        assert_eq!(keyword_counts(&q), KeywordFeatures([1, 0, 0, 1, 0, 1]));
        let none = QuestionTokens { title: toks("how to use pointcut"), body: toks("thanks") };
        assert_eq!(keyword_counts(&none).total(), 0);
        assert!(!keyword_match(&none));
        let plural = QuestionTokens { title: toks("bugs everywhere"), body: vec![] };
        assert_eq!(keyword_counts(&plural).total(), 0);
        let body_only = QuestionTokens { title: toks("question"), body: toks("a problem") };
        assert!(keyword_match(&body_only));
        assert!(keyword_match(&QuestionTokens::from_text("I think there is a bug", "")));
    }

    #[test]
    fn matrix_round_trip() {
        let rows = vec![
            FeatureRow { id: 3, label: Some(Label::ProblemReport), values: vec![0.5, -2.0] },
            FeatureRow { id: 4, label: None, values: vec![1e-7, 0.0] },
        ];
        let mut buf = Vec::new();
        write_feature_matrix(&mut buf, &rows, "f").unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("question_id\tlabel\tf0\tf1\n3\tproblem_report\t0.5\t-2\n"));
        assert_eq!(read_feature_matrix(buf.as_slice(), "m").unwrap(), rows);
    }

    proptest! {
        #[test]
        fn order_invariance_scaling_and_match_consistency(
            title in prop::collection::vec(prop::sample::select(vec!["a", "b", "bug", "fix", "x"]), 0..8),
            body in prop::collection::vec(prop::sample::select(vec!["a", "b", "problem", "y"]), 0..8),
            c in -3.0f64..3.0,
        ) {
            let q = QuestionTokens {
                title: title.iter().map(|s| s.to_string()).collect(),
                body: body.iter().map(|s| s.to_string()).collect(),
            };
            prop_assert_eq!(keyword_match(&q), keyword_counts(&q).total() > 0);
            let t = table();
            let mut rev = q.clone();
            rev.title.reverse();
            rev.body.reverse();
            let (f, g) = (featurize(&q, &t), featurize(&rev, &t));
            prop_assert_eq!(f.is_some(), g.is_some());
            if let (Some(f), Some(g)) = (f, g) {
                for (x, y) in f.values.iter().zip(&g.values) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
                let scaled = featurize(&q, &t.scaled(c)).unwrap();
                for (x, y) in f.values.iter().zip(&scaled.values) {
                    prop_assert!((x * c - y).abs() < 1e-12);
                }
            }
        }
    }
}
