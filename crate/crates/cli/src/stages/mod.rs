//! One function per subcommand. Each declares its inputs, reads them through
//! a [`StageRun`], writes its outputs and finishes with a manifest.

pub mod classify;
pub mod growth;
pub mod packages;
pub mod report;
pub mod text;

use std::collections::{BTreeMap, BTreeSet};

use lanlan_core::classify::LabeledDataset;
use lanlan_core::features::{read_feature_matrix, FeatureRow};
use lanlan_core::ingest::{read_question_store, Question};

use crate::workspace::{CliError, CliResult, StageRun};
use crate::Ctx;

pub const QUESTIONS: &str = "questions.tsv";
pub const INGEST_SUMMARY: &str = "ingest_summary.tsv";
pub const CORPUS: &str = "corpus.txt";
pub const VOCAB: &str = "vocab.tsv";
pub const COOCCUR: &str = "cooccur.tsv";
pub const EMBEDDINGS: &str = "embeddings.txt";
pub const EMBEDDING_LOSS: &str = "embedding_loss.tsv";
pub const FEATURES: &str = "features.tsv";
pub const KEYWORD_FEATURES: &str = "keyword_features.tsv";
pub const MODEL: &str = "model.json";
pub const CV_SUMMARY: &str = "cv_summary.tsv";
pub const TRANSFER_SUMMARY: &str = "transfer_summary.tsv";
pub const PREDICTIONS: &str = "predictions.tsv";
pub const BASELINE_SUMMARY: &str = "baseline_summary.tsv";
pub const ASSOCIATION: &str = "association.tsv";
pub const SUBSETS_SUMMARY: &str = "subsets_summary.json";
pub const SERIES: &str = "series.tsv";
pub const GROWTH_FITS: &str = "growth_fits.json";
pub const PRIORS: &str = "priors.json";
pub const FORECAST: &str = "forecast.tsv";
pub const GROWTH_COMPARISON: &str = "growth_comparison.tsv";
pub const REPORT: &str = "report.md";

/// Safe file-name form of a program name.
pub fn file_stem(program: &str) -> String {
    program
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn read_questions(run: &mut StageRun) -> CliResult<Vec<Question>> {
    let bytes = run.read_ws(QUESTIONS)?;
    read_question_store(&bytes[..], QUESTIONS).map_err(|e| run.fail(e))
}

pub fn read_features(run: &mut StageRun, rel: &str) -> CliResult<Vec<FeatureRow>> {
    let bytes = run.read_ws(rel)?;
    read_feature_matrix(&bytes[..], rel).map_err(|e| run.fail(e))
}

/// Configured programs that have questions, then any others by name.
pub fn program_order(ctx: &Ctx, questions: &[Question]) -> Vec<String> {
    let present: BTreeSet<&str> = questions.iter().map(|q| q.program.as_str()).collect();
    let mut order: Vec<String> = ctx
        .cfg
        .config
        .programs
        .iter()
        .filter(|p| present.contains(p.name.as_str()))
        .map(|p| p.name.clone())
        .collect();
    for p in present {
        if !order.iter().any(|o| o == p) {
            order.push(p.to_string());
        }
    }
    order
}

/// Labeled feature rows grouped into one dataset per program.
pub fn datasets_by_program(
    run: &StageRun,
    rows: &[FeatureRow],
    questions: &[Question],
    order: &[String],
) -> CliResult<BTreeMap<String, LabeledDataset>> {
    let program_of: BTreeMap<u64, &str> = questions.iter().map(|q| (q.id, q.program.as_str())).collect();
    let mut grouped: BTreeMap<&str, Vec<FeatureRow>> = BTreeMap::new();
    for row in rows {
        let Some(&program) = program_of.get(&row.id) else {
            return Err(CliError::Input(format!(
                "{}: question {} has features but is not in {QUESTIONS}",
                run.name(),
                row.id
            )));
        };
        grouped.entry(program).or_default().push(row.clone());
    }
    let mut out = BTreeMap::new();
    for name in order {
        let rows = grouped.remove(name.as_str()).unwrap_or_default();
        out.insert(name.clone(), LabeledDataset::from_feature_rows(name.clone(), &rows).map_err(|e| run.fail(e))?);
    }
    Ok(out)
}
