//! train-classifier, cross-validate, transfer, predict, baseline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use lanlan_core::classify::{
    cross_validate as run_cv, evaluate_predictions, predict_score, transfer_evaluate, write_curve_tsv, ClassifierModel,
    EvalReport, LabeledDataset, Learner, LogisticConfig,
};
use lanlan_core::features::{keyword_match, QuestionTokens};
use lanlan_core::Label;

use super::*;

fn summary_line(out: &mut String, name: &str, data: &LabeledDataset, report: &EvalReport) {
    writeln!(
        out,
        "{name}\t{}\t{}\t{}\t{}\t{}\t{}",
        data.len(),
        data.count(Label::ProblemReport),
        data.count(Label::SupportRequest),
        opt(report.auroc),
        report.precision,
        report.recall
    )
    .unwrap();
}

const SUMMARY_HEADER: &str = "program\tn\tproblem_reports\tsupport_requests\tauroc\tprecision\trecall\n";

pub fn train(ctx: &Ctx, seed: u64, program: Option<String>) -> CliResult<()> {
    let learner = &ctx.cfg.config.classifier.learner;
    let mut run = ctx.stage("train-classifier", Some(seed), json!({ "learner": learner, "program": program }));
    run.require(&[&ctx.ws.path(FEATURES), &ctx.ws.path(QUESTIONS)])?;
    let rows = read_features(&mut run, FEATURES)?;
    let questions = read_questions(&mut run)?;
    let order = program_order(ctx, &questions);
    let selected: Vec<String> = match &program {
        Some(p) if order.contains(p) => vec![p.clone()],
        Some(p) => return Err(CliError::Input(format!("train-classifier: unknown program `{p}`"))),
        None => order.clone(),
    };
    let by_program = datasets_by_program(&run, &rows, &questions, &order)?;
    let samples = selected.iter().flat_map(|p| by_program[p].samples.iter().cloned()).collect();
    let data = LabeledDataset::new(selected.join("+"), samples).map_err(|e| run.fail(e))?;
    let mut model = learner.fit(&data, seed).map_err(|e| run.fail(e))?;
    model.metadata.train_sets = selected;
    model.metadata.config = Some(serde_json::to_value(learner).expect("learner serializes"));
    let text = model.to_json().map_err(|e| run.fail(e))?;
    run.write(MODEL, format!("{text}\n").into_bytes())?;
    run.finish()
}

pub fn cross_validate(ctx: &Ctx, seed: u64, folds: Option<usize>) -> CliResult<()> {
    let learner = &ctx.cfg.config.classifier.learner;
    let k = folds.unwrap_or(ctx.cfg.config.classifier.folds);
    let mut run = ctx.stage("cross-validate", Some(seed), json!({ "learner": learner, "folds": k }));
    run.require(&[&ctx.ws.path(FEATURES), &ctx.ws.path(QUESTIONS)])?;
    let rows = read_features(&mut run, FEATURES)?;
    let questions = read_questions(&mut run)?;
    let order = program_order(ctx, &questions);
    let datasets = datasets_by_program(&run, &rows, &questions, &order)?;
    let mut summary = String::from(SUMMARY_HEADER);
    for name in &order {
        let data = &datasets[name];
        let cv = run_cv(data, learner, k, seed, ctx.exec).map_err(|e| run.fail(e))?;
        summary_line(&mut summary, name, data, &cv.report);
        let stem = file_stem(name);
        run.write_json(&format!("cv/{stem}.json"), &cv)?;
        run.write_with(&format!("cv/{stem}_curves.tsv"), |w| write_curve_tsv(w, &cv.report))?;
    }
    run.write(CV_SUMMARY, summary.into_bytes())?;
    run.finish()
}

#[derive(Serialize)]
struct TransferOutput<'a> {
    #[serde(flatten)]
    report: &'a lanlan_core::classify::TransferReport,
    model: &'a ClassifierModel,
}

pub fn transfer(ctx: &Ctx, seed: u64, test: Option<String>, train: Vec<String>) -> CliResult<()> {
    let learner = &ctx.cfg.config.classifier.learner;
    let mut run = ctx.stage("transfer", Some(seed), json!({ "learner": learner, "test": test, "train": train }));
    run.require(&[&ctx.ws.path(FEATURES), &ctx.ws.path(QUESTIONS)])?;
    let rows = read_features(&mut run, FEATURES)?;
    let questions = read_questions(&mut run)?;
    let order = program_order(ctx, &questions);
    let test = match test.or_else(|| order.last().cloned()) {
        Some(t) if order.contains(&t) => t,
        Some(t) => return Err(CliError::Input(format!("transfer: unknown program `{t}`"))),
        None => return Err(CliError::Input("transfer: no programs".into())),
    };
    let train: Vec<String> = if train.is_empty() { order.iter().filter(|p| **p != test).cloned().collect() } else { train };
    if let Some(unknown) = train.iter().find(|p| !order.contains(p)) {
        return Err(CliError::Input(format!("transfer: unknown program `{unknown}`")));
    }
    let mut datasets = datasets_by_program(&run, &rows, &questions, &order)?;
    let train_sets: Vec<LabeledDataset> = train.iter().map(|p| datasets[p].clone()).collect();
    let test_set = datasets.remove(&test).expect("test program checked above");
    let (model, report) = transfer_evaluate(&train_sets, &test_set, learner, seed).map_err(|e| run.fail(e))?;
    let stem = file_stem(&test);
    run.write_json(&format!("transfer/{stem}.json"), &TransferOutput { report: &report, model: &model })?;
    run.write_with(&format!("transfer/{stem}_curves.tsv"), |w| write_curve_tsv(w, &report.report))?;
    let mut summary = String::from("train\ttest\tn_train\tn_test\tauroc\tprecision\trecall\n");
    writeln!(
        summary,
        "{}\t{test}\t{}\t{}\t{}\t{}\t{}",
        report.train_sets.join("+"),
        report.n_train,
        report.n_test,
        opt(report.report.auroc),
        report.report.precision,
        report.report.recall
    )
    .unwrap();
    run.write(TRANSFER_SUMMARY, summary.into_bytes())?;
    run.finish()
}

pub fn predict(ctx: &Ctx, model_path: Option<PathBuf>) -> CliResult<()> {
    let model_path = model_path.unwrap_or_else(|| ctx.ws.path(MODEL));
    let mut run = ctx.stage("predict", None, json!({}));
    run.require(&[&model_path, &ctx.ws.path(FEATURES)])?;
    let bytes = run.read(&model_path)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::Input(format!("predict: {} is not UTF-8", model_path.display())))?;
    let model = ClassifierModel::from_json(&text, &model_path.display().to_string()).map_err(|e| run.fail(e))?;
    let rows = read_features(&mut run, FEATURES)?;
    let mut out = String::from("question_id\tscore\tpredicted\tannotated\n");
    for row in &rows {
        let score = predict_score(&model, &row.values).map_err(|e| run.fail(e))?;
        let predicted = if score >= 0.5 { Label::ProblemReport } else { Label::SupportRequest };
        writeln!(out, "{}\t{score}\t{predicted}\t{}", row.id, row.label.map_or("?", Label::as_str)).unwrap();
    }
    run.write(PREDICTIONS, out.into_bytes())?;
    run.finish()
}

/// Keyword matching (any of the keywords anywhere) and logistic regression
/// on the six keyword counts, per program.
pub fn baseline(ctx: &Ctx, seed: u64, folds: Option<usize>) -> CliResult<()> {
    let k = folds.unwrap_or(ctx.cfg.config.classifier.folds);
    let learner = Learner::Logistic(LogisticConfig::default());
    let mut run = ctx.stage("baseline", Some(seed), json!({ "learner": learner, "folds": k }));
    run.require(&[&ctx.ws.path(KEYWORD_FEATURES), &ctx.ws.path(QUESTIONS)])?;
    let rows = read_features(&mut run, KEYWORD_FEATURES)?;
    let questions = read_questions(&mut run)?;
    let order = program_order(ctx, &questions);
    let datasets = datasets_by_program(&run, &rows, &questions, &order)?;
    let mut summary = String::from(
        "program\tn\tkeyword_precision\tkeyword_recall\tkeyword_tp\tkeyword_fp\tkeyword_tn\tkeyword_fn\tcounts_auroc\tcounts_precision\tcounts_recall\n",
    );
    let mut details = BTreeMap::new();
    for name in &order {
        let labeled: Vec<_> = questions.iter().filter(|q| &q.program == name && q.label.is_some()).collect();
        let predicted: Vec<bool> =
            labeled.iter().map(|q| keyword_match(&QuestionTokens::from_text(&q.title_text, &q.body_text))).collect();
        let truth: Vec<bool> = labeled.iter().map(|q| q.label == Some(Label::ProblemReport)).collect();
        let matched = evaluate_predictions(&predicted, &truth).map_err(|e| run.fail(e))?;
        let cv = run_cv(&datasets[name], &learner, k, seed, ctx.exec).map_err(|e| run.fail(e))?;
        let c = &matched.confusion;
        writeln!(
            summary,
            "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            labeled.len(),
            matched.precision,
            matched.recall,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            opt(cv.report.auroc),
            cv.report.precision,
            cv.report.recall
        )
        .unwrap();
        details.insert(name.clone(), json!({ "keyword_match": matched, "keyword_counts": cv.report }));
    }
    run.write(BASELINE_SUMMARY, summary.into_bytes())?;
    run.write_json("baseline.json", &details)?;
    run.finish()
}
