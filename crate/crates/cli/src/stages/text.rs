//! ingest, normalize, cooccur, train-embeddings, featurize.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use log::{info, warn};
use serde_json::json;

use lanlan_core::cooccur::{accumulate_sharded, build_vocab, CooccurrenceAccumulator, Vocabulary};
use lanlan_core::embed::{finalize, train, EmbeddingTable};
use lanlan_core::features::{featurize as featurize_question, keyword_counts, write_feature_matrix, FeatureRow, QuestionTokens};
use lanlan_core::ingest::{
    apply_annotations, build_questions, parse_dump, posts_for_programs, read_annotations, read_question_tsv,
    write_question_store,
};
use lanlan_core::textprep::{normalize as normalize_text, Mode};
use lanlan_core::Label;

use super::*;

pub fn ingest(
    ctx: &Ctx,
    dump: Option<PathBuf>,
    questions: Option<PathBuf>,
    annotations: Option<PathBuf>,
) -> CliResult<()> {
    let paths = &ctx.cfg.config.paths;
    let dump = ctx.input_path(&dump, &paths.dump);
    let question_tsv = ctx.input_path(&questions, &paths.questions);
    let annotations = ctx.input_path(&annotations, &paths.annotations);
    if dump.is_none() && question_tsv.is_none() {
        return Err(CliError::Input("ingest: no input; set paths.dump or paths.questions".into()));
    }
    let programs = &ctx.cfg.config.programs;
    if dump.is_some() && programs.is_empty() {
        return Err(CliError::Input("ingest: reading a dump needs the `programs` list".into()));
    }
    let mut run = ctx.stage("ingest", None, json!({}));
    let declared: Vec<&std::path::Path> = [&dump, &question_tsv, &annotations].into_iter().flatten().map(|p| p.as_path()).collect();
    run.require(&declared)?;

    let mut sources = Vec::new();
    if let Some(path) = &dump {
        let bytes = run.read(path)?;
        let parsed = parse_dump(&bytes[..]).map_err(|e| run.fail(e))?;
        info!("{} questions in dump, {} rows skipped", parsed.posts.len(), parsed.skipped_rows);
        sources.extend(posts_for_programs(&parsed.posts, programs));
    }
    if let Some(path) = &question_tsv {
        let bytes = run.read(path)?;
        sources.extend(read_question_tsv(&bytes[..], &path.display().to_string()).map_err(|e| run.fail(e))?);
    }
    // a question tagged for two programs stays with the first one
    let mut seen = HashSet::new();
    let before = sources.len();
    sources.retain(|s| seen.insert(s.id));
    if sources.len() < before {
        warn!("{} questions matched more than one program; kept the first", before - sources.len());
    }
    let mut questions = build_questions(sources);
    if let Some(path) = &annotations {
        let bytes = run.read(path)?;
        let ann = read_annotations(&bytes[..], &path.display().to_string()).map_err(|e| run.fail(e))?;
        let matched = apply_annotations(&mut questions, &ann.labels);
        if matched < ann.labels.len() {
            warn!("{} annotations refer to unknown questions", ann.labels.len() - matched);
        }
    }
    if questions.is_empty() {
        return Err(run.fail(lanlan_core::Error::EmptyCorpus));
    }

    let mut summary = String::from("program\tquestions\tproblem_reports\tsupport_requests\tunlabeled\tmonths\n");
    for program in program_order(ctx, &questions) {
        let mine: Vec<_> = questions.iter().filter(|q| q.program == program).collect();
        let count = |l: Option<Label>| mine.iter().filter(|q| q.label == l).count();
        let months = mine.iter().map(|q| q.created_month + 1).max().unwrap_or(0);
        writeln!(
            summary,
            "{program}\t{}\t{}\t{}\t{}\t{months}",
            mine.len(),
            count(Some(Label::ProblemReport)),
            count(Some(Label::SupportRequest)),
            count(None)
        )
        .unwrap();
    }
    run.write_with(QUESTIONS, |w| write_question_store(w, &questions))?;
    run.write(INGEST_SUMMARY, summary.into_bytes())?;
    run.finish()
}

/// One line of training-mode tokens per question, title first.
pub fn normalize(ctx: &Ctx, mode: &str) -> CliResult<()> {
    if mode != "training" {
        return Err(CliError::Input("normalize: the corpus is always written in training mode".into()));
    }
    let mut run = ctx.stage("normalize", None, json!({ "mode": "training" }));
    run.require(&[&ctx.ws.path(QUESTIONS)])?;
    let questions = read_questions(&mut run)?;
    let mut corpus = String::new();
    for q in &questions {
        let title = normalize_text(&q.title_text, Mode::Training);
        let body = normalize_text(&q.body_text, Mode::Training);
        let line: Vec<&str> = title.tokens.iter().chain(&body.tokens).map(String::as_str).collect();
        corpus.push_str(&line.join(" "));
        corpus.push('\n');
    }
    run.write(CORPUS, corpus.into_bytes())?;
    run.finish()
}

pub fn cooccur(ctx: &Ctx, window: Option<usize>) -> CliResult<()> {
    let mut cfg = ctx.cfg.config.cooccur.clone();
    if let Some(w) = window {
        cfg.window = w;
    }
    let shards = ctx.cfg.config.cooccur_shards;
    let mut run = ctx.stage("cooccur", None, json!({ "cooccur": cfg, "shards": shards }));
    run.require(&[&ctx.ws.path(CORPUS)])?;
    let bytes = run.read_ws(CORPUS)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::Input(format!("cooccur: {CORPUS} is not UTF-8")))?;
    let docs: Vec<Vec<&str>> = text.lines().map(|l| l.split_whitespace().collect()).collect();
    let vocab = build_vocab(docs.iter().map(Vec::as_slice), cfg.min_count).map_err(|e| run.fail(e))?;
    let acc = accumulate_sharded(&docs, &vocab, &cfg, shards, ctx.exec).map_err(|e| run.fail(e))?;
    info!("vocabulary {} words, {} nonzero pairs", vocab.len(), acc.nnz());
    run.write_with(VOCAB, |w| vocab.write_tsv(w))?;
    run.write_with(COOCCUR, |w| acc.write_tsv(w))?;
    run.finish()
}

pub fn train_embeddings(ctx: &Ctx, seed: u64, epochs: Option<usize>) -> CliResult<()> {
    let mut cfg = ctx.cfg.config.embedding.clone();
    cfg.seed = seed;
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    let cooccur_cfg = &ctx.cfg.config.cooccur;
    let mut run = ctx.stage("train-embeddings", Some(seed), json!({ "embedding": cfg }));
    run.require(&[&ctx.ws.path(VOCAB), &ctx.ws.path(COOCCUR)])?;
    let bytes = run.read_ws(VOCAB)?;
    let vocab = Vocabulary::read_tsv(&bytes[..], VOCAB).map_err(|e| run.fail(e))?;
    let bytes = run.read_ws(COOCCUR)?;
    let acc = CooccurrenceAccumulator::read_tsv(&bytes[..], &vocab, cooccur_cfg, COOCCUR).map_err(|e| run.fail(e))?;
    let (model, state) = train(&acc, &vocab, &cfg).map_err(|e| run.fail(e))?;
    let table = finalize(&model, &vocab);
    let mut log = String::from("epoch\tweighted_loss\n");
    for (i, loss) in state.epoch_losses.iter().enumerate() {
        writeln!(log, "{}\t{loss}", i + 1).unwrap();
    }
    run.write_with(EMBEDDINGS, |w| table.write_text(w))?;
    run.write(EMBEDDING_LOSS, log.into_bytes())?;
    run.finish()
}

/// Mean title and body vectors per question, plus the six keyword counts.
pub fn featurize(ctx: &Ctx) -> CliResult<()> {
    let mut run = ctx.stage("featurize", None, json!({}));
    run.require(&[&ctx.ws.path(QUESTIONS), &ctx.ws.path(EMBEDDINGS)])?;
    let questions = read_questions(&mut run)?;
    let bytes = run.read_ws(EMBEDDINGS)?;
    let table = EmbeddingTable::read_text(&bytes[..], EMBEDDINGS).map_err(|e| run.fail(e))?;
    let tokens: Vec<QuestionTokens> = questions.iter().map(|q| QuestionTokens::from_text(&q.title_text, &q.body_text)).collect();
    let featurized = ctx.exec.map(&tokens, |t| featurize_question(t, &table));

    let mut rows = Vec::new();
    let mut excluded = BTreeMap::<&str, usize>::new();
    for (q, f) in questions.iter().zip(featurized) {
        match f {
            Some(f) => rows.push(FeatureRow { id: q.id, label: q.label, values: f.values }),
            None => *excluded.entry(q.program.as_str()).or_default() += 1,
        }
    }
    for (program, n) in &excluded {
        warn!("{program}: {n} questions without known words were excluded");
    }
    let keywords: Vec<FeatureRow> = questions
        .iter()
        .zip(&tokens)
        .map(|(q, t)| FeatureRow { id: q.id, label: q.label, values: keyword_counts(t).0.iter().map(|&c| f64::from(c)).collect() })
        .collect();
    run.write_with(FEATURES, |w| write_feature_matrix(w, &rows, "e"))?;
    run.write_with(KEYWORD_FEATURES, |w| write_feature_matrix(w, &keywords, "k"))?;
    run.finish()
}
