//! fit-growth, forecast, compare-growth.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::json;

use lanlan_core::growth::{
    build_series, compare_categories, derive_priors, evaluate_model, forecast_error, mcmc_fit, nls_fit,
    read_series_tsv, write_comparison_tsv, write_series_tsv, FitMethod, GrowthFit, PriorSet,
};
use lanlan_core::stats::paired_t_and_wilcoxon;
use lanlan_core::{Error, Label};

use super::*;

const CATEGORIES: [Label; 2] = [Label::ProblemReport, Label::SupportRequest];

#[derive(Serialize, Deserialize)]
struct FitRecord {
    program: String,
    category: Label,
    months: usize,
    fit: GrowthFit,
}

impl FitRecord {
    fn usable(&self) -> bool {
        self.fit.converged || self.fit.method == FitMethod::Mcmc
    }
}

fn series_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// `question_id -> predicted label` from predictions.tsv.
fn read_predictions(run: &mut StageRun) -> CliResult<BTreeMap<u64, Label>> {
    let bytes = run.read_ws(PREDICTIONS)?;
    let text = String::from_utf8_lossy(&bytes);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
    let (Some(id_col), Some(label_col)) =
        (header.iter().position(|h| *h == "question_id"), header.iter().position(|h| *h == "predicted"))
    else {
        return Err(CliError::Input(format!("{}: {PREDICTIONS} needs question_id and predicted columns", run.name())));
    };
    let mut out = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split('\t').collect();
        let bad = || CliError::Input(format!("{}: {PREDICTIONS}:{}: malformed row", run.name(), i + 2));
        let id: u64 = cells.get(id_col).and_then(|c| c.parse().ok()).ok_or_else(bad)?;
        let label: Label = cells.get(label_col).and_then(|c| c.parse().ok()).ok_or_else(bad)?;
        out.insert(id, label);
    }
    Ok(out)
}

pub fn fit(ctx: &Ctx, seed: u64) -> CliResult<()> {
    let settings = &ctx.cfg.config.growth;
    let mut run = ctx.stage(
        "fit-growth",
        Some(seed),
        json!({ "nls": settings.nls, "mcmc": settings.mcmc, "use_predictions": settings.use_predictions }),
    );
    let mut declared = vec![ctx.ws.path(QUESTIONS)];
    if settings.use_predictions {
        declared.push(ctx.ws.path(PREDICTIONS));
    }
    run.require(&declared.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    let questions = read_questions(&mut run)?;
    let predicted = if settings.use_predictions {
        // annotations win; predictions only fill the gaps
        let mut p = read_predictions(&mut run)?;
        for q in questions.iter().filter(|q| q.label.is_some()) {
            p.remove(&q.id);
        }
        Some(p)
    } else {
        None
    };

    let mut series = Vec::new();
    for program in program_order(ctx, &questions) {
        for category in CATEGORIES {
            series.push(build_series(&questions, predicted.as_ref(), &program, category).map_err(|e| run.fail(e))?);
        }
    }
    let nls: Vec<GrowthFit> = ctx
        .exec
        .map(&series, |s| nls_fit(s, &settings.nls))
        .into_iter()
        .collect::<lanlan_core::Result<_>>()
        .map_err(|e| run.fail(e))?;
    let converged: Vec<_> = nls.iter().filter(|f| f.converged).map(|f| f.params).collect();
    let priors = match derive_priors(&converged) {
        Ok(p) => Some(p),
        Err(Error::InsufficientData(msg)) => {
            warn!("no priors for MCMC fallback: {msg}");
            None
        }
        Err(e) => return Err(run.fail(e)),
    };
    let mut records = Vec::new();
    for (i, (s, fit)) in series.iter().zip(nls).enumerate() {
        let fit = match (&priors, fit.converged) {
            (Some(p), false) => mcmc_fit(s, p, &settings.mcmc, series_seed(seed, i), ctx.exec).map_err(|e| run.fail(e))?,
            _ => fit,
        };
        records.push(FitRecord { program: s.program.clone(), category: s.category, months: s.len(), fit });
    }

    let mut curves = String::from("program\tcategory\tmonth\tobserved\tfitted\n");
    for (s, r) in series.iter().zip(&records) {
        for (&t, &y) in s.t.iter().zip(&s.y) {
            let fitted = evaluate_model(&r.fit.params, t).ok();
            writeln!(curves, "{}\t{}\t{t}\t{y}\t{}", s.program, s.category, opt(fitted)).unwrap();
        }
    }
    run.write_with(SERIES, |w| write_series_tsv(w, &series))?;
    run.write_json(GROWTH_FITS, &records)?;
    run.write_json(PRIORS, &priors)?;
    run.write("growth_curves.tsv", curves.into_bytes())?;
    run.finish()
}

pub fn forecast(ctx: &Ctx, seed: u64, fraction: Option<f64>) -> CliResult<()> {
    let settings = &ctx.cfg.config.growth;
    let fraction = fraction.unwrap_or(settings.train_fraction);
    let mut run = ctx.stage(
        "forecast",
        Some(seed),
        json!({ "nls": settings.nls, "mcmc": settings.mcmc, "train_fraction": fraction }),
    );
    run.require(&[&ctx.ws.path(SERIES), &ctx.ws.path(PRIORS)])?;
    let bytes = run.read_ws(SERIES)?;
    let series = read_series_tsv(&bytes[..], SERIES).map_err(|e| run.fail(e))?;
    let bytes = run.read_ws(PRIORS)?;
    let priors: Option<PriorSet> = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Input(format!("forecast: invalid {PRIORS}: {e}")))?;
    let model = settings.model();
    let mut out = String::from(
        "program\tcategory\ttrain_points\tobserved_final\tkappa\terror_percent\tmethod\tconverged\tnote\n",
    );
    for (i, s) in series.iter().enumerate() {
        match forecast_error(s, fraction, priors.as_ref(), &model, series_seed(seed, i), ctx.exec) {
            Ok(f) => writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t",
                s.program,
                s.category,
                f.train_points,
                f.observed_final,
                f.fit.params.kappa,
                f.error_percent,
                method_name(f.fit.method),
                f.fit.converged
            )
            .unwrap(),
            Err(e @ (Error::Domain(_) | Error::InsufficientData(_))) => {
                warn!("{} {}: no forecast: {e}", s.program, s.category);
                writeln!(out, "{}\t{}\tNA\t{}\tNA\tNA\tNA\tfalse\t{e}", s.program, s.category, opt(s.last())).unwrap();
            }
            Err(e) => return Err(run.fail(e)),
        }
    }
    run.write(FORECAST, out.into_bytes())?;
    run.finish()
}

fn method_name(m: FitMethod) -> &'static str {
    match m {
        FitMethod::Nls => "nls",
        FitMethod::Mcmc => "mcmc",
    }
}

/// Area under a cumulative curve scaled by its final value, averaged over
/// the first `months` points (trapezoid rule).
fn normalized_area(y: &[f64], months: usize) -> Option<f64> {
    let y = &y[..months.min(y.len())];
    let last = *y.last()?;
    if y.len() < 2 || last <= 0.0 {
        return None;
    }
    let sum: f64 = y.windows(2).map(|w| (w[0] + w[1]) / 2.0).sum();
    Some(sum / last / (y.len() - 1) as f64)
}

pub fn compare(ctx: &Ctx, reference: Option<PathBuf>) -> CliResult<()> {
    let reference = ctx.input_path(&reference, &ctx.cfg.config.paths.reference_series);
    let mut run = ctx.stage("compare-growth", None, json!({}));
    let mut declared = vec![ctx.ws.path(GROWTH_FITS), ctx.ws.path(SERIES)];
    declared.extend(reference.clone());
    run.require(&declared.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    let bytes = run.read_ws(GROWTH_FITS)?;
    let records: Vec<FitRecord> =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("compare-growth: invalid {GROWTH_FITS}: {e}")))?;
    let bytes = run.read_ws(SERIES)?;
    let observed = read_series_tsv(&bytes[..], SERIES).map_err(|e| run.fail(e))?;

    let params = |c: Label| -> Vec<_> {
        records.iter().filter(|r| r.category == c && r.usable()).map(|r| r.fit.params).collect()
    };
    let skipped = records.iter().filter(|r| !r.usable()).count();
    if skipped > 0 {
        warn!("{skipped} unconverged fits left out of the comparison");
    }
    let rows = compare_categories(&params(Label::ProblemReport), &params(Label::SupportRequest)).map_err(|e| run.fail(e))?;

    let mut area = serde_json::Value::Null;
    if let Some(path) = &reference {
        let bytes = run.read(path)?;
        let refs = read_series_tsv(&bytes[..], &path.display().to_string()).map_err(|e| run.fail(e))?;
        let mut table = String::from("program\tmonths\tforum_area\treference_area\n");
        let (mut forum, mut other, mut programs) = (Vec::new(), Vec::new(), Vec::new());
        for r in refs.iter().filter(|r| r.category == Label::ProblemReport) {
            let Some(s) = observed.iter().find(|s| s.program == r.program && s.category == Label::ProblemReport) else {
                warn!("reference series for unknown program {}", r.program);
                continue;
            };
            let months = s.len().min(r.len());
            if let (Some(a), Some(b)) = (normalized_area(&s.y, months), normalized_area(&r.y, months)) {
                writeln!(table, "{}\t{months}\t{a}\t{b}", r.program).unwrap();
                programs.push(r.program.clone());
                forum.push(a);
                other.push(b);
            }
        }
        let tests = if programs.len() >= 2 {
            Some(paired_t_and_wilcoxon(&forum, &other).map_err(|e| run.fail(e))?)
        } else {
            warn!("paired area tests need at least two programs with reference series");
            None
        };
        run.write("growth_area.tsv", table.into_bytes())?;
        area = json!({ "programs": programs, "forum": forum, "reference": other, "tests": tests });
    }
    run.write_with(GROWTH_COMPARISON, |w| write_comparison_tsv(w, &rows))?;
    run.write_json("growth_comparison.json", &json!({ "parameters": rows, "paired_area": area }))?;
    run.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_of_a_step_and_a_ramp() {
        assert_eq!(normalized_area(&[1.0, 1.0, 1.0], 3), Some(1.0));
        assert_eq!(normalized_area(&[0.0, 1.0, 2.0], 3), Some(0.5));
        assert_eq!(normalized_area(&[0.0, 0.0], 2), None);
        assert_eq!(normalized_area(&[0.0, 2.0, 4.0, 8.0], 3), Some(0.5));
    }

    #[test]
    fn series_seeds_differ() {
        assert_ne!(series_seed(7, 0), series_seed(7, 1));
        assert_eq!(series_seed(7, 3), series_seed(7, 3));
    }
}
