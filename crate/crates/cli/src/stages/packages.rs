//! associate, subsets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use log::warn;
use serde_json::json;

use lanlan_core::ingest::{read_package_features, PackageFeatureTable, FEATURE_NAMES};
use lanlan_core::stats::{
    associate as associate_features, bonferroni_threshold, diagnostics, fit_feature_set, full_model_r2,
    retained_r2, subset_search, write_association_tsv, write_membership_tsv, write_subsets_tsv,
};
use lanlan_core::{Error, Label};

use super::*;

const RESPONSES: [Label; 2] = [Label::ProblemReport, Label::SupportRequest];

fn load_table(ctx: &Ctx, run: &mut StageRun, flag: &Option<PathBuf>) -> CliResult<PackageFeatureTable> {
    let Some(path) = ctx.input_path(flag, &ctx.cfg.config.paths.packages) else {
        return Err(CliError::Input(format!("{}: no package table; set paths.packages", run.name())));
    };
    run.require(&[&path])?;
    let bytes = run.read(&path)?;
    read_package_features(&bytes[..], &path.display().to_string()).map_err(|e| run.fail(e))
}

pub fn associate(ctx: &Ctx, packages: Option<PathBuf>) -> CliResult<()> {
    let cfg = &ctx.cfg.config.stats;
    let mut run = ctx.stage("associate", None, json!({ "stats": cfg }));
    let table = load_table(ctx, &mut run, &packages)?;
    let mut rows = BTreeMap::new();
    let mut diag = String::from("response\tfeature\tplot\tx\ty\n");
    for response in RESPONSES {
        rows.insert(response.as_str(), associate_features(&table, response, cfg).map_err(|e| run.fail(e))?);
        for (f, name) in FEATURE_NAMES.iter().enumerate() {
            let fit = match fit_feature_set(&table, response, &[f], cfg) {
                Ok(fit) => fit,
                Err(Error::RankDeficient { .. }) => continue,
                Err(e) => return Err(run.fail(e)),
            };
            let d = diagnostics(&fit);
            for (plot, points) in [("qq", &d.qq), ("residual_vs_fitted", &d.residual_vs_fitted)] {
                for (x, y) in points {
                    writeln!(diag, "{response}\t{name}\t{plot}\t{x}\t{y}").unwrap();
                }
            }
        }
    }
    let (pr, sr) = (&rows["problem_report"], &rows["support_request"]);
    run.write_with(ASSOCIATION, |w| write_association_tsv(w, pr, sr))?;
    run.write_json(
        "association.json",
        &json!({
            "alpha": cfg.alpha,
            "bonferroni_threshold": bonferroni_threshold(cfg.alpha, FEATURE_NAMES.len()),
            "packages": table.len(),
            "rows": rows,
        }),
    )?;
    run.write("association_diagnostics.tsv", diag.into_bytes())?;
    run.finish()
}

pub fn subsets(ctx: &Ctx, packages: Option<PathBuf>, k: Option<usize>, top: usize) -> CliResult<()> {
    let mut cfg = ctx.cfg.config.stats.clone();
    if let Some(k) = k {
        cfg.subset_k = k;
    }
    let mut run = ctx.stage("subsets", None, json!({ "stats": cfg, "top": top }));
    let table = load_table(ctx, &mut run, &packages)?;
    let mut summary = BTreeMap::new();
    for response in RESPONSES {
        let search = subset_search(&table, response, cfg.subset_k, &cfg, ctx.exec).map_err(|e| run.fail(e))?;
        // the full model has 33 parameters
        let full = match full_model_r2(&table, response, &cfg) {
            Ok(r2) => Some(r2),
            Err(Error::InsufficientData(_) | Error::RankDeficient { .. }) => {
                warn!("{response}: full model cannot be fitted on {} packages; retained R² not reported", table.len());
                None
            }
            Err(e) => return Err(run.fail(e)),
        };
        let best = search.ranked.first();
        summary.insert(
            response.as_str(),
            json!({
                "k": search.k,
                "evaluated": search.evaluated,
                "singular": search.singular,
                "best_features": best.map(|b| b.names()),
                "best_r_squared": best.map(|b| b.r_squared),
                "full_r_squared": full,
                "best_retained": best.zip(full).and_then(|(b, f)| retained_r2(b.r_squared, f).ok()),
            }),
        );
        run.write_with(&format!("subsets_{response}.tsv"), |w| write_subsets_tsv(w, &search, top, full))?;
        run.write_with(&format!("subsets_{response}_membership.tsv"), |w| write_membership_tsv(w, &search.membership(top)))?;
    }
    run.write_json(SUBSETS_SUMMARY, &summary)?;
    run.finish()
}
