//! Association of package properties with question counts, and the rank
//! tests used to compare growth-curve parameters.

mod ols;
pub mod special;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use ols::{diagnostics, ols_fit, Design, Diagnostics, RegressionResult};
pub use rank_tests::{mann_whitney, paired_t_and_wilcoxon, MannWhitney, PMethod, PairedTests, MW_EXACT_MAX, WILCOXON_EXACT_MAX};

use crate::ingest::{PackageFeatureTable, COVARIATE_NAMES, FEATURE_NAMES};
use crate::{Error, Exec, Label, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSize {
    /// The feature's t-statistic.
    #[default]
    TStatistic,
    /// Coefficient scaled by `sd(feature) / sd(response)`.
    StandardizedCoefficient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociationConfig {
    pub alpha: f64,
    /// Apply `log10(x + 1)` to the covariates as well as the response.
    pub log_covariates: bool,
    pub effect_size: EffectSize,
    pub subset_k: usize,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig { alpha: 0.05, log_covariates: false, effect_size: EffectSize::TStatistic, subset_k: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociationRow {
    pub feature: String,
    pub response: Label,
    pub coefficient: Option<f64>,
    pub p_value: Option<f64>,
    pub effect_size: Option<f64>,
    pub significant: bool,
    /// Columns reported as linearly dependent, when the fit failed.
    pub rank_deficient: Option<Vec<String>>,
}

pub fn log10p1(v: f64) -> f64 {
    (v + 1.0).log10()
}

fn response_vector(table: &PackageFeatureTable, response: Label) -> Vec<f64> {
    table.response(response).iter().map(|&v| log10p1(v)).collect()
}

fn covariate_design(table: &PackageFeatureTable, config: &AssociationConfig) -> Design {
    let mut d = Design::with_intercept(table.len());
    for (name, col) in COVARIATE_NAMES.iter().zip(&table.covariates) {
        let col = if config.log_covariates { col.iter().map(|&v| log10p1(v)).collect() } else { col.clone() };
        d.push(*name, col);
    }
    d
}

/// Design `[intercept, features..., covariates...]`.
pub fn feature_design(table: &PackageFeatureTable, features: &[usize], config: &AssociationConfig) -> Design {
    let covariates = covariate_design(table, config);
    let mut d = Design::with_intercept(table.len());
    for &f in features {
        d.push(FEATURE_NAMES[f], table.features[f].clone());
    }
    for (name, col) in covariates.names.into_iter().zip(covariates.columns).skip(1) {
        d.push(name, col);
    }
    d
}

pub fn fit_feature_set(
    table: &PackageFeatureTable,
    response: Label,
    features: &[usize],
    config: &AssociationConfig,
) -> Result<RegressionResult> {
    ols_fit(&feature_design(table, features, config), &response_vector(table, response))
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// One model per feature with the three covariates; rows come back in the
/// canonical feature order with Bonferroni flags set over all 29.
pub fn associate(table: &PackageFeatureTable, response: Label, config: &AssociationConfig) -> Result<Vec<AssociationRow>> {
    let y = response_vector(table, response);
    let mut rows = Vec::with_capacity(FEATURE_NAMES.len());
    for (f, name) in FEATURE_NAMES.iter().enumerate() {
        let row = match fit_feature_set(table, response, &[f], config) {
            Ok(fit) => {
                let t = fit.t_values[1];
                let effect = match config.effect_size {
                    EffectSize::TStatistic => t,
                    EffectSize::StandardizedCoefficient => {
                        Some(fit.coefficients[1] * sd(&table.features[f]) / sd(&y)).filter(|v| v.is_finite())
                    }
                };
                AssociationRow {
                    feature: name.to_string(),
                    response,
                    coefficient: Some(fit.coefficients[1]),
                    p_value: fit.p_values[1],
                    effect_size: effect,
                    significant: false,
                    rank_deficient: None,
                }
            }
            Err(Error::RankDeficient { columns }) => {
                log::warn!("{name}: rank-deficient design ({})", columns.join(", "));
                AssociationRow {
                    feature: name.to_string(),
                    response,
                    coefficient: None,
                    p_value: None,
                    effect_size: None,
                    significant: false,
                    rank_deficient: Some(columns),
                }
            }
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    bonferroni(&mut rows, config.alpha);
    Ok(rows)
}

pub fn bonferroni_threshold(alpha: f64, m: usize) -> f64 {
    alpha / m as f64
}

/// Flags `p < alpha / m` for each p-value.
pub fn bonferroni_flags(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let threshold = bonferroni_threshold(alpha, p_values.len());
    p_values.iter().map(|&p| p < threshold).collect()
}

/// Sets `significant` on every row, with `m` the number of rows. Rows without
/// a p-value are never significant.
pub fn bonferroni(rows: &mut [AssociationRow], alpha: f64) {
    let threshold = bonferroni_threshold(alpha, rows.len());
    for row in rows {
        row.significant = row.p_value.is_some_and(|p| p < threshold);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    /// Indices into the canonical feature list, ascending.
    pub features: Vec<usize>,
    pub r_squared: f64,
}

impl SubsetResult {
    pub fn names(&self) -> Vec<&'static str> {
        self.features.iter().map(|&f| FEATURE_NAMES[f]).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetSearch {
    pub response: Label,
    pub k: usize,
    pub evaluated: usize,
    pub singular: usize,
    /// Best first: R² descending, ties by feature indices.
    pub ranked: Vec<SubsetResult>,
}

impl SubsetSearch {
    /// How often each feature appears in the best `top` subsets, in
    /// canonical feature order.
    pub fn membership(&self, top: usize) -> Vec<(&'static str, usize)> {
        let mut counts = vec![0usize; FEATURE_NAMES.len()];
        for s in self.ranked.iter().take(top) {
            for &f in &s.features {
                counts[f] += 1;
            }
        }
        FEATURE_NAMES.iter().copied().zip(counts).collect()
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Fits every `k`-subset of the 29 features (plus intercept and covariates)
/// and ranks them by multiple R².
pub fn subset_search(
    table: &PackageFeatureTable,
    response: Label,
    k: usize,
    config: &AssociationConfig,
    exec: Exec,
) -> Result<SubsetSearch> {
    if k == 0 || k > FEATURE_NAMES.len() {
        return Err(Error::Config(format!("subset size must be in 1..={}, got {k}", FEATURE_NAMES.len())));
    }
    let p = 1 + k + COVARIATE_NAMES.len();
    if table.len() <= p {
        return Err(Error::InsufficientData(format!("{} packages for {p} parameters", table.len())));
    }
    let subsets = combinations(FEATURE_NAMES.len(), k);
    let fits = exec.map(&subsets, |s| match fit_feature_set(table, response, s, config) {
        Ok(fit) => Ok(Some(fit.r_squared)),
        Err(Error::RankDeficient { .. }) => Ok(None),
        Err(e) => Err(e),
    });
    let evaluated = subsets.len();
    let mut singular = 0;
    let mut ranked = Vec::with_capacity(evaluated);
    for (features, fit) in subsets.into_iter().zip(fits) {
        match fit? {
            Some(r_squared) => ranked.push(SubsetResult { features, r_squared }),
            None => singular += 1,
        }
    }
    if singular > 0 {
        log::warn!("{singular} of {evaluated} subsets were rank-deficient and skipped");
    }
    ranked.sort_by(|a, b| b.r_squared.total_cmp(&a.r_squared).then_with(|| a.features.cmp(&b.features)));
    Ok(SubsetSearch { response, k, evaluated, singular, ranked })
}

/// `R²(subset) / R²(full)`.
pub fn retained_r2(subset_r2: f64, full_r2: f64) -> Result<f64> {
    if full_r2 <= 0.0 {
        return Err(Error::Domain("full model explains no variance".into()));
    }
    Ok(subset_r2 / full_r2)
}

/// R² of the model with all 29 features and the covariates.
pub fn full_model_r2(table: &PackageFeatureTable, response: Label, config: &AssociationConfig) -> Result<f64> {
    let all: Vec<usize> = (0..FEATURE_NAMES.len()).collect();
    Ok(fit_feature_set(table, response, &all, config)?.r_squared)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// One line per feature with p, effect size and flag
/// for each response.
pub fn write_association_tsv<W: Write>(mut w: W, problem: &[AssociationRow], support: &[AssociationRow]) -> Result<()> {
    writeln!(w, "feature\tpr_p\tpr_effect_size\tpr_significant\tsr_p\tsr_effect_size\tsr_significant")?;
    for (pr, sr) in problem.iter().zip(support) {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            pr.feature,
            opt(pr.p_value),
            opt(pr.effect_size),
            pr.significant,
            opt(sr.p_value),
            opt(sr.effect_size),
            sr.significant
        )?;
    }
    Ok(())
}

pub fn write_subsets_tsv<W: Write>(mut w: W, search: &SubsetSearch, top: usize, full_r2: Option<f64>) -> Result<()> {
    write!(w, "rank")?;
    for i in 1..=search.k {
        write!(w, "\tfeature{i}")?;
    }
    writeln!(w, "\tr_squared\tretained")?;
    for (rank, s) in search.ranked.iter().take(top).enumerate() {
        write!(w, "{}", rank + 1)?;
        for name in s.names() {
            write!(w, "\t{name}")?;
        }
        let retained = full_r2.and_then(|f| retained_r2(s.r_squared, f).ok());
        writeln!(w, "\t{}\t{}", s.r_squared, opt(retained))?;
    }
    Ok(())
}

pub fn write_membership_tsv<W: Write>(mut w: W, membership: &[(&str, usize)]) -> Result<()> {
    writeln!(w, "feature\tcount")?;
    for (name, count) in membership {
        writeln!(w, "{name}\t{count}")?;
    }
    Ok(())
}

pub fn write_points_tsv<W: Write>(mut w: W, header: (&str, &str), points: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "{}\t{}", header.0, header.1)?;
    for (x, y) in points {
        writeln!(w, "{x}\t{y}")?;
    }
    Ok(())
}
