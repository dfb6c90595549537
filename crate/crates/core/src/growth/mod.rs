//! Cumulative question counts over time and the five-power growth curve
//! `Y(t) = κ (1 − e^{−β (t − δ)})^5` fitted to them.

mod mcmc;
mod nls;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use mcmc::{mcmc_fit, McmcConfig};
pub use nls::{nls_fit, NlsConfig};

use crate::ingest::Question;
use crate::stats::{mann_whitney, MannWhitney};
use crate::{Error, Exec, Label, Result};

/// Monthly cumulative counts of one category for one program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulativeSeries {
    pub program: String,
    pub category: Label,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl CumulativeSeries {
    pub fn new(program: impl Into<String>, category: Label, t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let program = program.into();
        if t.len() != y.len() {
            return Err(Error::LengthMismatch { expected: t.len(), found: y.len() });
        }
        if t.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("series {program}")));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(&program, "series times must be strictly increasing"));
        }
        if y.first().is_some_and(|&v| v < 0.0) || y.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid(&program, "cumulative counts must be non-negative and non-decreasing"));
        }
        Ok(CumulativeSeries { program, category, t, y })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn prefix(&self, n: usize) -> CumulativeSeries {
        CumulativeSeries {
            program: self.program.clone(),
            category: self.category,
            t: self.t[..n].to_vec(),
            y: self.y[..n].to_vec(),
        }
    }

    pub fn last(&self) -> Option<f64> {
        self.y.last().copied()
    }
}

/// Bins a program's questions by month and accumulates those of `category`.
/// A label in `predicted` takes precedence over the question's own label;
/// questions with neither are left out. Months run from 0 to the program's
/// last question month, with empty months carrying the total forward.
pub fn build_series(
    questions: &[Question],
    predicted: Option<&BTreeMap<u64, Label>>,
    program: &str,
    category: Label,
) -> Result<CumulativeSeries> {
    let mine: Vec<&Question> = questions.iter().filter(|q| q.program == program).collect();
    let Some(last_month) = mine.iter().map(|q| q.created_month).max() else {
        return Err(Error::InsufficientData(format!("no questions for program {program}")));
    };
    let mut monthly = vec![0u64; last_month as usize + 1];
    let mut unlabeled = 0usize;
    for q in mine {
        match predicted.and_then(|p| p.get(&q.id).copied()).or(q.label) {
            Some(l) if l == category => monthly[q.created_month as usize] += 1,
            Some(_) => {}
            None => unlabeled += 1,
        }
    }
    if unlabeled > 0 {
        log::warn!("{program}: {unlabeled} questions without a label left out of the series");
    }
    let mut total = 0u64;
    let y = monthly
        .into_iter()
        .map(|c| {
            total += c;
            total as f64
        })
        .collect();
    let t = (0..=last_month).map(f64::from).collect();
    CumulativeSeries::new(program, category, t, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub kappa: f64,
    pub beta: f64,
    pub delta: f64,
}

impl GrowthParams {
    pub fn is_valid(&self) -> bool {
        self.kappa > 0.0 && self.beta > 0.0 && self.kappa.is_finite() && self.beta.is_finite() && self.delta.is_finite()
    }
}

/// `κ (1 − e^{−β (t − δ)})^5`, defined for `t > δ`.
pub fn evaluate_model(params: &GrowthParams, t: f64) -> Result<f64> {
    if t <= params.delta {
        return Err(Error::Domain(format!("t = {t} is not after delta = {}", params.delta)));
    }
    Ok(model_value(params, t))
}

pub(crate) fn model_value(p: &GrowthParams, t: f64) -> f64 {
    let u = -(-p.beta * (t - p.delta)).exp_m1();
    p.kappa * u.powi(5)
}

/// Sum of squared residuals, or a domain error if any `t ≤ δ`.
pub fn sse(params: &GrowthParams, series: &CumulativeSeries) -> Result<f64> {
    let mut total = 0.0;
    for (&t, &y) in series.t.iter().zip(&series.y) {
        let r = y - evaluate_model(params, t)?;
        total += r * r;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Nls,
    Mcmc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub params: GrowthParams,
    pub sse: f64,
    pub method: FitMethod,
    pub converged: bool,
    /// Starting point of the returned NLS run.
    pub start: Option<GrowthParams>,
    pub iterations: usize,
    /// SSE after each accepted NLS step, beginning with the start.
    pub sse_trace: Vec<f64>,
    /// Mean post-burn-in acceptance rate across MCMC chains.
    pub acceptance_rate: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormalPrior {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    pub kappa: LogNormalPrior,
    pub delta: NormalPrior,
    pub beta: GammaPrior,
}

pub const PRIOR_SD_FLOOR: f64 = 1e-6;

impl PriorSet {
    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa.sigma > 0.0
            && self.delta.sigma > 0.0
            && self.beta.shape > 0.0
            && self.beta.rate > 0.0
            && [self.kappa.mu, self.kappa.sigma, self.delta.mu, self.delta.sigma, self.beta.shape, self.beta.rate]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid priors {self:?}")))
        }
    }

    /// Prior means of κ, β and δ.
    pub fn means(&self) -> GrowthParams {
        GrowthParams {
            kappa: (self.kappa.mu + 0.5 * self.kappa.sigma * self.kappa.sigma).exp(),
            beta: self.beta.shape / self.beta.rate,
            delta: self.delta.mu,
        }
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var)
}

/// Method-of-moments priors from successful fits. Spreads are floored at
/// [`PRIOR_SD_FLOOR`] so identical samples still give a proper prior.
pub fn derive_priors(fits: &[GrowthParams]) -> Result<PriorSet> {
    if fits.len() < 3 {
        return Err(Error::InsufficientData(format!("priors need at least 3 successful fits, got {}", fits.len())));
    }
    let floor_var = PRIOR_SD_FLOOR * PRIOR_SD_FLOOR;
    let kappas: Vec<f64> = fits.iter().map(|f| f.kappa).collect();
    let (m, v) = mean_var(&kappas);
    let s2 = (1.0 + v / (m * m)).ln().max(floor_var);
    let kappa = LogNormalPrior { mu: m.ln() - 0.5 * s2, sigma: s2.sqrt() };

    let deltas: Vec<f64> = fits.iter().map(|f| f.delta).collect();
    let (m, v) = mean_var(&deltas);
    let delta = NormalPrior { mu: m, sigma: v.max(floor_var).sqrt() };

    let betas: Vec<f64> = fits.iter().map(|f| f.beta).collect();
    let (m, v) = mean_var(&betas);
    let v = v.max(floor_var);
    let beta = GammaPrior { shape: m * m / v, rate: m / v };

    let priors = PriorSet { kappa, delta, beta };
    priors.validate()?;
    Ok(priors)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthConfig {
    pub nls: NlsConfig,
    pub mcmc: McmcConfig,
}

/// NLS first; MCMC only when NLS fails to converge and priors are available.
pub fn fit_with_fallback(
    series: &CumulativeSeries,
    priors: Option<&PriorSet>,
    config: &GrowthConfig,
    seed: u64,
    exec: Exec,
) -> Result<GrowthFit> {
    let fit = nls_fit(series, &config.nls)?;
    if fit.converged {
        return Ok(fit);
    }
    match priors {
        Some(p) => {
            log::info!("{} {}: NLS did not converge, using MCMC", series.program, series.category);
            mcmc_fit(series, p, &config.mcmc, seed, exec)
        }
        None => {
            log::warn!("{} {}: NLS did not converge and no priors are available", series.program, series.category);
            Ok(fit)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub train_points: usize,
    pub observed_final: f64,
    pub fit: GrowthFit,
    /// `|κ̂ − Y_final| / Y_final × 100`.
    pub error_percent: f64,
}

/// Fits the first `⌈fraction · n⌉` points and compares the fitted asymptote
/// with the last observed cumulative count.
pub fn forecast_error(
    series: &CumulativeSeries,
    fraction: f64,
    priors: Option<&PriorSet>,
    config: &GrowthConfig,
    seed: u64,
    exec: Exec,
) -> Result<Forecast> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("train fraction must be in (0, 1], got {fraction}")));
    }
    let observed_final = series.last().unwrap_or(0.0);
    if observed_final <= 0.0 {
        return Err(Error::Domain(format!("{}: final cumulative count is zero", series.program)));
    }
    let n = ((fraction * series.len() as f64).ceil() as usize).min(series.len());
    if n < 4 {
        return Err(Error::InsufficientData(format!("training prefix has {n} points, need 4")));
    }
    let fit = fit_with_fallback(&series.prefix(n), priors, config, seed, exec)?;
    let error_percent = (fit.params.kappa - observed_final).abs() / observed_final * 100.0;
    Ok(Forecast { train_points: n, observed_final, fit, error_percent })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterComparison {
    pub parameter: String,
    pub problem_mean: f64,
    pub problem_sd: f64,
    pub support_mean: f64,
    pub support_sd: f64,
    pub test: MannWhitney,
}

/// Mann-Whitney tests of κ, β and δ between problem-report and
/// support-request fits (`W` is the problem-report U).
pub fn compare_categories(problem: &[GrowthParams], support: &[GrowthParams]) -> Result<Vec<ParameterComparison>> {
    if problem.is_empty() || support.is_empty() {
        return Err(Error::InsufficientData("both categories need fitted parameters".into()));
    }
    let getters: [(&str, fn(&GrowthParams) -> f64); 3] =
        [("kappa", |p| p.kappa), ("beta", |p| p.beta), ("delta", |p| p.delta)];
    getters
        .iter()
        .map(|(name, get)| {
            let a: Vec<f64> = problem.iter().map(get).collect();
            let b: Vec<f64> = support.iter().map(get).collect();
            let (ma, va) = mean_var(&a);
            let (mb, vb) = mean_var(&b);
            Ok(ParameterComparison {
                parameter: name.to_string(),
                problem_mean: ma,
                problem_sd: va.sqrt(),
                support_mean: mb,
                support_sd: vb.sqrt(),
                test: mann_whitney(&a, &b)?,
            })
        })
        .collect()
}

fn sd_cell(v: f64) -> String {
    if v.is_finite() { v.to_string() } else { "NA".into() }
}

/// One row per parameter: mean and SD per category, W and p.
pub fn write_comparison_tsv<W: Write>(mut w: W, rows: &[ParameterComparison]) -> Result<()> {
    writeln!(w, "parameter\tproblem_mean\tproblem_sd\tsupport_mean\tsupport_sd\tW\tp")?;
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.parameter,
            r.problem_mean,
            sd_cell(r.problem_sd),
            r.support_mean,
            sd_cell(r.support_sd),
            r.test.u_a,
            r.test.p_value
        )?;
    }
    Ok(())
}

pub fn write_series_tsv<W: Write>(mut w: W, series: &[CumulativeSeries]) -> Result<()> {
    writeln!(w, "program\tcategory\tmonth\tcumulative")?;
    for s in series {
        for (t, y) in s.t.iter().zip(&s.y) {
            writeln!(w, "{}\t{}\t{}\t{}", s.program, s.category, t, y)?;
        }
    }
    Ok(())
}

/// Reads a series file; series come back ordered by (program, category).
pub fn read_series_tsv<R: BufRead>(r: R, source: &str) -> Result<Vec<CumulativeSeries>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.ok_or_else(|| Error::invalid(source, "missing header"))?;
    if header.split('\t').collect::<Vec<_>>() != ["program", "category", "month", "cumulative"] {
        return Err(Error::invalid(format!("{source}:1"), "expected header program, category, month, cumulative"));
    }
    let mut grouped: BTreeMap<(String, Label), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let loc = || format!("{source}:{}", i + 2);
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 4 {
            return Err(Error::invalid(loc(), "expected 4 columns"));
        }
        let category: Label = cells[1].parse().map_err(|_| Error::invalid(loc(), "bad category"))?;
        let t: f64 = cells[2].parse().map_err(|_| Error::invalid(loc(), "bad month"))?;
        let y: f64 = cells[3].parse().map_err(|_| Error::invalid(loc(), "bad cumulative count"))?;
        let entry = grouped.entry((cells[0].to_string(), category)).or_default();
        entry.0.push(t);
        entry.1.push(y);
    }
    grouped
        .into_iter()
        .map(|((program, category), (t, y))| CumulativeSeries::new(program, category, t, y))
        .collect()
}

/// Observed and fitted values per month for plotting.
pub fn write_curve_tsv<W: Write>(mut w: W, series: &CumulativeSeries, params: &GrowthParams) -> Result<()> {
    writeln!(w, "month\tobserved\tfitted")?;
    for (&t, &y) in series.t.iter().zip(&series.y) {
        let fitted = evaluate_model(params, t).map_or_else(|_| "NA".to_string(), |v| v.to_string());
        writeln!(w, "{t}\t{y}\t{fitted}")?;
    }
    Ok(())
}

/// A series drawn from the model with multiplicative Gaussian noise of
/// relative size `noise`, made non-decreasing by least-squares monotone
/// projection and clipped at zero. Months are `0..len`.
pub fn synthetic_series(
    program: &str,
    category: Label,
    params: &GrowthParams,
    len: usize,
    noise: f64,
    seed: u64,
) -> Result<CumulativeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t: Vec<f64> = (0..len).map(|m| m as f64).collect();
    let mut raw = Vec::with_capacity(len);
    for &tm in &t {
        let z: f64 = StandardNormal.sample(&mut rng);
        raw.push(evaluate_model(params, tm)? * (1.0 + noise * z));
    }
    let y = monotone_projection(&raw).into_iter().map(|v| v.max(0.0)).collect();
    CumulativeSeries::new(program, category, t, y)
}

/// Closest non-decreasing sequence in squared error (pool adjacent
/// violators).
pub fn monotone_projection(values: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s2, n2) = blocks[blocks.len() - 1];
            let (s1, n1) = blocks[blocks.len() - 2];
            if s1 / n1 as f64 <= s2 / n2 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s1 + s2, n1 + n2);
        }
    }
    blocks.into_iter().flat_map(|(s, n)| std::iter::repeat_n(s / n as f64, n)).collect()
}
