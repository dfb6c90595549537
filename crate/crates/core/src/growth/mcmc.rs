use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{model_value, CumulativeSeries, FitMethod, GrowthFit, GrowthParams, PriorSet};
use crate::{Error, Exec, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub chains: usize,
    /// Iterations per chain, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    /// Proposal scale is adapted every this many burn-in iterations.
    pub adapt_interval: usize,
    /// Multiplies the log-likelihood; 0 samples the prior alone.
    pub likelihood_weight: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig { chains: 100, iterations: 10_000, burn_in: 2_000, adapt_interval: 100, likelihood_weight: 1.0 }
    }
}

const TARGET_LOW: f64 = 0.25;
const TARGET_HIGH: f64 = 0.40;
const MIN_ACCEPTANCE: f64 = 0.01;

/// Sampler state: (ln κ, δ, ln β, ln σ).
type State = [f64; 4];

struct Target<'a> {
    series: &'a CumulativeSeries,
    priors: &'a PriorSet,
    weight: f64,
    t_min: f64,
    ln_sigma_bounds: (f64, f64),
}

impl Target<'_> {
    fn log_posterior(&self, s: &State) -> f64 {
        let [lk, delta, lb, ls] = *s;
        if ls < self.ln_sigma_bounds.0 || ls > self.ln_sigma_bounds.1 {
            return f64::NEG_INFINITY;
        }
        let pk = self.priors.kappa;
        let pd = self.priors.delta;
        let pb = self.priors.beta;
        let beta = lb.exp();
        // densities of ln κ and ln β include the change-of-variables term
        let mut lp = -0.5 * ((lk - pk.mu) / pk.sigma).powi(2) - 0.5 * ((delta - pd.mu) / pd.sigma).powi(2)
            + pb.shape * lb
            - pb.rate * beta;
        if self.weight != 0.0 {
            if delta >= self.t_min {
                return f64::NEG_INFINITY;
            }
            let p = GrowthParams { kappa: lk.exp(), beta, delta };
            let inv_var = (-2.0 * ls).exp();
            let sse: f64 = self.series.t.iter().zip(&self.series.y).map(|(&t, &y)| (y - model_value(&p, t)).powi(2)).sum();
            lp += self.weight * (-0.5 * sse * inv_var - self.series.len() as f64 * ls);
        }
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }
}

struct ChainSummary {
    mean: GrowthParams,
    acceptance: f64,
}

fn run_chain(target: &Target, start: State, step: State, cfg: &McmcConfig, seed: u64, chain: usize) -> ChainSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    let mut state = start;
    // jitter the start so chains are not identical
    for _ in 0..100 {
        let mut cand = start;
        for k in 0..4 {
            cand[k] += step[k] * rng.sample::<f64, _>(StandardNormal);
        }
        if target.log_posterior(&cand).is_finite() {
            state = cand;
            break;
        }
    }
    let mut lp = target.log_posterior(&state);
    let mut scale = 1.0;
    let mut window_accepts = 0usize;
    let mut accepted = 0usize;
    let mut sums = [0.0f64; 3];
    for it in 0..cfg.iterations {
        let mut cand = state;
        for k in 0..4 {
            cand[k] += scale * step[k] * rng.sample::<f64, _>(StandardNormal);
        }
        let cand_lp = target.log_posterior(&cand);
        let u: f64 = rng.random();
        let accept = cand_lp.is_finite() && u.ln() < cand_lp - lp;
        if accept {
            state = cand;
            lp = cand_lp;
        }
        if it < cfg.burn_in {
            window_accepts += usize::from(accept);
            if (it + 1) % cfg.adapt_interval == 0 {
                let rate = window_accepts as f64 / cfg.adapt_interval as f64;
                if rate < TARGET_LOW {
                    scale *= 0.7;
                } else if rate > TARGET_HIGH {
                    scale *= 1.4;
                }
                window_accepts = 0;
            }
        } else {
            accepted += usize::from(accept);
            sums[0] += state[0].exp();
            sums[1] += state[2].exp();
            sums[2] += state[1];
        }
    }
    let kept = (cfg.iterations - cfg.burn_in) as f64;
    ChainSummary {
        mean: GrowthParams { kappa: sums[0] / kept, beta: sums[1] / kept, delta: sums[2] / kept },
        acceptance: accepted as f64 / kept,
    }
}

/// Random-walk Metropolis-Hastings on (ln κ, δ, ln β, ln σ) with a Gaussian
/// likelihood. The estimate is the mean over chains of each chain's
/// post-burn-in mean. Each chain draws from its own stream of the seeded
/// generator, so results do not depend on scheduling.
pub fn mcmc_fit(
    series: &CumulativeSeries,
    priors: &PriorSet,
    config: &McmcConfig,
    seed: u64,
    exec: Exec,
) -> Result<GrowthFit> {
    priors.validate()?;
    if config.chains == 0 || config.burn_in >= config.iterations || config.adapt_interval == 0 {
        return Err(Error::Config("MCMC needs chains > 0, burn_in < iterations and adapt_interval > 0".into()));
    }
    if !(config.likelihood_weight >= 0.0 && config.likelihood_weight.is_finite()) {
        return Err(Error::Config("likelihood_weight must be finite and non-negative".into()));
    }
    if series.is_empty() {
        return Err(Error::InsufficientData(format!("{}: empty series", series.program)));
    }
    let t_min = series.t[0];
    let y_scale = series.y.iter().copied().fold(0.0, f64::max) + 1.0;
    let ln_sigma_bounds = ((1e-6 * y_scale).ln(), (10.0 * y_scale).ln());
    let target = Target { series, priors, weight: config.likelihood_weight, t_min, ln_sigma_bounds };

    let mut delta0 = priors.delta.mu;
    if config.likelihood_weight != 0.0 && delta0 >= t_min {
        delta0 = t_min - priors.delta.sigma.max(1e-3);
    }
    let center = GrowthParams { kappa: priors.kappa.mu.exp(), beta: priors.beta.shape / priors.beta.rate, delta: delta0 };
    let resid_sd = if delta0 < t_min {
        let sse: f64 = series.t.iter().zip(&series.y).map(|(&t, &y)| (y - model_value(&center, t)).powi(2)).sum();
        (sse / series.len() as f64).sqrt()
    } else {
        0.1 * y_scale
    };
    let ln_sigma0 = resid_sd.max(0.01 * y_scale).ln().clamp(ln_sigma_bounds.0, ln_sigma_bounds.1);
    let start: State = [priors.kappa.mu, delta0, center.beta.ln(), ln_sigma0];
    let step: State = [priors.kappa.sigma / 10.0, priors.delta.sigma / 10.0, 0.1 / priors.beta.shape.sqrt(), 0.1];

    let chains = exec.map_range(config.chains, |c| run_chain(&target, start, step, config, seed, c));
    let n = chains.len() as f64;
    let mut params = GrowthParams { kappa: 0.0, beta: 0.0, delta: 0.0 };
    let mut acceptance = 0.0;
    for c in &chains {
        params.kappa += c.mean.kappa / n;
        params.beta += c.mean.beta / n;
        params.delta += c.mean.delta / n;
        acceptance += c.acceptance / n;
    }
    let flagged = acceptance < MIN_ACCEPTANCE;
    if flagged {
        log::warn!("{} {}: MCMC acceptance rate {acceptance:.4} is below 1%", series.program, series.category);
    }
    let sse = if params.delta < t_min {
        series.t.iter().zip(&series.y).map(|(&t, &y)| (y - model_value(&params, t)).powi(2)).sum()
    } else {
        f64::INFINITY
    };
    Ok(GrowthFit {
        params,
        sse,
        method: FitMethod::Mcmc,
        converged: !flagged,
        start: None,
        iterations: config.iterations,
        sse_trace: Vec::new(),
        acceptance_rate: Some(acceptance),
        flagged,
    })
}
