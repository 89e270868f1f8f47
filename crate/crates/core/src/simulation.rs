//! Exact Gaussian simulation by the Durbin–Levinson innovations recursion and the Monte Carlo
//! harness built on it.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{Result, SeaperError};
use crate::estimation::{fit, FitResult, SearchConfig};
use crate::likelihood::{method_loglik, Method, ModelOrder};
use crate::semiparametric::{default_bandwidth, gph_pole_search};
use crate::spectral_models::{acv, GarmaParams};

/// Precomputed Durbin–Levinson partial autocorrelations and innovation variances for a model
/// and length, so repeated draws skip the autocovariance work.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: GarmaParams,
    n: usize,
    kappa: Vec<f64>,
    sd: Vec<f64>,
}

impl Simulator {
    pub fn new(params: &GarmaParams, n: usize) -> Result<Self> {
        params.validate()?;
        if n == 0 {
            return Err(SeaperError::InputShape("series length must be positive".into()));
        }
        let gamma = acv(params, n)?.gamma;
        let mut kappa = vec![0.0; n];
        let mut var = vec![0.0; n];
        var[0] = gamma[0];
        if !(var[0] > 0.0) {
            return Err(SeaperError::NumericFailure("non-positive variance at lag 0".into()));
        }
        let mut phi = vec![0.0; n];
        let mut prev = vec![0.0; n];
        for t in 1..n {
            let mut acc = gamma[t];
            for j in 1..t {
                acc -= prev[j] * gamma[t - j];
            }
            let k = acc / var[t - 1];
            phi[t] = k;
            for j in 1..t {
                phi[j] = prev[j] - k * prev[t - j];
            }
            var[t] = var[t - 1] * (1.0 - k * k);
            if !(var[t] > 0.0) || k.abs() >= 1.0 {
                return Err(SeaperError::NumericFailure(format!(
                    "autocovariance matrix is not positive definite at lag {t}"
                )));
            }
            kappa[t] = k;
            prev[1..=t].copy_from_slice(&phi[1..=t]);
        }
        Ok(Simulator { params: *params, n, kappa, sd: var.iter().map(|v| v.sqrt()).collect() })
    }

    pub fn params(&self) -> &GarmaParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// One draw from the stream seeded by `seed`.
    pub fn draw(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let e: Vec<f64> = (0..self.n).map(|_| StandardNormal.sample(&mut rng)).collect();
        self.filter(&e)
    }

    /// Maps unit innovations to a series with the target autocovariance.
    pub fn filter(&self, e: &[f64]) -> Vec<f64> {
        let n = self.n.min(e.len());
        let mut x = vec![0.0; n];
        let mut phi = vec![0.0; n];
        let mut prev = vec![0.0; n];
        if n == 0 {
            return x;
        }
        x[0] = self.sd[0] * e[0];
        for t in 1..n {
            let k = self.kappa[t];
            phi[t] = k;
            for j in 1..t {
                phi[j] = prev[j] - k * prev[t - j];
            }
            let mut pred = 0.0;
            for j in 1..=t {
                pred += phi[j] * x[t - j];
            }
            x[t] = pred + self.sd[t] * e[t];
            prev[1..=t].copy_from_slice(&phi[1..=t]);
        }
        x
    }
}

/// Exact zero-mean Gaussian draw of length `n` from the model.
pub fn simulate(params: &GarmaParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(Simulator::new(params, n)?.draw(seed))
}

/// Estimators available to the Monte Carlo harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Demodulated,
    Whittle,
    Gph,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Demodulated => "demodulated",
            Estimator::Whittle => "whittle",
            Estimator::Gph => "gph",
        }
    }
}

/// Monte Carlo study design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub params_true: GarmaParams,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_order")]
    pub order: ModelOrder,
    /// GPH bandwidth; defaults to `⌊N/8⌋`.
    #[serde(default)]
    pub gph_m: Option<usize>,
    #[serde(default)]
    pub xi_min: Option<f64>,
    #[serde(default)]
    pub xi_max: Option<f64>,
    /// Fix ξ at its true value instead of searching.
    #[serde(default)]
    pub known_pole: bool,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_order() -> ModelOrder {
    ModelOrder { p: 0, q: 0 }
}

impl McConfig {
    pub fn new(params_true: GarmaParams, n: usize, replications: usize, seed: u64, estimators: Vec<Estimator>) -> Self {
        McConfig {
            params_true,
            n,
            replications,
            seed,
            estimators,
            alpha: default_alpha(),
            order: default_order(),
            gph_m: None,
            xi_min: None,
            xi_max: None,
            known_pole: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params_true.validate()?;
        if self.replications == 0 {
            return Err(SeaperError::domain("replications", "must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(SeaperError::Config("no estimators requested".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SeaperError::domain("alpha", format!("{} not in (0, 1)", self.alpha)));
        }
        Ok(())
    }

    fn search(&self) -> SearchConfig {
        SearchConfig {
            xi_min: self.xi_min,
            xi_max: self.xi_max,
            fix_xi: self.known_pole.then_some(self.params_true.xi),
            alpha: self.alpha,
        }
    }
}

/// One estimate from one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRow {
    pub rep: usize,
    pub estimator: Estimator,
    pub xi_hat: Option<f64>,
    pub delta_hat: Option<f64>,
    pub phi_hat: Option<f64>,
    pub theta_hat: Option<f64>,
    pub sigma2_hat: Option<f64>,
    pub loglik: Option<f64>,
    pub ci_delta_lower: Option<f64>,
    pub ci_delta_upper: Option<f64>,
    pub ci_xi_lower: Option<f64>,
    pub ci_xi_upper: Option<f64>,
    pub ci_xi_cauchy_lower: Option<f64>,
    pub ci_xi_cauchy_upper: Option<f64>,
    pub error: Option<String>,
}

impl RepRow {
    fn blank(rep: usize, estimator: Estimator) -> Self {
        RepRow {
            rep,
            estimator,
            xi_hat: None,
            delta_hat: None,
            phi_hat: None,
            theta_hat: None,
            sigma2_hat: None,
            loglik: None,
            ci_delta_lower: None,
            ci_delta_upper: None,
            ci_xi_lower: None,
            ci_xi_upper: None,
            ci_xi_cauchy_lower: None,
            ci_xi_cauchy_upper: None,
            error: None,
        }
    }

    fn failed(rep: usize, estimator: Estimator, e: &SeaperError) -> Self {
        RepRow { error: Some(e.to_string()), ..RepRow::blank(rep, estimator) }
    }

    fn from_fit(rep: usize, estimator: Estimator, f: &FitResult) -> Self {
        let p = &f.params_hat;
        RepRow {
            rep,
            estimator,
            xi_hat: Some(p.xi),
            delta_hat: Some(p.delta),
            phi_hat: Some(p.phi),
            theta_hat: Some(p.theta),
            sigma2_hat: Some(p.sigma2_eps),
            loglik: Some(f.loglik),
            ci_delta_lower: Some(f.ci_delta.lower),
            ci_delta_upper: Some(f.ci_delta.upper),
            ci_xi_lower: Some(f.ci_xi_finite.lower),
            ci_xi_upper: Some(f.ci_xi_finite.upper),
            ci_xi_cauchy_lower: Some(f.ci_xi_cauchy.lower),
            ci_xi_cauchy_upper: Some(f.ci_xi_cauchy.upper),
            error: None,
        }
    }
}

/// Location, spread and empirical 95% interval of an estimate across replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateStats {
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    /// Monte Carlo standard error of the mean, `sd / √R`.
    pub mc_se: f64,
    pub q025: f64,
    pub q975: f64,
}

impl EstimateStats {
    fn from_values(values: &[f64], truth: f64) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut data = Data::new(values.to_vec());
        Some(EstimateStats {
            mean,
            bias: mean - truth,
            sd,
            mc_se: sd / r.sqrt(),
            q025: data.quantile(0.025),
            q975: data.quantile(0.975),
        })
    }
}

/// Summary of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub successes: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub xi: Option<EstimateStats>,
    pub delta: Option<EstimateStats>,
    pub coverage_delta: Option<f64>,
    pub coverage_xi_finite: Option<f64>,
    pub coverage_xi_cauchy: Option<f64>,
}

/// Summary of a Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub config: McConfig,
    pub estimators: Vec<EstimatorSummary>,
    /// `var(δ̂_demodulated) / var(δ̂_whittle)` when both were run.
    pub relative_efficiency_delta: Option<f64>,
    /// `var(ξ̂_demodulated) / var(ξ̂_whittle)` when both were run.
    pub relative_efficiency_xi: Option<f64>,
}

/// Summary plus the per-replication rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOutput {
    pub summary: McSummary,
    pub rows: Vec<RepRow>,
}

fn estimate(data: &[f64], rep: usize, est: Estimator, cfg: &McConfig) -> RepRow {
    let search = cfg.search();
    match est {
        Estimator::Demodulated | Estimator::Whittle => {
            let method = if est == Estimator::Demodulated { Method::Demodulated } else { Method::Whittle };
            match fit(data, method, cfg.order, &search) {
                Ok(f) => RepRow::from_fit(rep, est, &f),
                Err(e) => RepRow::failed(rep, est, &e),
            }
        }
        Estimator::Gph => {
            let m = cfg.gph_m.unwrap_or_else(|| default_bandwidth(cfg.n));
            let res = if let Some(xi) = search.fix_xi {
                crate::semiparametric::gph_estimate(data, xi, m).map(|d| (xi, d))
            } else {
                gph_pole_search(data, m, cfg.xi_min, cfg.xi_max).map(|g| (g.xi_hat, g.delta_hat))
            };
            match res {
                Ok((xi, d)) => {
                    let mut row = RepRow::blank(rep, est);
                    row.xi_hat = Some(xi);
                    row.delta_hat = Some(d);
                    row
                }
                Err(e) => RepRow::failed(rep, est, &e),
            }
        }
    }
}

fn coverage(rows: &[&RepRow], truth: f64, bounds: impl Fn(&RepRow) -> Option<(f64, f64)>) -> Option<f64> {
    let hits: Vec<bool> = rows.iter().filter_map(|r| bounds(r)).map(|(l, u)| l <= truth && truth <= u).collect();
    if hits.is_empty() {
        None
    } else {
        Some(hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64)
    }
}

fn summarise(cfg: &McConfig, rows: &[RepRow]) -> McSummary {
    let truth = &cfg.params_true;
    let mut blocks = Vec::new();
    for &est in &cfg.estimators {
        let all: Vec<&RepRow> = rows.iter().filter(|r| r.estimator == est).collect();
        let ok: Vec<&RepRow> = all.iter().copied().filter(|r| r.error.is_none()).collect();
        let xs: Vec<f64> = ok.iter().filter_map(|r| r.xi_hat).collect();
        let ds: Vec<f64> = ok.iter().filter_map(|r| r.delta_hat).collect();
        let failures = all.len() - ok.len();
        blocks.push(EstimatorSummary {
            estimator: est,
            successes: ok.len(),
            failures,
            failure_rate: failures as f64 / all.len().max(1) as f64,
            xi: EstimateStats::from_values(&xs, truth.xi),
            delta: EstimateStats::from_values(&ds, truth.delta),
            coverage_delta: coverage(&ok, truth.delta, |r| r.ci_delta_lower.zip(r.ci_delta_upper)),
            coverage_xi_finite: coverage(&ok, truth.xi, |r| r.ci_xi_lower.zip(r.ci_xi_upper)),
            coverage_xi_cauchy: coverage(&ok, truth.xi, |r| r.ci_xi_cauchy_lower.zip(r.ci_xi_cauchy_upper)),
        });
    }
    let find = |e: Estimator| blocks.iter().find(|b| b.estimator == e);
    let ratio = |get: fn(&EstimatorSummary) -> Option<EstimateStats>| -> Option<f64> {
        let d = get(find(Estimator::Demodulated)?)?;
        let w = get(find(Estimator::Whittle)?)?;
        (w.sd > 0.0).then(|| (d.sd / w.sd).powi(2))
    };
    let relative_efficiency_delta = ratio(|b| b.delta);
    let relative_efficiency_xi = ratio(|b| b.xi);
    McSummary { config: cfg.clone(), estimators: blocks, relative_efficiency_delta, relative_efficiency_xi }
}

/// Maximum tolerated share of failed fits per estimator.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// Runs the study. Replication `r` simulates from seed `seed ^ r`; results are collected in
/// replication order, so the output does not depend on the thread count.
pub fn run_mc(cfg: &McConfig) -> Result<McOutput> {
    cfg.validate()?;
    let sim = Simulator::new(&cfg.params_true, cfg.n)?;
    let rows: Vec<RepRow> = (0..cfg.replications)
        .into_par_iter()
        .flat_map_iter(|r| {
            let x = sim.draw(cfg.seed ^ r as u64);
            cfg.estimators.iter().map(|&e| estimate(&x, r, e, cfg)).collect::<Vec<_>>()
        })
        .collect();
    let summary = summarise(cfg, &rows);
    for b in &summary.estimators {
        if b.failure_rate > MAX_FAILURE_RATE {
            return Err(SeaperError::EstimationFailure(format!(
                "{} failed on {} of {} replications",
                b.estimator.name(),
                b.failures,
                b.failures + b.successes
            )));
        }
    }
    Ok(McOutput { summary, rows })
}

/// Averaged standardised likelihood slices for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCurves {
    pub method: Method,
    /// Mean over replications of `exp(ℓ(ξ) - max ℓ)` with the other parameters at the MLE.
    pub xi_curve: Vec<f64>,
    /// As `xi_curve` but with δ varying.
    pub delta_curve: Vec<f64>,
    pub replications_used: usize,
}

/// Likelihood slices through the MLE, averaged over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodSurface {
    pub xi_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub curves: Vec<MethodCurves>,
}

fn standardise(v: Vec<f64>) -> Vec<f64> {
    let mx = v.iter().cloned().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    v.into_iter().map(|x| if x.is_finite() { (x - mx).exp() } else { 0.0 }).collect()
}

/// For each replication and for the demodulated and Whittle likelihoods, fits the model and
/// evaluates the likelihood along `xi_grid` (δ, φ, θ, σ² at the MLE) and along `delta_grid`
/// (ξ, φ, θ, σ² at the MLE). Each slice is divided by its maximum and the slices are averaged.
pub fn mean_likelihood_surface(cfg: &McConfig, xi_grid: &[f64], delta_grid: &[f64]) -> Result<LikelihoodSurface> {
    cfg.validate()?;
    if xi_grid.is_empty() || delta_grid.is_empty() {
        return Err(SeaperError::Config("likelihood slices need non-empty grids".into()));
    }
    let sim = Simulator::new(&cfg.params_true, cfg.n)?;
    let methods = [Method::Demodulated, Method::Whittle];
    type Slices = Vec<Option<(Vec<f64>, Vec<f64>)>>;
    let per_rep: Vec<Slices> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let x = sim.draw(cfg.seed ^ r as u64);
            methods
                .iter()
                .map(|&m| {
                    let f = fit(&x, m, cfg.order, &cfg.search()).ok()?;
                    let p = f.params_hat;
                    let at = |q: GarmaParams| method_loglik(&x, m, &q).unwrap_or(f64::NEG_INFINITY);
                    let xs = xi_grid.iter().map(|&xi| at(GarmaParams { xi, ..p })).collect();
                    let ds = delta_grid.iter().map(|&delta| at(GarmaParams { delta, ..p })).collect();
                    Some((standardise(xs), standardise(ds)))
                })
                .collect()
        })
        .collect();
    let mut curves = Vec::new();
    for (mi, &method) in methods.iter().enumerate() {
        let mut xc = vec![0.0; xi_grid.len()];
        let mut dc = vec![0.0; delta_grid.len()];
        let mut used = 0;
        for rep in &per_rep {
            if let Some((xs, ds)) = &rep[mi] {
                used += 1;
                xc.iter_mut().zip(xs).for_each(|(a, b)| *a += b);
                dc.iter_mut().zip(ds).for_each(|(a, b)| *a += b);
            }
        }
        let failed = cfg.replications - used;
        if failed as f64 > MAX_FAILURE_RATE * cfg.replications as f64 {
            return Err(SeaperError::EstimationFailure(format!(
                "{method:?} fit failed on {failed} of {} replications",
                cfg.replications
            )));
        }
        let scale = 1.0 / used.max(1) as f64;
        xc.iter_mut().for_each(|v| *v *= scale);
        dc.iter_mut().for_each(|v| *v *= scale);
        curves.push(MethodCurves { method, xi_curve: xc, delta_curve: dc, replications_used: used });
    }
    Ok(LikelihoodSurface { xi_grid: xi_grid.to_vec(), delta_grid: delta_grid.to_vec(), curves })
}
