//! Maximum-likelihood fitting over `(ξ, δ, φ, θ)` with σ² profiled, Fisher information for δ,
//! the δ interval, the two pole intervals and BIC-based order selection.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bias_constants::{finite_sample_constants_at, FiniteSampleConstants};
use crate::demodulation::{build_grid, center, fourier_periodogram, from_transform, shifted_transform};
use crate::error::{Result, SeaperError};
use crate::likelihood::{demod_ordinates, maximize_profile, Method, ModelOrder, ProfileResult, SpectralOrdinates};
use crate::optimize::{brent_max, golden_max};
use crate::quadrature::{integrate, integrate_to_infinity_vec};
use crate::spectral_models::GarmaParams;

/// Closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Pole search settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub xi_min: Option<f64>,
    pub xi_max: Option<f64>,
    /// Known-pole mode: fixes ξ and skips the search.
    pub fix_xi: Option<f64>,
    /// Interval level: intervals have coverage `1 - alpha`.
    pub alpha: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { xi_min: None, xi_max: None, fix_xi: None, alpha: 0.05 }
    }
}

/// Optimiser summary attached to a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub stage1_points: usize,
    pub stage1_failures: usize,
    pub stage1_best: f64,
    pub stage2_best: f64,
    pub stage2_accepted: bool,
    pub inner_iterations: u64,
    pub inner_converged: bool,
    pub known_pole: bool,
    /// Set when the finite-sample pole interval could not be formed and the Cauchy interval
    /// was used in its place.
    pub finite_ci_fallback: bool,
}

/// Point estimates, likelihood, information and intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params_hat: GarmaParams,
    pub loglik: f64,
    pub method: Method,
    pub model_order: ModelOrder,
    pub fisher_dd: f64,
    pub alpha: f64,
    pub ci_delta: Interval,
    pub ci_xi_cauchy: Interval,
    pub ci_xi_finite: Interval,
    pub finite_constants: Option<FiniteSampleConstants>,
    pub bic: f64,
    pub n: usize,
    pub diagnostics: FitDiagnostics,
}

/// Evaluates profile likelihoods at arbitrary ξ, reusing the two transforms that cover the
/// half-Fourier search grid.
struct ProfileEngine {
    x: Vec<f64>,
    n: usize,
    method: Method,
    order: ModelOrder,
    z_plain: Vec<Complex64>,
    z_half: Vec<Complex64>,
    fourier: Vec<f64>,
}

impl ProfileEngine {
    fn new(data: &[f64], method: Method, order: ModelOrder) -> Result<Self> {
        let n = data.len();
        let x = center(data);
        let (z_plain, z_half, fourier) = match method {
            Method::Demodulated => {
                (shifted_transform(&x, 0.0), shifted_transform(&x, 0.5 / n as f64), Vec::new())
            }
            Method::Whittle => (Vec::new(), Vec::new(), fourier_periodogram(data)?),
        };
        Ok(ProfileEngine { x, n, method, order, z_plain, z_half, fourier })
    }

    fn ordinates(&self, xi: f64) -> Result<SpectralOrdinates> {
        let grid = build_grid(xi, self.n)?;
        match self.method {
            Method::Demodulated => {
                let half = 0.5 / self.n as f64;
                let eps = 1e-12 / self.n as f64;
                let pg = if grid.lambda_d.abs() <= eps {
                    from_transform(grid, &self.z_plain)
                } else if (grid.lambda_d - half).abs() <= eps {
                    from_transform(grid, &self.z_half)
                } else {
                    let z = shifted_transform(&self.x, grid.lambda_d);
                    from_transform(grid, &z)
                };
                Ok(SpectralOrdinates::demod(&pg))
            }
            Method::Whittle => Ok(SpectralOrdinates::fourier(&self.fourier, xi, self.n)),
        }
    }

    fn profile(&self, xi: f64) -> Result<ProfileResult> {
        maximize_profile(&self.ordinates(xi)?, self.order)
    }
}

fn xi_bounds(n: usize, search: &SearchConfig) -> Result<(f64, f64)> {
    let nf = n as f64;
    let lo = search.xi_min.unwrap_or(0.0).max(2.0 / nf);
    let hi = search.xi_max.unwrap_or(0.5).min(0.5 - 2.0 / nf);
    if !(lo <= hi) {
        return Err(SeaperError::EstimationFailure(format!("empty pole search interval [{lo}, {hi}]")));
    }
    Ok((lo, hi))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SeaperError::domain("alpha", format!("{alpha} not in (0, 1)")));
    }
    Ok(())
}

/// Fits a GARMA(p, q) model by maximising the chosen likelihood.
///
/// Stage 1 scores every ξ on a grid of spacing `1/(2N)` by its profile likelihood. Stage 2
/// refines ξ by golden-section search within `±1/N` of the stage-1 winner and is kept only
/// if it improves on it. Ties in stage 1 go to the smallest ξ.
pub fn fit(data: &[f64], method: Method, order: ModelOrder, search: &SearchConfig) -> Result<FitResult> {
    let n = data.len();
    if n < 128 || n % 2 != 0 {
        return Err(SeaperError::InputShape(format!("fit needs an even length >= 128, got {n}")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(SeaperError::InputShape("data contain non-finite values".into()));
    }
    if data.iter().all(|v| *v == data[0]) {
        return Err(SeaperError::EstimationFailure("series is constant; every periodogram ordinate is zero".into()));
    }
    check_alpha(search.alpha)?;
    let engine = ProfileEngine::new(data, method, order)?;
    let nf = n as f64;

    let (xi_hat, best, mut diag) = if let Some(xi) = search.fix_xi {
        if !(xi > 0.0 && xi < 0.5) {
            return Err(SeaperError::domain("fix_xi", format!("{xi} not in (0, 0.5)")));
        }
        let p = engine.profile(xi)?;
        if !p.value.is_finite() {
            return Err(SeaperError::EstimationFailure(format!("profile likelihood at xi = {xi} is not finite")));
        }
        let diag = FitDiagnostics {
            stage1_points: 0,
            stage1_failures: 0,
            stage1_best: p.value,
            stage2_best: p.value,
            stage2_accepted: false,
            inner_iterations: p.iterations,
            inner_converged: p.converged,
            known_pole: true,
            finite_ci_fallback: false,
        };
        (xi, p, diag)
    } else {
        let (lo, hi) = xi_bounds(n, search)?;
        let i_lo = (lo * 2.0 * nf).ceil() as i64;
        let i_hi = (hi * 2.0 * nf).floor() as i64;
        let points: Vec<f64> = (i_lo..=i_hi).map(|i| i as f64 / (2.0 * nf)).collect();
        if points.is_empty() {
            return Err(SeaperError::EstimationFailure("pole search grid is empty".into()));
        }
        let scores: Vec<Option<ProfileResult>> =
            points.par_iter().map(|&xi| engine.profile(xi).ok().filter(|p| p.value.is_finite())).collect();
        let failures = scores.iter().filter(|s| s.is_none()).count();
        let mut best_idx: Option<usize> = None;
        for (i, s) in scores.iter().enumerate() {
            if let Some(p) = s {
                if best_idx.map_or(true, |b| p.value > scores[b].unwrap().value) {
                    best_idx = Some(i);
                }
            }
        }
        let bi = best_idx.ok_or_else(|| {
            SeaperError::EstimationFailure(format!("all {} stage-1 profile evaluations failed", points.len()))
        })?;
        let xi1 = points[bi];
        let p1 = scores[bi].unwrap();

        let a = (xi1 - 1.0 / nf).max(lo);
        let b = (xi1 + 1.0 / nf).min(hi);
        let g = golden_max(
            |xi| engine.profile(xi).map(|p| p.value).unwrap_or(f64::NEG_INFINITY),
            a,
            b,
            1e-6 / nf,
            200,
        )?;
        let mut xi_hat = xi1;
        let mut best = p1;
        let mut accepted = false;
        if g.value > p1.value {
            if let Ok(p2) = engine.profile(g.x) {
                if p2.value > p1.value {
                    xi_hat = g.x;
                    best = p2;
                    accepted = true;
                }
            }
        }
        let diag = FitDiagnostics {
            stage1_points: points.len(),
            stage1_failures: failures,
            stage1_best: p1.value,
            stage2_best: g.value,
            stage2_accepted: accepted,
            inner_iterations: best.iterations,
            inner_converged: best.converged,
            known_pole: false,
            finite_ci_fallback: false,
        };
        (xi_hat, best, diag)
    };

    let params_hat = GarmaParams { xi: xi_hat, delta: best.delta, phi: best.phi, theta: best.theta, sigma2_eps: best.sigma2 };
    let ord = engine.ordinates(xi_hat)?;
    let fisher = ord.fisher_delta(best.delta);
    if !(fisher > 0.0) {
        return Err(SeaperError::NumericFailure(format!("non-positive information {fisher} at the optimum")));
    }
    let alpha = search.alpha;
    let ci_d = delta_interval(best.delta, fisher, alpha);
    let ci_c = cauchy_interval(xi_hat, n, alpha);
    let (ci_f, consts) = match finite_sample_constants_at(n, best.delta, xi_hat)
        .and_then(|c| c1_half_width(&c, alpha).map(|h| (c, h)))
    {
        Ok((c, h)) => (Interval { lower: xi_hat - h / nf, upper: xi_hat + h / nf }, Some(c)),
        Err(_) => {
            diag.finite_ci_fallback = true;
            (ci_c, None)
        }
    };
    let bic = order.n_params() as f64 * nf.ln() - 2.0 * best.value;
    Ok(FitResult {
        params_hat,
        loglik: best.value,
        method,
        model_order: order,
        fisher_dd: fisher,
        alpha,
        ci_delta: ci_d,
        ci_xi_cauchy: ci_c,
        ci_xi_finite: ci_f,
        finite_constants: consts,
        bic,
        n,
        diagnostics: diag,
    })
}

/// Fisher information for δ at `params_hat` with σ² profiled: `Σ R_j² - (Σ R_j)²/n_ord`,
/// where `R_j = ∂ log η_j / ∂δ` on the demodulated grid.
pub fn fisher_dd(data: &[f64], params_hat: &GarmaParams) -> Result<f64> {
    params_hat.validate()?;
    let ord = demod_ordinates(data, params_hat.xi)?;
    let f = ord.fisher_delta(params_hat.delta);
    if !(f > 0.0) {
        return Err(SeaperError::NumericFailure(format!("non-positive curvature {f}")));
    }
    Ok(f)
}

/// Negative second central difference in δ of the σ²-profiled demodulated likelihood.
pub fn fisher_dd_finite_difference(data: &[f64], params_hat: &GarmaParams, h: f64) -> Result<f64> {
    params_hat.validate()?;
    let ord = demod_ordinates(data, params_hat.xi)?;
    let p = params_hat;
    let f = |d: f64| ord.concentrated(d, p.phi, p.theta).0;
    Ok(-(f(p.delta + h) - 2.0 * f(p.delta) + f(p.delta - h)) / (h * h))
}

fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// `δ̂ ± z_{1-α/2} F^{-1/2}`, clipped to `[0, 0.5]`.
pub fn delta_interval(delta_hat: f64, fisher: f64, alpha: f64) -> Interval {
    let h = normal_quantile(1.0 - alpha / 2.0) / fisher.sqrt();
    Interval { lower: (delta_hat - h).max(0.0), upper: (delta_hat + h).min(0.5) }
}

/// Scale of the limiting Cauchy law of `N(ξ̂ - ξ)`.
pub fn cauchy_scale() -> f64 {
    5f64.sqrt() / (2.0 * PI * 2f64.sqrt())
}

/// Cauchy half-width coefficient `c` so that `ξ̂ ± c/N` has level `1 - α`.
pub fn cauchy_half_width(alpha: f64) -> f64 {
    cauchy_scale() * (PI * (1.0 - alpha / 2.0) - PI / 2.0).tan()
}

/// `ξ̂ ± cauchy_half_width(α) / N`.
pub fn cauchy_interval(xi_hat: f64, n: usize, alpha: f64) -> Interval {
    let h = cauchy_half_width(alpha) / n as f64;
    Interval { lower: xi_hat - h, upper: xi_hat + h }
}

/// Density of the ratio `C₁` of a `N(0, σ₁²)` score to a `N(μ₂, σ₂²)` information term.
pub fn c1_density(c: f64, k: &FiniteSampleConstants) -> f64 {
    let s1 = k.sigma1_sq.sqrt();
    let s2 = k.sigma2_sq.sqrt();
    let mu = k.mu2;
    let u = k.sigma1_sq + c * c * k.sigma2_sq;
    let t1 = (2.0 * u).sqrt() * s1 * s2 / PI.sqrt() * (-mu * mu / (2.0 * k.sigma2_sq)).exp();
    let t2 = k.sigma1_sq
        * mu
        * (-mu * mu * c * c / (2.0 * u)).exp()
        * statrs::function::erf::erf(mu * s1 / (2f64.sqrt() * s2 * u.sqrt()));
    (t1 + t2) / ((2.0 * PI).sqrt() * u.powf(1.5))
}

/// Half-width `q` with `P(|C₁| <= q) = 1 - α` under [`c1_density`].
pub fn c1_half_width(k: &FiniteSampleConstants, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(k.sigma1_sq > 0.0 && k.sigma2_sq > 0.0 && k.mu2.is_finite()) {
        return Err(SeaperError::NumericFailure("invalid finite-sample constants".into()));
    }
    let pdf = |c: f64| c1_density(c, k);
    // Normalising constant, integrated rather than assumed.
    let scale = (k.sigma1_sq / k.sigma2_sq).sqrt().max(1e-3);
    let half_mass = integrate(&pdf, 0.0, scale, 1e-14, 1e-12)?
        + integrate_to_infinity_vec(&|c| [pdf(c)], scale, 1e-14, 1e-12)?[0];
    let target = (1.0 - alpha) * half_mass;
    let mass = |q: f64| integrate(&pdf, 0.0, q, 1e-14, 1e-12).unwrap_or(f64::NAN);
    let mut hi = scale;
    while mass(hi) < target {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(SeaperError::NumericFailure("ratio quantile not bracketed".into()));
        }
    }
    let m = brent_max(|q| -(mass(q) - target).abs(), 0.0, hi, 1e-12, 300)?;
    if !m.x.is_finite() || (mass(m.x) - target).abs() > 1e-6 {
        return Err(SeaperError::NumericFailure("ratio quantile inversion failed".into()));
    }
    Ok(m.x)
}

/// BIC `k log N - 2ℓ`; lower is better.
pub fn bic(fit: &FitResult) -> f64 {
    fit.model_order.n_params() as f64 * (fit.n as f64).ln() - 2.0 * fit.loglik
}

/// One row of a model-comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub order: ModelOrder,
    pub loglik: Option<f64>,
    pub bic: Option<f64>,
    pub error: Option<String>,
}

/// Result of fitting several orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best: FitResult,
    pub table: Vec<SelectionRow>,
}

/// Fits every requested order and returns the BIC-minimising fit with the comparison table.
pub fn select_model(data: &[f64], method: Method, orders: &[ModelOrder], search: &SearchConfig) -> Result<Selection> {
    if orders.is_empty() {
        return Err(SeaperError::Config("no model orders requested".into()));
    }
    let fits: Vec<Result<FitResult>> = orders.iter().map(|&o| fit(data, method, o, search)).collect();
    let mut table = Vec::with_capacity(orders.len());
    let mut best: Option<FitResult> = None;
    for (o, r) in orders.iter().zip(fits) {
        match r {
            Ok(f) => {
                table.push(SelectionRow { order: *o, loglik: Some(f.loglik), bic: Some(f.bic), error: None });
                if best.as_ref().map_or(true, |b| f.bic < b.bic) {
                    best = Some(f);
                }
            }
            Err(e) => table.push(SelectionRow { order: *o, loglik: None, bic: None, error: Some(e.to_string()) }),
        }
    }
    let best = best.ok_or_else(|| SeaperError::EstimationFailure("every requested order failed".into()))?;
    Ok(Selection { best, table })
}
