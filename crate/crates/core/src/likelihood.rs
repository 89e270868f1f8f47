//! Demodulated Whittle likelihood, the classic discrete Whittle likelihood, the closed-form
//! innovation-variance profile and exact Gaussian likelihoods used as small-sample oracles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bias_constants::{b_pole_unchecked, log_b_pole_derivative};
use crate::demodulation::{build_grid, demod_periodogram, fourier_periodogram, DemodGrid, DemodPeriodogram};
use crate::error::{Result, SeaperError};
use crate::optimize::{brent_max, logistic, logit, simplex_max};
use crate::spectral_models::{acv, f_dagger, gegenbauer_base, sdf, GarmaParams};

/// Lower and upper bounds for δ during estimation.
pub const DELTA_BOUNDS: (f64, f64) = (1e-4, 0.5 - 1e-4);
/// Bound on `|φ|` and `|θ|` during estimation.
pub const ARMA_BOUND: f64 = 1.0 - 1e-4;

/// Which likelihood is maximised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Demodulated,
    Whittle,
}

/// GARMA order `(p, q)` with `p, q ∈ {0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelOrder {
    pub p: u8,
    pub q: u8,
}

impl ModelOrder {
    pub fn new(p: u8, q: u8) -> Result<Self> {
        if p > 1 || q > 1 {
            return Err(SeaperError::domain("order", format!("({p},{q}) not supported; p, q must be 0 or 1")));
        }
        Ok(ModelOrder { p, q })
    }

    /// Number of free parameters: ξ, δ, σ² plus `p + q`.
    pub fn n_params(&self) -> usize {
        3 + self.p as usize + self.q as usize
    }

    /// All four supported orders.
    pub fn all() -> Vec<ModelOrder> {
        vec![ModelOrder { p: 0, q: 0 }, ModelOrder { p: 0, q: 1 }, ModelOrder { p: 1, q: 0 }, ModelOrder { p: 1, q: 1 }]
    }
}

impl std::str::FromStr for ModelOrder {
    type Err = SeaperError;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(SeaperError::Config(format!("order `{s}` must look like `p,q`")));
        }
        let p = parts[0].parse().map_err(|_| SeaperError::Config(format!("bad p in `{s}`")))?;
        let q = parts[1].parse().map_err(|_| SeaperError::Config(format!("bad q in `{s}`")))?;
        ModelOrder::new(p, q)
    }
}

impl std::fmt::Display for ModelOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.p, self.q)
    }
}

/// A log-likelihood value together with the number of ordinates it sums over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoglikValue {
    pub value: f64,
    pub n_ordinates: usize,
    pub sigma2_profiled: Option<f64>,
}

/// Periodogram ordinates with the frequency data needed to evaluate `log η_k` cheaply.
///
/// For a regular ordinate `log η_k = 2δ L_k - log|h(λ_k)|² - log σ²` with
/// `L_k = log|2cos 2πλ_k - 2cos 2πξ|`. At the pole ordinate
/// `L = log(4π|sin 2πξ| / N)` and `log B_ξ(δ)` is subtracted as well.
#[derive(Debug, Clone)]
pub(crate) struct SpectralOrdinates {
    pub i: Vec<f64>,
    pub log_base: Vec<f64>,
    pub cos_w: Vec<f64>,
    pub pole: Option<usize>,
}

impl SpectralOrdinates {
    pub fn demod(pg: &DemodPeriodogram) -> Self {
        let g = &pg.grid;
        let nf = g.n as f64;
        let mut log_base = Vec::with_capacity(g.len());
        let mut cos_w = Vec::with_capacity(g.len());
        for (idx, k) in g.offsets().enumerate() {
            let lam = g.lambdas[idx];
            cos_w.push((2.0 * PI * lam).cos());
            if k == 0 {
                log_base.push((4.0 * PI * (2.0 * PI * g.xi).sin().abs() / nf).ln());
            } else {
                log_base.push(gegenbauer_base(g.xi, lam).ln());
            }
        }
        SpectralOrdinates { i: pg.values.clone(), log_base, cos_w, pole: Some(g.position(0)) }
    }

    /// Fourier-frequency ordinates `j = 1..N/2-1`; an ordinate sitting exactly on the pole is
    /// dropped.
    pub fn fourier(periodogram: &[f64], xi: f64, n: usize) -> Self {
        let nf = n as f64;
        let mut out = SpectralOrdinates { i: Vec::new(), log_base: Vec::new(), cos_w: Vec::new(), pole: None };
        for (idx, &v) in periodogram.iter().enumerate() {
            let lam = (idx + 1) as f64 / nf;
            let base = gegenbauer_base(xi, lam);
            if base == 0.0 {
                continue;
            }
            out.i.push(v);
            out.log_base.push(base.ln());
            out.cos_w.push((2.0 * PI * lam).cos());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    /// `log η_k + log σ²` for every ordinate.
    fn log_c(&self, delta: f64, phi: f64, theta: f64) -> Vec<f64> {
        let arma = phi != 0.0 || theta != 0.0;
        let log_b = match self.pole {
            Some(_) if delta > 0.0 => b_pole_unchecked(delta).ln(),
            _ => 0.0,
        };
        let mut out: Vec<f64> = self.log_base.iter().map(|&l| 2.0 * delta * l).collect();
        if arma {
            for (v, &c) in out.iter_mut().zip(&self.cos_w) {
                *v -= ((1.0 + 2.0 * theta * c + theta * theta) / (1.0 - 2.0 * phi * c + phi * phi)).ln();
            }
        }
        if let Some(p) = self.pole {
            out[p] -= log_b;
        }
        out
    }

    /// Likelihood with σ² profiled out: returns `(ℓ, σ̂²)`.
    pub fn concentrated(&self, delta: f64, phi: f64, theta: f64) -> (f64, f64) {
        let lc = self.log_c(delta, phi, theta);
        let n = self.len() as f64;
        let mut sum_lc = 0.0;
        let mut sum_ci = 0.0;
        for (l, &iv) in lc.iter().zip(&self.i) {
            sum_lc += l;
            sum_ci += l.exp() * iv;
        }
        let s2 = sum_ci / n;
        (sum_lc - n * s2.ln() - n, s2)
    }

    /// `Σ {log η_k - η_k I_k}` at fixed σ².
    pub fn loglik(&self, p: &GarmaParams) -> f64 {
        let lc = self.log_c(p.delta, p.phi, p.theta);
        let ls = p.sigma2_eps.ln();
        lc.iter().zip(&self.i).map(|(l, &iv)| (l - ls) - (l - ls).exp() * iv).sum()
    }

    /// `∂ log η_k / ∂δ`.
    pub fn r1(&self, delta: f64) -> Vec<f64> {
        let mut r: Vec<f64> = self.log_base.iter().map(|&l| 2.0 * l).collect();
        if let Some(p) = self.pole {
            r[p] -= log_b_pole_derivative(delta);
        }
        r
    }

    /// `∂ℓ/∂δ = Σ R_k (1 - η_k I_k)` at fixed σ².
    pub fn score_delta(&self, p: &GarmaParams) -> f64 {
        let lc = self.log_c(p.delta, p.phi, p.theta);
        let ls = p.sigma2_eps.ln();
        self.r1(p.delta)
            .iter()
            .zip(lc.iter().zip(&self.i))
            .map(|(r, (l, &iv))| r * (1.0 - (l - ls).exp() * iv))
            .sum()
    }

    /// Expected information for δ with σ² profiled: `Σ R_k² - (Σ R_k)² / n`.
    pub fn fisher_delta(&self, delta: f64) -> f64 {
        let r = self.r1(delta);
        let n = r.len() as f64;
        let s: f64 = r.iter().sum();
        let s2: f64 = r.iter().map(|v| v * v).sum();
        s2 - s * s / n
    }
}

/// Inner maximiser of the profile likelihood at fixed ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileResult {
    pub value: f64,
    pub delta: f64,
    pub phi: f64,
    pub theta: f64,
    pub sigma2: f64,
    pub iterations: u64,
    pub converged: bool,
}

pub(crate) fn maximize_profile(ord: &SpectralOrdinates, order: ModelOrder) -> Result<ProfileResult> {
    if ord.len() < 2 {
        return Err(SeaperError::DegenerateGrid("fewer than two ordinates".into()));
    }
    let (dlo, dhi) = DELTA_BOUNDS;
    let m = brent_max(|d| ord.concentrated(d, 0.0, 0.0).0, dlo, dhi, 1e-9, 200)?;
    let (value, s2) = ord.concentrated(m.x, 0.0, 0.0);
    let mut best = ProfileResult {
        value,
        delta: m.x,
        phi: 0.0,
        theta: 0.0,
        sigma2: s2,
        iterations: m.iterations,
        converged: m.converged,
    };
    if order.p == 0 && order.q == 0 {
        return Ok(best);
    }
    let unpack = |z: &[f64]| -> (f64, f64, f64) {
        let d = logistic(z[0], dlo, dhi);
        let mut i = 1;
        let phi = if order.p == 1 {
            i += 1;
            logistic(z[i - 1], -ARMA_BOUND, ARMA_BOUND)
        } else {
            0.0
        };
        let theta = if order.q == 1 { logistic(z[i], -ARMA_BOUND, ARMA_BOUND) } else { 0.0 };
        (d, phi, theta)
    };
    let mut z0 = vec![logit(m.x.clamp(dlo + 1e-6, dhi - 1e-6), dlo, dhi)];
    for _ in 0..(order.p + order.q) {
        z0.push(0.0);
    }
    let nm = simplex_max(
        |z| {
            let (d, phi, theta) = unpack(z);
            ord.concentrated(d, phi, theta).0
        },
        &z0,
        0.5,
        1e-7,
        500,
    )?;
    let (d, phi, theta) = unpack(&nm.x);
    let (v, s2) = ord.concentrated(d, phi, theta);
    if v > best.value {
        best = ProfileResult {
            value: v,
            delta: d,
            phi,
            theta,
            sigma2: s2,
            iterations: best.iterations + nm.iterations,
            converged: nm.converged,
        };
    }
    Ok(best)
}

fn check_grid_matches(params: &GarmaParams, grid: &DemodGrid) -> Result<()> {
    if grid.xi != params.xi {
        return Err(SeaperError::InputShape(format!(
            "grid built for xi = {} but params have xi = {}",
            grid.xi, params.xi
        )));
    }
    Ok(())
}

/// Weights `η_j = |j|^{2δ·1(j≠0)} / (B_ξ(δ)^{1(j=0)} N^{2δ} f†(ξ + j/N))` on the grid.
pub fn eta_weights(params: &GarmaParams, grid: &DemodGrid) -> Result<Vec<f64>> {
    params.validate()?;
    check_grid_matches(params, grid)?;
    let nf = grid.n as f64;
    let d2 = 2.0 * params.delta;
    grid.offsets()
        .zip(&grid.lambdas)
        .map(|(k, &lam)| {
            let fd = f_dagger(params, lam)?;
            let eta = if k == 0 {
                1.0 / (b_pole_unchecked(params.delta) * nf.powf(d2) * fd)
            } else {
                (k.unsigned_abs() as f64).powf(d2) / (nf.powf(d2) * fd)
            };
            Ok(eta)
        })
        .collect()
}

/// Demodulated Whittle log-likelihood `Σ_{j=J₁}^{J₂} {log η_j - η_j I₀(ξ + j/N)}`.
pub fn demod_loglik(data: &[f64], params: &GarmaParams) -> Result<LoglikValue> {
    params.validate()?;
    let pg = demod_periodogram(data, params.xi)?;
    let ord = SpectralOrdinates::demod(&pg);
    Ok(LoglikValue { value: ord.loglik(params), n_ordinates: ord.len(), sigma2_profiled: None })
}

/// Analytic δ-score of [`demod_loglik`] at fixed σ².
pub fn demod_score_delta(data: &[f64], params: &GarmaParams) -> Result<f64> {
    params.validate()?;
    let pg = demod_periodogram(data, params.xi)?;
    Ok(SpectralOrdinates::demod(&pg).score_delta(params))
}

/// Classic discrete Whittle log-likelihood `-(2/N) Σ_j I(φ_j)/f(φ_j)`, minus
/// `(2/N) Σ_j log f(φ_j)` when `with_log_term` is set. Fourier ordinates where the density is
/// infinite are skipped.
pub fn whittle_loglik(data: &[f64], params: &GarmaParams, with_log_term: bool) -> Result<LoglikValue> {
    params.validate()?;
    let n = data.len();
    let pg = fourier_periodogram(data)?;
    let mut value = 0.0;
    let mut used = 0;
    for (idx, &iv) in pg.iter().enumerate() {
        let f = sdf(params, (idx + 1) as f64 / n as f64)?;
        if !f.is_finite() {
            continue;
        }
        used += 1;
        value -= iv / f;
        if with_log_term {
            value -= f.ln();
        }
    }
    Ok(LoglikValue { value: 2.0 * value / n as f64, n_ordinates: used, sigma2_profiled: None })
}

/// Closed-form maximiser of [`demod_loglik`] over σ², holding `(ξ, δ, φ, θ)` fixed.
pub fn sigma2_profile(data: &[f64], params: &GarmaParams) -> Result<f64> {
    params.validate()?;
    let pg = demod_periodogram(data, params.xi)?;
    let (_, s2) = SpectralOrdinates::demod(&pg).concentrated(params.delta, params.phi, params.theta);
    if !(s2 > 0.0) {
        return Err(SeaperError::DegenerateGrid("all periodogram ordinates are zero".into()));
    }
    Ok(s2)
}

/// Maximum of the demodulated likelihood over `(δ, φ, θ, σ²)` at fixed ξ.
pub fn profile_loglik_xi(data: &[f64], xi: f64, order: ModelOrder) -> Result<ProfileResult> {
    let pg = demod_periodogram(data, xi)?;
    maximize_profile(&SpectralOrdinates::demod(&pg), order)
}

/// Exact Gaussian log-likelihood `-(N/2) log 2π - ½ log|G| - ½ xᵀG⁻¹x` with the Toeplitz
/// autocovariance matrix `G`, for `N <= 512`.
pub fn exact_time_loglik(data: &[f64], params: &GarmaParams) -> Result<f64> {
    let n = data.len();
    if n == 0 || n > 512 {
        return Err(SeaperError::InputShape(format!("exact likelihood needs 1 <= N <= 512, got {n}")));
    }
    let g = acv(params, n)?.toeplitz();
    gaussian_logdensity(&g, &DVector::from_column_slice(data)).map(|(v, _)| v)
}

/// Log-density of `N(0, cov)` at `v` via Cholesky. If the factorisation fails, the diagonal
/// is inflated by `1e-10 · trace / n` and the jitter used is returned.
fn gaussian_logdensity(cov: &DMatrix<f64>, v: &DVector<f64>) -> Result<(f64, f64)> {
    let n = v.len();
    let mut jitter = 0.0;
    let chol = match cov.clone().cholesky() {
        Some(c) => c,
        None => {
            jitter = 1e-10 * cov.trace() / n as f64;
            let mut c = cov.clone();
            for i in 0..n {
                c[(i, i)] += jitter;
            }
            c.cholesky().ok_or_else(|| {
                SeaperError::NumericFailure("covariance matrix is not positive definite".into())
            })?
        }
    };
    let l = chol.l();
    let logdet: f64 = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
    let w = l.solve_lower_triangular(v).ok_or_else(|| SeaperError::NumericFailure("triangular solve failed".into()))?;
    let value = -0.5 * n as f64 * (2.0 * PI).ln() - 0.5 * logdet - 0.5 * w.norm_squared();
    Ok((value, jitter))
}

/// Exact log-density of the stacked DFT coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DftExactLoglik {
    pub value: f64,
    /// Diagonal jitter added to the covariance (0 when none was needed).
    pub jitter: f64,
}

/// Rows `A_j = N^{-1/2} Σ x_t cos(2πjt/N)` and `B_j = -N^{-1/2} Σ x_t sin(2πjt/N)`.
fn dft_rows(n: usize, interior_only: bool) -> DMatrix<f64> {
    let m = n / 2;
    let a_range: Vec<usize> = if interior_only { (1..m).collect() } else { (0..=m).collect() };
    let rows = a_range.len() + (m - 1);
    let s = 1.0 / (n as f64).sqrt();
    let mut w = DMatrix::zeros(rows, n);
    for (r, &j) in a_range.iter().enumerate() {
        for t in 0..n {
            w[(r, t)] = s * (2.0 * PI * ((j * t) % n) as f64 / n as f64).cos();
        }
    }
    for (r, j) in (1..m).enumerate() {
        for t in 0..n {
            w[(a_range.len() + r, t)] = -s * (2.0 * PI * ((j * t) % n) as f64 / n as f64).sin();
        }
    }
    w
}

fn dft_loglik_impl(data: &[f64], params: &GarmaParams, interior_only: bool) -> Result<DftExactLoglik> {
    let n = data.len();
    if n < 4 || n % 2 != 0 || n > 256 {
        return Err(SeaperError::InputShape(format!("DFT likelihood needs even 4 <= N <= 256, got {n}")));
    }
    let g = acv(params, n)?.toeplitz();
    let w = dft_rows(n, interior_only);
    let cov = &w * g * w.transpose();
    let v = &w * DVector::from_column_slice(data);
    let (value, jitter) = gaussian_logdensity(&cov, &v)?;
    Ok(DftExactLoglik { value, jitter })
}

/// Exact Gaussian log-density of the real DFT coefficients `(A_0..A_{N/2}, B_1..B_{N/2-1})`.
/// `B_0` and `B_{N/2}` vanish identically and are left out, so the transform is a full
/// orthogonal basis up to scaling and the result differs from [`exact_time_loglik`] by a
/// constant that does not depend on the parameters.
pub fn dft_exact_loglik(data: &[f64], params: &GarmaParams) -> Result<DftExactLoglik> {
    params.validate()?;
    dft_loglik_impl(data, params, false)
}

/// As [`dft_exact_loglik`] but restricted to the interior coefficients `j = 1..N/2-1`, which
/// are the ordinates entering the demodulated likelihood when ξ is a Fourier frequency.
pub fn dft_exact_loglik_interior(data: &[f64], params: &GarmaParams) -> Result<DftExactLoglik> {
    params.validate()?;
    dft_loglik_impl(data, params, true)
}

/// Builds the demodulated ordinates of `data` for a pole at `xi`.
pub(crate) fn demod_ordinates(data: &[f64], xi: f64) -> Result<SpectralOrdinates> {
    Ok(SpectralOrdinates::demod(&demod_periodogram(data, xi)?))
}

/// Log-likelihood of `params` under `method` at fixed σ², on the same ordinates and scale the
/// fitting routine uses. For the Whittle method this is the unscaled Fourier-ordinate sum.
pub fn method_loglik(data: &[f64], method: Method, params: &GarmaParams) -> Result<f64> {
    params.validate()?;
    let ord = match method {
        Method::Demodulated => demod_ordinates(data, params.xi)?,
        Method::Whittle => {
            build_grid(params.xi, data.len())?;
            SpectralOrdinates::fourier(&fourier_periodogram(data)?, params.xi, data.len())
        }
    };
    Ok(ord.loglik(params))
}
