//! Gegenbauer-ARMA spectral densities, the pole factorisation `f = f† |λ-ξ|^(-2δ)`,
//! MA(∞) weights and the autocovariance sequence.
//!
//! Frequencies are in cycles per sample; the density integrates to the process
//! variance over `[-1/2, 1/2]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SeaperError};
use crate::quadrature;

/// Parameters of a GARMA(p, q) model with `p, q <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GarmaParams {
    pub xi: f64,
    pub delta: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub theta: f64,
    pub sigma2_eps: f64,
}

impl GarmaParams {
    /// Pure Gegenbauer process with unit innovation variance.
    pub fn gegenbauer(xi: f64, delta: f64) -> Self {
        GarmaParams { xi, delta, phi: 0.0, theta: 0.0, sigma2_eps: 1.0 }
    }

    pub fn with_arma(mut self, phi: f64, theta: f64) -> Self {
        self.phi = phi;
        self.theta = theta;
        self
    }

    pub fn with_sigma2(mut self, sigma2_eps: f64) -> Self {
        self.sigma2_eps = sigma2_eps;
        self
    }

    /// Checks the admissible ranges. `delta = 0` is accepted as the white-noise limit.
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi < 0.5) {
            return Err(SeaperError::domain("xi", format!("{} not in (0, 0.5)", self.xi)));
        }
        if !(self.delta >= 0.0 && self.delta < 0.5) {
            return Err(SeaperError::domain("delta", format!("{} not in [0, 0.5)", self.delta)));
        }
        if !(self.phi.abs() < 1.0) {
            return Err(SeaperError::domain("phi", format!("|{}| >= 1", self.phi)));
        }
        if !(self.theta.abs() < 1.0) {
            return Err(SeaperError::domain("theta", format!("|{}| >= 1", self.theta)));
        }
        if !(self.sigma2_eps > 0.0 && self.sigma2_eps.is_finite()) {
            return Err(SeaperError::domain("sigma2_eps", format!("{} not > 0", self.sigma2_eps)));
        }
        Ok(())
    }

    /// `(p, q)` implied by non-zero ARMA coefficients.
    pub fn order(&self) -> (u8, u8) {
        ((self.phi != 0.0) as u8, (self.theta != 0.0) as u8)
    }
}

/// Squared modulus of the ARMA(1,1) transfer function `(1 + θz)/(1 - φz)` on the unit circle.
pub fn arma_gain(phi: f64, theta: f64, lambda: f64) -> f64 {
    let c = (2.0 * PI * lambda).cos();
    (1.0 + 2.0 * theta * c + theta * theta) / (1.0 - 2.0 * phi * c + phi * phi)
}

/// `|2cos(2πλ) - 2cos(2πξ)|`, written as a product of sines to avoid cancellation near the pole.
pub fn gegenbauer_base(xi: f64, lambda: f64) -> f64 {
    4.0 * ((PI * (lambda + xi)).sin() * (PI * (lambda - xi)).sin()).abs()
}

/// Spectral density. Returns `+inf` exactly at `λ = ±ξ` when `δ > 0`.
pub fn sdf(params: &GarmaParams, lambda: f64) -> Result<f64> {
    params.validate()?;
    check_frequency(lambda)?;
    Ok(sdf_unchecked(params, lambda))
}

pub(crate) fn sdf_unchecked(p: &GarmaParams, lambda: f64) -> f64 {
    let h2 = arma_gain(p.phi, p.theta, lambda);
    if p.delta == 0.0 {
        return p.sigma2_eps * h2;
    }
    let base = gegenbauer_base(p.xi, lambda);
    if base == 0.0 {
        return f64::INFINITY;
    }
    p.sigma2_eps * h2 * base.powf(-2.0 * p.delta)
}

/// Smooth factor `f†(λ) = f(λ)|λ - ξ|^{2δ}`, with its analytic limit at `λ = ξ`.
pub fn f_dagger(params: &GarmaParams, lambda: f64) -> Result<f64> {
    params.validate()?;
    check_frequency(lambda)?;
    Ok(f_dagger_unchecked(params, lambda))
}

pub(crate) fn f_dagger_unchecked(p: &GarmaParams, lambda: f64) -> f64 {
    let h2 = p.sigma2_eps * arma_gain(p.phi, p.theta, lambda);
    if p.delta == 0.0 {
        return h2;
    }
    let d = lambda - p.xi;
    if d == 0.0 {
        let s = 4.0 * PI * (2.0 * PI * p.xi).sin().abs();
        return h2 * s.powf(-2.0 * p.delta);
    }
    let base = gegenbauer_base(p.xi, lambda);
    if base == 0.0 {
        // λ = -ξ: the mirror pole.
        return f64::INFINITY;
    }
    h2 * (d.abs() / base).powf(2.0 * p.delta)
}

fn check_frequency(lambda: f64) -> Result<()> {
    if !(-0.5..=0.5).contains(&lambda) {
        return Err(SeaperError::domain("lambda", format!("{lambda} not in [-0.5, 0.5]")));
    }
    Ok(())
}

/// First `n_terms` MA(∞) weights of the GARMA filter `(1 + θz) / ((1 - φz)(1 - 2ηz + z²)^δ)`.
pub fn ma_coefficients(params: &GarmaParams, n_terms: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if n_terms == 0 {
        return Err(SeaperError::InputShape("n_terms must be >= 1".into()));
    }
    let eta = (2.0 * PI * params.xi).cos();
    let d = params.delta;
    let mut c = vec![0.0; n_terms];
    c[0] = 1.0;
    if n_terms > 1 {
        c[1] = 2.0 * d * eta;
    }
    for n in 2..n_terms {
        let nf = n as f64;
        c[n] = (2.0 * eta * (nf + d - 1.0) * c[n - 1] - (nf + 2.0 * d - 2.0) * c[n - 2]) / nf;
    }
    let mut psi = vec![0.0; n_terms];
    for j in 0..n_terms {
        let a = c[j] + if j > 0 { params.theta * c[j - 1] } else { 0.0 };
        psi[j] = a + if j > 0 { params.phi * psi[j - 1] } else { 0.0 };
    }
    Ok(psi)
}

/// Autocovariances `γ_0, ..., γ_{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcvSequence {
    pub gamma: Vec<f64>,
    pub n: usize,
}

impl AcvSequence {
    /// Dense symmetric Toeplitz matrix built from the sequence.
    pub fn toeplitz(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n;
        nalgebra::DMatrix::from_fn(n, n, |i, j| self.gamma[i.abs_diff(j)])
    }
}

/// Autocovariance sequence of length `n`.
///
/// The pure Gegenbauer part obeys the three-term recurrence
/// `(k+1-2δ) g_{k+1} = 2kη g_k - (k-1+2δ) g_{k-1}`, obtained from the first-order
/// differential equation satisfied by `|2cos ω - 2η|^{-2δ}`. It is seeded with `g_0`, `g_1`
/// from quadrature. The MA and AR factors are then applied in the lag domain.
pub fn acv(params: &GarmaParams, n: usize) -> Result<AcvSequence> {
    params.validate()?;
    if n == 0 {
        return Err(SeaperError::InputShape("acv length must be >= 1".into()));
    }
    let phi = params.phi;
    // AR tail length: |φ|^k below 1e-17.
    let k_ar = if phi == 0.0 { 0 } else { ((1e-17f64).ln() / phi.abs().ln()).ceil() as usize + 1 };
    let max_lag = n + 2 * k_ar + 2;
    let g = gegenbauer_acv(params.xi, params.delta, max_lag + 1)?;

    // MA(1): z_k = (1+θ²) g_k + θ (g_{k-1} + g_{k+1}).
    let th = params.theta;
    let gz = |k: i64| -> f64 {
        let k = k.unsigned_abs() as usize;
        let gm = g[(k as i64 - 1).unsigned_abs() as usize];
        (1.0 + th * th) * g[k] + th * (gm + g[k + 1])
    };

    let mut gamma = vec![0.0; n];
    if phi == 0.0 {
        for (k, v) in gamma.iter_mut().enumerate() {
            *v = params.sigma2_eps * gz(k as i64);
        }
    } else {
        // u(k) = Σ_i φ^i z(k+i),  γ(k) = Σ_j φ^j u(k-j),  for k in [-K, n-1].
        let kk = k_ar as i64;
        let lo = -kk;
        let hi = n as i64 - 1 + kk;
        let len = (hi - lo + 1) as usize;
        let mut u = vec![0.0; len + 1];
        for idx in (0..len).rev() {
            let k = lo + idx as i64;
            u[idx] = gz(k) + phi * u[idx + 1];
        }
        let mut y_prev = 0.0;
        for idx in 0..len {
            let k = lo + idx as i64;
            let y = u[idx] + phi * y_prev;
            if k >= 0 && (k as usize) < n {
                gamma[k as usize] = params.sigma2_eps * y;
            }
            y_prev = y;
        }
    }
    if !(gamma[0] > 0.0) || gamma.iter().any(|v| !v.is_finite()) {
        return Err(SeaperError::NumericFailure("autocovariance is not finite and positive".into()));
    }
    Ok(AcvSequence { gamma, n })
}

/// Autocovariances of the unit-variance Gegenbauer process, lags `0..len`.
pub(crate) fn gegenbauer_acv(xi: f64, delta: f64, len: usize) -> Result<Vec<f64>> {
    let mut g = vec![0.0; len.max(2)];
    if delta == 0.0 {
        g[0] = 1.0;
        g.truncate(len);
        return Ok(g);
    }
    g[0] = spectral_cosine_moment(xi, delta, 0)?;
    g[1] = spectral_cosine_moment(xi, delta, 1)?;
    let eta = (2.0 * PI * xi).cos();
    let d2 = 2.0 * delta;
    for k in 1..len.saturating_sub(1) {
        let kf = k as f64;
        g[k + 1] = (2.0 * kf * eta * g[k] - (kf - 1.0 + d2) * g[k - 1]) / (kf + 1.0 - d2);
    }
    g.truncate(len);
    Ok(g)
}

/// `2 ∫_0^{1/2} |2cos 2πλ - 2cos 2πξ|^{-2δ} cos(2πkλ) dλ` with the pole removed by the
/// substitution `|λ - ξ| = v^{1/(1-2δ)}`.
pub(crate) fn spectral_cosine_moment(xi: f64, delta: f64, k: usize) -> Result<f64> {
    let kf = k as f64;
    let smooth = |lambda: f64| -> f64 {
        // f†-like smooth factor: (|λ-ξ| / base)^{2δ} cos(2πkλ).
        let d = (lambda - xi).abs();
        let ratio = if d == 0.0 {
            1.0 / (4.0 * PI * (2.0 * PI * xi).sin().abs())
        } else {
            d / gegenbauer_base(xi, lambda)
        };
        ratio.powf(2.0 * delta) * (2.0 * PI * kf * lambda).cos()
    };
    let total = quadrature::pole_integral(&smooth, 0.0, xi, 0.5, delta, 1e-14)?;
    Ok(2.0 * total)
}
