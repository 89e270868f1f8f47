//! Bias and variance constants of the demodulated periodogram and its δ-derivatives, and the
//! finite-sample constants `(μ₂, σ₁², σ₂²)` used by the ratio-distribution pole interval.
//!
//! Every per-ordinate constant is built from the weighted moments
//!
//! ```text
//! Σ_ab(j) = ∫ |j/u|^{2δ} s_a(j-u) s_b(j-u) du,   a, b ∈ {0, 1, 2},
//! ```
//!
//! where `s_0(x) = sin(πx)/(πx)` and `s_1`, `s_2` are its first two derivatives. At `j = 0`
//! the weight is `|u|^{-2δ} / B_ξ(δ)`. The moments are integrated on unit panels inside a
//! window of half-width `NEAR` around the kernel centre and the weight singularity; outside it
//! the phase-averaged part of `s_a s_b` is integrated and the oscillating part, whose integral
//! is `O(NEAR^{-3})`, is dropped.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demodulation::build_grid;
use crate::error::{Result, SeaperError};
use crate::quadrature::{integrate_vec, power_singular_vec, integrate_to_infinity_vec};

/// Half-width of the near windows, in units of `1/N`.
const NEAR: f64 = 64.0;
/// Largest `|j|` evaluated by direct quadrature in the finite-sample sums.
pub const EXACT_CUTOFF: i64 = 200;

const PANEL_ABS_TOL: f64 = 1e-14;
const PANEL_REL_TOL: f64 = 1e-12;

/// `lim_{j→∞} Ċ_j = 2π²/3`.
pub fn c_dot_limit() -> f64 {
    2.0 * PI * PI / 3.0
}

/// `lim_{j→∞} σ̃_j² = 16π⁴/15`.
pub fn sigma_tilde_limit() -> f64 {
    16.0 * PI.powi(4) / 15.0
}

/// Γ(z) for real `z`, using `Γ(z)Γ(1-z) = π / sin(πz)` below 1/2.
pub fn gamma_fn(z: f64) -> f64 {
    if z < 0.5 {
        PI / ((PI * z).sin() * statrs::function::gamma::gamma(1.0 - z))
    } else {
        statrs::function::gamma::gamma(z)
    }
}

/// Digamma ψ(z), using `ψ(z) = ψ(1-z) - π cot(πz)` below 1/2.
pub fn digamma_fn(z: f64) -> f64 {
    if z < 0.5 {
        statrs::function::gamma::digamma(1.0 - z) - PI / (PI * z).tan()
    } else {
        statrs::function::gamma::digamma(z)
    }
}

fn check_delta(delta: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero { delta >= 0.0 } else { delta > 0.0 };
    if !(ok && delta < 0.5) {
        return Err(SeaperError::domain("delta", format!("{delta} outside the admissible range")));
    }
    Ok(())
}

/// Relative bias of the periodogram at the pole,
/// `B_ξ(δ) = -Γ(-1-2δ) cos(π(1/2+δ)) 2^{2δ+1} π^{2δ-1}`, equal to 1 at `δ = 0`.
pub fn b_pole(delta: f64) -> Result<f64> {
    check_delta(delta, true)?;
    Ok(b_pole_unchecked(delta))
}

pub(crate) fn b_pole_unchecked(delta: f64) -> f64 {
    if delta == 0.0 {
        return 1.0;
    }
    -gamma_fn(-1.0 - 2.0 * delta)
        * (PI * (0.5 + delta)).cos()
        * 2f64.powf(2.0 * delta + 1.0)
        * PI.powf(2.0 * delta - 1.0)
}

/// `d log B_ξ(δ) / dδ`.
pub fn log_b_pole_derivative(delta: f64) -> f64 {
    if delta == 0.0 {
        // Limit of -2ψ(-1-2δ) + π cot(πδ) + 2 log(2π) as δ → 0.
        let h = 1e-6;
        return (b_pole_unchecked(h).ln() - b_pole_unchecked(0.0).ln()) / h;
    }
    -2.0 * digamma_fn(-1.0 - 2.0 * delta) + PI / (PI * delta).tan() + 2.0 * (2.0 * PI).ln()
}

/// `B_ξ(δ)` by direct quadrature of `(2/π²) ∫_0^∞ sin²(πu) u^{-2δ-2} du`.
///
/// The range is split at `U = 200`. The tail is integrated analytically: its mean part
/// exactly, and its `cos(2πu)` part by repeated integration by parts.
pub fn b_pole_quadrature(delta: f64) -> Result<f64> {
    check_delta(delta, true)?;
    let upper = 200usize;
    let mut total = power_singular_vec(&|t| [sinc_derivs(t)[0].powi(2)], 1.0, delta, 1e-15, 1e-14)?[0];
    for k in 1..upper {
        let a = k as f64;
        total += integrate_vec(
            &|u: f64| [sinc_derivs(u)[0].powi(2) * u.powf(-2.0 * delta)],
            a,
            a + 1.0,
            1e-16,
            1e-14,
        )?[0];
    }
    let u = upper as f64;
    let p = 2.0 * delta + 2.0;
    let mean_part = u.powf(1.0 - p) / (p - 1.0);
    let tail = (mean_part - cos_tail_integer(p, u)) / (2.0 * PI * PI);
    Ok(2.0 * (total + tail))
}

/// `∫_U^∞ cos(2πu) u^{-p} du` for integer `U`, by integration by parts.
fn cos_tail_integer(p: f64, u: f64) -> f64 {
    // I(p) = p U^{-p-1}/(4π²) - p(p+1)/(4π²) I(p+2).
    let mut coeffs = Vec::new();
    let mut q = p;
    for _ in 0..5 {
        coeffs.push(q);
        q += 2.0;
    }
    let mut acc = 0.0;
    for &q in coeffs.iter().rev() {
        acc = q * u.powf(-q - 1.0) / (4.0 * PI * PI) - q * (q + 1.0) / (4.0 * PI * PI) * acc;
    }
    acc
}

/// `(s_0, s_1, s_2)(x)`: `sin(πx)/(πx)` and its first two derivatives.
pub(crate) fn sinc_derivs(x: f64) -> [f64; 3] {
    if x.abs() < 0.5 {
        let x2 = x * x;
        let mut t = 1.0; // (-1)^n π^{2n} / (2n+1)!
        let mut s0 = 1.0;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut xp = 1.0; // x^{2n-2}
        for n in 1..20 {
            let nf = n as f64;
            t *= -PI * PI / ((2.0 * nf) * (2.0 * nf + 1.0));
            if n > 1 {
                xp *= x2;
            }
            s0 += t * xp * x2;
            s1 += t * 2.0 * nf * xp * x;
            s2 += t * 2.0 * nf * (2.0 * nf - 1.0) * xp;
        }
        [s0, s1, s2]
    } else {
        let px = PI * x;
        let (sn, cs) = px.sin_cos();
        let s0 = sn / px;
        let s1 = cs / x - sn / (PI * x * x);
        let s2 = -PI * sn / x - 2.0 * cs / (x * x) + 2.0 * sn / (PI * x * x * x);
        [s0, s1, s2]
    }
}

/// `s_1(x)/x`, finite at the origin.
fn sinc1_over_x(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        let mut t = 1.0;
        let mut acc = 0.0;
        let mut xp = 1.0;
        for n in 1..20 {
            let nf = n as f64;
            t *= -PI * PI / ((2.0 * nf) * (2.0 * nf + 1.0));
            if n > 1 {
                xp *= x2;
            }
            acc += t * 2.0 * nf * xp;
        }
        acc
    } else {
        sinc_derivs(x)[1] / x
    }
}

/// Products `s_a s_b` in the order (00, 01, 02, 11, 12, 22).
fn kernel_products(x: f64) -> [f64; 6] {
    let [s0, s1, s2] = sinc_derivs(x);
    [s0 * s0, s0 * s1, s0 * s2, s1 * s1, s1 * s2, s2 * s2]
}

/// Phase-averaged part of [`kernel_products`], valid for `|x|` bounded away from 0.
fn kernel_products_mean(x: f64) -> [f64; 6] {
    let y = PI * x;
    let y2 = y * y;
    let y3 = y2 * y;
    let y4 = y2 * y2;
    let p2 = PI * PI;
    [
        0.5 / y2,
        -0.5 * PI / y3,
        p2 * (-0.5 / y2 + 1.0 / y4),
        p2 * (0.5 / y2 + 0.5 / y4),
        p2 * PI * (-0.5 / y3 - 1.0 / (y4 * y)),
        p2 * p2 * (0.5 / y2 + 2.0 / (y4 * y2)),
    ]
}

fn add6(acc: &mut [f64; 6], v: [f64; 6]) {
    for i in 0..6 {
        acc[i] += v[i];
    }
}

/// Unweighted-by-`j` moments `∫ |u|^{-2δ} s_a(j-u) s_b(j-u) du` for `j >= 0`.
fn raw_moments(j: f64, delta: f64) -> Result<[f64; 6]> {
    let mut acc = [0.0; 6];
    let wpow = -2.0 * delta;
    let windows: Vec<(f64, f64)> = if j <= 2.0 * NEAR {
        vec![(-NEAR, j + NEAR)]
    } else {
        vec![(-NEAR, NEAR), (j - NEAR, j + NEAR)]
    };
    for &(lo, hi) in &windows {
        let mut a = lo;
        while a < hi {
            let b = (a + 1.0).min(hi);
            if a == 0.0 {
                let v = power_singular_vec(&|t| kernel_products(j - t), b, delta, PANEL_ABS_TOL, PANEL_REL_TOL)?;
                add6(&mut acc, v);
            } else if b == 0.0 {
                let v = power_singular_vec(&|t| kernel_products(j + t), -a, delta, PANEL_ABS_TOL, PANEL_REL_TOL)?;
                add6(&mut acc, v);
            } else {
                let f = |u: f64| {
                    let w = u.abs().powf(wpow);
                    let mut v = kernel_products(j - u);
                    v.iter_mut().for_each(|x| *x *= w);
                    v
                };
                add6(&mut acc, integrate_vec(&f, a, b, PANEL_ABS_TOL, PANEL_REL_TOL)?);
            }
            a = b;
        }
    }
    let far = |u: f64| {
        let w = u.abs().powf(wpow);
        let mut v = kernel_products_mean(j - u);
        v.iter_mut().for_each(|x| *x *= w);
        v
    };
    if windows.len() == 2 {
        add6(&mut acc, integrate_vec(&far, NEAR, j - NEAR, PANEL_ABS_TOL, PANEL_REL_TOL)?);
    }
    // Left tail u < -NEAR, written with v = -u.
    add6(&mut acc, integrate_to_infinity_vec(&|v: f64| far(-v), NEAR, PANEL_ABS_TOL, PANEL_REL_TOL)?);
    // Right tail u > j + NEAR, written with v = u - j.
    add6(&mut acc, integrate_to_infinity_vec(&|v: f64| far(j + v), NEAR, PANEL_ABS_TOL, PANEL_REL_TOL)?);
    Ok(acc)
}

type MomentKey = (u64, u64);

fn moment_cache() -> &'static Mutex<HashMap<MomentKey, [f64; 6]>> {
    static CACHE: OnceLock<Mutex<HashMap<MomentKey, [f64; 6]>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Weighted moments `Σ_ab(j)` for real `j`, in the order (00, 01, 02, 11, 12, 22).
///
/// For `j = 0` the moments are divided by `B_ξ(δ)`. Negative `j` uses
/// `Σ_ab(-j) = (-1)^{a+b} Σ_ab(j)`.
pub fn sigma_moments(j: f64, delta: f64) -> Result<[f64; 6]> {
    check_delta(delta, true)?;
    if !j.is_finite() {
        return Err(SeaperError::domain("j", "must be finite"));
    }
    let aj = j.abs();
    let key = (aj.to_bits(), delta.to_bits());
    let cached = moment_cache().lock().ok().and_then(|m| m.get(&key).copied());
    let mut s = match cached {
        Some(v) => v,
        None => {
            let mut v = raw_moments(aj, delta)?;
            let scale = if aj == 0.0 { 1.0 / b_pole_unchecked(delta) } else { aj.powf(2.0 * delta) };
            v.iter_mut().for_each(|x| *x *= scale);
            if let Ok(mut m) = moment_cache().lock() {
                m.insert(key, v);
            }
            v
        }
    };
    if j < 0.0 {
        s[1] = -s[1];
        s[4] = -s[4];
    }
    Ok(s)
}

/// Relative bias `B_j` of the periodogram at offset `c = N(φ_k - ξ)` from the pole.
pub fn relative_bias_offpole(c: f64, delta: f64) -> Result<f64> {
    if c == 0.0 {
        return Err(SeaperError::domain("c", "offset must be non-zero"));
    }
    check_delta(delta, true)?;
    Ok(sigma_moments(c, delta)?[0])
}

fn check_nonzero(j: i64) -> Result<()> {
    if j == 0 {
        return Err(SeaperError::domain("j", "must be non-zero"));
    }
    Ok(())
}

/// `Ḃ_j(δ)`, the δ-derivative bias constant of the periodogram (odd in `j`).
pub fn dot_b(j: i64, delta: f64) -> Result<f64> {
    check_nonzero(j)?;
    check_delta(delta, true)?;
    Ok(ordinate_constants(j, delta)?.b_dot)
}

/// `B̈_j(δ)`; at `j = 0` the pole form [`ddot_b_pole`].
pub fn ddot_b(j: i64, delta: f64) -> Result<f64> {
    check_delta(delta, true)?;
    Ok(ordinate_constants(j, delta)?.b_ddot)
}

/// `Ċ_j(δ)`, tending to `2π²/3`.
pub fn dot_c(j: i64, delta: f64) -> Result<f64> {
    check_delta(delta, true)?;
    Ok(ordinate_constants(j, delta)?.c_dot)
}

/// `σ̃_j²`, the standardized variance of the second δ-derivative of the periodogram,
/// tending to `16π⁴/15`.
pub fn sigma_tilde_sq(j: i64, delta: f64) -> Result<f64> {
    check_delta(delta, true)?;
    Ok(ordinate_constants(j, delta)?.sigma_tilde_sq)
}

/// Pole-ordinate constant `B̈_0(δ) = -(4δ/B_ξ) ∫_0^∞ u^{-2δ-1} (s_0²)'(u) du` by quadrature.
pub fn ddot_b_pole(delta: f64) -> Result<f64> {
    check_delta(delta, true)?;
    if delta == 0.0 {
        return Ok(0.0);
    }
    // (s_0²)'(u)/u = 2 s_0(u) s_1(u)/u, smooth at 0.
    let g = |u: f64| 2.0 * sinc_derivs(u)[0] * sinc1_over_x(u);
    let mut total = power_singular_vec(&|t| [g(t)], 1.0, delta, 1e-15, 1e-13)?[0];
    let mut a = 1.0;
    while a < NEAR {
        total += integrate_vec(&|u: f64| [g(u) * u.powf(-2.0 * delta)], a, a + 1.0, 1e-16, 1e-13)?[0];
        a += 1.0;
    }
    // Mean part of (s_0²)' is -1/(π² u³).
    total += -NEAR.powf(-2.0 * delta - 3.0) / (PI * PI * (2.0 * delta + 3.0));
    Ok(-4.0 * delta * total / b_pole_unchecked(delta))
}

/// Per-ordinate constants at grid offset `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrdinateConstants {
    pub b: f64,
    pub b_dot: f64,
    pub b_ddot: f64,
    pub c_dot: f64,
    pub sigma_tilde_sq: f64,
}

impl OrdinateConstants {
    fn from_moments(s: [f64; 6]) -> Self {
        let [s00, s01, s02, s11, s12, s22] = s;
        OrdinateConstants {
            b: s00,
            b_dot: 2.0 * s01,
            b_ddot: 2.0 * s02 + 2.0 * s11,
            c_dot: 2.0 * s11,
            sigma_tilde_sq: 2.0 * s02 * s02 + 4.0 * s11 * s11 + 2.0 * s00 * s22 + 8.0 * s01 * s12,
        }
    }

    fn as_array(&self) -> [f64; 5] {
        [self.b, self.b_dot, self.b_ddot, self.c_dot, self.sigma_tilde_sq]
    }

    fn from_array(a: [f64; 5]) -> Self {
        OrdinateConstants { b: a[0], b_dot: a[1], b_ddot: a[2], c_dot: a[3], sigma_tilde_sq: a[4] }
    }

    /// Values as `j → ∞`.
    pub fn limit() -> Self {
        OrdinateConstants { b: 1.0, b_dot: 0.0, b_ddot: 0.0, c_dot: c_dot_limit(), sigma_tilde_sq: sigma_tilde_limit() }
    }
}

/// All constants at integer offset `j`.
pub fn ordinate_constants(j: i64, delta: f64) -> Result<OrdinateConstants> {
    check_delta(delta, true)?;
    let s = sigma_moments(j as f64, delta)?;
    let mut c = OrdinateConstants::from_moments(s);
    if j == 0 {
        c.b = 1.0;
        c.b_dot = 0.0;
        c.b_ddot = ddot_b_pole(delta)?;
    }
    Ok(c)
}

/// Finite-sample constants of the ratio-distribution pole interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteSampleConstants {
    pub n: usize,
    pub delta: f64,
    pub mu2: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

impl FiniteSampleConstants {
    /// The `N → ∞` limits `(0, π²/3, 8π⁴/15)`.
    pub fn asymptotic(delta: f64) -> Self {
        FiniteSampleConstants {
            n: 0,
            delta,
            mu2: 0.0,
            sigma1_sq: PI * PI / 3.0,
            sigma2_sq: 8.0 * PI.powi(4) / 15.0,
        }
    }
}

/// Per-ordinate constants for every offset in `[-jmax, jmax]`: exact quadrature for
/// `|j| <= EXACT_CUTOFF`, and beyond that cubic interpolation of `j·(c_j - c_∞)` against
/// `log j` on nodes spaced a quarter octave apart.
pub struct ConstantsTable {
    delta: f64,
    exact: Vec<OrdinateConstants>,
    node_t: Vec<f64>,
    node_g: Vec<[f64; 5]>,
}

impl ConstantsTable {
    pub fn new(delta: f64, jmax: i64) -> Result<Self> {
        check_delta(delta, false)?;
        let cut = EXACT_CUTOFF.min(jmax.max(0));
        let exact: Vec<OrdinateConstants> =
            (0..=cut).into_par_iter().map(|j| ordinate_constants(j, delta)).collect::<Result<_>>()?;
        let mut nodes: Vec<i64> = Vec::new();
        if jmax > EXACT_CUTOFF {
            let mut k = 0;
            loop {
                let j = (EXACT_CUTOFF as f64 * 2f64.powf(k as f64 / 4.0)).round() as i64;
                if nodes.last() != Some(&j) {
                    nodes.push(j);
                }
                if j >= jmax && nodes.len() >= 4 {
                    break;
                }
                k += 1;
            }
        }
        let lim = OrdinateConstants::limit().as_array();
        let node_vals: Vec<[f64; 5]> = nodes
            .par_iter()
            .map(|&j| {
                let c = ordinate_constants(j, delta)?.as_array();
                let mut g = [0.0; 5];
                for i in 0..5 {
                    g[i] = (c[i] - lim[i]) * j as f64;
                }
                Ok(g)
            })
            .collect::<Result<_>>()?;
        Ok(ConstantsTable {
            delta,
            exact,
            node_t: nodes.iter().map(|&j| (j as f64).ln()).collect(),
            node_g: node_vals,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Constants at offset `j`.
    pub fn get(&self, j: i64) -> OrdinateConstants {
        let aj = j.unsigned_abs() as usize;
        let mut c = if aj < self.exact.len() {
            self.exact[aj]
        } else {
            self.interpolate(aj as f64)
        };
        if j < 0 {
            c.b_dot = -c.b_dot;
        }
        c
    }

    fn interpolate(&self, j: f64) -> OrdinateConstants {
        let t = j.ln();
        let m = self.node_t.len();
        assert!(m >= 4, "interpolation table has too few nodes");
        let pos = self.node_t.partition_point(|&x| x <= t);
        let start = pos.saturating_sub(2).min(m - 4);
        let xs = &self.node_t[start..start + 4];
        let mut g = [0.0; 5];
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (t - xs[b]) / (xs[a] - xs[b]);
                }
            }
            for i in 0..5 {
                g[i] += w * self.node_g[start + a][i];
            }
        }
        let lim = OrdinateConstants::limit().as_array();
        let mut out = [0.0; 5];
        for i in 0..5 {
            out[i] = lim[i] + g[i] / j;
        }
        OrdinateConstants::from_array(out)
    }
}

/// Pole location used for the grid of the tabulated constants.
pub const TABLE_XI: f64 = 1.0 / 7.0;

/// Finite-sample constants on the grid of a pole at `ξ = 1/7`.
pub fn finite_sample_constants(n: usize, delta: f64) -> Result<FiniteSampleConstants> {
    finite_sample_constants_at(n, delta, TABLE_XI)
}

/// Finite-sample constants summed over the grid offsets `J₁..J₂` of a pole at `xi`:
/// `μ₂ = N^{-1/2} Σ B̈_j`, `σ₁² = N^{-1} Σ (δ²Ḃ_j²/2 + B_j Ċ_j)`, `σ₂² = N^{-1} Σ σ̃_j²`.
pub fn finite_sample_constants_at(n: usize, delta: f64, xi: f64) -> Result<FiniteSampleConstants> {
    if n < 64 || n % 2 != 0 {
        return Err(SeaperError::InputShape(format!("n = {n} must be even and >= 64")));
    }
    check_delta(delta, false)?;
    let grid = build_grid(xi, n)?;
    let jmax = grid.j1.abs().max(grid.j2.abs());
    let table = ConstantsTable::new(delta, jmax)?;
    Ok(sum_constants(&table, n, grid.j1, grid.j2))
}

pub(crate) fn sum_constants(table: &ConstantsTable, n: usize, j1: i64, j2: i64) -> FiniteSampleConstants {
    let delta = table.delta();
    let mut s_bdd = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for j in j1..=j2 {
        let c = table.get(j);
        s_bdd += c.b_ddot;
        s1 += 0.5 * delta * delta * c.b_dot * c.b_dot + c.b * c.c_dot;
        s2 += c.sigma_tilde_sq;
    }
    let nf = n as f64;
    FiniteSampleConstants { n, delta, mu2: s_bdd / nf.sqrt(), sigma1_sq: s1 / nf, sigma2_sq: s2 / nf }
}
