//! Pole-aligned frequency grid, DFT, demodulated DFT and the demodulated periodogram.
//!
//! The transform convention is `Z(φ_j) = N^{-1/2} Σ_{t=0}^{N-1} x_t e^{-2πi t φ_j}` with
//! `φ_j = j/N`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SeaperError};

/// Frequency grid `λ_k = ξ + k/N`, `k = J₁..J₂`, aligned so that `λ_0 = ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemodGrid {
    pub xi: f64,
    pub n: usize,
    pub j0: i64,
    pub lambda_d: f64,
    pub j1: i64,
    pub j2: i64,
    pub lambdas: Vec<f64>,
}

impl DemodGrid {
    /// Number of ordinates `J₂ - J₁ + 1`.
    pub fn len(&self) -> usize {
        (self.j2 - self.j1 + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.j2 < self.j1
    }

    /// Grid offsets `k = J₁..J₂`.
    pub fn offsets(&self) -> impl Iterator<Item = i64> {
        self.j1..=self.j2
    }

    /// Position of offset `k` in the ordinate arrays.
    pub fn position(&self, k: i64) -> usize {
        (k - self.j1) as usize
    }
}

/// Nearest integer to `x > 0`, with exact halves rounded toward zero.
pub fn nearest_index(x: f64) -> i64 {
    (x - 0.5).ceil() as i64
}

/// Builds the pole-aligned grid for a sample of size `n`.
pub fn build_grid(xi: f64, n: usize) -> Result<DemodGrid> {
    check_length(n)?;
    if !(xi > 0.0 && xi < 0.5) {
        return Err(SeaperError::domain("xi", format!("{xi} not in (0, 0.5)")));
    }
    let nf = n as f64;
    let j0 = nearest_index(nf * xi);
    let m = (n / 2) as i64;
    let j1 = 1 - j0;
    let j2 = m - 1 - j0;
    if j1 > 0 || j2 < 0 || j1 > j2 {
        return Err(SeaperError::DegenerateGrid(format!(
            "pole at xi = {xi} has no admissible ordinate for N = {n}"
        )));
    }
    let lambda_d = -(j0 as f64 - nf * xi) / nf;
    let lambdas = (j1..=j2).map(|k| xi + k as f64 / nf).collect();
    Ok(DemodGrid { xi, n, j0, lambda_d, j1, j2, lambdas })
}

fn check_length(n: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(SeaperError::InputShape(format!("series length {n} must be even and >= 4")));
    }
    Ok(())
}

fn check_finite(x: &[f64]) -> Result<()> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(SeaperError::InputShape(format!("non-finite value at index {i}")));
    }
    Ok(())
}

/// Full length-`N` unitary transform of `x_t e^{-2πiλt}`.
pub(crate) fn shifted_transform(x: &[f64], lambda: f64) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = if lambda == 0.0 {
        x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
    } else {
        x.iter()
            .enumerate()
            .map(|(t, &v)| {
                // Reduce the phase modulo one cycle before scaling by 2π.
                let ph = (lambda * t as f64).rem_euclid(1.0);
                Complex64::from_polar(v, -2.0 * PI * ph)
            })
            .collect()
    };
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let s = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|z| *z *= s);
    buf
}

/// Unitary DFT ordinates `Z(φ_j)`, `j = 0..N/2`.
pub fn dft(x: &[f64]) -> Result<Vec<Complex64>> {
    check_length(x.len())?;
    check_finite(x)?;
    let mut z = shifted_transform(x, 0.0);
    z.truncate(x.len() / 2 + 1);
    Ok(z)
}

/// Demodulated DFT: the full length-`N` DFT of `x_t e^{-2πiλt}`.
pub fn ddft(x: &[f64], lambda: f64) -> Result<Vec<Complex64>> {
    check_length(x.len())?;
    check_finite(x)?;
    Ok(shifted_transform(x, lambda))
}

/// Periodogram ordinates `I₀(λ_k)` on a pole-aligned grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemodPeriodogram {
    pub grid: DemodGrid,
    pub values: Vec<f64>,
    pub ddft_re: Vec<f64>,
    pub ddft_im: Vec<f64>,
}

impl DemodPeriodogram {
    /// Ordinate at grid offset `k`.
    pub fn at(&self, k: i64) -> f64 {
        self.values[self.grid.position(k)]
    }
}

/// Subtracts the sample mean.
pub fn center(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

/// Mean-centres `x` and evaluates `|Z₀(ξ + k/N)|²` on the pole-aligned grid.
pub fn demod_periodogram(x: &[f64], xi: f64) -> Result<DemodPeriodogram> {
    check_length(x.len())?;
    check_finite(x)?;
    let grid = build_grid(xi, x.len())?;
    let z = shifted_transform(&center(x), grid.lambda_d);
    Ok(from_transform(grid, &z))
}

/// Re-indexes a demodulated transform onto `grid` (Fourier index `j = k + j0`).
pub(crate) fn from_transform(grid: DemodGrid, z: &[Complex64]) -> DemodPeriodogram {
    let len = grid.len();
    let mut values = Vec::with_capacity(len);
    let mut re = Vec::with_capacity(len);
    let mut im = Vec::with_capacity(len);
    for k in grid.offsets() {
        let c = z[(k + grid.j0) as usize];
        re.push(c.re);
        im.push(c.im);
        values.push(c.norm_sqr());
    }
    DemodPeriodogram { grid, values, ddft_re: re, ddft_im: im }
}

/// Ordinary periodogram `|Z(φ_j)|²` of the mean-centred series at `j = 1..N/2-1`.
pub fn fourier_periodogram(x: &[f64]) -> Result<Vec<f64>> {
    check_length(x.len())?;
    check_finite(x)?;
    let z = shifted_transform(&center(x), 0.0);
    Ok(z[1..x.len() / 2].iter().map(|c| c.norm_sqr()).collect())
}
