//! Helpers shared by the integration tests: a composite Gauss–Legendre rule written
//! independently of the library quadrature, sinc derivatives and small statistics helpers.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`, by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `∫_a^b f` with `panels` equal panels of the 20-point rule.
pub fn gl_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for &(x, w) in &rule {
            total += w * f(mid + 0.5 * h * x);
        }
    }
    total * 0.5 * h
}

/// `∫_0^len t^{-2δ} g(t) dt` via `t = v^{1/(1-2δ)}`, which makes the integrand smooth.
pub fn gl_power_singular<F: Fn(f64) -> f64>(g: F, len: f64, delta: f64, panels: usize) -> f64 {
    let e = 1.0 / (1.0 - 2.0 * delta);
    let vmax = len.powf(1.0 - 2.0 * delta);
    gl_panels(|v| e * g(v.powf(e)), 0.0, vmax, panels)
}

/// `sin(πx)/(πx)` and its first two derivatives, from closed forms away from 0 and Taylor
/// series near it.
pub fn sinc3(x: f64) -> [f64; 3] {
    if x.abs() < 1e-2 {
        let y = PI * x;
        let y2 = y * y;
        [
            1.0 - y2 / 6.0 + y2 * y2 / 120.0,
            PI * (-y / 3.0 + y * y2 / 30.0),
            PI * PI * (-1.0 / 3.0 + y2 / 10.0),
        ]
    } else {
        let (s, c) = (PI * x).sin_cos();
        [
            s / (PI * x),
            c / x - s / (PI * x * x),
            -PI * s / x - 2.0 * c / (x * x) + 2.0 * s / (PI * x * x * x),
        ]
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

/// Monte Carlo standard error of the mean.
pub fn mc_se(v: &[f64]) -> f64 {
    sd(v) / (v.len() as f64).sqrt()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
