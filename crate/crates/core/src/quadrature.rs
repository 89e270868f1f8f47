//! Adaptive Gauss–Kronrod (7/15) quadrature with vector-valued integrands, plus helpers for
//! integrable power singularities `|x - c|^{-2δ}` and semi-infinite ranges.

use crate::error::{Result, SeaperError};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;

/// One application of the 15-point Kronrod rule; returns the estimate and the
/// Gauss–Kronrod difference per component.
fn gk15<const K: usize, F: Fn(f64) -> [f64; K]>(f: &F, a: f64, b: f64) -> ([f64; K], [f64; K]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = [0.0; K];
    let mut rg = [0.0; K];
    for i in 0..K {
        rk[i] = WGK[7] * fc[i];
        rg[i] = WG[3] * fc[i];
    }
    for (idx, &x) in XGK.iter().take(7).enumerate() {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        for i in 0..K {
            let s = f1[i] + f2[i];
            rk[i] += WGK[idx] * s;
            if idx % 2 == 1 {
                rg[i] += WG[idx / 2] * s;
            }
        }
    }
    let mut err = [0.0; K];
    for i in 0..K {
        rk[i] *= h;
        err[i] = (rk[i] - rg[i] * h).abs();
    }
    (rk, err)
}

fn max_abs<const K: usize>(v: &[f64; K]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Integrates a vector-valued function on `[a, b]` by global adaptive bisection.
///
/// Converges when the summed error estimate drops below `max(abs_tol, rel_tol * |I|)` in
/// every component (infinity norm).
pub fn integrate_vec<const K: usize, F: Fn(f64) -> [f64; K]>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<[f64; K]> {
    if a == b {
        return Ok([0.0; K]);
    }
    let mut segs: Vec<(f64, f64, [f64; K], f64)> = Vec::with_capacity(64);
    let (v, e) = gk15(f, a, b);
    segs.push((a, b, v, max_abs(&e)));
    loop {
        let mut total = [0.0; K];
        let mut err = 0.0;
        let mut worst = 0;
        for (i, s) in segs.iter().enumerate() {
            for k in 0..K {
                total[k] += s.2[k];
            }
            err += s.3;
            if s.3 > segs[worst].3 {
                worst = i;
            }
        }
        if total.iter().any(|v| !v.is_finite()) {
            return Err(SeaperError::NumericFailure(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        let tol = abs_tol.max(rel_tol * max_abs(&total));
        if err <= tol {
            return Ok(total);
        }
        if segs.len() >= MAX_SEGMENTS {
            // Accept when the residual error is tiny relative to the value.
            if err <= 1e3 * tol {
                return Ok(total);
            }
            return Err(SeaperError::NumericFailure(format!(
                "quadrature on [{a}, {b}] did not converge: error {err:.3e} > tolerance {tol:.3e}"
            )));
        }
        let (lo, hi, _, _) = segs.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(total);
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        segs.push((lo, mid, v1, max_abs(&e1)));
        segs.push((mid, hi, v2, max_abs(&e2)));
    }
}

/// Scalar adaptive integral on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    integrate_vec(&|x| [f(x)], a, b, abs_tol, rel_tol).map(|v| v[0])
}

/// Fixed 15-point Kronrod rule on `[a, b]` for a vector integrand (no error control).
pub fn kronrod_fixed<const K: usize, F: Fn(f64) -> [f64; K]>(f: &F, a: f64, b: f64) -> [f64; K] {
    gk15(f, a, b).0
}

/// `∫_0^{len} t^{-2δ} g(t) dt` for smooth `g`, via `t = v^{1/(1-2δ)}`, which turns the
/// integrand into `g(v^p) / (1 - 2δ)` with `p = 1/(1-2δ)`.
pub fn power_singular_vec<const K: usize, F: Fn(f64) -> [f64; K]>(
    g: &F,
    len: f64,
    delta: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<[f64; K]> {
    let q = 1.0 - 2.0 * delta;
    let p = 1.0 / q;
    let vmax = len.powf(q);
    let mut r = integrate_vec(&|v: f64| g(v.powf(p)), 0.0, vmax, abs_tol, rel_tol)?;
    for x in r.iter_mut() {
        *x *= p;
    }
    Ok(r)
}

/// `∫_a^b s(λ) |λ - c|^{-2δ} dλ` with `a <= c <= b` and `s` smooth.
pub fn pole_integral<F: Fn(f64) -> f64>(s: &F, a: f64, c: f64, b: f64, delta: f64, tol: f64) -> Result<f64> {
    let mut total = 0.0;
    if c > a {
        total += power_singular_vec(&|t| [s(c - t)], c - a, delta, tol, tol)?[0];
    }
    if b > c {
        total += power_singular_vec(&|t| [s(c + t)], b - c, delta, tol, tol)?[0];
    }
    Ok(total)
}

/// `∫_a^∞ f(u) du` for `a > 0` via `u = a / s`, `s ∈ (0, 1]`.
pub fn integrate_to_infinity_vec<const K: usize, F: Fn(f64) -> [f64; K]>(
    f: &F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<[f64; K]> {
    if !(a > 0.0) {
        return Err(SeaperError::NumericFailure("semi-infinite range must start above 0".into()));
    }
    integrate_vec(
        &|s: f64| {
            if s == 0.0 {
                return [0.0; K];
            }
            let u = a / s;
            let mut v = f(u);
            let jac = a / (s * s);
            for x in v.iter_mut() {
                *x *= jac;
            }
            v
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let v = integrate(&|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-14, 1e-14).unwrap();
        assert_relative_eq!(v, (64.0 - 1.0) / 6.0 - 9.0, epsilon = 1e-12);
    }

    #[test]
    fn oscillatory() {
        let v = integrate(&|x| (7.0 * x).cos(), 0.0, PI, 1e-13, 1e-13).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn power_singularity() {
        // ∫_0^1 t^{-0.8} cos t dt checked against a series.
        let d = 0.4;
        let v = power_singular_vec(&|t: f64| [t.cos()], 1.0, d, 1e-14, 1e-14).unwrap()[0];
        let mut series = 0.0;
        let mut fact = 1.0;
        for k in 0..20 {
            if k > 0 {
                fact *= (2 * k - 1) as f64 * (2 * k) as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            series += sign / (fact * (2.0 * k as f64 + 1.0 - 2.0 * d));
        }
        assert_relative_eq!(v, series, max_relative = 1e-12);
    }

    #[test]
    fn semi_infinite() {
        let v = integrate_to_infinity_vec(&|u: f64| [u.powf(-2.6)], 2.0, 1e-15, 1e-13).unwrap()[0];
        assert_relative_eq!(v, 2f64.powf(-1.6) / 1.6, max_relative = 1e-10);
    }
}
