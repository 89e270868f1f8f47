//! Spectral densities, autocovariances, the demodulated grid and periodogram bias constants.

mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use common::{gl_panels, gl_power_singular, rel_err, sinc3};
use seaper::bias_constants::*;
use seaper::demodulation::*;
use seaper::simulation::simulate;
use seaper::spectral_models::*;

/// Density written directly from its definition, with the Gegenbauer factor as a product of
/// sines.
fn sdf_direct(p: &GarmaParams, lam: f64) -> f64 {
    let c = (2.0 * PI * lam).cos();
    let arma = (1.0 + 2.0 * p.theta * c + p.theta * p.theta) / (1.0 - 2.0 * p.phi * c + p.phi * p.phi);
    let base = 4.0 * ((PI * (lam + p.xi)).sin() * (PI * (lam - p.xi)).sin()).abs();
    p.sigma2_eps * arma * base.powf(-2.0 * p.delta)
}

/// `2 ∫_0^{1/2} f(λ) cos(2πτλ) dλ`, splitting at the pole and removing its singularity.
fn acv_by_quadrature(p: &GarmaParams, tau: usize) -> f64 {
    let d2 = 2.0 * p.delta;
    let smooth = |lam: f64, d: f64| -> f64 {
        let c = (2.0 * PI * lam).cos();
        let arma = (1.0 + 2.0 * p.theta * c + p.theta * p.theta) / (1.0 - 2.0 * p.phi * c + p.phi * p.phi);
        let s = if d == 0.0 { PI } else { (PI * d).sin() / d };
        let rest = 4.0 * (PI * (lam + p.xi)).sin().abs() * s;
        p.sigma2_eps * arma * rest.powf(-d2) * (2.0 * PI * tau as f64 * lam).cos()
    };
    let left = gl_power_singular(|d| smooth(p.xi - d, d), p.xi, p.delta, 400);
    let right = gl_power_singular(|d| smooth(p.xi + d, d), 0.5 - p.xi, p.delta, 400);
    2.0 * (left + right)
}

#[test]
fn sdf_worked_values() {
    let wn = GarmaParams::gegenbauer(0.25, 0.0);
    assert_eq!(sdf(&wn, 0.1).unwrap(), 1.0);
    assert_eq!(sdf(&GarmaParams::gegenbauer(0.25, 0.2), 0.25).unwrap(), f64::INFINITY);
    let p = GarmaParams::gegenbauer(1.0 / 7.0, 0.45);
    let direct = (2.0 * (2.0 * PI * 0.3).cos() - 2.0 * (2.0 * PI / 7.0).cos()).abs().powf(-0.9);
    assert_relative_eq!(sdf(&p, 0.3).unwrap(), direct, max_relative = 1e-13);
}

#[test]
fn f_dagger_worked_values() {
    let p = GarmaParams::gegenbauer(0.25, 0.3);
    assert_relative_eq!(f_dagger(&p, 0.25).unwrap(), (4.0 * PI).powf(-0.6), max_relative = 1e-14);
    let p0 = GarmaParams::gegenbauer(0.2, 0.0).with_arma(0.4, -0.2);
    for i in 1..50 {
        let lam = i as f64 / 101.0;
        assert_relative_eq!(f_dagger(&p0, lam).unwrap(), sdf(&p0, lam).unwrap(), max_relative = 1e-14);
    }
}

#[test]
fn pole_factorisation_at_a_million_points() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000_000 {
        let p = GarmaParams {
            xi: rng.gen_range(0.01..0.49),
            delta: rng.gen_range(0.0..0.49),
            phi: rng.gen_range(-0.9..0.9),
            theta: rng.gen_range(-0.9..0.9),
            sigma2_eps: rng.gen_range(0.1..10.0),
        };
        let lam: f64 = rng.gen_range(-0.5..0.5);
        if lam == p.xi || lam == -p.xi {
            continue;
        }
        let f = sdf(&p, lam).unwrap();
        let g = f_dagger(&p, lam).unwrap() * (lam - p.xi).abs().powf(-2.0 * p.delta);
        worst = worst.max((g - f).abs() / f);
    }
    assert!(worst < 1e-12, "worst relative error {worst:e}");
}

proptest! {
    #[test]
    fn sdf_is_even(xi in 0.01f64..0.49, delta in 0.0f64..0.49, phi in -0.9f64..0.9,
                   theta in -0.9f64..0.9, lam in -0.5f64..0.5) {
        let p = GarmaParams { xi, delta, phi, theta, sigma2_eps: 1.3 };
        prop_assert_eq!(sdf(&p, lam).unwrap().to_bits(), sdf(&p, -lam).unwrap().to_bits());
    }

    #[test]
    fn sdf_matches_definition(xi in 0.01f64..0.49, delta in 0.0f64..0.49, phi in -0.9f64..0.9,
                              theta in -0.9f64..0.9, lam in 0.0f64..0.5) {
        let p = GarmaParams { xi, delta, phi, theta, sigma2_eps: 2.0 };
        prop_assume!((lam - xi).abs() > 1e-9);
        prop_assert!(rel_err(sdf(&p, lam).unwrap(), sdf_direct(&p, lam)) < 1e-12);
    }

    #[test]
    fn toeplitz_is_positive_definite(xi in 0.02f64..0.48, delta in 0.0f64..0.48,
                                     phi in -0.8f64..0.8, theta in -0.8f64..0.8) {
        let p = GarmaParams { xi, delta, phi, theta, sigma2_eps: 1.0 };
        let a = acv(&p, 64).unwrap();
        let eig = SymmetricEigen::new(a.toeplitz()).eigenvalues;
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min > -1e-8 * a.gamma[0], "min eigenvalue {}", min);
    }

    #[test]
    fn b_pole_closed_form_matches_quadrature(delta in 0.0f64..0.49) {
        prop_assert!(rel_err(b_pole(delta).unwrap(), b_pole_quadrature(delta).unwrap()) < 1e-8);
    }
}

#[test]
fn acv_matches_spectral_quadrature() {
    let mut worst: f64 = 0.0;
    for &xi in &[1.0 / 7.0, 1.0 / 12.0, 0.3] {
        for &delta in &[0.1, 0.3, 0.45] {
            let p = GarmaParams::gegenbauer(xi, delta);
            let g = acv(&p, 51).unwrap().gamma;
            for tau in 0..=50 {
                let q = acv_by_quadrature(&p, tau);
                let err = (g[tau] - q).abs() / q.abs().max(1e-3 * g[0]);
                worst = worst.max(err);
                assert!(err < 1e-5, "xi={xi} delta={delta} tau={tau}: {} vs {q}", g[tau]);
            }
        }
    }
    eprintln!("worst acv relative error {worst:e}");
}

#[test]
fn acv_with_arma_factors_matches_quadrature() {
    for &(phi, theta) in &[(0.5, 0.0), (0.0, -0.4), (-0.6, 0.3)] {
        let p = GarmaParams::gegenbauer(1.0 / 7.0, 0.3).with_arma(phi, theta).with_sigma2(1.7);
        let g = acv(&p, 21).unwrap().gamma;
        for &tau in &[0usize, 1, 7, 20] {
            let q = acv_by_quadrature(&p, tau);
            assert!((g[tau] - q).abs() < 1e-5 * q.abs().max(1e-3 * g[0]), "phi={phi} theta={theta} tau={tau}");
        }
    }
}

#[test]
fn acv_closed_forms() {
    let wn = acv(&GarmaParams::gegenbauer(0.2, 0.0).with_sigma2(2.0), 6).unwrap().gamma;
    assert_eq!(wn[0], 2.0);
    assert!(wn[1..].iter().all(|&v| v == 0.0));
    let ar = acv(&GarmaParams::gegenbauer(0.2, 0.0).with_arma(0.6, 0.0), 30).unwrap().gamma;
    for (tau, v) in ar.iter().enumerate() {
        assert_relative_eq!(*v, 0.6f64.powi(tau as i32) / (1.0 - 0.36), max_relative = 1e-12);
    }
    let ma = acv(&GarmaParams::gegenbauer(0.2, 0.0).with_arma(0.0, 0.5), 4).unwrap().gamma;
    assert_relative_eq!(ma[0], 1.25, epsilon = 1e-14);
    assert_relative_eq!(ma[1], 0.5, epsilon = 1e-14);
    assert_eq!(ma[2], 0.0);
}

#[test]
fn ma_coefficients_generating_function() {
    let psi = ma_coefficients(&GarmaParams::gegenbauer(0.2, 0.0), 5).unwrap();
    assert_eq!(psi, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    let psi = ma_coefficients(&GarmaParams::gegenbauer(0.25, 0.3), 3).unwrap();
    assert!(psi[1].abs() < 1e-15);
    let xi = 1.0 / 7.0;
    let psi = ma_coefficients(&GarmaParams::gegenbauer(xi, 0.4), 200).unwrap();
    let z: f64 = 0.5;
    let series: f64 = psi.iter().enumerate().map(|(j, c)| c * z.powi(j as i32)).sum();
    let eta = (2.0 * PI * xi).cos();
    assert_relative_eq!(series, (1.0 - 2.0 * eta * z + z * z).powf(-0.4), max_relative = 1e-8);
}

#[test]
fn parameter_validation() {
    assert!(GarmaParams::gegenbauer(0.5, 0.2).validate().is_err());
    assert!(GarmaParams::gegenbauer(0.2, 0.5).validate().is_err());
    assert!(GarmaParams::gegenbauer(0.2, 0.2).with_arma(1.0, 0.0).validate().is_err());
    assert!(GarmaParams::gegenbauer(0.2, 0.2).with_sigma2(0.0).validate().is_err());
    let json = r#"{"xi":0.2,"delta":0.1,"sigma2_eps":1.0,"extra":1}"#;
    assert!(serde_json::from_str::<GarmaParams>(json).is_err());
}

#[test]
fn grid_worked_examples() {
    let g = build_grid(1.0 / 7.0, 1024).unwrap();
    assert_eq!(g.lambdas[g.position(0)], 1.0 / 7.0);
    assert!(g.lambda_d.abs() <= 1.0 / 2048.0);
    for w in g.lambdas.windows(2) {
        assert_relative_eq!(w[1] - w[0], 1.0 / 1024.0, epsilon = 1e-15);
    }
    let x: Vec<f64> = (0..16).map(|t| (t as f64 * 0.7).sin()).collect();
    assert_eq!(demod_periodogram(&x, 0.15).unwrap().values.len(), 7);
}

#[test]
fn transform_identities() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let z = ddft(&x, 0.0).unwrap();
    let energy: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    assert_relative_eq!(energy, x.iter().map(|v| v * v).sum::<f64>(), max_relative = 1e-10);
    let d = dft(&x).unwrap();
    for (a, b) in d.iter().zip(&z) {
        assert_eq!(a, b);
    }
    let y: Vec<f64> = x.iter().map(|v| 2.5 * v).collect();
    for (a, b) in ddft(&y, 0.013).unwrap().iter().zip(ddft(&x, 0.013).unwrap()) {
        assert!((a - b * 2.5).norm() < 1e-12);
    }
}

#[test]
fn reindexing_identity() {
    let x = simulate(&GarmaParams::gegenbauer(0.21, 0.3), 256, 4).unwrap();
    let xi = 0.2113;
    let pg = demod_periodogram(&x, xi).unwrap();
    let z = ddft(&center(&x), pg.grid.lambda_d).unwrap();
    for k in pg.grid.offsets() {
        let direct = z[(k + pg.grid.j0) as usize].norm_sqr();
        assert!(rel_err(pg.at(k), direct) < 1e-10);
    }
}

#[test]
fn on_grid_pole_reproduces_the_periodogram() {
    let x = simulate(&GarmaParams::gegenbauer(0.25, 0.2), 128, 2).unwrap();
    let pg = demod_periodogram(&x, 0.25).unwrap();
    let fp = fourier_periodogram(&x).unwrap();
    for k in pg.grid.offsets() {
        let j = (k + pg.grid.j0) as usize;
        assert_relative_eq!(pg.at(k), fp[j - 1], max_relative = 1e-12);
    }
}

#[test]
fn off_grid_sinusoid_concentrates_on_the_pole_ordinate() {
    let xi = 0.1234;
    let x: Vec<f64> = (0..512).map(|t| (2.0 * PI * xi * t as f64).cos()).collect();
    let pg = demod_periodogram(&x, xi).unwrap();
    let top = pg.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(pg.at(0), top);
    assert!(pg.at(0) > 100.0 * pg.at(1).max(pg.at(-1)));
}

#[test]
fn white_noise_periodogram_mean() {
    let x = simulate(&GarmaParams::gegenbauer(0.2, 0.0).with_sigma2(2.0), 4096, 8).unwrap();
    let pg = demod_periodogram(&x, 0.1371).unwrap();
    let m = common::mean(&pg.values);
    assert!((m - 2.0).abs() < 4.0 * 2.0 / (pg.values.len() as f64).sqrt(), "mean {m}");
}

#[test]
fn b_pole_limits_and_monotonicity() {
    assert_relative_eq!(b_pole(1e-9).unwrap(), 1.0, epsilon = 1e-6);
    let vals: Vec<f64> = (0..50).map(|i| b_pole(i as f64 * 0.01).unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]));
    assert!(b_pole(0.5).is_err() && b_pole(-0.1).is_err());
}

/// `(2/π²) ∫_0^∞ sin²(πu) u^{-2δ-2} du = 2 ∫_0^∞ s_0(u)² u^{-2δ} du` with the test-side rule.
fn b_pole_oracle(delta: f64) -> f64 {
    let u_max = 2000.0;
    let f = |u: f64| sinc3(u)[0].powi(2);
    let near = gl_power_singular(f, 1.0, delta, 40);
    let far = gl_panels(|u| f(u) * u.powf(-2.0 * delta), 1.0, u_max, 4000);
    let tail = u_max.powf(-2.0 * delta - 1.0) / (2.0 * PI * PI * (2.0 * delta + 1.0));
    2.0 * (near + far + tail)
}

#[test]
fn b_pole_against_independent_quadrature() {
    for &d in &[0.05, 0.25, 0.45] {
        assert!(rel_err(b_pole(d).unwrap(), b_pole_oracle(d)) < 1e-8, "delta {d}");
    }
}

/// `|j|^{2δ} ∫ |u|^{-2δ} s_a(j-u) s_b(j-u) du` with the test-side rule.
fn moment_oracle(j: f64, delta: f64, a: usize, b: usize) -> f64 {
    let k = |u: f64| {
        let s = sinc3(j - u);
        s[a] * s[b]
    };
    let u_max = 4000.0;
    let near = gl_power_singular(k, 1.0, delta, 60) + gl_power_singular(|t| k(-t), 1.0, delta, 60);
    let w = |u: f64| u.abs().powf(-2.0 * delta);
    let far = gl_panels(|u| k(u) * w(u), 1.0, u_max, 8000) + gl_panels(|u| k(u) * w(u), -u_max, -1.0, 8000);
    // Leading phase-averaged term of s_a s_b at large |x|, as a multiple of 1/x².
    let mean_coeff = match (a, b) {
        (0, 0) => 1.0 / (2.0 * PI * PI),
        (1, 1) => 0.5,
        (0, 2) | (2, 0) => -0.5,
        _ => 0.0,
    };
    let tail = 2.0 * mean_coeff * u_max.powf(-2.0 * delta - 1.0) / (2.0 * delta + 1.0);
    j.abs().powf(2.0 * delta) * (near + far + tail)
}

#[test]
fn relative_bias_off_the_pole() {
    assert!(rel_err(relative_bias_offpole(1.0, 0.4).unwrap(), moment_oracle(1.0, 0.4, 0, 0)) < 1e-6);
    assert!((relative_bias_offpole(100.0, 0.3).unwrap() - 1.0).abs() < 0.1);
    for c in [1.0, 2.0, 5.0] {
        assert_relative_eq!(relative_bias_offpole(c, 0.0).unwrap(), 1.0, epsilon = 1e-6);
    }
}

#[test]
fn derivative_constants_against_independent_quadrature() {
    let b_dd = ddot_b(1, 0.4).unwrap();
    let oracle = 2.0 * moment_oracle(1.0, 0.4, 0, 2) + 2.0 * moment_oracle(1.0, 0.4, 1, 1);
    assert!((b_dd - oracle).abs() < 1e-6 * oracle.abs().max(1.0), "{b_dd} vs {oracle}");
    let c_d = dot_c(1, 0.45).unwrap();
    assert!(rel_err(c_d, 2.0 * moment_oracle(1.0, 0.45, 1, 1)) < 1e-6);
}

#[test]
fn derivative_constant_symmetries_and_decay() {
    for j in 1..=10 {
        assert_relative_eq!(dot_b(-j, 0.3).unwrap(), -dot_b(j, 0.3).unwrap(), epsilon = 1e-14);
        assert_relative_eq!(ddot_b(-j, 0.3).unwrap(), ddot_b(j, 0.3).unwrap(), epsilon = 1e-14);
        assert_relative_eq!(dot_c(-j, 0.3).unwrap(), dot_c(j, 0.3).unwrap(), epsilon = 1e-14);
    }
    let jb: Vec<f64> = (10..=100).step_by(10).map(|j| dot_b(j, 0.3).unwrap().abs() * j as f64).collect();
    assert!(jb.iter().all(|v| *v < 2.0 * jb[0]));
    // The pole region contributes a tail of order j^(2δ-2), which dominates j^(-2).
    let jj: Vec<f64> =
        (20..=100).step_by(10).map(|j| ddot_b(j, 0.3).unwrap().abs() * (j as f64).powf(1.4)).collect();
    let (lo, hi) = jj.iter().fold((f64::MAX, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi < 1.1 * lo, "{jj:?}");
    // Both constants carry a factor δ, so they vanish linearly as δ → 0.
    assert!(dot_b(3, 1e-9).unwrap().abs() < 1e-5);
    assert!(ddot_b(3, 1e-9).unwrap().abs() < 1e-5);
    assert!(rel_err(dot_b(3, 1e-3).unwrap() / 1e-3, dot_b(3, 1e-2).unwrap() / 1e-2) < 0.05);
    assert!(rel_err(ddot_b(3, 1e-3).unwrap() / 1e-3, ddot_b(3, 1e-2).unwrap() / 1e-2) < 0.05);
    assert!(dot_b(0, 0.3).is_err());
}

#[test]
fn large_offset_limits() {
    assert!(rel_err(dot_c(10_000, 0.3).unwrap(), 2.0 * PI * PI / 3.0) < 0.01);
    assert!(rel_err(sigma_tilde_sq(10_000, 0.3).unwrap(), 16.0 * PI.powi(4) / 15.0) < 0.02);
    for j in [1, 4, 17] {
        assert!(rel_err(dot_c(j, 0.0).unwrap(), 2.0 * PI * PI / 3.0) < 1e-6);
    }
}

#[test]
fn finite_sample_constants_tend_to_their_limits() {
    for &d in &[0.3, 0.45] {
        let k = finite_sample_constants(1 << 20, d).unwrap();
        assert!(rel_err(k.sigma1_sq, PI * PI / 3.0) < 0.01);
        assert!(rel_err(k.sigma2_sq, 8.0 * PI.powi(4) / 15.0) < 0.01);
    }
}

#[test]
fn quadratures_are_deterministic() {
    assert_eq!(ddot_b_pole(0.37).unwrap().to_bits(), ddot_b_pole(0.37).unwrap().to_bits());
    assert_eq!(b_pole_quadrature(0.21).unwrap().to_bits(), b_pole_quadrature(0.21).unwrap().to_bits());
}
