//! Exact simulation and the Monte Carlo harness: second moments of the draws, determinism,
//! summary bookkeeping and the averaged likelihood slices.

mod common;

use common::{mc_se, mean, sd};
use seaper::demodulation::fourier_periodogram;
use seaper::estimation::SearchConfig;
use seaper::likelihood::{method_loglik, Method, ModelOrder};
use seaper::simulation::{
    mean_likelihood_surface, run_mc, simulate, Estimator, McConfig, Simulator,
};
use seaper::spectral_models::{acv, sdf, GarmaParams};

fn lag_product(x: &[f64], h: usize) -> f64 {
    x.iter().zip(&x[h..]).map(|(a, b)| a * b).sum::<f64>() / (x.len() - h) as f64
}

#[test]
fn white_noise_sample_variance() {
    let n = 4096;
    let x = simulate(&GarmaParams::gegenbauer(0.2, 0.0).with_sigma2(2.5), n, 5).unwrap();
    let v = lag_product(&x, 0);
    assert!((v - 2.5).abs() < 4.0 * 2.5 / (n as f64).sqrt() * 2f64.sqrt(), "{v}");
}

#[test]
fn ar1_lag_one_autocorrelation() {
    let sim = Simulator::new(&GarmaParams::gegenbauer(0.2, 0.0).with_arma(0.6, 0.0), 1024).unwrap();
    let r: Vec<f64> = (0..200)
        .map(|s| {
            let x = sim.draw(s);
            let m = mean(&x);
            let c: Vec<f64> = x.iter().map(|v| v - m).collect();
            lag_product(&c, 1) * 1023.0 / (lag_product(&c, 0) * 1024.0)
        })
        .collect();
    // The lag-one estimator carries an O(1/N) downward bias, well inside 3 s.e. here.
    assert!((mean(&r) - 0.6).abs() < 3.0 * mc_se(&r) + 2.0 / 1024.0, "{} ± {}", mean(&r), mc_se(&r));
}

#[test]
fn sample_autocovariance_matches_acv() {
    let p = GarmaParams::gegenbauer(1.0 / 7.0, 0.4).with_arma(0.3, 0.2);
    let n = 32;
    let sim = Simulator::new(&p, n).unwrap();
    let gamma = acv(&p, n).unwrap().gamma;
    let draws: Vec<Vec<f64>> = (0..5000).map(|s| sim.draw(s)).collect();
    for h in 0..=5 {
        // Products at a fixed pair of times (0, h) are i.i.d. across draws.
        let prods: Vec<f64> = draws.iter().map(|x| x[0] * x[h]).collect();
        assert!((mean(&prods) - gamma[h]).abs() < 3.0 * mc_se(&prods), "lag {h}");
    }
}

#[test]
fn averaged_periodogram_matches_the_density() {
    let p = GarmaParams::gegenbauer(1.0 / 7.0, 0.3);
    let n = 512;
    let sim = Simulator::new(&p, n).unwrap();
    let mut avg = vec![0.0; n / 2 - 1];
    for s in 0..200 {
        for (a, v) in avg.iter_mut().zip(fourier_periodogram(&sim.draw(s)).unwrap()) {
            *a += v / 200.0;
        }
    }
    // Pool eight neighbouring ordinates to bring the Monte Carlo error well below the tolerance.
    let keep: Vec<(f64, f64)> = avg
        .iter()
        .enumerate()
        .map(|(i, a)| ((i + 1) as f64 / n as f64, *a))
        .filter(|(lam, _)| (lam - p.xi).abs() > 10.0 / n as f64)
        .map(|(lam, a)| (a, sdf(&p, lam).unwrap()))
        .collect();
    for chunk in keep.chunks(8) {
        let a: f64 = chunk.iter().map(|c| c.0).sum();
        let f: f64 = chunk.iter().map(|c| c.1).sum();
        assert!(((a - f) / f).abs() < 0.15, "{a} vs {f}");
    }
}

#[test]
fn invalid_models_are_rejected() {
    assert!(Simulator::new(&GarmaParams::gegenbauer(0.2, 0.3), 0).is_err());
    assert!(simulate(&GarmaParams::gegenbauer(0.2, 0.6), 16, 1).is_err());
}

#[test]
fn draws_are_deterministic_and_seed_dependent() {
    let p = GarmaParams::gegenbauer(0.3, 0.25);
    assert_eq!(simulate(&p, 256, 9).unwrap(), simulate(&p, 256, 9).unwrap());
    assert_ne!(simulate(&p, 256, 9).unwrap(), simulate(&p, 256, 10).unwrap());
}

fn small_config(reps: usize, seed: u64, estimators: Vec<Estimator>) -> McConfig {
    McConfig::new(GarmaParams::gegenbauer(1.0 / 7.0, 0.4), 256, reps, seed, estimators)
}

#[test]
fn mc_summary_is_reproducible_and_consistent() {
    let cfg = small_config(12, 5, vec![Estimator::Demodulated, Estimator::Whittle, Estimator::Gph]);
    let a = run_mc(&cfg).unwrap();
    let b = run_mc(&cfg).unwrap();
    assert_eq!(serde_json::to_string(&a.summary).unwrap(), serde_json::to_string(&b.summary).unwrap());
    assert_eq!(a.rows.len(), 36);
    assert_eq!(a.summary.estimators.len(), 3);
    for e in &a.summary.estimators {
        let d = e.delta.as_ref().unwrap();
        assert!(d.sd >= 0.0 && d.q025 <= d.q975);
        let vals: Vec<f64> =
            a.rows.iter().filter(|r| r.estimator == e.estimator).filter_map(|r| r.delta_hat).collect();
        assert!((d.mean - mean(&vals)).abs() < 1e-12);
        assert!((d.sd - sd(&vals)).abs() < 1e-12);
        assert!((d.bias - (d.mean - 0.4)).abs() < 1e-12);
    }
    let re = a.summary.relative_efficiency_delta.unwrap();
    let sd_of = |est: Estimator| a.summary.estimators.iter().find(|e| e.estimator == est).unwrap().delta.as_ref().unwrap().sd;
    assert!((re - (sd_of(Estimator::Demodulated) / sd_of(Estimator::Whittle)).powi(2)).abs() < 1e-12);
}

#[test]
fn replication_seeds_follow_the_documented_scheme() {
    let cfg = small_config(3, 40, vec![Estimator::Gph]);
    let out = run_mc(&cfg).unwrap();
    let sim = Simulator::new(&cfg.params_true, cfg.n).unwrap();
    let m = cfg.gph_m.unwrap_or(cfg.n / 8);
    for (r, row) in out.rows.iter().enumerate() {
        let x = sim.draw(40 ^ r as u64);
        let f = seaper::semiparametric::gph_pole_search(&x, m, None, None).unwrap();
        assert_eq!(row.delta_hat, Some(f.delta_hat));
    }
}

#[test]
fn disjoint_seeds_agree_statistically() {
    let run = |seed| run_mc(&small_config(40, seed, vec![Estimator::Demodulated])).unwrap();
    let (a, b) = (run(1 << 20), run(2 << 20));
    let (da, db) = (a.summary.estimators[0].delta.clone().unwrap(), b.summary.estimators[0].delta.clone().unwrap());
    let se = (da.mc_se.powi(2) + db.mc_se.powi(2)).sqrt();
    assert!((da.mean - db.mean).abs() < 4.0 * se);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small_config(0, 1, vec![Estimator::Demodulated]);
    assert!(run_mc(&cfg).is_err());
    cfg.replications = 2;
    cfg.estimators.clear();
    assert!(run_mc(&cfg).is_err());
}

#[test]
fn averaged_slices_peak_where_expected() {
    let n = 1024;
    let xi = 1.0 / 7.0;
    let mut cfg = McConfig::new(GarmaParams::gegenbauer(xi, 0.45), n, 16, 31, vec![Estimator::Demodulated]);
    cfg.order = ModelOrder::new(0, 0).unwrap();
    let xi_grid: Vec<f64> = (-16..=16).map(|i| xi + i as f64 / (4.0 * n as f64)).collect();
    let delta_grid: Vec<f64> = (0..=36).map(|i| 0.40 + 0.0025 * i as f64).collect();
    let s = mean_likelihood_surface(&cfg, &xi_grid, &delta_grid).unwrap();
    let argmax = |v: &[f64]| v.iter().enumerate().fold((0, f64::MIN), |a, (i, &x)| if x > a.1 { (i, x) } else { a }).0;
    let demod = s.curves.iter().find(|c| c.method == Method::Demodulated).unwrap();
    let whittle = s.curves.iter().find(|c| c.method == Method::Whittle).unwrap();
    assert!((xi_grid[argmax(&demod.xi_curve)] - xi).abs() <= 1.0 / n as f64);
    assert!(delta_grid[argmax(&whittle.delta_curve)] > 0.45);
    for c in [demod, whittle] {
        assert_eq!(c.replications_used, 16);
        assert!(c.xi_curve.iter().chain(&c.delta_curve).all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn single_replication_slices_are_not_averaged() {
    let n = 256;
    let cfg = McConfig::new(GarmaParams::gegenbauer(0.2, 0.3), n, 1, 77, vec![Estimator::Demodulated]);
    let xi_grid = [0.195, 0.2, 0.205];
    let delta_grid = [0.2, 0.3, 0.4];
    let s = mean_likelihood_surface(&cfg, &xi_grid, &delta_grid).unwrap();
    let x = simulate(&cfg.params_true, n, 77).unwrap();
    for c in &s.curves {
        let f = seaper::estimation::fit(&x, c.method, cfg.order, &SearchConfig::default()).unwrap();
        let raw: Vec<f64> =
            delta_grid.iter().map(|&d| method_loglik(&x, c.method, &GarmaParams { delta: d, ..f.params_hat }).unwrap()).collect();
        let mx = raw.iter().cloned().fold(f64::MIN, f64::max);
        for (got, r) in c.delta_curve.iter().zip(&raw) {
            assert!((got - (r - mx).exp()).abs() < 1e-12);
        }
        assert!(c.delta_curve.iter().any(|v| *v == 1.0));
    }
}
