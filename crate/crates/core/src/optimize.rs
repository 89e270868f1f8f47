//! Thin maximisation wrappers over `argmin`: Brent and golden-section search on an interval,
//! and Nelder–Mead on box-constrained parameters through a logistic map.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::brent::BrentOpt;
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use argmin::solver::neldermead::NelderMead;

use crate::error::{Result, SeaperError};

/// Result of a maximisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Maximum<P> {
    pub x: P,
    pub value: f64,
    pub iterations: u64,
    pub converged: bool,
}

struct Negated<F>(F);

impl<F: Fn(f64) -> f64> CostFunction for Negated<F> {
    type Param = f64;
    type Output = f64;
    fn cost(&self, x: &f64) -> std::result::Result<f64, ArgminError> {
        let v = (self.0)(*x);
        Ok(if v.is_nan() { f64::INFINITY } else { -v })
    }
}

struct NegatedVec<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for NegatedVec<F> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, ArgminError> {
        let v = (self.0)(x);
        Ok(if v.is_nan() { f64::INFINITY } else { -v })
    }
}

fn wrap(e: ArgminError) -> SeaperError {
    SeaperError::NumericFailure(format!("optimiser error: {e}"))
}

/// Maximises `f` on `[lo, hi]` with Brent's method. The endpoints are also evaluated so a
/// boundary maximum is returned exactly.
pub fn brent_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64, max_iter: u64) -> Result<Maximum<f64>> {
    let solver = BrentOpt::new(lo, hi).set_tolerance(1e-10, tol);
    let res = Executor::new(Negated(&f), solver)
        .configure(|s| s.max_iters(max_iter))
        .timer(false)
        .run()
        .map_err(wrap)?;
    let st = res.state();
    let mut best = Maximum {
        x: *st.get_best_param().unwrap_or(&lo),
        value: -st.get_best_cost(),
        iterations: st.get_iter(),
        converged: st.get_iter() < max_iter,
    };
    for x in [lo, hi] {
        let v = f(x);
        if v > best.value {
            best.x = x;
            best.value = v;
        }
    }
    Ok(best)
}

/// Golden-section maximisation of `f` on `[lo, hi]`, stopping once the bracket is shorter
/// than about `tol`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64, max_iter: u64) -> Result<Maximum<f64>> {
    let rel = tol / (lo.abs() + hi.abs()).max(f64::MIN_POSITIVE);
    let solver = GoldenSectionSearch::new(lo, hi).and_then(|s| s.with_tolerance(rel)).map_err(wrap)?;
    let res = Executor::new(Negated(&f), solver)
        .configure(|s| s.param(0.5 * (lo + hi)).max_iters(max_iter))
        .timer(false)
        .run()
        .map_err(wrap)?;
    let st = res.state();
    let x = *st.get_best_param().unwrap_or(&lo);
    Ok(Maximum { x, value: -st.get_best_cost(), iterations: st.get_iter(), converged: st.get_iter() < max_iter })
}

/// Nelder–Mead maximisation from `x0` with initial simplex offsets `step` along each axis.
pub fn simplex_max<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    step: f64,
    tol: f64,
    max_iter: u64,
) -> Result<Maximum<Vec<f64>>> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(tol).map_err(wrap)?;
    let res = Executor::new(NegatedVec(&f), solver)
        .configure(|s| s.max_iters(max_iter))
        .timer(false)
        .run()
        .map_err(wrap)?;
    let st = res.state();
    let x = st.get_best_param().cloned().unwrap_or_else(|| x0.to_vec());
    Ok(Maximum { value: -st.get_best_cost(), x, iterations: st.get_iter(), converged: st.get_iter() < max_iter })
}

/// Maps the real line onto `(lo, hi)`.
pub fn logistic(z: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / (1.0 + (-z).exp())
}

/// Inverse of [`logistic`].
pub fn logit(x: f64, lo: f64, hi: f64) -> f64 {
    let p = (x - lo) / (hi - lo);
    (p / (1.0 - p)).ln()
}
