use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::linalg::{lstsq, median};
use super::Variant;
use crate::error::{Error, Result};

/// A regressor column built from standardized features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Main(usize),
    Interaction(usize, usize),
}

impl Term {
    fn eval(self, z: &[f64]) -> f64 {
        match self {
            Term::Main(i) => z[i],
            Term::Interaction(i, j) => z[i] * z[j],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub terms: Vec<Term>,
    pub coefficients: Vec<f64>,
    /// Robust fits only: number of reweighting passes performed.
    pub iterations: usize,
}

impl LinearModel {
    pub fn predict(&self, z: &[f64]) -> f64 {
        self.intercept
            + self
                .terms
                .iter()
                .zip(&self.coefficients)
                .map(|(t, c)| c * t.eval(z))
                .sum::<f64>()
    }
}

pub(crate) const BISQUARE_TUNING: f64 = 4.685;
pub(crate) const ROBUST_MAX_ITER: usize = 50;
pub(crate) const ROBUST_TOL: f64 = 1e-8;
pub(crate) const P_ENTER: f64 = 0.05;
pub(crate) const P_REMOVE: f64 = 0.10;
pub(crate) const STEPWISE_MAX_STEPS: usize = 200;

fn main_terms(p: usize) -> Vec<Term> {
    (0..p).map(Term::Main).collect()
}

fn all_terms(p: usize) -> Vec<Term> {
    let mut t = main_terms(p);
    for i in 0..p {
        for j in i + 1..p {
            t.push(Term::Interaction(i, j));
        }
    }
    t
}

fn design(z: &[Vec<f64>], terms: &[Term]) -> DMatrix<f64> {
    DMatrix::from_fn(z.len(), terms.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            terms[j - 1].eval(&z[i])
        }
    })
}

fn into_model(terms: Vec<Term>, beta: &DVector<f64>, iterations: usize) -> LinearModel {
    LinearModel {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        terms,
        iterations,
    }
}

pub(crate) fn fit_linear(z: &[Vec<f64>], y: &[f64], variant: Variant) -> Result<LinearModel> {
    let p = z[0].len();
    let yv = DVector::from_column_slice(y);
    match variant {
        Variant::Linear => {
            let terms = main_terms(p);
            let beta = lstsq(&design(z, &terms), &yv)?;
            Ok(into_model(terms, &beta, 0))
        }
        Variant::InteractionsLinear => {
            let terms = all_terms(p);
            let beta = lstsq(&design(z, &terms), &yv)?;
            Ok(into_model(terms, &beta, 0))
        }
        Variant::RobustLinear => {
            let terms = main_terms(p);
            let (beta, it) = robust_bisquare(&design(z, &terms), &yv)?;
            Ok(into_model(terms, &beta, it))
        }
        Variant::StepwiseLinear => stepwise(z, &yv),
        other => Err(Error::Config(format!("{other} is not a linear model"))),
    }
}

/// Iteratively reweighted least squares with Tukey bisquare weights.
pub(crate) fn robust_bisquare(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, usize)> {
    let mut beta = lstsq(a, y)?;
    let mut iterations = 0;
    for it in 1..=ROBUST_MAX_ITER {
        iterations = it;
        let r = y - a * &beta;
        let abs: Vec<f64> = r.iter().map(|v| v.abs()).collect();
        let s = median(&abs) / 0.6745;
        if !(s > 0.0) {
            break;
        }
        let w: Vec<f64> = r
            .iter()
            .map(|ri| {
                let u = ri / (BISQUARE_TUNING * s);
                if u.abs() < 1.0 {
                    (1.0 - u * u).powi(2)
                } else {
                    0.0
                }
            })
            .collect();
        let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let aw = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * sw[i]);
        let yw = DVector::from_fn(y.len(), |i, _| y[i] * sw[i]);
        let next = lstsq(&aw, &yw)?;
        let delta = (&next - &beta).amax();
        beta = next;
        if delta < ROBUST_TOL {
            break;
        }
    }
    Ok((beta, iterations))
}

fn rss(z: &[Vec<f64>], y: &DVector<f64>, terms: &[Term]) -> Result<f64> {
    let a = design(z, terms);
    let beta = lstsq(&a, y)?;
    Ok((y - a * beta).norm_squared())
}

/// p-value of the partial F test between nested models differing by one term.
fn partial_f_pvalue(rss_small: f64, rss_big: f64, df_resid: usize) -> f64 {
    if df_resid == 0 {
        return 1.0;
    }
    let num = (rss_small - rss_big).max(0.0);
    let scale = rss_small.max(1e-300);
    if num <= 1e-14 * scale {
        return 1.0;
    }
    let den = rss_big / df_resid as f64;
    if den <= 1e-300 {
        return 0.0;
    }
    let f = num / den;
    match FisherSnedecor::new(1.0, df_resid as f64) {
        Ok(d) => 1.0 - d.cdf(f),
        Err(_) => 1.0,
    }
}

fn term_index(p: usize, t: Term) -> usize {
    match t {
        Term::Main(i) => i,
        // Row-major position of (i, j) among the pairs after the p main terms.
        Term::Interaction(i, j) => p + i * p - i * (i + 1) / 2 + (j - i - 1),
    }
}

/// Forward/backward selection from the constant model over main effects and
/// pairwise interactions. Terms are kept in candidate order so ties go to the
/// lower index.
fn stepwise(z: &[Vec<f64>], y: &DVector<f64>) -> Result<LinearModel> {
    let n = z.len();
    let p = z[0].len();
    let universe = all_terms(p);
    let mut current: Vec<Term> = Vec::new();
    let mut current_rss = rss(z, y, &current)?;
    let mut seen: Vec<Vec<Term>> = vec![current.clone()];
    for _ in 0..STEPWISE_MAX_STEPS {
        let k_next = current.len() + 2;
        let mut best_add: Option<(f64, Term, f64)> = None;
        if n > k_next {
            for &t in universe.iter().filter(|&&t| !current.contains(&t)) {
                let mut trial = current.clone();
                trial.push(t);
                let r = rss(z, y, &trial)?;
                let pv = partial_f_pvalue(current_rss, r, n - k_next);
                if best_add.map_or(true, |(bp, _, _)| pv < bp) {
                    best_add = Some((pv, t, r));
                }
            }
        }
        let mut step: Option<(Vec<Term>, f64)> = None;
        if let Some((pv, t, r)) = best_add {
            if pv < P_ENTER {
                let mut next = current.clone();
                next.push(t);
                step = Some((next, r));
            }
        }
        if step.is_none() && !current.is_empty() {
            let df = n.saturating_sub(current.len() + 1);
            let mut worst: Option<(f64, usize, f64)> = None;
            for idx in 0..current.len() {
                let mut trial = current.clone();
                trial.remove(idx);
                let r = rss(z, y, &trial)?;
                let pv = partial_f_pvalue(r, current_rss, df);
                if worst.map_or(true, |(wp, _, _)| pv > wp) {
                    worst = Some((pv, idx, r));
                }
            }
            if let Some((pv, idx, r)) = worst {
                if pv > P_REMOVE {
                    let mut next = current.clone();
                    next.remove(idx);
                    step = Some((next, r));
                }
            }
        }
        match step {
            Some((next, r)) => {
                let mut next = next;
                next.sort_by_key(|&t| term_index(p, t));
                if seen.contains(&next) {
                    break;
                }
                seen.push(next.clone());
                current = next;
                current_rss = r;
            }
            None => break,
        }
    }
    let beta = lstsq(&design(z, &current), y)?;
    Ok(into_model(current, &beta, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planted(n: usize, p: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y = x.iter().map(|r| 0.5 + 1.5 * r[0] - 0.7 * r[1]).collect();
        (x, y)
    }

    #[test]
    fn ols_recovers_exact_model() {
        let (x, y) = planted(30, 3, 1);
        let m = fit_linear(&x, &y, Variant::Linear).unwrap();
        assert!((m.intercept - 0.5).abs() < 1e-10);
        assert!((m.coefficients[0] - 1.5).abs() < 1e-10);
        assert!((m.coefficients[1] + 0.7).abs() < 1e-10);
        assert!(m.coefficients[2].abs() < 1e-10);
    }

    #[test]
    fn interactions_capture_products() {
        let (x, _) = planted(40, 3, 2);
        let y: Vec<f64> = x.iter().map(|r| 1.0 + r[0] * r[2]).collect();
        let m = fit_linear(&x, &y, Variant::InteractionsLinear).unwrap();
        assert_eq!(m.terms.len(), 3 + 3);
        for (r, yi) in x.iter().zip(&y) {
            assert!((m.predict(r) - yi).abs() < 1e-9);
        }
    }

    #[test]
    fn robust_ignores_gross_outliers() {
        let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 10.0]).collect();
        let mut y: Vec<f64> = xs.iter().map(|r| 1.0 + 2.0 * r[0]).collect();
        for i in (0..50).step_by(5) {
            y[i] += 100.0;
        }
        let m = fit_linear(&xs, &y, Variant::RobustLinear).unwrap();
        assert!(
            (m.coefficients[0] - 2.0).abs() < 0.05,
            "{:?}",
            m.coefficients
        );
        let ols = fit_linear(&xs, &y, Variant::Linear).unwrap();
        assert!((ols.intercept - 1.0).abs() > 5.0);
    }

    #[test]
    fn stepwise_selects_active_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| 2.0 * r[1] - r[3] + 0.01 * rng.random_range(-1.0..1.0))
            .collect();
        let m = fit_linear(&x, &y, Variant::StepwiseLinear).unwrap();
        assert!(m.terms.contains(&Term::Main(1)));
        assert!(m.terms.contains(&Term::Main(3)));
        assert!(m.terms.len() <= 4, "{:?}", m.terms);
    }

    #[test]
    fn term_indices_follow_candidate_order() {
        let all = all_terms(5);
        for (k, t) in all.iter().enumerate() {
            assert_eq!(term_index(5, *t), k);
        }
    }

    #[test]
    fn pvalue_edges() {
        assert_eq!(partial_f_pvalue(1.0, 1.0, 10), 1.0);
        assert_eq!(partial_f_pvalue(1.0, 0.0, 10), 0.0);
        let p = partial_f_pvalue(2.0, 1.0, 10);
        assert!(p > 0.0 && p < 0.05);
    }
}
