use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::linalg::{mean, sq_dist, std_dev};
use super::optimize::nelder_mead;
use super::{RegressorSpec, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GprKernel {
    SquaredExponential,
    Matern52,
    Exponential,
    RationalQuadratic,
}

impl GprKernel {
    /// Covariance at squared distance `r2`.
    pub fn eval(self, r2: f64, ell: f64, sigma_f: f64, shape: f64) -> f64 {
        let sf2 = sigma_f * sigma_f;
        match self {
            GprKernel::SquaredExponential => sf2 * (-0.5 * r2 / (ell * ell)).exp(),
            GprKernel::Matern52 => {
                let a = 5f64.sqrt() * r2.sqrt() / ell;
                sf2 * (1.0 + a + a * a / 3.0) * (-a).exp()
            }
            GprKernel::Exponential => sf2 * (-r2.sqrt() / ell).exp(),
            GprKernel::RationalQuadratic => {
                sf2 * (1.0 + r2 / (2.0 * shape * ell * ell)).powf(-shape)
            }
        }
    }

    fn from_variant(v: Variant) -> Result<Self> {
        Ok(match v {
            Variant::SquaredExponentialGpr => GprKernel::SquaredExponential,
            Variant::Matern52Gpr => GprKernel::Matern52,
            Variant::ExponentialGpr => GprKernel::Exponential,
            Variant::RationalQuadraticGpr => GprKernel::RationalQuadratic,
            other => return Err(Error::Config(format!("{other} is not a GPR model"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprHyper {
    pub length_scale: f64,
    pub sigma_f: f64,
    pub sigma_n: f64,
    /// Rational-quadratic shape; 1 and unused for the other kernels.
    pub shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GprModel {
    pub kernel: GprKernel,
    pub hyper: GprHyper,
    pub y_mean: f64,
    pub jitter: f64,
    pub x_train: Vec<Vec<f64>>,
    /// (K + (σn² + jitter) I)⁻¹ (y − mean).
    pub weights: Vec<f64>,
    pub neg_log_likelihood: f64,
}

impl GprModel {
    pub fn predict(&self, z: &[f64]) -> f64 {
        let h = &self.hyper;
        self.y_mean
            + self
                .x_train
                .iter()
                .zip(&self.weights)
                .map(|(xi, w)| {
                    w * self
                        .kernel
                        .eval(sq_dist(xi, z), h.length_scale, h.sigma_f, h.shape)
                })
                .sum::<f64>()
    }
}

pub(crate) const JITTER_REL: f64 = 1e-10;
pub(crate) const JITTER_MAX_REL: f64 = 1e-4;
pub(crate) const DEFAULT_MAX_EVALS: usize = 1000;
/// Box on log-hyperparameters relative to their initial values.
const LOG_SPAN: f64 = 7.0;

struct Factored {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

fn covariance(d2: &[Vec<f64>], kernel: GprKernel, h: &GprHyper) -> DMatrix<f64> {
    let n = d2.len();
    DMatrix::from_fn(n, n, |i, j| {
        kernel.eval(d2[i][j], h.length_scale, h.sigma_f, h.shape)
    })
}

fn factor(d2: &[Vec<f64>], kernel: GprKernel, h: &GprHyper) -> Result<Factored> {
    let base = covariance(d2, kernel, h);
    let sf2 = h.sigma_f * h.sigma_f;
    let noise = h.sigma_n * h.sigma_n;
    let mut jitter = JITTER_REL * sf2;
    loop {
        let mut a = base.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += noise + jitter;
        }
        if let Some(chol) = a.cholesky() {
            return Ok(Factored { chol, jitter });
        }
        jitter *= 10.0;
        if jitter > JITTER_MAX_REL * sf2 * (1.0 + 1e-9) {
            return Err(Error::Conditioning(format!(
                "covariance not positive definite with jitter up to {:.1e}",
                JITTER_MAX_REL * sf2
            )));
        }
    }
}

fn neg_log_likelihood(f: &Factored, r: &DVector<f64>) -> f64 {
    let alpha = f.chol.solve(r);
    let logdet: f64 = f
        .chol
        .l_dirty()
        .diagonal()
        .iter()
        .take(r.len())
        .map(|d| d.ln())
        .sum();
    0.5 * r.dot(&alpha) + logdet + 0.5 * r.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

fn mean_pairwise_distance(z: &[Vec<f64>]) -> f64 {
    let n = z.len();
    let mut sum = 0.0;
    let mut cnt = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            sum += sq_dist(&z[i], &z[j]).sqrt();
            cnt += 1;
        }
    }
    if cnt == 0 || !(sum > 0.0) {
        1.0
    } else {
        sum / cnt as f64
    }
}

pub(crate) fn fit_gpr(z: &[Vec<f64>], y: &[f64], spec: &RegressorSpec) -> Result<GprModel> {
    let kernel = GprKernel::from_variant(spec.variant)?;
    let fixed_noise = match spec.get("sigma_n") {
        Some(v) if v > 0.0 => Some(v),
        Some(v) => return Err(Error::Config(format!("sigma_n must be positive, got {v}"))),
        None => None,
    };
    let max_evals = match spec.get("max_evals") {
        Some(v) if v >= 1.0 => v as usize,
        Some(v) => return Err(Error::Config(format!("max_evals must be ≥ 1, got {v}"))),
        None => DEFAULT_MAX_EVALS,
    };
    let y_mean = mean(y);
    let r = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
    let sy = std_dev(y).max(1e-12);
    let d2: Vec<Vec<f64>> = z
        .iter()
        .map(|u| z.iter().map(|v| sq_dist(u, v)).collect())
        .collect();

    let init = GprHyper {
        length_scale: mean_pairwise_distance(z),
        sigma_f: sy,
        sigma_n: fixed_noise.unwrap_or(sy / 2f64.sqrt()),
        shape: 1.0,
    };
    // Free log-parameters in order: ℓ, σf, [σn], [α].
    let mut x0 = vec![init.length_scale.ln(), init.sigma_f.ln()];
    if fixed_noise.is_none() {
        x0.push(init.sigma_n.ln());
    }
    if kernel == GprKernel::RationalQuadratic {
        x0.push(0.0);
    }
    let lo: Vec<f64> = x0.iter().map(|v| v - LOG_SPAN).collect();
    let hi: Vec<f64> = x0.iter().map(|v| v + LOG_SPAN).collect();
    let unpack = |theta: &[f64]| -> GprHyper {
        let c: Vec<f64> = theta
            .iter()
            .zip(lo.iter().zip(&hi))
            .map(|(t, (l, h))| t.clamp(*l, *h).exp())
            .collect();
        let mut k = 2;
        let sigma_n = match fixed_noise {
            Some(s) => s,
            None => {
                k += 1;
                c[2]
            }
        };
        let shape = if kernel == GprKernel::RationalQuadratic {
            c[k]
        } else {
            1.0
        };
        GprHyper {
            length_scale: c[0],
            sigma_f: c[1],
            sigma_n,
            shape,
        }
    };
    let objective = |theta: &[f64]| match factor(&d2, kernel, &unpack(theta)) {
        Ok(f) => neg_log_likelihood(&f, &r),
        Err(_) => f64::INFINITY,
    };
    let best = nelder_mead(objective, &x0, 1.0, max_evals, 1e-12, 1e-7);
    let mut hyper = unpack(&best.x);
    let start_value = objective(&x0);
    if !(best.value <= start_value) {
        hyper = unpack(&x0);
    }
    let fac = factor(&d2, kernel, &hyper)?;
    let nll = neg_log_likelihood(&fac, &r);
    let weights = fac.chol.solve(&r);
    Ok(GprModel {
        kernel,
        hyper,
        y_mean,
        jitter: fac.jitter,
        x_train: z.to_vec(),
        weights: weights.iter().copied().collect(),
        neg_log_likelihood: nll,
    })
}
