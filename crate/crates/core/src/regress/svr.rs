use serde::{Deserialize, Serialize};

use super::linalg::{dot, iqr, sq_dist};
use super::{RegressorSpec, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SvrKernel {
    Linear,
    Polynomial { degree: i32 },
    Gaussian { scale: f64 },
}

impl SvrKernel {
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match *self {
            SvrKernel::Linear => dot(u, v),
            SvrKernel::Polynomial { degree } => (1.0 + dot(u, v)).powi(degree),
            SvrKernel::Gaussian { scale } => (-sq_dist(u, v) / (2.0 * scale * scale)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: SvrKernel,
    pub epsilon: f64,
    pub box_c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// α − α* for each support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvrModel {
    pub fn predict(&self, z: &[f64]) -> f64 {
        self.bias
            + self
                .support_vectors
                .iter()
                .zip(&self.coefficients)
                .map(|(sv, c)| c * self.kernel.eval(sv, z))
                .sum::<f64>()
    }
}

pub(crate) const PARAM_FLOOR: f64 = 1e-3;
pub(crate) const DEFAULT_TOLERANCE: f64 = 1e-3;
pub(crate) const DEFAULT_MAX_ITER: usize = 10_000;
const TAU: f64 = 1e-12;

pub(crate) fn default_kernel(variant: Variant, p: usize) -> Result<SvrKernel> {
    let sp = (p as f64).sqrt();
    Ok(match variant {
        Variant::LinearSvm => SvrKernel::Linear,
        Variant::QuadraticSvm => SvrKernel::Polynomial { degree: 2 },
        Variant::CubicSvm => SvrKernel::Polynomial { degree: 3 },
        Variant::FineGaussianSvm => SvrKernel::Gaussian { scale: sp / 4.0 },
        Variant::MediumGaussianSvm => SvrKernel::Gaussian { scale: sp },
        Variant::CoarseGaussianSvm => SvrKernel::Gaussian { scale: 4.0 * sp },
        other => return Err(Error::Config(format!("{other} is not an SVM model"))),
    })
}

/// Dual solution of ε-SVR in the 2n-variable form.
#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// SMO with second-order working-set selection on
/// min ½αᵀQα + pᵀα, yᵀα = 0, 0 ≤ α ≤ C.
pub(crate) fn solve_dual(
    k: &[Vec<f64>],
    y: &[f64],
    eps: f64,
    c: f64,
    tol: f64,
    max_iter: usize,
) -> DualSolution {
    let n = y.len();
    let m = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let src = |t: usize| if t < n { t } else { t - n };
    let q = |s: usize, t: usize| sign(s) * sign(t) * k[src(s)][src(t)];
    let qd: Vec<f64> = (0..m).map(|t| k[src(t)][src(t)]).collect();
    let mut alpha = vec![0.0; m];
    let mut grad: Vec<f64> = (0..m)
        .map(|t| if t < n { eps - y[t] } else { eps + y[t - n] })
        .collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..m {
            if sign(t) > 0.0 {
                if alpha[t] < c && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i = t;
                }
            } else if alpha[t] > 0.0 && grad[t] >= gmax {
                gmax = grad[t];
                i = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i != usize::MAX {
            for t in 0..m {
                let (eligible, grad_diff, gval) = if sign(t) > 0.0 {
                    (alpha[t] > 0.0, gmax + grad[t], grad[t])
                } else {
                    (alpha[t] < c, gmax - grad[t], -grad[t])
                };
                if !eligible {
                    continue;
                }
                if gval >= gmax2 {
                    gmax2 = gval;
                }
                if grad_diff > 0.0 {
                    let mut quad = qd[i] + qd[t] - 2.0 * sign(i) * sign(t) * q(i, t);
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -grad_diff * grad_diff / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax + gmax2 < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (ai, aj) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        if sign(i) != sign(j) {
            let mut quad = qd[i] + qd[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..m {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }
    // Bias from free variables, or the midpoint of the feasible interval.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut n_free = 0usize;
    for t in 0..m {
        let yg = sign(t) * grad[t];
        if alpha[t] >= c {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        0.5 * (ub + lb)
    };
    DualSolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

fn positive(spec: &RegressorSpec, key: &str) -> Result<Option<f64>> {
    match spec.get(key) {
        Some(v) if v > 0.0 => Ok(Some(v)),
        Some(v) => Err(Error::Config(format!("{key} must be positive, got {v}"))),
        None => Ok(None),
    }
}

pub(crate) fn fit_svr(z: &[Vec<f64>], y: &[f64], spec: &RegressorSpec) -> Result<SvrModel> {
    let p = z[0].len();
    let mut kernel = default_kernel(spec.variant, p)?;
    if let Some(s) = positive(spec, "kernel_scale")? {
        match &mut kernel {
            SvrKernel::Gaussian { scale } => *scale = s,
            _ => {
                return Err(Error::Config(
                    "kernel_scale applies to Gaussian SVMs only".into(),
                ))
            }
        }
    }
    let spread = iqr(y);
    let epsilon = positive(spec, "epsilon")?.unwrap_or((spread / 13.49).max(PARAM_FLOOR));
    let box_c = positive(spec, "box_c")?.unwrap_or((spread / 1.349).max(PARAM_FLOOR));
    let tol = positive(spec, "tolerance")?.unwrap_or(DEFAULT_TOLERANCE);
    let max_iter = positive(spec, "max_iter")?.map_or(DEFAULT_MAX_ITER, |v| v as usize);
    let gram: Vec<Vec<f64>> = z
        .iter()
        .map(|u| z.iter().map(|v| kernel.eval(u, v)).collect())
        .collect();
    let sol = solve_dual(&gram, y, epsilon, box_c, tol, max_iter);
    let n = y.len();
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..n {
        let beta = sol.alpha[i] - sol.alpha[i + n];
        if beta != 0.0 {
            support_vectors.push(z[i].clone());
            coefficients.push(beta);
        }
    }
    Ok(SvrModel {
        kernel,
        epsilon,
        box_c,
        support_vectors,
        coefficients,
        bias: -sol.rho,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}
