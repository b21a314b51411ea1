/// Result of a derivative-free minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex search. Stops when the spread of simplex values is
/// within `ftol` (relative) and every vertex is within `xtol` of the best.
/// Non-finite objective values are treated as +inf.
pub fn nelder_mead<F>(
    f: F,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
    xtol: f64,
) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    let mut converged = false;
    while evals.get() < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let size = simplex
            .iter()
            .skip(1)
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= ftol * (1.0 + best.abs()) && size < xtol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64, w: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(w)
                .map(|(c, wi)| c + t * (wi - c))
                .collect()
        };
        let xw = simplex[n].0.clone();
        let xr = along(-1.0, &xw);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0, &xw);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(-0.5, &xw);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5, &xw);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for k in 1..=n {
                    let xs: Vec<f64> = x_best
                        .iter()
                        .zip(&simplex[k].0)
                        .map(|(b, x)| b + 0.5 * (x - b))
                        .collect();
                    let fs = eval(&xs);
                    simplex[k] = (xs, fs);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evaluations: evals.get(),
        converged,
    }
}
