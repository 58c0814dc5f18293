//! Small numerical optimization utilities shared by the QNG threshold
//! search and the RPN distribution fit.

use nalgebra::{DMatrix, DVector};

use crate::error::{FockError, Result};

/// Result of a Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fval: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Derivative-free Nelder-Mead minimization with the standard
/// reflection/expansion/contraction/shrink moves.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: f64,
    ftol: f64,
    max_evals: usize,
) -> NelderMeadResult {
    let dim = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += scale;
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let spread = simplex[dim].1 - simplex[0].1;
        if spread.abs() < ftol {
            converged = true;
            break;
        }
        // centroid of all but worst
        let mut centroid = vec![0.0; dim];
        for (x, _) in simplex.iter().take(dim) {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| 2.0 * c - w)
            .collect();
        let fr = eval(&reflect, &mut evals);
        if fr < simplex[0].1 {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| 3.0 * c - 2.0 * w)
                .collect();
            let fe = eval(&expand, &mut evals);
            simplex[dim] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflect, fr);
        } else {
            let contract: Vec<f64> = if fr < worst.1 {
                centroid
                    .iter()
                    .zip(&reflect)
                    .map(|(c, r)| 0.5 * (c + r))
                    .collect()
            } else {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| 0.5 * (c + w))
                    .collect()
            };
            let fc = eval(&contract, &mut evals);
            if fc < worst.1.min(fr) {
                simplex[dim] = (contract, fc);
            } else {
                // shrink towards the best vertex
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best
                        .iter()
                        .zip(&entry.0)
                        .map(|(b, xi)| 0.5 * (b + xi))
                        .collect();
                    let fx = eval(&x, &mut evals);
                    *entry = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    NelderMeadResult {
        x: simplex[0].0.clone(),
        fval: simplex[0].1,
        evals,
        converged,
    }
}

/// Halton low-discrepancy sequence point, one coordinate per base.
pub fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index + 1; // skip the origin
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const HALTON_BASES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// k-dimensional Halton point in [0,1)^k.
pub fn halton_point(index: usize, k: usize) -> Vec<f64> {
    assert!(k <= HALTON_BASES.len());
    (0..k).map(|j| halton(index, HALTON_BASES[j])).collect()
}

/// Nonnegative least squares min ||Ax - b||² s.t. x >= 0 by the
/// Lawson-Hanson active-set method. Returns the solution and the passive
/// (unconstrained) index set.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, Vec<usize>)> {
    let (rows, cols) = a.shape();
    if b.len() != rows {
        return Err(FockError::DimensionMismatch {
            expected: rows,
            got: b.len(),
        });
    }
    let mut x = DVector::zeros(cols);
    let mut passive = vec![false; cols];
    let mut w = a.transpose() * (b - a * &x);

    for _outer in 0..(3 * cols + 20) {
        // dual feasibility threshold, relative to the current residual scale
        let residual_scale = (b - a * &x).amax().max(f64::MIN_POSITIVE);
        let tol = 1e-10 * a.amax() * residual_scale;
        // pick most violated active constraint
        let candidate = (0..cols)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(j_star) = candidate else { break };
        if w[j_star] <= tol {
            break;
        }
        passive[j_star] = true;

        loop {
            let idx: Vec<usize> = (0..cols).filter(|&j| passive[j]).collect();
            if idx.is_empty() {
                x.fill(0.0);
                break;
            }
            let ap = a.select_columns(idx.iter());
            let zp = ap
                .clone()
                .svd(true, true)
                .solve(b, 1e-12)
                .map_err(|e| FockError::FitFailure(format!("nnls inner solve: {e}")))?;
            if zp.iter().all(|&z| z > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = zp[k];
                }
                break;
            }
            // step back to the feasibility boundary
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if zp[k] <= 0.0 {
                    let denom = x[j] - zp[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            let floor = 1e-14 * x.amax().max(1.0);
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (zp[k] - x[j]);
                if zp[k] <= 0.0 && x[j] <= floor {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
        w = a.transpose() * (b - a * &x);
    }
    let passive_set = (0..cols).filter(|&j| passive[j]).collect();
    Ok((x, passive_set))
}
