//! Lowest eigenpairs of Hermitian operators.
//!
//! Small operators go through a dense self-adjoint decomposition. Larger ones
//! use Lanczos with full reorthogonalization, extracting one eigenpair at a
//! time in the orthogonal complement of the pairs already found and
//! restarting from the current Ritz vector.

use faer::{Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::QubitOperator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Qubit counts up to this use the dense solver.
    pub dense_threshold: usize,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Residual target relative to the operator norm bound.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 10,
            krylov_dim: 80,
            max_restarts: 400,
            rel_tol: 1e-9,
            seed: 0x5eed,
        }
    }
}

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn orthogonalize(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
    }
}

/// `k` algebraically smallest eigenpairs in nondecreasing order.
pub fn lowest_eigenpairs(op: &QubitOperator, k: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
    if k == 0 {
        return Err(Error::invalid("need at least one eigenpair"));
    }
    if k > op.dim() {
        return Err(Error::invalid(format!(
            "requested {k} eigenpairs from a {}-dimensional operator",
            op.dim()
        )));
    }
    if op.n_qubits() <= opts.dense_threshold {
        dense_lowest(op, k)
    } else {
        lanczos_lowest(op, k, opts)
    }
}

pub fn dense_lowest(op: &QubitOperator, k: usize) -> Result<Vec<EigenPair>> {
    let dim = op.dim();
    let fail = |_| Error::Solver {
        iterations: 0,
        residual: f64::NAN,
    };
    if op.is_real() {
        let evd = op.to_dense_real().self_adjoint_eigen(Side::Lower).map_err(fail)?;
        let (s, u) = (evd.S().column_vector(), evd.U());
        Ok((0..k)
            .map(|j| EigenPair {
                value: s[j],
                vector: (0..dim).map(|i| Complex64::new(u[(i, j)], 0.0)).collect(),
            })
            .collect())
    } else {
        let evd = op.to_dense().self_adjoint_eigen(Side::Lower).map_err(fail)?;
        let (s, u) = (evd.S().column_vector(), evd.U());
        Ok((0..k)
            .map(|j| EigenPair {
                value: s[j].re,
                vector: (0..dim).map(|i| u[(i, j)]).collect(),
            })
            .collect())
    }
}

/// All eigenvalues, ascending; dense.
pub fn dense_spectrum(op: &QubitOperator) -> Result<Vec<f64>> {
    let fail = |_| Error::Solver {
        iterations: 0,
        residual: f64::NAN,
    };
    let mut ev = if op.is_real() {
        op.to_dense_real().self_adjoint_eigenvalues(Side::Lower).map_err(fail)?
    } else {
        op.to_dense().self_adjoint_eigenvalues(Side::Lower).map_err(fail)?
    };
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn lanczos_lowest(op: &QubitOperator, k: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
    let dim = op.dim();
    let scale = op.norm_bound().max(1e-300);
    let tol = opts.rel_tol * scale.max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut found: Vec<EigenPair> = Vec::with_capacity(k);
    let mut locked: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    let mut w = vec![ZERO; dim];

    for _ in 0..k {
        let mut start: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, 0.0))
            .collect();
        let mut last_residual = f64::INFINITY;
        let mut converged = None;
        for restart in 0..opts.max_restarts {
            orthogonalize(&mut start, &locked);
            let nrm = norm(&start);
            if nrm < 1e-300 {
                break;
            }
            start.iter_mut().for_each(|x| *x /= nrm);

            let m_max = opts.krylov_dim.min(dim - locked.len()).max(1);
            let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
            // Projected matrix from the Gram-Schmidt coefficients. Tridiagonal in
            // exact arithmetic; kept dense so breakdowns and rounding do not
            // corrupt the Ritz values.
            let mut proj: Vec<Vec<Complex64>> = Vec::with_capacity(m_max);
            loop {
                let j = basis.len() - 1;
                op.apply_into(&basis[j], &mut w)?;
                let mut col = vec![ZERO; m_max];
                for _ in 0..2 {
                    for u in &locked {
                        let c = dot(u, &w);
                        axpy(-c, u, &mut w);
                    }
                    for (i, v) in basis.iter().enumerate() {
                        let c = dot(v, &w);
                        col[i] += c;
                        axpy(-c, v, &mut w);
                    }
                }
                let b = norm(&w);
                let done = basis.len() == m_max || b < 1e-10 * scale;
                if !done {
                    col[j + 1] = Complex64::new(b, 0.0);
                }
                proj.push(col);
                if done {
                    break;
                }
                basis.push(w.iter().map(|x| x / b).collect());
            }

            let m = basis.len();
            // Column j holds <v_i|H v_j> for every i <= j + 1 known when v_j was expanded.
            let t = Mat::<Complex64>::from_fn(m, m, |i, j| if i <= j { proj[j][i] } else { proj[i][j].conj() });
            let evd = t.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Solver {
                iterations: restart,
                residual: last_residual,
            })?;
            let mut x = vec![ZERO; dim];
            for (j, vj) in basis.iter().enumerate() {
                axpy(evd.U()[(j, 0)], vj, &mut x);
            }
            orthogonalize(&mut x, &locked);
            let nx = norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            op.apply_into(&x, &mut w)?;
            let rayleigh = dot(&x, &w).re;
            let residual = w
                .iter()
                .zip(&x)
                .map(|(hx, xi)| (hx - xi * rayleigh).norm_sqr())
                .sum::<f64>()
                .sqrt();
            last_residual = residual;
            if residual <= tol {
                converged = Some((rayleigh, x));
                break;
            }
            start = x;
            if restart + 1 == opts.max_restarts {
                break;
            }
        }
        match converged {
            Some((value, vector)) => {
                locked.push(vector.clone());
                found.push(EigenPair { value, vector });
            }
            None => {
                return Err(Error::Solver {
                    iterations: opts.max_restarts * opts.krylov_dim,
                    residual: last_residual,
                })
            }
        }
    }
    found.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(found)
}

/// Estimate of `||A||_2` by power iteration on `A^dagger A`.
pub fn operator_norm_estimate(op: &QubitOperator, iterations: usize) -> f64 {
    let dim = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, 0.0))
        .collect();
    let adj = op.adjoint();
    let mut w = vec![ZERO; dim];
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let n = norm(&v);
        if n == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= n);
        op.apply_into(&v, &mut w).expect("dimensions agree");
        estimate = norm(&w);
        adj.apply_into(&w, &mut v).expect("dimensions agree");
    }
    estimate
}

pub fn residual_norm(op: &QubitOperator, pair: &EigenPair) -> f64 {
    let hv = op.apply(&pair.vector).expect("dimensions agree");
    hv.iter()
        .zip(&pair.vector)
        .map(|(a, b)| (a - b * pair.value).norm_sqr())
        .sum::<f64>()
        .sqrt()
}
