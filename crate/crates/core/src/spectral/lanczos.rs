//! Lanczos with full reorthogonalization and explicit restarts for the
//! smallest eigenvalue of a symmetric operator on the complement of a known
//! eigenvector.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    /// Krylov basis size before a restart (reduced if memory would exceed `max_basis_bytes`).
    pub basis: usize,
    pub max_restarts: usize,
    /// Stagnation window and tolerance on the Ritz value.
    pub window: usize,
    pub value_tol: f64,
    pub residual_tol: f64,
    pub max_basis_bytes: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            basis: 120,
            max_restarts: 40,
            window: 10,
            value_tol: 1e-10,
            residual_tol: 1e-8,
            max_basis_bytes: 1 << 31,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosOutput {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(w: &mut [f64], basis: &[Vec<f64>]) {
    // twice is enough
    for _ in 0..2 {
        for b in basis {
            let c = dot(w, b);
            axpy(w, -c, b);
        }
    }
}

fn smallest_ritz(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let i = (0..m)
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .expect("nonempty tridiagonal");
    (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect())
}

/// Smallest eigenpair of `apply` on the orthogonal complement of `deflate`
/// (which need not be normalized).
pub fn smallest_deflated(
    apply: impl Fn(&[f64], &mut [f64]),
    dim: usize,
    deflate: &[f64],
    opts: &LanczosOptions,
) -> Result<LanczosOutput> {
    if dim < 2 || deflate.len() != dim {
        return Err(Error::InvalidParameter(format!("bad Lanczos dimension {dim}")));
    }
    let dn = norm(deflate);
    let u: Vec<f64> = deflate.iter().map(|x| x / dn).collect();
    let locked = vec![u];
    let basis_cap = opts
        .basis
        .min(dim - 1)
        .min((opts.max_basis_bytes / (8 * dim)).max(3))
        .max(2);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut w = vec![0.0; dim];
    let mut best = (f64::NAN, f64::INFINITY);

    for _restart in 0..=opts.max_restarts {
        project_out(&mut start, &locked);
        let s = norm(&start);
        if s == 0.0 {
            return Err(Error::InvalidParameter("start vector lies in the deflated space".into()));
        }
        start.iter_mut().for_each(|x| *x /= s);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            iterations += 1;
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            project_out(&mut w, &locked);
            project_out(&mut w, &basis);
            let b = norm(&w);
            let (theta, y) = smallest_ritz(&alpha, &beta);
            let ritz_res = b * y.last().unwrap().abs();
            history.push(theta);
            let settled = history.len() >= opts.window && {
                let tail = &history[history.len() - opts.window..];
                let (lo, hi) = tail
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
                hi - lo < opts.value_tol
            };
            let exhausted = b < 1e-13 || basis.len() >= basis_cap;
            if (settled && ritz_res < opts.residual_tol) || exhausted {
                // Ritz vector and its true residual
                let mut x = vec![0.0; dim];
                for (c, v) in y.iter().zip(&basis) {
                    axpy(&mut x, *c, v);
                }
                project_out(&mut x, &locked);
                let xn = norm(&x);
                x.iter_mut().for_each(|v| *v /= xn);
                apply(&x, &mut w);
                iterations += 1;
                let rq = dot(&x, &w);
                axpy(&mut w, -rq, &x);
                let res = norm(&w);
                if res < best.1 {
                    best = (rq, res);
                }
                if settled && res < opts.residual_tol {
                    return Ok(LanczosOutput {
                        value: rq,
                        vector: x,
                        residual: res,
                        iterations,
                    });
                }
                if b < 1e-13 && res < opts.residual_tol {
                    return Ok(LanczosOutput {
                        value: rq,
                        vector: x,
                        residual: res,
                        iterations,
                    });
                }
                start = x;
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }
    }
    Err(Error::NoConvergence {
        iterations,
        residual: best.1,
    })
}
