//! Jacobi-preconditioned conjugate gradients.

use super::csr::CsrMatrix;
use crate::error::{Error, Result};

/// Convergence record attached to every iterative solve.
#[derive(Debug, Clone, Copy)]
pub struct CgDiagnostics {
    pub iterations: usize,
    /// Final relative residual `‖b − A x‖ / ‖b‖`.
    pub residual: f64,
}

/// Default iteration cap: `10 · √n · 10`.
pub fn default_max_iter(n: usize) -> usize {
    (100.0 * (n as f64).sqrt()).ceil() as usize
}

/// Solves `A x = b` for SPD `A` with diagonal preconditioning, from a
/// zero initial guess, to relative residual `tol`. A failed solve is an
/// error carrying the iteration count and last residual, never a
/// silently accepted answer.
pub fn cg_solve(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgDiagnostics)> {
    let n = a.n();
    assert_eq!(b.len(), n);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            CgDiagnostics {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = dot(&r, &z);
    let mut q = vec![0.0; n];

    for iter in 1..=max_iter {
        a.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::NotConverged {
                iterations: iter,
                residual: norm(&r) / b_norm,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rel = norm(&r) / b_norm;
        if rel <= tol {
            return Ok((
                x,
                CgDiagnostics {
                    iterations: iter,
                    residual: rel,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: norm(&r) / b_norm,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
