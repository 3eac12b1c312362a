//! Jacobi-preconditioned BiCGSTAB and the Crank–Nicolson step built on it.

use sprs::CsMat;

use crate::error::{Error, Result};
use crate::fporacle::matvec;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves A x = b starting from the contents of `x`; returns the iteration count.
pub fn bicgstab<F>(apply: F, diag: &[f64], b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let target = tol * bnorm;
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt();
    if res <= target {
        return Ok(0);
    }
    for it in 1..=max_iter {
        let rho_new = dot(&rhat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            // breakdown: restart the shadow residual
            rhat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|z| *z = 0.0);
            p.iter_mut().for_each(|z| *z = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            ph[i] = p[i] / diag[i];
        }
        apply(&ph, &mut v);
        let rv = dot(&rhat, &v);
        if rv == 0.0 {
            rhat.copy_from_slice(&r);
            rho = 1.0;
            continue;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if dot(&s, &s).sqrt() <= target {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return Ok(it);
        }
        for i in 0..n {
            sh[i] = s[i] / diag[i];
        }
        apply(&sh, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        res = dot(&r, &r).sqrt();
        if res <= target {
            return Ok(it);
        }
    }
    Err(Error::LinearSolve {
        iterations: max_iter,
        residual: res / bnorm,
    })
}

/// u ↦ (I − dt/2·M)⁻¹(I + dt/2·M)u for a fixed sparse M.
pub struct CrankNicolson<'a> {
    m: &'a CsMat<f64>,
    half: f64,
    diag: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    rhs: Vec<f64>,
    mu: Vec<f64>,
}

impl<'a> CrankNicolson<'a> {
    pub fn new(m: &'a CsMat<f64>, dt: f64) -> Self {
        let n = m.rows();
        let half = 0.5 * dt;
        let diag = (0..n).map(|i| 1.0 - half * m.get(i, i).copied().unwrap_or(0.0)).collect();
        Self {
            m,
            half,
            diag,
            tol: 1e-13,
            max_iter: 1000,
            rhs: vec![0.0; n],
            mu: vec![0.0; n],
        }
    }

    /// Advances `u` by one step in place.
    pub fn step(&mut self, u: &mut [f64]) -> Result<usize> {
        matvec(self.m, u, &mut self.mu);
        for i in 0..u.len() {
            self.rhs[i] = u[i] + self.half * self.mu[i];
        }
        let (m, half) = (self.m, self.half);
        let apply = |v: &[f64], out: &mut [f64]| {
            matvec(m, v, out);
            for i in 0..v.len() {
                out[i] = v[i] - half * out[i];
            }
        };
        bicgstab(apply, &self.diag, &self.rhs, u, self.tol, self.max_iter)
    }
}
