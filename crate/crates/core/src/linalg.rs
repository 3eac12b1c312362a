//! Small dense helpers on row-major slices.
//!
//! The hot paths (Euler–Maruyama steps, operator evaluation) run on
//! dimension 1–3 objects, so these avoid heap allocation and work directly
//! on caller-owned buffers.

use nalgebra::{DMatrix, SymmetricEigen};

/// `out = a * x` with `a` of shape `rows × cols`.
#[inline]
pub fn matvec(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        let row = &a[i * cols..(i + 1) * cols];
        out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// `out = aᵀ * x` with `a` of shape `rows × cols`.
#[inline]
pub fn matvec_t(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    out[..cols].iter_mut().for_each(|v| *v = 0.0);
    for i in 0..rows {
        let xi = x[i];
        for j in 0..cols {
            out[j] += a[i * cols + j] * xi;
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower Cholesky factor of the symmetric `n × n` matrix `a`.
/// Returns `false` if `a` is not (numerically) positive definite.
pub fn cholesky_lower(a: &[f64], n: usize, out: &mut [f64]) -> bool {
    out[..n * n].iter_mut().for_each(|v| *v = 0.0);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= out[j * n + k] * out[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        out[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= out[i * n + k] * out[j * n + k];
            }
            out[i * n + j] = s / d;
        }
    }
    true
}

/// Symmetric square root via eigen-decomposition. `false` if an eigenvalue is
/// not positive.
pub fn symmetric_sqrt(a: &[f64], n: usize, out: &mut [f64]) -> bool {
    if n == 1 {
        if !(a[0] > 0.0) {
            return false;
        }
        out[0] = a[0].sqrt();
        return true;
    }
    let m = DMatrix::from_row_slice(n, n, &a[..n * n]);
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return false;
    }
    let sqrt_vals = eig.eigenvalues.map(f64::sqrt);
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&sqrt_vals)
        * eig.eigenvectors.transpose();
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = root[(i, j)];
        }
    }
    true
}

/// Smallest eigenvalue of the symmetric matrix `a`.
pub fn min_eigenvalue(a: &[f64], n: usize) -> f64 {
    if n == 1 {
        return a[0];
    }
    let m = DMatrix::from_row_slice(n, n, &a[..n * n]);
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of the symmetric matrix `a`.
pub fn max_eigenvalue(a: &[f64], n: usize) -> f64 {
    if n == 1 {
        return a[0];
    }
    let m = DMatrix::from_row_slice(n, n, &a[..n * n]);
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn frobenius(a: &[f64]) -> f64 {
    norm(a)
}

/// Sum with Neumaier compensation; the result does not depend on how the
/// terms were produced, only on their order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut c = 0.0_f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            c += (sum - s) + t;
        } else {
            c += (t - s) + sum;
        }
        sum = s;
    }
    sum + c
}

/// Mean and standard error of the mean.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(samples.iter().map(|v| (v - mean) * (v - mean)));
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
