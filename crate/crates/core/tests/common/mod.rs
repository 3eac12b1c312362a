//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

type M2 = [[f64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// exp(tB) by Taylor series with scaling and squaring.
pub fn expm2(b: &M2, t: f64) -> M2 {
    let squarings = 12;
    let h = t / f64::from(1u32 << squarings);
    let mut e = [[1.0, 0.0], [0.0, 1.0]];
    let mut term = e;
    for k in 1..30 {
        term = mul(&term, b);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v *= h / k as f64;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                e[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        e = mul(&e, &e);
    }
    e
}

/// Drift matrix of the kinetic OU process: dx = y dt, dy = −(x + y) dt + √2 dB.
pub const OU_DRIFT: M2 = [[0.0, 1.0], [-1.0, -1.0]];

/// Var_μ(T_t f) for f = x on the kinetic OU process with μ = N(0, I).
pub fn ou_variance_x(t: f64) -> f64 {
    let e = expm2(&OU_DRIFT, t);
    e[0][0].powi(2) + e[0][1].powi(2)
}

/// Fixed-step midpoint rule on [a, b] with n nodes.
pub fn midpoint<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|k| f(a + (k as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Tensor midpoint rule on [a, b]² with n nodes per axis.
pub fn midpoint2<F: Fn(f64, f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let x = a + (i as f64 + 0.5) * h;
        total += (0..n).map(|j| f(x, a + (j as f64 + 0.5) * h)).sum::<f64>();
    }
    total * h * h
}
