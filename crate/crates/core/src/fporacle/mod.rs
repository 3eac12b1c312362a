//! Grid discretization of L for d₁ = d₂ = 1, assembled from the bilinear form
//!
//! ```text
//! (Lf, g)_μ = −∫ ⟨∇f, [[0, −Q], [Q*, Σ]] ∇g⟩ dμ
//! ```
//!
//! so that L_h·1 = 0, wᵀL_h = 0, S_h w-symmetric and nonpositive and A_h
//! w-skew hold up to rounding.

pub mod evolve;
pub mod solver;

pub use evolve::{decay_curve, evolve, fp_distance, fp_evolve, fp_trajectory, spectral_abscissa, Stepping};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::measures::{tail_radius, GibbsMeasure};
use crate::model::{Model, TestFunction};

/// Bound on μ-mass outside the grid box.
pub const MASS_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct GridSemigroup {
    pub radius_x: f64,
    pub radius_y: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Discrete μ, normalized; node k = i·n_y + j sits at (x_i, y_j).
    pub weights: Vec<f64>,
    /// μ-mass outside the box (analytic bound).
    pub mass_deficit: f64,
    pub s: CsMat<f64>,
    pub a: CsMat<f64>,
    pub l: CsMat<f64>,
}

/// Structural residuals, each relative to the size of the entries involved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridInvariants {
    /// ‖L_h 1‖_∞
    pub kernel: f64,
    /// ‖wᵀL_h‖_∞
    pub invariance: f64,
    /// max |w_k S_kl − w_l S_lk| / (w|S| row sum)
    pub s_symmetry: f64,
    /// max |w_k A_kl + w_l A_lk| / (w|A| row sum)
    pub a_skewness: f64,
    /// max over random f of (S_h f, f)_w / (|S_h| f, f)_w
    pub s_negativity: f64,
}

impl GridInvariants {
    pub fn max(&self) -> f64 {
        [self.kernel, self.invariance, self.s_symmetry, self.a_skewness, self.s_negativity]
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn hold(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

fn linspace(r: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| -r + 2.0 * r * i as f64 / (n - 1) as f64).collect()
}

/// Smallest symmetric box radii whose combined tail mass is below `tol`.
pub fn auto_radii(model: &Model, tol: f64) -> Result<(f64, f64)> {
    Ok((tail_radius(&model.phi, 0.25 * tol)?, tail_radius(&model.psi, 0.25 * tol)?))
}

/// Assembles the grid operator on [−R_x, R_x] × [−R_y, R_y]; `radius`
/// defaults to [`auto_radii`].
pub fn build_grid_operator(model: &Model, radius: Option<(f64, f64)>, nx: usize, ny: usize) -> Result<GridSemigroup> {
    if model.d1() != 1 || model.d2() != 1 {
        return Err(Error::InvalidArgument(format!(
            "grid oracle supports d1 = d2 = 1 (got {} and {})",
            model.d1(),
            model.d2()
        )));
    }
    if nx < 3 || ny < 3 {
        return Err(Error::InvalidArgument("grid needs at least 3 nodes per axis".into()));
    }
    let (rx, ry) = match radius {
        Some(r) => r,
        None => auto_radii(model, MASS_TOLERANCE)?,
    };
    if !(rx > 0.0 && ry > 0.0) {
        return Err(Error::InvalidArgument(format!("radii must be positive (got {rx}, {ry})")));
    }
    let mu1 = GibbsMeasure::new(model.phi.clone())?;
    let mu2 = GibbsMeasure::new(model.psi.clone())?;
    let deficit = mu1.mass_outside(rx) + mu2.mass_outside(ry);
    if !(deficit <= MASS_TOLERANCE) {
        return Err(Error::MassDeficit {
            deficit,
            tolerance: MASS_TOLERANCE,
        });
    }

    let q = model.q()[0];
    let phi = |x: f64| model.phi.value(&[x]);
    let psi = |y: f64| model.psi.value(&[y]);
    let sigma = |y: f64| model.sigma.sigma(&[y])[0];
    let x = linspace(rx, nx);
    let y = linspace(ry, ny);
    let (dx, dy) = (x[1] - x[0], y[1] - y[0]);
    let n = nx * ny;
    let idx = |i: usize, j: usize| i * ny + j;
    let phi_x: Vec<f64> = x.iter().map(|&v| phi(v)).collect();
    let psi_y: Vec<f64> = y.iter().map(|&v| psi(v)).collect();
    let xm: Vec<f64> = x.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let ym: Vec<f64> = y.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let phi_m: Vec<f64> = xm.iter().map(|&v| phi(v)).collect();
    let psi_m: Vec<f64> = ym.iter().map(|&v| psi(v)).collect();

    // S: one edge per vertical neighbour pair, density taken at the midpoint
    let mut s = TriMat::new((n, n));
    for j in 0..ny - 1 {
        let sig = sigma(ym[j]);
        if !(sig > 0.0) {
            return Err(Error::NotPositiveDefinite { point: vec![ym[j]] });
        }
        let ca = sig * (psi_y[j] - psi_m[j]).exp() / (dy * dy);
        let cb = sig * (psi_y[j + 1] - psi_m[j]).exp() / (dy * dy);
        for i in 0..nx {
            let (a, b) = (idx(i, j), idx(i, j + 1));
            s.add_triplet(a, a, -ca);
            s.add_triplet(a, b, ca);
            s.add_triplet(b, b, -cb);
            s.add_triplet(b, a, cb);
        }
    }

    // A: per-cell bracket of averaged differences, density at the cell centre
    let mut a = TriMat::new((n, n));
    let (hx, hy) = (0.5 / dx, 0.5 / dy);
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
            let ddx = [-hx, hx, -hx, hx];
            let ddy = [-hy, -hy, hy, hy];
            for (ck, &(ik, jk)) in corners.iter().enumerate() {
                let r = q * (phi_x[ik] + psi_y[jk] - phi_m[i] - psi_m[j]).exp();
                for (cl, &(il, jl)) in corners.iter().enumerate() {
                    let v = r * (ddy[cl] * ddx[ck] - ddx[cl] * ddy[ck]);
                    if v != 0.0 {
                        a.add_triplet(idx(ik, jk), idx(il, jl), v);
                    }
                }
            }
        }
    }

    let s: CsMat<f64> = s.to_csr();
    let a: CsMat<f64> = a.to_csr();
    let l = &s - &a;

    let lw: Vec<f64> = phi_x
        .iter()
        .flat_map(|p| psi_y.iter().map(move |q| -(p + q)))
        .collect();
    let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = lw.iter().map(|v| (v - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    Ok(GridSemigroup {
        radius_x: rx,
        radius_y: ry,
        x,
        y,
        weights,
        mass_deficit: deficit,
        s,
        a,
        l,
    })
}

pub(crate) fn matvec(m: &CsMat<f64>, v: &[f64], out: &mut [f64]) {
    for (i, row) in m.outer_iterator().enumerate() {
        out[i] = row.iter().map(|(j, a)| a * v[j]).sum();
    }
}

impl GridSemigroup {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    /// Samples a test function at the nodes.
    pub fn sample(&self, f: &TestFunction) -> Result<Vec<f64>> {
        crate::error::check_dim("test function x dimension", 1, f.dx())?;
        crate::error::check_dim("test function y dimension", 1, f.dy())?;
        Ok(self
            .x
            .iter()
            .flat_map(|&x| self.y.iter().map(move |&y| (x, y)))
            .map(|(x, y)| f.value(&[x], &[y]))
            .collect())
    }

    /// w-mean.
    pub fn mean(&self, u: &[f64]) -> f64 {
        self.weights.iter().zip(u).map(|(w, v)| w * v).sum()
    }

    /// w-variance, two-pass.
    pub fn variance(&self, u: &[f64]) -> f64 {
        let m = self.mean(u);
        self.weights.iter().zip(u).map(|(w, v)| w * (v - m) * (v - m)).sum()
    }

    /// (f, g)_w
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn apply_l(&self, u: &[f64], out: &mut [f64]) {
        matvec(&self.l, u, out);
    }

    /// Discrete structural identities; `seed` drives the random negativity probes.
    pub fn invariants(&self, seed: u64) -> GridInvariants {
        let n = self.len();
        let w = &self.weights;
        let row_abs: Vec<f64> = self.l.outer_iterator().map(|r| r.iter().map(|(_, v)| v.abs()).sum()).collect();
        let ones = vec![1.0; n];
        let mut l1 = vec![0.0; n];
        matvec(&self.l, &ones, &mut l1);
        let kernel = l1
            .iter()
            .zip(&row_abs)
            .map(|(v, s)| if *s > 0.0 { v.abs() / s } else { 0.0 })
            .fold(0.0, f64::max);

        let mut col = vec![0.0; n];
        let mut col_abs = vec![0.0; n];
        for (k, row) in self.l.outer_iterator().enumerate() {
            for (l, v) in row.iter() {
                col[l] += w[k] * v;
                col_abs[l] += w[k] * v.abs();
            }
        }
        let invariance = col
            .iter()
            .zip(&col_abs)
            .map(|(v, s)| if *s > 0.0 { v.abs() / s } else { 0.0 })
            .fold(0.0, f64::max);

        // scaled by weighted row sums: entries summed over adjacent cells can
        // cancel to rounding noise, so pairwise relative error is meaningless
        let pair = |m: &CsMat<f64>, sign: f64| {
            let size: Vec<f64> = m
                .outer_iterator()
                .enumerate()
                .map(|(k, r)| w[k] * r.iter().map(|(_, v)| v.abs()).sum::<f64>())
                .collect();
            let mut worst = 0.0_f64;
            for (k, row) in m.outer_iterator().enumerate() {
                for (l, v) in row.iter() {
                    let back = m.get(l, k).copied().unwrap_or(0.0);
                    let (p, q) = (w[k] * v, w[l] * back);
                    let scale = size[k].max(size[l]);
                    if scale > 0.0 {
                        worst = worst.max((p - sign * q).abs() / scale);
                    }
                }
            }
            worst
        };
        let s_symmetry = pair(&self.s, 1.0);
        let a_skewness = pair(&self.a, -1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s_negativity = f64::NEG_INFINITY;
        let mut f = vec![0.0; n];
        let mut sf = vec![0.0; n];
        for _ in 0..100 {
            f.iter_mut().for_each(|v| *v = 2.0 * rng.random::<f64>() - 1.0);
            matvec(&self.s, &f, &mut sf);
            let num = self.inner(&sf, &f);
            let den: f64 = self
                .s
                .outer_iterator()
                .enumerate()
                .map(|(k, row)| w[k] * f[k].abs() * row.iter().map(|(l, v)| v.abs() * f[l].abs()).sum::<f64>())
                .sum();
            s_negativity = s_negativity.max(if den > 0.0 { num / den } else { 0.0 });
        }
        GridInvariants {
            kernel,
            invariance,
            s_symmetry,
            a_skewness,
            s_negativity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_structure() {
        let gs = build_grid_operator(&Model::ou(), None, 41, 41).unwrap();
        let inv = gs.invariants(1);
        assert!(inv.hold(1e-10), "{inv:?}");
        assert!(inv.s_negativity <= 0.0);
        assert!((gs.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(gs.mass_deficit <= MASS_TOLERANCE);
    }

    #[test]
    fn variable_sigma_structure() {
        let gs = build_grid_operator(&Model::variable_sigma(1.0).unwrap(), None, 33, 45).unwrap();
        assert!(gs.invariants(2).hold(1e-10));
    }

    #[test]
    fn small_radius_is_rejected() {
        let e = build_grid_operator(&Model::ou(), Some((3.0, 3.0)), 21, 21).unwrap_err();
        assert!(matches!(e, Error::MassDeficit { .. }), "{e}");
    }
}
