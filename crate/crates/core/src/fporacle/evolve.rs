//! Time stepping of u̇ = L_h u and of the Fokker–Planck counterpart.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sprs::CsMat;

use crate::error::{Error, Result};
use crate::fporacle::solver::CrankNicolson;
use crate::fporacle::GridSemigroup;

/// Number of dt-steps to reach t.
fn steps(t: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive (got {dt})")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be nonnegative (got {t})")));
    }
    let n = (t / dt).round();
    if (n * dt - t).abs() > 1e-9 * t.max(dt) {
        return Err(Error::InvalidArgument(format!("time {t} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Crank–Nicolson stepping for one operator.
pub struct Stepping<'a> {
    cn: CrankNicolson<'a>,
    pub dt: f64,
    /// Total BiCGSTAB iterations so far.
    pub iterations: usize,
}

impl<'a> Stepping<'a> {
    pub fn new(m: &'a CsMat<f64>, dt: f64) -> Result<Self> {
        steps(dt, dt)?;
        Ok(Self {
            cn: CrankNicolson::new(m, dt),
            dt,
            iterations: 0,
        })
    }

    pub fn advance(&mut self, u: &mut [f64], n: usize) -> Result<()> {
        for _ in 0..n {
            self.iterations += self.cn.step(u)?;
        }
        Ok(())
    }
}

/// u(t) for u̇ = L_h u, u(0) = f0.
pub fn evolve(gs: &GridSemigroup, f0: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    crate::error::check_dim("grid vector", gs.len(), f0.len())?;
    let n = steps(t, dt)?;
    let mut u = f0.to_vec();
    Stepping::new(&gs.l, dt)?.advance(&mut u, n)?;
    Ok(u)
}

/// (t, Var_w(u(t))) on an increasing time grid.
pub fn decay_curve(gs: &GridSemigroup, f: &[f64], t_grid: &[f64], dt: f64) -> Result<Vec<(f64, f64)>> {
    crate::error::check_dim("grid vector", gs.len(), f.len())?;
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    let mut stepping = Stepping::new(&gs.l, dt)?;
    let mut u = f.to_vec();
    let mut done = 0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let target = steps(t, dt)?;
        stepping.advance(&mut u, target - done)?;
        done = target;
        out.push((t, gs.variance(&u)));
    }
    Ok(out)
}

/// w-adjoint L* = W⁻¹ L_hᵀ W, generator of the ρ-transformed density.
fn adjoint(gs: &GridSemigroup) -> CsMat<f64> {
    let w = &gs.weights;
    let mut t = sprs::TriMat::new((gs.len(), gs.len()));
    for (k, row) in gs.l.outer_iterator().enumerate() {
        for (l, v) in row.iter() {
            t.add_triplet(l, k, v * w[k] / w[l]);
        }
    }
    t.to_csr()
}

/// Evolves a grid probability vector (node masses) under the Fokker–Planck
/// equation; the stationary state is the discrete μ times the initial mass.
pub fn fp_evolve(gs: &GridSemigroup, density0: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    Ok(fp_trajectory(gs, density0, &[t], dt)?.pop().expect("one time"))
}

/// Densities at each time of an increasing grid, from one continuous run.
pub fn fp_trajectory(gs: &GridSemigroup, density0: &[f64], t_grid: &[f64], dt: f64) -> Result<Vec<Vec<f64>>> {
    crate::error::check_dim("grid density", gs.len(), density0.len())?;
    if density0.iter().any(|p| *p < 0.0 || !p.is_finite()) {
        return Err(Error::InvalidArgument("initial density must be nonnegative and finite".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    let star = adjoint(gs);
    let mut stepping = Stepping::new(&star, dt)?;
    let mut g: Vec<f64> = density0.iter().zip(&gs.weights).map(|(p, w)| p / w).collect();
    let mut done = 0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let target = steps(t, dt)?;
        stepping.advance(&mut g, target - done)?;
        done = target;
        let p: Vec<f64> = g.iter().zip(&gs.weights).map(|(g, w)| g * w).collect();
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-12 {
            log::warn!("density went negative ({min:e}) at t = {t}; the scheme is not positivity preserving");
        }
        out.push(p);
    }
    Ok(out)
}

/// ‖p/ρ − m‖_{L²(μ)} / m with m the total mass: distance to stationarity.
pub fn fp_distance(gs: &GridSemigroup, p: &[f64]) -> f64 {
    let m: f64 = p.iter().sum();
    let g: Vec<f64> = p.iter().zip(&gs.weights).map(|(p, w)| p / w).collect();
    gs.variance(&g).sqrt() / m
}

/// Largest real part among nonzero eigenvalues of L_h, from Arnoldi on
/// the CN propagator over time `tau` restricted to w-mean-zero vectors.
pub fn spectral_abscissa(gs: &GridSemigroup, tau: f64, krylov: usize, dt: f64, seed: u64) -> Result<f64> {
    let n = steps(tau, dt)?;
    if n == 0 || krylov < 2 {
        return Err(Error::InvalidArgument("need tau > 0 and a Krylov dimension >= 2".into()));
    }
    let mut stepping = Stepping::new(&gs.l, dt)?;
    let center = |v: &mut Vec<f64>| {
        let m = gs.mean(v);
        v.iter_mut().for_each(|x| *x -= m);
    };
    let norm = |v: &[f64]| gs.inner(v, v).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v0: Vec<f64> = (0..gs.len()).map(|_| rng.random::<f64>() - 0.5).collect();
    center(&mut v0);
    let s = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= s);
    let mut basis = vec![v0];
    let mut h = DMatrix::<f64>::zeros(krylov + 1, krylov);
    let mut m = krylov;
    for j in 0..krylov {
        let mut w = basis[j].clone();
        stepping.advance(&mut w, n)?;
        center(&mut w);
        // modified Gram–Schmidt, twice
        for _ in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let c = gs.inner(&w, b);
                h[(i, j)] += c;
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = norm(&w);
        h[(j + 1, j)] = beta;
        if beta < 1e-14 {
            m = j + 1;
            break;
        }
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }
    let hm = h.view((0, 0), (m, m)).into_owned();
    let top = hm
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    Ok(top.ln() / tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fporacle::build_grid_operator;
    use crate::model::Model;

    #[test]
    fn constants_are_preserved() {
        let gs = build_grid_operator(&Model::ou(), None, 31, 31).unwrap();
        let u = evolve(&gs, &vec![2.0; gs.len()], 1.0, 0.05).unwrap();
        assert!(u.iter().all(|v| (v - 2.0).abs() < 1e-12));
        let c = decay_curve(&gs, &vec![1.0; gs.len()], &[0.0, 0.5, 1.0], 0.05).unwrap();
        assert!(c.iter().all(|(_, v)| v.abs() < 1e-20));
    }

    #[test]
    fn mass_is_conserved() {
        let gs = build_grid_operator(&Model::ou(), None, 31, 31).unwrap();
        let f: Vec<f64> = gs.x.iter().flat_map(|&x| gs.y.iter().map(move |&y| (x + 0.3 * y).tanh())).collect();
        let m0 = gs.mean(&f);
        let u = evolve(&gs, &f, 1.0, 0.01).unwrap();
        assert!((gs.mean(&u) - m0).abs() < 1e-10);
    }

    #[test]
    fn stationary_density_is_fixed() {
        let gs = build_grid_operator(&Model::ou(), None, 31, 31).unwrap();
        let p = fp_evolve(&gs, &gs.weights, 1.0, 0.05).unwrap();
        for (a, b) in p.iter().zip(&gs.weights) {
            assert!((a - b).abs() < 1e-10 * b.max(1e-300) + 1e-18);
        }
    }

    #[test]
    fn rejects_off_grid_times() {
        let gs = build_grid_operator(&Model::ou(), None, 11, 11).unwrap();
        assert!(evolve(&gs, &vec![0.0; gs.len()], 0.105, 0.01).is_err());
    }
}
