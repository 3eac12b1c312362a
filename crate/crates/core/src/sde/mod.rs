//! Euler–Maruyama simulation of
//!
//! ```text
//! dX = Q∇Ψ(Y) dt
//! dY = √2 σ(Y) dB − (Q*∇Φ(X) − b(Y)) dt
//! ```
//!
//! and Monte Carlo estimators built on it.

pub mod estimators;
pub mod rng;

pub use estimators::{
    equilibrium_mean, estimate_decay, estimate_transition, martingale_residual, simulate_paths, DecayEstimate,
    PathSample, Start,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::operators::drift_b_into;
use crate::model::probes::{halton_cube, ProbeSpec};
use crate::model::{Model, MAX_DIM};

/// How σ with σσᵀ = Σ is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factorization {
    /// Lower-triangular Cholesky factor.
    #[default]
    Cholesky,
    /// Symmetric square root by eigen-decomposition.
    SymmetricSqrt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub h: f64,
    pub horizon: f64,
    #[serde(default)]
    pub factorization: Factorization,
    /// Paths whose state exceeds this in any coordinate are reported as blown up.
    #[serde(default = "default_guard")]
    pub guard: f64,
}

fn default_guard() -> f64 {
    1e8
}

/// h·(1 + |Q|² + sup|∇²Φ|) must stay below this.
pub const STABILITY_CAP: f64 = 0.5;

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            h: 1e-3,
            horizon: 20.0,
            factorization: Factorization::Cholesky,
            guard: default_guard(),
        }
    }
}

impl IntegratorConfig {
    pub fn new(h: f64, horizon: f64) -> Result<Self> {
        let c = Self {
            h,
            horizon,
            ..Self::default()
        };
        c.check()?;
        Ok(c)
    }

    pub fn with_factorization(mut self, f: Factorization) -> Self {
        self.factorization = f;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidArgument(format!("step h must be positive (got {})", self.h)));
        }
        if !(self.horizon >= self.h) {
            return Err(Error::InvalidArgument(format!(
                "horizon {} is shorter than the step {}",
                self.horizon, self.h
            )));
        }
        Ok(())
    }

    /// h·(1 + |Q|² + sup|∇²Φ|), the sup taken over the default probe cube.
    pub fn stability_number(&self, model: &Model) -> f64 {
        let d1 = model.d1();
        let spec = ProbeSpec::default();
        let mut h = vec![0.0; d1 * d1];
        let sup = halton_cube(d1, spec.count, spec.radius)
            .chunks(d1)
            .map(|x| {
                model.phi.hessian_into(x, &mut h);
                linalg::frobenius(&h)
            })
            .fold(0.0, f64::max);
        let q = model.q_norm();
        self.h * (1.0 + q * q + sup)
    }

    /// Checks h against the horizon and the stability cap.
    pub fn validate(&self, model: &Model) -> Result<()> {
        self.check()?;
        let s = self.stability_number(model);
        if !(s < STABILITY_CAP) {
            return Err(Error::Precondition(format!(
                "step h = {} gives h(1+|Q|²+sup|∇²Φ|) = {s:.4} >= {STABILITY_CAP}",
                self.h
            )));
        }
        Ok(())
    }

    /// Number of steps to reach t, which must be a multiple of h.
    pub fn steps_to(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time must be nonnegative (got {t})")));
        }
        let n = (t / self.h).round();
        if (n * self.h - t).abs() > 1e-9 * t.max(self.h) {
            return Err(Error::InvalidArgument(format!("time {t} is not a multiple of h = {}", self.h)));
        }
        Ok(n as usize)
    }
}

/// Reusable single-path integrator.
pub(crate) struct Stepper<'a> {
    model: &'a Model,
    h: f64,
    sqrt_2h: f64,
    factorization: Factorization,
    /// σ for constant Σ.
    fixed_sigma: Option<[f64; MAX_DIM * MAX_DIM]>,
    guard: f64,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(model: &'a Model, cfg: &IntegratorConfig) -> Result<Self> {
        let mut s = Self {
            model,
            h: cfg.h,
            sqrt_2h: (2.0 * cfg.h).sqrt(),
            factorization: cfg.factorization,
            fixed_sigma: None,
            guard: cfg.guard,
        };
        if model.sigma.is_constant() {
            let d = model.d2();
            let mut f = [0.0; MAX_DIM * MAX_DIM];
            s.factor(&vec![0.0; d], &mut f[..d * d])?;
            s.fixed_sigma = Some(f);
        }
        Ok(s)
    }

    fn factor(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.model.d2();
        let mut sig = [0.0; MAX_DIM * MAX_DIM];
        self.model.sigma.sigma_into(y, &mut sig[..d * d]);
        let ok = match self.factorization {
            Factorization::Cholesky => linalg::cholesky_lower(&sig[..d * d], d, out),
            Factorization::SymmetricSqrt => linalg::symmetric_sqrt(&sig[..d * d], d, out),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite { point: y.to_vec() })
        }
    }

    /// One step in place; `xi` is a standard normal vector of length d₂.
    pub(crate) fn step(&self, x: &mut [f64], y: &mut [f64], xi: &[f64]) -> Result<()> {
        let (d1, d2) = (self.model.d1(), self.model.d2());
        let mut qpsi = [0.0; MAX_DIM];
        let mut qphi = [0.0; MAX_DIM];
        let mut b = [0.0; MAX_DIM];
        let mut noise = [0.0; MAX_DIM];
        match &self.fixed_sigma {
            Some(f) => linalg::matvec(&f[..d2 * d2], d2, d2, xi, &mut noise[..d2]),
            None => {
                let mut f = [0.0; MAX_DIM * MAX_DIM];
                self.factor(y, &mut f[..d2 * d2])?;
                linalg::matvec(&f[..d2 * d2], d2, d2, xi, &mut noise[..d2]);
            }
        }
        crate::model::operators::transport_fields(self.model, x, y, &mut qpsi[..d1], &mut qphi[..d2]);
        drift_b_into(self.model, y, &mut b[..d2])?;
        for i in 0..d1 {
            x[i] += self.h * qpsi[i];
        }
        for j in 0..d2 {
            y[j] += self.sqrt_2h * noise[j] - self.h * (qphi[j] - b[j]);
        }
        Ok(())
    }

    pub(crate) fn check_guard(&self, x: &[f64], y: &[f64], step: usize) -> Result<()> {
        if x.iter().chain(y).all(|v| v.abs() <= self.guard) {
            Ok(())
        } else {
            Err(Error::PathBlowUp { step, guard: self.guard })
        }
    }
}

/// One Euler–Maruyama step from (x, y) with Gaussian increment ξ.
pub fn em_step(
    model: &Model,
    x: &[f64],
    y: &[f64],
    h: f64,
    xi: &[f64],
    factorization: Factorization,
) -> Result<(Vec<f64>, Vec<f64>)> {
    crate::error::check_dim("x", model.d1(), x.len())?;
    crate::error::check_dim("y", model.d2(), y.len())?;
    crate::error::check_dim("increment", model.d2(), xi.len())?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h must be positive (got {h})")));
    }
    let cfg = IntegratorConfig {
        h,
        horizon: h,
        factorization,
        guard: f64::INFINITY,
    };
    let stepper = Stepper::new(model, &cfg)?;
    let (mut x, mut y) = (x.to_vec(), y.to_vec());
    stepper.step(&mut x, &mut y, xi)?;
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiffusionField, Potential};

    #[test]
    fn ou_deterministic_step() {
        let (x, y) = em_step(&Model::ou(), &[0.0], &[1.0], 0.1, &[0.0], Factorization::Cholesky).unwrap();
        assert!((x[0] - 0.1).abs() < 1e-15);
        assert!((y[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_without_forces() {
        let m = Model::ou();
        let (x, y) = em_step(&m, &[0.0], &[0.0], 0.3, &[0.0], Factorization::SymmetricSqrt).unwrap();
        assert_eq!((x[0], y[0]), (0.0, 0.0));
    }

    #[test]
    fn scalar_four_noise_coefficient() {
        let m = Model::new(
            vec![1.0],
            Potential::standard_gaussian(1),
            Potential::standard_gaussian(1),
            DiffusionField::constant(1, vec![4.0]).unwrap(),
        )
        .unwrap();
        let h = 0.01;
        for fact in [Factorization::Cholesky, Factorization::SymmetricSqrt] {
            let (_, y0) = em_step(&m, &[0.0], &[0.0], h, &[0.0], fact).unwrap();
            let (_, y1) = em_step(&m, &[0.0], &[0.0], h, &[1.0], fact).unwrap();
            assert!((y1[0] - y0[0] - (2.0 * h).sqrt() * 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn non_positive_definite_is_reported() {
        let m = Model::new(
            vec![1.0],
            Potential::standard_gaussian(1),
            Potential::standard_gaussian(1),
            DiffusionField::custom(1, std::sync::Arc::new(|y, o| o[0] = 1.0 - y[0]), None),
        )
        .unwrap();
        let e = em_step(&m, &[0.0], &[2.0], 0.1, &[0.0], Factorization::Cholesky).unwrap_err();
        assert!(e.to_string().contains("Σ1"), "{e}");
    }

    #[test]
    fn config_checks() {
        assert!(IntegratorConfig::new(0.0, 1.0).is_err());
        assert!(IntegratorConfig::new(0.1, 0.01).is_err());
        let c = IntegratorConfig::new(1e-3, 4.0).unwrap();
        assert!(c.validate(&Model::ou()).is_ok());
        assert_eq!(c.steps_to(0.5).unwrap(), 500);
        assert!(c.steps_to(0.0005).is_err());
        let big = IntegratorConfig::new(0.3, 4.0).unwrap();
        assert!(matches!(big.validate(&Model::ou()), Err(Error::Precondition(_))));
    }
}
