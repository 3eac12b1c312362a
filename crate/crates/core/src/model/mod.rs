//! Problem data for the degenerate Langevin system
//!
//! ```text
//! dX = Q∇Ψ(Y) dt
//! dY = √2 σ(Y) dB − (Q*∇Φ(X) − b(Y)) dt,      σσᵀ = Σ
//! ```
//!
//! and pointwise evaluation of its generator and related operators.

pub mod conditions;
pub mod diffusion;
pub mod operators;
pub mod potential;
pub mod probes;
pub mod projection;
pub mod test_function;

pub use conditions::{validate_conditions, ConditionEntry, ConditionId, ConditionReport, Status};
pub use diffusion::{DiffusionConstants, DiffusionFamily, DiffusionField, ResolvedConstants};
pub use operators::{apply_a, apply_l, apply_s, drift_b};
pub use potential::{Potential, PotentialFamily, PotentialMeta};
pub use probes::ProbeSpec;
pub use projection::Projection;
pub use test_function::{Callbacks, TensorTerm, TestFunction, Univariate};

use crate::error::{check_dim, Error, Result};

/// Dimensions above this are rejected; everything here is desk scale.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Debug)]
pub struct Model {
    d1: usize,
    d2: usize,
    q: Vec<f64>,
    pub phi: Potential,
    pub psi: Potential,
    pub sigma: DiffusionField,
    pub name: String,
}

impl Model {
    /// `q` is the d₁×d₂ coupling matrix, row-major.
    pub fn new(q: Vec<f64>, phi: Potential, psi: Potential, sigma: DiffusionField) -> Result<Self> {
        let (d1, d2) = (phi.dim(), psi.dim());
        if d1 > MAX_DIM || d2 > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "dimensions above {MAX_DIM} are not supported"
            )));
        }
        check_dim("Q entries", d1 * d2, q.len())?;
        check_dim("diffusion dimension", d2, sigma.dim())?;
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("Q has non-finite entries".into()));
        }
        Ok(Self {
            d1,
            d2,
            q,
            phi,
            psi,
            sigma,
            name: String::new(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Kinetic Ornstein–Uhlenbeck: Φ = x²/2, Ψ = y²/2, Σ ≡ 1, Q = 1.
    pub fn ou() -> Self {
        Self::new(
            vec![1.0],
            Potential::standard_gaussian(1),
            Potential::standard_gaussian(1),
            DiffusionField::identity(1),
        )
        .expect("valid preset")
        .with_name("ou")
    }

    /// Gaussian potentials with Σ(y) = 1 + s·y²/(1 + y²).
    pub fn variable_sigma(s: f64) -> Result<Self> {
        Ok(Self::new(
            vec![1.0],
            Potential::standard_gaussian(1),
            Potential::standard_gaussian(1),
            DiffusionField::scalar_bounded(1, s)?,
        )?
        .with_name("variable_sigma"))
    }

    /// Φ = (1 + x²)^{δ/2}, Ψ = (1 + y²)^{ε/2}, Σ ≡ 1, Q = 1.
    pub fn stretched(delta: f64, eps: f64) -> Result<Self> {
        Ok(Self::new(
            vec![1.0],
            Potential::power_law(1, 1.0, delta)?,
            Potential::power_law(1, 1.0, eps)?,
            DiffusionField::identity(1),
        )?
        .with_name("stretched"))
    }

    /// Φ = ((q + 1)/2) log(1 + x²), Ψ = ((p + 1)/2) log(1 + y²), Σ ≡ 1, Q = 1.
    pub fn log_family(p: f64, q: f64) -> Result<Self> {
        Ok(Self::new(
            vec![1.0],
            Potential::log_power(1, q)?,
            Potential::log_power(1, p)?,
            DiffusionField::identity(1),
        )?
        .with_name("log_family"))
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Q Q*, d₁×d₁.
    pub fn qq_star(&self) -> Vec<f64> {
        let (d1, d2) = (self.d1, self.d2);
        let mut out = vec![0.0; d1 * d1];
        for i in 0..d1 {
            for j in 0..d1 {
                out[i * d1 + j] = (0..d2).map(|k| self.q[i * d2 + k] * self.q[j * d2 + k]).sum();
            }
        }
        out
    }

    /// Errors unless QQ* is invertible.
    pub fn require_qq_invertible(&self) -> Result<()> {
        let qq = self.qq_star();
        if crate::linalg::min_eigenvalue(&qq, self.d1) <= 1e-12 * crate::linalg::frobenius(&qq).max(1.0) {
            return Err(Error::Precondition("QQ* must be invertible".into()));
        }
        Ok(())
    }

    /// Spectral norm of Q (largest singular value).
    pub fn q_norm(&self) -> f64 {
        crate::linalg::max_eigenvalue(&self.qq_star(), self.d1).max(0.0).sqrt()
    }
}
