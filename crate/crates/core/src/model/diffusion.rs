//! The diffusion matrix field Σ(y) = (a_ij(y)).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::probes::{halton_ball, halton_cube, ray_points, ProbeSpec};

/// Writes Σ(y) row-major into the output.
pub type MatrixFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum DiffusionFamily {
    Identity,
    /// (1 + s·|y|²/(1 + |y|²))·I
    ScalarBounded { s: f64 },
    /// a_ii = 1 + s_i·y_i²/(1 + y_i²), off-diagonal zero.
    DiagonalBounded { s: Vec<f64> },
    /// A fixed symmetric matrix, row-major.
    Constant { matrix: Vec<f64> },
    /// `gradient` writes ∂_k a_ij at index (i·d + j)·d + k.
    Custom {
        sigma: MatrixFn,
        gradient: Option<MatrixFn>,
    },
}

impl fmt::Debug for DiffusionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::ScalarBounded { s } => f.debug_struct("ScalarBounded").field("s", s).finish(),
            Self::DiagonalBounded { s } => {
                f.debug_struct("DiagonalBounded").field("s", s).finish()
            }
            Self::Constant { matrix } => {
                f.debug_struct("Constant").field("matrix", matrix).finish()
            }
            Self::Custom { gradient, .. } => f
                .debug_struct("Custom")
                .field("has_gradient", &gradient.is_some())
                .finish_non_exhaustive(),
        }
    }
}

/// User-supplied constants; any `None` is estimated by probing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiffusionConstants {
    /// c_Σ with ⟨v, Σv⟩ ≥ |v|²/c_Σ.
    pub ellipticity: Option<f64>,
    /// M_Σ ≥ sup |a_ij|.
    pub m_sigma: Option<f64>,
    /// B_Σ ≥ max over the closed unit ball of |∂_j a_ij|.
    pub b_sigma: Option<f64>,
    /// M in |∂_k a_ij(y)| ≤ M(1_{B₁}(y) + |y|^β).
    pub growth: Option<f64>,
    pub beta: Option<f64>,
    pub p_sigma: Option<f64>,
}

/// Constants after estimation.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedConstants {
    pub ellipticity: f64,
    pub m_sigma: f64,
    pub b_sigma: f64,
    pub growth: f64,
    pub beta: f64,
    pub p_sigma: f64,
    pub n_sigma: f64,
}

#[derive(Clone, Debug)]
pub struct DiffusionField {
    dim: usize,
    family: DiffusionFamily,
    pub constants: DiffusionConstants,
}

impl DiffusionField {
    pub fn identity(dim: usize) -> Self {
        Self::new(dim, DiffusionFamily::Identity)
    }

    pub fn scalar_bounded(dim: usize, s: f64) -> Result<Self> {
        if !(s > -1.0) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scalar-bounded diffusion needs s > -1 (got {s})"
            )));
        }
        Ok(Self::new(dim, DiffusionFamily::ScalarBounded { s }))
    }

    pub fn diagonal_bounded(s: Vec<f64>) -> Result<Self> {
        if s.iter().any(|v| !(*v > -1.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "diagonal-bounded diffusion needs every s_i > -1".into(),
            ));
        }
        Ok(Self::new(s.len(), DiffusionFamily::DiagonalBounded { s }))
    }

    pub fn constant(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                what: "diffusion matrix entries",
                expected: dim * dim,
                got: matrix.len(),
            });
        }
        for i in 0..dim {
            for j in 0..i {
                if (matrix[i * dim + j] - matrix[j * dim + i]).abs() > 1e-14 {
                    return Err(Error::InvalidArgument("diffusion matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self::new(dim, DiffusionFamily::Constant { matrix }))
    }

    pub fn custom(dim: usize, sigma: MatrixFn, gradient: Option<MatrixFn>) -> Self {
        Self::new(dim, DiffusionFamily::Custom { sigma, gradient })
    }

    fn new(dim: usize, family: DiffusionFamily) -> Self {
        Self {
            dim,
            family,
            constants: DiffusionConstants::default(),
        }
    }

    pub fn with_constants(mut self, constants: DiffusionConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &DiffusionFamily {
        &self.family
    }

    /// Whether Σ does not depend on y.
    pub fn is_constant(&self) -> bool {
        matches!(
            self.family,
            DiffusionFamily::Identity | DiffusionFamily::Constant { .. }
        )
    }

    /// Σ(y), row-major d×d.
    #[inline]
    pub fn sigma_into(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match &self.family {
            DiffusionFamily::Identity => {
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = if i == j { 1.0 } else { 0.0 };
                    }
                }
            }
            DiffusionFamily::ScalarBounded { s } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                let a = 1.0 + s * r2 / (1.0 + r2);
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = if i == j { a } else { 0.0 };
                    }
                }
            }
            DiffusionFamily::DiagonalBounded { s } => {
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = if i == j {
                            let y2 = y[i] * y[i];
                            1.0 + s[i] * y2 / (1.0 + y2)
                        } else {
                            0.0
                        };
                    }
                }
            }
            DiffusionFamily::Constant { matrix } => out[..d * d].copy_from_slice(matrix),
            DiffusionFamily::Custom { sigma, .. } => sigma(y, out),
        }
    }

    pub fn sigma(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.sigma_into(y, &mut out);
        out
    }

    /// All first derivatives ∂_k a_ij, laid out at (i·d + j)·d + k.
    pub fn gradient_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim;
        match &self.family {
            DiffusionFamily::Identity | DiffusionFamily::Constant { .. } => {
                out[..d * d * d].iter_mut().for_each(|v| *v = 0.0);
            }
            DiffusionFamily::ScalarBounded { s } => {
                out[..d * d * d].iter_mut().for_each(|v| *v = 0.0);
                let r2: f64 = y.iter().map(|v| v * v).sum();
                let c = 2.0 * s / ((1.0 + r2) * (1.0 + r2));
                for i in 0..d {
                    for k in 0..d {
                        out[(i * d + i) * d + k] = c * y[k];
                    }
                }
            }
            DiffusionFamily::DiagonalBounded { s } => {
                out[..d * d * d].iter_mut().for_each(|v| *v = 0.0);
                for i in 0..d {
                    let y2 = y[i] * y[i];
                    out[(i * d + i) * d + i] = 2.0 * s[i] * y[i] / ((1.0 + y2) * (1.0 + y2));
                }
            }
            DiffusionFamily::Custom { gradient, .. } => match gradient {
                Some(g) => g(y, out),
                None => return Err(Error::DiffusionGradientUnavailable),
            },
        }
        Ok(())
    }

    pub fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim * self.dim * self.dim];
        self.gradient_into(y, &mut out)?;
        Ok(out)
    }

    /// (Σ_j ∂_j a_ij)_i
    #[inline]
    pub fn divergence_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim;
        match &self.family {
            DiffusionFamily::Identity | DiffusionFamily::Constant { .. } => {
                out[..d].iter_mut().for_each(|v| *v = 0.0);
                Ok(())
            }
            DiffusionFamily::ScalarBounded { s } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                let c = 2.0 * s / ((1.0 + r2) * (1.0 + r2));
                for i in 0..d {
                    out[i] = c * y[i];
                }
                Ok(())
            }
            DiffusionFamily::DiagonalBounded { s } => {
                for i in 0..d {
                    let y2 = y[i] * y[i];
                    out[i] = 2.0 * s[i] * y[i] / ((1.0 + y2) * (1.0 + y2));
                }
                Ok(())
            }
            DiffusionFamily::Custom { .. } => {
                let mut g = vec![0.0; d * d * d];
                self.gradient_into(y, &mut g)?;
                for i in 0..d {
                    out[i] = (0..d).map(|j| g[(i * d + j) * d + j]).sum();
                }
                Ok(())
            }
        }
    }

    /// Fills constants that were not supplied by maximizing over probes.
    pub fn resolve_constants(&self, probes: &ProbeSpec) -> Result<ResolvedConstants> {
        let d = self.dim;
        let c = &self.constants;
        let mut points = halton_cube(d, probes.count, probes.radius);
        for ray in ray_points(d, &probes.ray_radii) {
            for p in ray {
                points.extend(p);
            }
        }
        let mut sig = vec![0.0; d * d];
        let mut min_eig = f64::INFINITY;
        let mut max_entry = 0.0_f64;
        for y in points.chunks(d) {
            self.sigma_into(y, &mut sig);
            min_eig = min_eig.min(linalg::min_eigenvalue(&sig, d));
            max_entry = sig.iter().fold(max_entry, |m, v| m.max(v.abs()));
        }
        let beta = c.beta.unwrap_or(0.0);
        let needs_grad = c.b_sigma.is_none() || c.growth.is_none();
        let (b_est, m_est) = if needs_grad {
            let mut grad = vec![0.0; d * d * d];
            let mut b = 0.0_f64;
            for y in halton_ball(d, probes.count, 1.0).chunks(d) {
                self.gradient_into(y, &mut grad)?;
                for i in 0..d {
                    for j in 0..d {
                        b = b.max(grad[(i * d + j) * d + j].abs());
                    }
                }
            }
            let mut m = 0.0_f64;
            for y in points.chunks(d) {
                self.gradient_into(y, &mut grad)?;
                let r = linalg::norm(y);
                let ind = if r <= 1.0 { 1.0 } else { 0.0 };
                let scale = ind + r.powf(beta);
                m = grad.iter().fold(m, |acc, v| acc.max(v.abs() / scale));
            }
            (b, m)
        } else {
            (0.0, 0.0)
        };
        let ellipticity = c.ellipticity.unwrap_or(if min_eig > 0.0 {
            1.0 / min_eig
        } else {
            f64::INFINITY
        });
        let m_sigma = c.m_sigma.unwrap_or(max_entry);
        let b_sigma = c.b_sigma.unwrap_or(b_est);
        let growth = c.growth.unwrap_or(m_est);
        let p_sigma = c.p_sigma.unwrap_or(f64::INFINITY);
        let n_sigma = n_sigma(m_sigma, b_sigma, d, growth);
        Ok(ResolvedConstants {
            ellipticity,
            m_sigma,
            b_sigma,
            growth,
            beta,
            p_sigma,
            n_sigma,
        })
    }
}

/// N_Σ = √(M_Σ² + B_Σ² + d₂M²)
pub fn n_sigma(m_sigma: f64, b_sigma: f64, d2: usize, growth: f64) -> f64 {
    (m_sigma * m_sigma + b_sigma * b_sigma + d2 as f64 * growth * growth).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_bounded_values() {
        let s = DiffusionField::scalar_bounded(1, 1.0).unwrap();
        assert_eq!(s.sigma(&[1.0]), vec![1.5]);
        let g = s.gradient(&[1.0]).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let fields = [
            DiffusionField::scalar_bounded(2, 0.7).unwrap(),
            DiffusionField::diagonal_bounded(vec![0.5, 2.0]).unwrap(),
        ];
        let y = [0.4, -1.3];
        let h = 1e-6;
        for f in &fields {
            let g = f.gradient(&y).unwrap();
            for k in 0..2 {
                let mut a = y;
                let mut b = y;
                a[k] += h;
                b[k] -= h;
                let (sa, sb) = (f.sigma(&a), f.sigma(&b));
                for ij in 0..4 {
                    let fd = (sa[ij] - sb[ij]) / (2.0 * h);
                    assert!((fd - g[ij * 2 + k]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn missing_gradient_is_reported() {
        let f = DiffusionField::custom(1, Arc::new(|_y, out| out[0] = 2.0), None);
        let err = f.gradient(&[0.0]).unwrap_err();
        assert_eq!(err.to_string(), "diffusion gradient unavailable");
    }

    #[test]
    fn identity_constants() {
        let r = DiffusionField::identity(2)
            .resolve_constants(&ProbeSpec::default())
            .unwrap();
        assert_eq!(r.ellipticity, 1.0);
        assert_eq!(r.m_sigma, 1.0);
        assert_eq!(r.b_sigma, 0.0);
        assert_eq!(r.growth, 0.0);
        assert_eq!(r.n_sigma, 1.0);
    }

    #[test]
    fn supplied_constants_take_precedence() {
        let f = DiffusionField::scalar_bounded(1, 1.0)
            .unwrap()
            .with_constants(DiffusionConstants {
                m_sigma: Some(3.0),
                b_sigma: Some(4.0),
                growth: Some(0.0),
                ..Default::default()
            });
        let r = f.resolve_constants(&ProbeSpec::default()).unwrap();
        assert_eq!(r.n_sigma, 5.0);
    }

    #[test]
    fn scalar_bounded_b_sigma_is_interior_maximum() {
        // |2sy/(1+y²)²| peaks at y = 1/√3 with value 9/(8√3)
        let r = DiffusionField::scalar_bounded(1, 1.0)
            .unwrap()
            .resolve_constants(&ProbeSpec::default())
            .unwrap();
        let exact = 9.0 / (8.0 * 3f64.sqrt());
        assert!((r.b_sigma - exact).abs() < 1e-4, "{}", r.b_sigma);
        assert!((r.ellipticity - 1.0).abs() < 1e-12);
        assert!((r.m_sigma - 2.0).abs() < 1e-10);
    }
}
