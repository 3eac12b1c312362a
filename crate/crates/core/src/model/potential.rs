//! Confining potentials Φ on ℝ^{d₁} and Ψ on ℝ^{d₂}.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::quadrature::integrate_to_infinity;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Writes its result into the output slice.
pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Optional growth constants attached to a potential. `None` means "estimate
/// by probing" where a consumer needs the value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PotentialMeta {
    /// K in |∇²V| ≤ K(1 + |∇V|^α).
    pub hessian_growth: Option<f64>,
    /// α ∈ [1, 2) in the same bound.
    pub hessian_exponent: Option<f64>,
    /// C in |∇²Φ| ≤ C(1 + |∇Φ|).
    pub hessian_gradient_ratio: Option<f64>,
    /// N in |∇Φ(x)| ≤ N(1 + |x|^γ).
    pub gradient_growth: Option<f64>,
    /// γ in the same bound.
    pub gradient_exponent: Option<f64>,
}

#[derive(Clone)]
pub enum PotentialFamily {
    /// κ(1 + |x|²)^{ε/2}
    PowerLaw { kappa: f64, exponent: f64 },
    /// ((p + d)/2) log(1 + |x|²)
    LogPower { tail: f64, dim: usize },
    /// |Λx − a|²/2, stored with Λ row-major.
    Quadratic {
        lambda: Vec<f64>,
        shift: Vec<f64>,
        lambda_inv: Vec<f64>,
    },
    /// User callbacks. `radius` is the asserted radius outside of which the
    /// normalized mass of e^{-V} is negligible.
    Custom {
        value: ScalarFn,
        gradient: VectorFn,
        hessian: VectorFn,
        radius: f64,
        radial: bool,
    },
}

impl fmt::Debug for PotentialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLaw { kappa, exponent } => f
                .debug_struct("PowerLaw")
                .field("kappa", kappa)
                .field("exponent", exponent)
                .finish(),
            Self::LogPower { tail, dim } => f
                .debug_struct("LogPower")
                .field("tail", tail)
                .field("dim", dim)
                .finish(),
            Self::Quadratic { lambda, shift, .. } => f
                .debug_struct("Quadratic")
                .field("lambda", lambda)
                .field("shift", shift)
                .finish(),
            Self::Custom { radius, radial, .. } => f
                .debug_struct("Custom")
                .field("radius", radius)
                .field("radial", radial)
                .finish_non_exhaustive(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Potential {
    dim: usize,
    family: PotentialFamily,
    pub meta: PotentialMeta,
}

impl Potential {
    pub fn power_law(dim: usize, kappa: f64, exponent: f64) -> Result<Self> {
        if !(kappa > 0.0 && exponent > 0.0) || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "power law needs kappa > 0, exponent > 0, dim > 0 (got {kappa}, {exponent}, {dim})"
            )));
        }
        Ok(Self {
            dim,
            family: PotentialFamily::PowerLaw { kappa, exponent },
            meta: PotentialMeta::default(),
        })
    }

    /// ((p + d)/2) log(1 + |x|²). Any finite `tail` is accepted here;
    /// integrability (p > 0) is checked when the measure is normalized.
    pub fn log_power(dim: usize, tail: f64) -> Result<Self> {
        if !tail.is_finite() || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "log power needs finite tail and dim > 0 (got {tail}, {dim})"
            )));
        }
        Ok(Self {
            dim,
            family: PotentialFamily::LogPower { tail, dim },
            meta: PotentialMeta::default(),
        })
    }

    /// |Λx − a|²/2 with Λ given row-major.
    pub fn quadratic(lambda: Vec<f64>, shift: Vec<f64>) -> Result<Self> {
        let dim = shift.len();
        if dim == 0 || lambda.len() != dim * dim {
            return Err(Error::InvalidArgument(format!(
                "quadratic potential needs a {dim}x{dim} matrix, got {} entries",
                lambda.len()
            )));
        }
        let m = DMatrix::from_row_slice(dim, dim, &lambda);
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("quadratic potential: Λ is singular".into()))?;
        let lambda_inv = (0..dim * dim).map(|k| inv[(k / dim, k % dim)]).collect();
        Ok(Self {
            dim,
            family: PotentialFamily::Quadratic {
                lambda,
                shift,
                lambda_inv,
            },
            meta: PotentialMeta::default(),
        })
    }

    /// |x|²/2 on ℝ^d.
    pub fn standard_gaussian(dim: usize) -> Self {
        let mut lambda = vec![0.0; dim * dim];
        for i in 0..dim {
            lambda[i * dim + i] = 1.0;
        }
        Self::quadratic(lambda, vec![0.0; dim]).expect("identity is invertible")
    }

    pub fn custom(
        dim: usize,
        value: ScalarFn,
        gradient: VectorFn,
        hessian: VectorFn,
        radius: f64,
    ) -> Self {
        Self {
            dim,
            family: PotentialFamily::Custom {
                value,
                gradient,
                hessian,
                radius,
                radial: false,
            },
            meta: PotentialMeta::default(),
        }
    }

    /// Declares a custom potential to be a function of |x|² only.
    pub fn declared_radial(mut self) -> Self {
        if let PotentialFamily::Custom { radial, .. } = &mut self.family {
            *radial = true;
        }
        self
    }

    pub fn with_meta(mut self, meta: PotentialMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, PotentialFamily::Quadratic { .. })
    }

    /// Whether the potential is of the form ψ(|Λx − a|²).
    pub fn is_affine_radial(&self) -> bool {
        match &self.family {
            PotentialFamily::Custom { radial, .. } => *radial,
            _ => true,
        }
    }

    /// Mode of e^{-V} for the built-in families (origin for custom ones).
    pub fn center(&self) -> Vec<f64> {
        match &self.family {
            PotentialFamily::Quadratic {
                shift, lambda_inv, ..
            } => {
                let mut c = vec![0.0; self.dim];
                linalg::matvec(lambda_inv, self.dim, self.dim, shift, &mut c);
                c
            }
            _ => vec![0.0; self.dim],
        }
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.family {
            PotentialFamily::PowerLaw { kappa, exponent } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                kappa * (1.0 + r2).powf(exponent / 2.0)
            }
            PotentialFamily::LogPower { tail, dim } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                0.5 * (tail + *dim as f64) * r2.ln_1p()
            }
            PotentialFamily::Quadratic { lambda, shift, .. } => {
                let d = self.dim;
                let mut s = 0.0;
                for i in 0..d {
                    let r = linalg::dot(&lambda[i * d..(i + 1) * d], x) - shift[i];
                    s += r * r;
                }
                0.5 * s
            }
            PotentialFamily::Custom { value, .. } => value(x),
        }
    }

    #[inline]
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.family {
            PotentialFamily::PowerLaw { kappa, exponent } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let c = kappa * exponent * (1.0 + r2).powf(exponent / 2.0 - 1.0);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
            PotentialFamily::LogPower { tail, dim } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let c = (tail + *dim as f64) / (1.0 + r2);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
            PotentialFamily::Quadratic { lambda, shift, .. } => {
                let d = self.dim;
                if d == 1 {
                    out[0] = lambda[0] * (lambda[0] * x[0] - shift[0]);
                    return;
                }
                let mut r = [0.0; 8];
                let mut rv = vec![];
                let res: &mut [f64] = if d <= 8 {
                    &mut r[..d]
                } else {
                    rv.resize(d, 0.0);
                    &mut rv
                };
                for i in 0..d {
                    res[i] = linalg::dot(&lambda[i * d..(i + 1) * d], x) - shift[i];
                }
                linalg::matvec_t(lambda, d, d, res, out);
            }
            PotentialFamily::Custom { gradient, .. } => gradient(x, out),
        }
    }

    /// Row-major d×d Hessian.
    #[inline]
    pub fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match &self.family {
            PotentialFamily::PowerLaw { kappa, exponent } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let base = 1.0 + r2;
                let c1 = kappa * exponent * base.powf(exponent / 2.0 - 1.0);
                let c2 = kappa * exponent * (exponent - 2.0) * base.powf(exponent / 2.0 - 2.0);
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        out[i * d + j] = c1 * delta + c2 * x[i] * x[j];
                    }
                }
            }
            PotentialFamily::LogPower { tail, dim } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let k = tail + *dim as f64;
                let base = 1.0 + r2;
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        out[i * d + j] = k * delta / base - 2.0 * k * x[i] * x[j] / (base * base);
                    }
                }
            }
            PotentialFamily::Quadratic { lambda, .. } => {
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = (0..d).map(|k| lambda[k * d + i] * lambda[k * d + j]).sum();
                    }
                }
            }
            PotentialFamily::Custom { hessian, .. } => hessian(x, out),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.gradient_into(x, &mut g);
        g
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.dim * self.dim];
        self.hessian_into(x, &mut h);
        h
    }

    /// Upper bound on ∫_{|x|>R} e^{-V(x)} dx (unnormalized). Infinite when the
    /// family is not integrable.
    pub fn tail_bound(&self, radius: f64) -> f64 {
        let d = self.dim;
        let sphere = unit_sphere_area(d);
        match &self.family {
            PotentialFamily::PowerLaw { kappa, exponent } => {
                let (kappa, eps) = (*kappa, *exponent);
                // e^{-κ(1+r²)^{ε/2}} ≤ e^{-κ r^ε}
                sphere
                    * integrate_to_infinity(
                        |r| r.powi(d as i32 - 1) * (-kappa * r.powf(eps)).exp(),
                        radius,
                        1e-14,
                    )
            }
            PotentialFamily::LogPower { tail, .. } => {
                if *tail <= 0.0 {
                    return f64::INFINITY;
                }
                // (1+r²)^{-(p+d)/2} ≤ r^{-(p+d)}
                sphere * radius.powf(-tail) / tail
            }
            PotentialFamily::Quadratic { lambda, .. } => {
                let m = DMatrix::from_row_slice(d, d, lambda);
                let smin = m
                    .singular_values()
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                let c = self.center();
                let offset = linalg::norm(&c);
                let inner = (radius - offset).max(0.0);
                sphere
                    * integrate_to_infinity(
                        |r| r.powi(d as i32 - 1) * (-0.5 * smin * smin * r * r).exp(),
                        inner,
                        1e-14,
                    )
            }
            PotentialFamily::Custom { radius: r0, .. } => {
                if radius >= *r0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// A starting radius for the tail search.
    pub(crate) fn initial_radius(&self) -> f64 {
        let c = linalg::norm(&self.center());
        match &self.family {
            PotentialFamily::Custom { radius, .. } => radius.max(1.0),
            _ => 1.0 + c,
        }
    }
}

/// Surface area of the unit sphere in ℝ^d.
pub fn unit_sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half_integer(d)
}

/// Γ(d/2) for positive integers d.
fn gamma_half_integer(d: usize) -> f64 {
    let mut g = if d.is_multiple_of(2) {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut x = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < d as f64 / 2.0 - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(p: &Potential, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (p.value(&a) - p.value(&b)) / (2.0 * h)
            })
            .collect()
    }

    fn fd_hessian(p: &Potential, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        let d = x.len();
        let mut out = vec![0.0; d * d];
        for j in 0..d {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[j] += h;
            b[j] -= h;
            let ga = p.gradient(&a);
            let gb = p.gradient(&b);
            for i in 0..d {
                out[i * d + j] = (ga[i] - gb[i]) / (2.0 * h);
            }
        }
        out
    }

    fn assert_rel(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            let scale = x.abs().max(y.abs()).max(1.0);
            assert!((x - y).abs() <= tol * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn power_law_matches_closed_form() {
        let p = Potential::power_law(2, 1.5, 0.5).unwrap();
        let x = [0.3, -1.2];
        let r2: f64 = 0.09 + 1.44;
        assert!((p.value(&x) - 1.5 * (1.0 + r2).powf(0.25)).abs() < 1e-14);
    }

    #[test]
    fn quadratic_is_shifted_half_square() {
        let p = Potential::quadratic(vec![2.0, 0.0, 1.0, 1.0], vec![1.0, -1.0]).unwrap();
        let y = [0.5, 2.0];
        // Λy − a = (1 − 1, 2.5 + 1)
        assert!((p.value(&y) - 0.5 * 3.5 * 3.5).abs() < 1e-14);
        assert_eq!(p.center(), vec![0.5, -1.5]);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let family = vec![
            Potential::power_law(1, 2.0, 0.5).unwrap(),
            Potential::power_law(3, 0.7, 1.3).unwrap(),
            Potential::log_power(1, 10.0).unwrap(),
            Potential::log_power(2, 3.0).unwrap(),
            Potential::quadratic(vec![1.0, 0.3, -0.2, 2.0], vec![0.4, 0.1]).unwrap(),
        ];
        let probes = [0.0, 0.37, -1.1, 2.5, -4.0];
        for p in &family {
            for (k, &base) in probes.iter().enumerate() {
                let x: Vec<f64> = (0..p.dim()).map(|i| base + 0.31 * (i + k) as f64).collect();
                assert_rel(&p.gradient(&x), &fd_gradient(p, &x), 1e-6);
                assert_rel(&p.hessian(&x), &fd_hessian(p, &x), 1e-6);
            }
        }
    }

    #[test]
    fn log_power_tail_is_infinite_below_threshold() {
        let p = Potential::log_power(1, -0.5).unwrap();
        assert!(p.tail_bound(100.0).is_infinite());
        let q = Potential::log_power(1, 2.0).unwrap();
        assert!((q.tail_bound(10.0) - 2.0 * 0.01 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_tail_bound_matches_erfc() {
        // 1-D: ∫_{|x|>3} e^{-x²/2} dx = √(2π)·erfc(3/√2) ≈ 0.006767
        let p = Potential::standard_gaussian(1);
        let t = p.tail_bound(3.0);
        assert!((t - 0.006_766_6).abs() < 1e-6, "{t}");
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((unit_sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-13);
    }
}
