//! Weak Poincaré profiles, explicit rate exponents and the envelope ξ(t).

pub mod envelope;
pub mod fit;
pub mod profile;

pub use envelope::{xi_eval, DecayEnvelope, EnvelopeShape, LogPlacement};
pub use fit::{fit_constants, fit_power_exponent, fit_stretch_exponent, DecayData, EnvelopeFit, ExponentFit};
pub use profile::{Profile, ProfileForm};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive (got {v})")))
    }
}

/// ω(δ, ε) = δε / (δε + 8ε(1−δ)⁺ + 4δ(1−ε)⁺)
pub fn omega_stretched(delta: f64, eps: f64) -> Result<f64> {
    require_positive("δ", delta)?;
    require_positive("ε", eps)?;
    let de = delta * eps;
    Ok(de / (de + 8.0 * eps * pos(1.0 - delta) + 4.0 * delta * pos(1.0 - eps)))
}

/// θ(r) = (d+r+2)/r ∧ (4r+4+2d)/(r²−4−2d−2r)⁺, with x/0⁺ = +∞.
pub fn theta(r: f64, d: usize) -> Result<f64> {
    require_positive("r", r)?;
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let d = d as f64;
    let first = (d + r + 2.0) / r;
    let den = pos(r * r - 4.0 - 2.0 * d - 2.0 * r);
    let second = if den > 0.0 { (4.0 * r + 4.0 + 2.0 * d) / den } else { f64::INFINITY };
    Ok(first.min(second))
}

/// ω(p, q) = 1 / (2θ(q) + θ(p) + 2θ(q)θ(p))
pub fn omega_poly(p: f64, q: f64, d: usize) -> Result<f64> {
    let (tp, tq) = (theta(p, d)?, theta(q, d)?);
    Ok(1.0 / (2.0 * tq + tp + 2.0 * tq * tp))
}

/// Built-in profile families with known asymptotic envelope shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Preset {
    /// α₁ = α₂ ≡ 1
    Exponential,
    /// Φ ~ |x|^δ, Ψ ~ |y|^ε: ξ = exp(−(c₂t)^ω(δ,ε))
    Stretched { delta: f64, eps: f64 },
    /// log-type potentials with tails p (Ψ) and q (Φ): ξ ~ t^{−ω(p,q)}
    Polylog { p: f64, q: f64, d: usize },
}

/// How ξ decays for large t.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    /// ln ln(1/ξ) ~ ω ln t
    Stretched,
    /// ln ξ ~ −ω ln t
    Polynomial,
}

impl Preset {
    /// Parses a family name with positional parameters.
    pub fn parse(family: &str, params: &[f64], d: usize) -> Result<Self> {
        let need = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "family `{family}` takes {n} parameters (got {})",
                    params.len()
                )))
            }
        };
        match family {
            "exponential" => {
                need(0)?;
                Ok(Preset::Exponential)
            }
            "stretched" => {
                need(2)?;
                Ok(Preset::Stretched {
                    delta: params[0],
                    eps: params[1],
                })
            }
            "polylog" => {
                need(2)?;
                Ok(Preset::Polylog {
                    p: params[0],
                    q: params[1],
                    d,
                })
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown profile family `{other}` (expected exponential, stretched or polylog)"
            ))),
        }
    }

    pub fn profiles(&self) -> Result<(Profile, Profile)> {
        match *self {
            Preset::Exponential => Ok((Profile::unit(), Profile::unit())),
            Preset::Stretched { delta, eps } => {
                require_positive("δ", delta)?;
                require_positive("ε", eps)?;
                let k1 = 4.0 * pos(1.0 - delta) / delta;
                let k2 = 4.0 * pos(1.0 - eps) / eps;
                Ok((Profile::log_power(1.0, k1)?, Profile::log_power(1.0, k2)?))
            }
            Preset::Polylog { p, q, d } => Ok((Profile::power(1.0, theta(q, d)?)?, Profile::power(1.0, theta(p, d)?)?)),
        }
    }

    pub fn shape(&self) -> Result<EnvelopeShape> {
        let (a1, a2) = self.profiles()?;
        Ok(EnvelopeShape::new(a1, a2))
    }

    /// The theoretical exponent ω.
    pub fn omega(&self) -> Result<f64> {
        match *self {
            Preset::Exponential => Ok(1.0),
            Preset::Stretched { delta, eps } => omega_stretched(delta, eps),
            Preset::Polylog { p, q, d } => omega_poly(p, q, d),
        }
    }

    pub fn kind(&self) -> DecayKind {
        match self {
            Preset::Polylog { .. } => DecayKind::Polynomial,
            _ => DecayKind::Stretched,
        }
    }
}

/// (α₁, α₂) for a named family; see [`Preset::parse`].
pub fn preset_profiles(family: &str, params: &[f64], d: usize) -> Result<(Profile, Profile)> {
    Preset::parse(family, params, d)?.profiles()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_stretched_examples() {
        assert_eq!(omega_stretched(1.0, 1.0).unwrap(), 1.0);
        assert!((omega_stretched(0.5, 1.0).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(omega_stretched(2.0, 3.0).unwrap(), 1.0);
        assert!(omega_stretched(0.0, 1.0).is_err());
        assert!(omega_stretched(1.0, -2.0).is_err());
    }

    #[test]
    fn omega_is_one_iff_both_at_least_one() {
        for &d in &[0.3, 0.9, 1.0, 1.5, 4.0] {
            for &e in &[0.2, 0.99, 1.0, 2.0] {
                let w = omega_stretched(d, e).unwrap();
                assert!(w > 0.0 && w <= 1.0);
                assert_eq!(w == 1.0, d >= 1.0 && e >= 1.0, "{d} {e}");
            }
        }
    }

    #[test]
    fn theta_examples() {
        assert!((theta(10.0, 1).unwrap() - 23.0 / 37.0).abs() < 1e-15);
        assert_eq!(theta(2.0, 1).unwrap(), 2.5);
        let t = 23.0 / 37.0;
        let w = omega_poly(10.0, 10.0, 1).unwrap();
        assert!((w - 1.0 / (3.0 * t + 2.0 * t * t)).abs() < 1e-15);
    }

    #[test]
    fn presets() {
        let (a1, a2) = preset_profiles("stretched", &[1.0, 1.0], 1).unwrap();
        assert!(a1.is_unit() && a2.is_unit());
        let (a1, a2) = preset_profiles("polylog", &[10.0, 10.0], 1).unwrap();
        let a = 23.0 / 37.0;
        assert_eq!(a1.form(), Some(&ProfileForm::Power { c: 1.0, a }));
        assert_eq!(a2.form(), Some(&ProfileForm::Power { c: 1.0, a }));
        assert!(preset_profiles("gaussian", &[], 1).is_err());
        assert!(preset_profiles("stretched", &[1.0], 1).is_err());
    }

    #[test]
    fn stretched_half_one_is_closed_form() {
        // α₁ = (log 1/r)⁴, α₂ ≡ 1, so h = s⁹ and ξ = exp(−(c₂t)^{1/9})
        let shape = Preset::Stretched { delta: 0.5, eps: 1.0 }.shape().unwrap();
        for b in [1e3, 1e9, 1e30] {
            let s = shape.log_inv_xi(b);
            assert!((s / b.powf(1.0 / 9.0) - 1.0).abs() < 1e-10);
        }
    }
}
