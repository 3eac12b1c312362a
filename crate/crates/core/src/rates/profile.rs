//! Weak Poincaré profiles α: (0, ∞) → [1, ∞).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form shape of a profile before flooring at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ProfileForm {
    /// α(r) = c
    Constant { c: f64 },
    /// α(r) = c·r^{−a}
    Power { c: f64, a: f64 },
    /// α(r) = c·(log(1/r))^k, read as 0 for r ≥ 1 when k > 0
    LogPower { c: f64, k: f64 },
}

/// α(r) = max(1, form(r)).
#[derive(Clone)]
pub enum Profile {
    Form(ProfileForm),
    /// A user-supplied decreasing function; only its floor at 1 is enforced.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Form(p) => p.fmt(f),
            Profile::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Profile {
    pub fn unit() -> Self {
        Profile::Form(ProfileForm::Constant { c: 1.0 })
    }

    pub fn constant(c: f64) -> Result<Self> {
        positive("profile constant", c)?;
        Ok(Profile::Form(ProfileForm::Constant { c }))
    }

    pub fn power(c: f64, a: f64) -> Result<Self> {
        positive("profile constant", c)?;
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidArgument(format!("power exponent must be > 0 (got {a})")));
        }
        Ok(Profile::Form(ProfileForm::Power { c, a }))
    }

    pub fn log_power(c: f64, k: f64) -> Result<Self> {
        positive("profile constant", c)?;
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!("log exponent must be >= 0 (got {k})")));
        }
        Ok(Profile::Form(ProfileForm::LogPower { c, k }))
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Custom(Arc::new(f))
    }

    pub fn from_form(form: ProfileForm) -> Result<Self> {
        match form {
            ProfileForm::Constant { c } => Self::constant(c),
            ProfileForm::Power { c, a } => Self::power(c, a),
            ProfileForm::LogPower { c, k } => Self::log_power(c, k),
        }
    }

    pub fn form(&self) -> Option<&ProfileForm> {
        match self {
            Profile::Form(f) => Some(f),
            Profile::Custom(_) => None,
        }
    }

    /// `true` if α ≡ 1.
    pub fn is_unit(&self) -> bool {
        match self {
            Profile::Form(ProfileForm::Constant { c }) => *c <= 1.0,
            Profile::Form(ProfileForm::Power { .. }) => false,
            Profile::Form(ProfileForm::LogPower { c, k }) => *k == 0.0 && *c <= 1.0,
            Profile::Custom(_) => false,
        }
    }

    /// α(r) for r > 0.
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Custom(f) => f(r).max(1.0),
            Profile::Form(_) => self.ln_at_log(-r.ln()).exp(),
        }
    }

    /// ln α(e^{−s}); works without overflow for any finite s.
    pub fn ln_at_log(&self, s: f64) -> f64 {
        let ln = match self {
            Profile::Form(ProfileForm::Constant { c }) => c.ln(),
            Profile::Form(ProfileForm::Power { c, a }) => c.ln() + a * s,
            Profile::Form(ProfileForm::LogPower { c, k }) => {
                if *k == 0.0 {
                    c.ln()
                } else if s <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    c.ln() + k * s.ln()
                }
            }
            Profile::Custom(f) => f((-s).exp()).ln(),
        };
        if ln.is_nan() {
            f64::INFINITY
        } else {
            ln.max(0.0)
        }
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be a positive finite number (got {v})")))
    }
}
