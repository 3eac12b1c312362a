//! The decay envelope
//!
//! ```text
//! ξ(t) = inf{ r > 0 : c₂t ≥ h(r) },   h(r) = α₁(r)² α₂(r/α₁(r)²) log(1/r)
//! ```
//!
//! solved in s = log(1/r) so that ξ far below the f64 range stays usable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::profile::Profile;

/// Largest s = log(1/r) considered; beyond this ξ is reported as e^{−S_MAX}.
pub const S_MAX: f64 = 1e300;

/// Where log(1/r) enters h.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogPlacement {
    /// h(r) = α₁(r)² α₂(r/α₁(r)²) log(1/r)
    #[default]
    Outside,
    /// h(r) = α₁(r)² α₂(r log(1/r)/α₁(r)²); not monotone, solved by scan + bisection.
    Inside,
}

#[derive(Clone, Debug)]
pub struct EnvelopeShape {
    pub alpha1: Profile,
    pub alpha2: Profile,
    pub placement: LogPlacement,
}

impl EnvelopeShape {
    pub fn new(alpha1: Profile, alpha2: Profile) -> Self {
        Self {
            alpha1,
            alpha2,
            placement: LogPlacement::Outside,
        }
    }

    /// α₁ = α₂ ≡ 1, so ξ(t) = e^{−c₂t}.
    pub fn exponential() -> Self {
        Self::new(Profile::unit(), Profile::unit())
    }

    pub fn with_placement(mut self, placement: LogPlacement) -> Self {
        self.placement = placement;
        self
    }

    /// ln h at r = e^{−s}.
    pub fn ln_h(&self, s: f64) -> f64 {
        // only r ∈ (0, 1) is searched
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let l1 = self.alpha1.ln_at_log(s);
        match self.placement {
            LogPlacement::Outside => 2.0 * l1 + self.alpha2.ln_at_log(s + 2.0 * l1) + s.ln(),
            LogPlacement::Inside => 2.0 * l1 + self.alpha2.ln_at_log(s - s.ln() + 2.0 * l1),
        }
    }

    /// log(1/ξ) for the budget c₂t.
    pub fn log_inv_xi(&self, budget: f64) -> f64 {
        if !(budget > 0.0) {
            return 0.0;
        }
        let target = budget.ln();
        let ok = |s: f64| self.ln_h(s) <= target;
        match self.placement {
            LogPlacement::Outside => {
                let (mut lo, mut hi) = (0.0, 1.0);
                while ok(hi) {
                    lo = hi;
                    hi *= 2.0;
                    if hi > S_MAX {
                        return S_MAX;
                    }
                }
                bisect(ok, lo, hi)
            }
            LogPlacement::Inside => {
                // largest feasible point of a geometric scan, then refine
                let mut s = 1e-8;
                let mut last = None;
                while s < S_MAX {
                    if ok(s) {
                        last = Some(s);
                    }
                    s *= 1.05;
                }
                match last {
                    None => 0.0,
                    Some(l) if l * 1.05 >= S_MAX => S_MAX,
                    Some(l) => bisect(ok, l, l * 1.05),
                }
            }
        }
    }

    pub fn xi(&self, budget: f64) -> f64 {
        (-self.log_inv_xi(budget)).exp()
    }
}

/// Largest feasible s in [lo, hi) given `ok(lo)` and `!ok(hi)`.
fn bisect(ok: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    loop {
        let tol = (1e-11_f64).max(8.0 * f64::EPSILON * hi);
        if hi - lo <= tol {
            return lo;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return lo;
        }
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecayEnvelope {
    pub shape: EnvelopeShape,
    pub c1: f64,
    pub c2: f64,
}

impl DecayEnvelope {
    pub fn new(shape: EnvelopeShape, c1: f64, c2: f64) -> Result<Self> {
        for (name, v) in [("c1", c1), ("c2", c2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive (got {v})")));
            }
        }
        Ok(Self { shape, c1, c2 })
    }

    pub fn xi(&self, t: f64) -> f64 {
        self.shape.xi(self.c2 * t)
    }

    pub fn log_inv_xi(&self, t: f64) -> f64 {
        self.shape.log_inv_xi(self.c2 * t)
    }

    /// c₁ ξ(t) ‖f‖²_osc
    pub fn bound(&self, t: f64, osc_sq: f64) -> f64 {
        self.c1 * self.xi(t) * osc_sq
    }
}

/// ξ(t) for an envelope; 1 when t = 0.
pub fn xi_eval(envelope: &DecayEnvelope, t: f64) -> f64 {
    envelope.xi(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_closed_form() {
        let env = DecayEnvelope::new(EnvelopeShape::exponential(), 1.0, 1.7).unwrap();
        for t in [0.1, 1.0, 3.0, 40.0] {
            let xi = xi_eval(&env, t);
            assert!((xi / (-1.7 * t).exp() - 1.0).abs() < 1e-9, "{t}: {xi}");
        }
        assert_eq!(xi_eval(&env, 0.0), 1.0);
    }

    #[test]
    fn minimality() {
        let shape = EnvelopeShape::new(Profile::power(1.0, 0.5).unwrap(), Profile::log_power(2.0, 1.0).unwrap());
        for budget in [0.5, 3.0, 100.0, 1e8] {
            let s = shape.log_inv_xi(budget);
            assert!(shape.ln_h(s) <= budget.ln());
            assert!(shape.ln_h(s + 1e-9) > budget.ln());
        }
    }

    #[test]
    fn power_profiles_slope() {
        let (a1, a2) = (0.4, 0.9);
        let shape = EnvelopeShape::new(Profile::power(1.0, a1).unwrap(), Profile::power(1.0, a2).unwrap());
        let (t1, t2) = (1e200, 1e250);
        let slope = -(shape.log_inv_xi(t2) - shape.log_inv_xi(t1)) / (t2.ln() - t1.ln());
        let expect = -1.0 / (2.0 * a1 + a2 + 2.0 * a1 * a2);
        assert!((slope / expect - 1.0).abs() < 0.01, "{slope} vs {expect}");
    }

    #[test]
    fn inside_variant_is_decreasing() {
        let shape = EnvelopeShape::new(Profile::power(1.0, 0.5).unwrap(), Profile::power(1.0, 0.5).unwrap())
            .with_placement(LogPlacement::Inside);
        let mut prev = 1.0;
        for k in 0..40 {
            let xi = shape.xi(1.5_f64.powi(k));
            assert!(xi <= prev && xi > 0.0);
            prev = xi;
        }
        assert!(prev < 1e-3);
    }
}
