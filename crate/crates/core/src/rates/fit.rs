//! Fitting c₁, c₂ to decay data, and asymptotic exponent regressions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rates::envelope::{DecayEnvelope, EnvelopeShape};

/// Variance-decay samples v̂(t) with standard errors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayData {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub se: Vec<f64>,
    /// ‖f‖²_osc, the scale of the envelope.
    pub osc_sq: f64,
}

impl DecayData {
    pub fn new(t: Vec<f64>, v: Vec<f64>, se: Vec<f64>, osc_sq: f64) -> Result<Self> {
        if t.len() != v.len() || t.len() != se.len() {
            return Err(Error::InvalidArgument("t, v and se must have equal length".into()));
        }
        if !(osc_sq > 0.0) || !osc_sq.is_finite() {
            return Err(Error::InvalidArgument(format!("osc² must be positive (got {osc_sq})")));
        }
        Ok(Self { t, v, se, osc_sq })
    }

    /// Noise-free data.
    pub fn exact(t: Vec<f64>, v: Vec<f64>, osc_sq: f64) -> Result<Self> {
        let se = vec![0.0; t.len()];
        Self::new(t, v, se, osc_sq)
    }

    /// v̂ − 3·SE at each time.
    pub fn lower_bounds(&self) -> Vec<f64> {
        self.v.iter().zip(&self.se).map(|(v, s)| v - 3.0 * s).collect()
    }

    /// Number of times where the lower confidence bound exceeds the envelope.
    pub fn violations(&self, env: &DecayEnvelope) -> usize {
        self.t
            .iter()
            .zip(self.lower_bounds())
            .filter(|(t, lcb)| *lcb > env.bound(**t, self.osc_sq))
            .count()
    }
}

#[derive(Clone, Debug)]
pub struct EnvelopeFit {
    pub envelope: DecayEnvelope,
    /// RMS misfit of ln v̂ against ln(c₁ξ‖f‖²_osc) over positive estimates.
    pub residual: f64,
    pub violations: usize,
}

struct Trial {
    ln_c1: f64,
    residual: f64,
}

fn trial(data: &DecayData, pos: &[usize], shape: &EnvelopeShape, ln_c2: f64) -> Trial {
    let c2 = ln_c2.exp();
    let ln_osc = data.osc_sq.ln();
    let s: Vec<f64> = data.t.iter().map(|t| shape.log_inv_xi(c2 * t)).collect();
    let gap = |i: usize| data.v[i].ln() - ln_osc + s[i];
    let ls = pos.iter().map(|&i| gap(i)).sum::<f64>() / pos.len() as f64;
    let feasible = data
        .lower_bounds()
        .iter()
        .enumerate()
        .filter(|(_, l)| **l > 0.0)
        .map(|(i, l)| l.ln() - ln_osc + s[i])
        .fold(f64::NEG_INFINITY, f64::max);
    // a relative nudge keeps the binding constraint satisfied after rounding
    let ln_c1 = if feasible >= ls { feasible + 1e-12 } else { ls };
    let residual = (pos.iter().map(|&i| (gap(i) - ln_c1).powi(2)).sum::<f64>() / pos.len() as f64).sqrt();
    Trial { ln_c1, residual }
}

/// Least-squares (c₁, c₂) on log scale, with c₁ raised until the envelope
/// upper-bounds every lower confidence bound.
pub fn fit_constants(data: &DecayData, shape: &EnvelopeShape) -> Result<EnvelopeFit> {
    let pos: Vec<usize> = (0..data.v.len()).filter(|&i| data.v[i] > 0.0 && data.v[i].is_finite()).collect();
    if pos.is_empty() {
        return Err(Error::EmptyDecay);
    }
    if pos.len() < 5 {
        return Err(Error::Precondition(format!(
            "fit needs at least 5 positive estimates (got {})",
            pos.len()
        )));
    }
    let (lo, hi, n) = (-6.0 * std::f64::consts::LN_10, 6.0 * std::f64::consts::LN_10, 121);
    let step = (hi - lo) / (n - 1) as f64;
    let best = (0..n)
        .map(|k| lo + step * k as f64)
        .map(|x| (x, trial(data, &pos, shape, x).residual))
        .fold((lo, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    // golden section on the bracket around the best scan point
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let f = |x: f64| trial(data, &pos, shape, x).residual;
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    let ln_c2 = if f1.min(f2) <= best.1 { 0.5 * (a + b) } else { best.0 };
    let t = trial(data, &pos, shape, ln_c2);
    let envelope = DecayEnvelope::new(shape.clone(), t.ln_c1.exp(), ln_c2.exp())?;
    let violations = data.violations(&envelope);
    Ok(EnvelopeFit {
        envelope,
        residual: t.residual,
        violations,
    })
}

/// Slope estimate with its ordinary-least-squares standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub value: f64,
    pub se: f64,
    pub points: usize,
}

fn ols_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 3 {
        return Err(Error::Precondition(format!("exponent fit needs at least 3 usable points (got {n})")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Precondition("exponent fit needs distinct times".into()));
    }
    let slope = sxy / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    Ok((slope, (rss / (n as f64 - 2.0) / sxx).sqrt()))
}

/// ω in v ≈ exp(−(ct)^ω): slope of ln ln(1/v) against ln t over 0 < v < 1.
pub fn fit_stretch_exponent(t: &[f64], v: &[f64]) -> Result<ExponentFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(v)
        .filter(|(t, v)| **t > 0.0 && **v > 0.0 && **v < 1.0)
        .map(|(t, v)| (t.ln(), (-v.ln()).ln()))
        .unzip();
    let (value, se) = ols_slope(&x, &y)?;
    Ok(ExponentFit { value, se, points: x.len() })
}

/// ω in v ≈ C t^{−ω}: minus the slope of ln v against ln t over v > 0.
pub fn fit_power_exponent(t: &[f64], v: &[f64]) -> Result<ExponentFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(v)
        .filter(|(t, v)| **t > 0.0 && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .unzip();
    let (slope, se) = ols_slope(&x, &y)?;
    Ok(ExponentFit { value: -slope, se, points: x.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::profile::Profile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exponential_round_trip() {
        let t: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let fit = fit_constants(&DecayData::exact(t, v, 1.0).unwrap(), &EnvelopeShape::exponential()).unwrap();
        assert!((fit.envelope.c2 / 2.0 - 1.0).abs() < 0.01, "{}", fit.envelope.c2);
        assert!((fit.envelope.c1 - 1.0).abs() < 0.01);
        assert_eq!(fit.violations, 0);
    }

    #[test]
    fn feasibility_with_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t: Vec<f64> = (0..30).map(|k| 0.2 * k as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| 0.8 * (-0.7 * t).exp() * (1.0 + 0.1 * (rng.random::<f64>() - 0.5))).collect();
        let se: Vec<f64> = v.iter().map(|v| 0.02 * v).collect();
        let data = DecayData::new(t, v, se, 2.0).unwrap();
        let fit = fit_constants(&data, &EnvelopeShape::exponential()).unwrap();
        assert_eq!(fit.violations, 0);
        assert!((fit.envelope.c2 / 0.7 - 1.0).abs() < 0.05);
    }

    #[test]
    fn errors() {
        let t = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let zero = DecayData::exact(t.clone(), vec![0.0; 6], 1.0).unwrap();
        assert!(matches!(fit_constants(&zero, &EnvelopeShape::exponential()), Err(Error::EmptyDecay)));
        let few = DecayData::exact(t, vec![1.0, 0.5, 0.2, 0.0, 0.0, 0.0], 1.0).unwrap();
        assert!(matches!(fit_constants(&few, &EnvelopeShape::exponential()), Err(Error::Precondition(_))));
    }

    #[test]
    fn noisy_stretched_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t: Vec<f64> = (0..40).map(|k| 10f64.powf(0.3 * k as f64)).collect();
        let v: Vec<f64> = t
            .iter()
            .map(|t| (-(t.powf(1.0 / 9.0))).exp() * (1.0 + 0.05 * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        let fit = fit_stretch_exponent(&t, &v).unwrap();
        assert!((fit.value * 9.0 - 1.0).abs() < 0.1, "{fit:?}");
        assert!(fit.se > 0.0 && fit.se < 0.01);
    }

    #[test]
    fn stretched_shape_round_trip() {
        let shape = EnvelopeShape::new(Profile::log_power(1.0, 4.0).unwrap(), Profile::unit());
        let truth = DecayEnvelope::new(shape.clone(), 0.5, 3.0).unwrap();
        let t: Vec<f64> = (1..30).map(|k| 10f64.powf(0.2 * k as f64)).collect();
        let v: Vec<f64> = t.iter().map(|t| truth.bound(*t, 1.0)).collect();
        let fit = fit_constants(&DecayData::exact(t, v, 1.0).unwrap(), &shape).unwrap();
        assert_eq!(fit.violations, 0);
        assert!((fit.envelope.c2 / 3.0 - 1.0).abs() < 0.02, "{}", fit.envelope.c2);
    }
}
