//! Envelope-versus-data audit.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::rates::{fit_constants, fit_power_exponent, fit_stretch_exponent, DecayData, DecayKind, ExponentFit, Preset};

use super::config::Source;

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeSummary {
    pub family: String,
    pub params: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginRow {
    pub t: f64,
    pub v_hat: f64,
    pub se: f64,
    /// v̂ − 3·SE
    pub lower: f64,
    /// c₁ ξ(t) ‖f‖²_osc
    pub bound: f64,
    /// bound − lower; negative marks a violation.
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentComparison {
    pub fitted: f64,
    pub se: f64,
    pub points: usize,
    pub theoretical: f64,
    /// (fitted − theoretical) / se
    pub z: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub source: Source,
    pub envelope: EnvelopeSummary,
    pub osc_sq: f64,
    pub rows: Vec<MarginRow>,
    pub violations: usize,
    pub residual: f64,
    /// Absent when too few usable points remain in the fit window.
    pub exponent: Option<ExponentComparison>,
}

impl ComparisonReport {
    pub fn build(
        source: Source,
        family: &str,
        params: &[f64],
        preset: &Preset,
        data: &DecayData,
        fit_from: f64,
    ) -> Result<Self> {
        let shape = preset.shape()?;
        let fit = fit_constants(data, &shape)?;
        let env = &fit.envelope;
        let rows: Vec<MarginRow> = data
            .t
            .iter()
            .zip(&data.v)
            .zip(&data.se)
            .map(|((&t, &v), &se)| {
                let lower = v - 3.0 * se;
                let bound = env.bound(t, data.osc_sq);
                MarginRow {
                    t,
                    v_hat: v,
                    se,
                    lower,
                    bound,
                    margin: bound - lower,
                }
            })
            .collect();
        let (t_fit, v_fit): (Vec<f64>, Vec<f64>) = data
            .t
            .iter()
            .zip(&data.v)
            .filter(|(t, _)| **t >= fit_from)
            .map(|(t, v)| (*t, v / data.osc_sq))
            .unzip();
        let fitted: Option<ExponentFit> = match preset.kind() {
            DecayKind::Stretched => fit_stretch_exponent(&t_fit, &v_fit).ok(),
            DecayKind::Polynomial => fit_power_exponent(&t_fit, &v_fit).ok(),
        };
        let omega = preset.omega()?;
        let exponent = fitted.map(|f| ExponentComparison {
            fitted: f.value,
            se: f.se,
            points: f.points,
            theoretical: omega,
            z: if f.se > 0.0 { (f.value - omega) / f.se } else { f64::NAN },
        });
        Ok(Self {
            source,
            envelope: EnvelopeSummary {
                family: family.to_string(),
                params: params.to_vec(),
                c1: env.c1,
                c2: env.c2,
            },
            osc_sq: data.osc_sq,
            violations: data.violations(env),
            residual: fit.residual,
            rows,
            exponent,
        })
    }

    /// Columns: t, v_hat, se, lower, bound, margin.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "v_hat", "se", "lower", "bound", "margin"])?;
        for r in &self.rows {
            out.write_record(&[
                r.t.to_string(),
                r.v_hat.to_string(),
                r.se.to_string(),
                r.lower.to_string(),
                r.bound.to_string(),
                r.margin.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "envelope {} {:?}: c1 = {:.6e}, c2 = {:.6e}, violations = {}",
            self.envelope.family, self.envelope.params, self.envelope.c1, self.envelope.c2, self.violations
        )?;
        match &self.exponent {
            Some(e) => writeln!(
                f,
                "exponent: fitted {:.4} ± {:.4} ({} points), theoretical {:.4}",
                e.fitted, e.se, e.points, e.theoretical
            ),
            None => writeln!(f, "exponent: not enough usable points"),
        }
    }
}
