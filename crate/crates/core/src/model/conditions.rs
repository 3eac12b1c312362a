//! Probe-based validators for the structural hypotheses on Φ, Ψ and Σ.
//!
//! Every check is evidence gathered on a deterministic probe set (Halton
//! points in a cube plus far-field rays) and, where an integral is involved,
//! on the Gibbs quadrature. A pass is therefore necessary-not-sufficient.

use std::fmt;

use serde::Serialize;

use crate::linalg;
use crate::measures::GibbsMeasure;
use crate::model::probes::{halton_cube, ray_points, ProbeSpec};
use crate::model::{Model, Potential};

const ELLIPTIC_FLOOR: f64 = 1e-6;
/// A quantity is "growing" along a ray if it increases by this factor from
/// radius 10⁴ to 10⁶.
const GROWTH_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ConditionId {
    Sigma1,
    Sigma2,
    Sigma3,
    Sigma4,
    Phi1,
    Phi2,
    Phi3,
    Psi1,
    Psi2,
    Psi3,
    Psi5,
    Psi6,
}

impl ConditionId {
    pub const ALL: [ConditionId; 12] = [
        Self::Sigma1,
        Self::Sigma2,
        Self::Sigma3,
        Self::Sigma4,
        Self::Phi1,
        Self::Phi2,
        Self::Phi3,
        Self::Psi1,
        Self::Psi2,
        Self::Psi3,
        Self::Psi5,
        Self::Psi6,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Sigma1 => "Σ1",
            Self::Sigma2 => "Σ2",
            Self::Sigma3 => "Σ3",
            Self::Sigma4 => "Σ4",
            Self::Phi1 => "Φ1",
            Self::Phi2 => "Φ2",
            Self::Phi3 => "Φ3",
            Self::Psi1 => "Ψ1",
            Self::Psi2 => "Ψ2",
            Self::Psi3 => "Ψ3",
            Self::Psi5 => "Ψ5",
            Self::Psi6 => "Ψ6",
        }
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Untestable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Untestable => "untestable",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionEntry {
    pub id: ConditionId,
    pub status: Status,
    /// Probe where the tested quantity was worst.
    pub worst_point: Vec<f64>,
    /// The measured quantity (constant estimate, integral, deviation…).
    pub value: f64,
    /// Slack against a supplied or intrinsic threshold; positive is good.
    pub margin: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConditionReport {
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn get(&self, id: ConditionId) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn status(&self, id: ConditionId) -> Option<Status> {
        self.get(id).map(|e| e.status)
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.status == Status::Pass)
    }

    pub fn any_fail(&self) -> bool {
        self.entries.iter().any(|e| e.status == Status::Fail)
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<4} {:<11} {:>13} {:>13}  note", "id", "status", "value", "margin")?;
        for e in &self.entries {
            let margin = e.margin.map_or("-".to_string(), |m| format!("{m:.6e}"));
            writeln!(
                f,
                "{:<4} {:<11} {:>13.6e} {:>13}  {}",
                e.id.label(),
                e.status.to_string(),
                e.value,
                margin,
                e.note
            )?;
        }
        Ok(())
    }
}

struct Probes {
    /// Bulk probes followed by ray probes.
    points: Vec<Vec<f64>>,
    /// For each ray, indices into `points` ordered by radius.
    rays: Vec<Vec<usize>>,
}

fn probes(d: usize, spec: &ProbeSpec) -> Probes {
    let mut points: Vec<Vec<f64>> = halton_cube(d, spec.count, spec.radius)
        .chunks(d)
        .map(|c| c.to_vec())
        .collect();
    let mut rays = vec![];
    for ray in ray_points(d, &spec.ray_radii) {
        let mut idx = vec![];
        for p in ray {
            idx.push(points.len());
            points.push(p);
        }
        rays.push(idx);
    }
    Probes { points, rays }
}

/// Whether `values` (indexed like the probes) keeps growing along some ray.
fn grows_along_rays(p: &Probes, values: &[f64]) -> bool {
    p.rays.iter().any(|ray| {
        let n = ray.len();
        if n < 3 {
            return false;
        }
        let (a, b) = (values[ray[n - 3]], values[ray[n - 1]]);
        b > GROWTH_FACTOR * a.max(f64::MIN_POSITIVE) && b > values[ray[n - 2]]
    })
}

fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
            if v.is_nan() || v > bv {
                (i, if v.is_nan() { f64::INFINITY } else { v })
            } else {
                (bi, bv)
            }
        })
}

fn entry(id: ConditionId, status: Status, worst_point: Vec<f64>, value: f64, margin: Option<f64>, note: impl Into<String>) -> ConditionEntry {
    ConditionEntry {
        id,
        status,
        worst_point,
        value,
        margin,
        note: note.into(),
    }
}

/// Runs every validator; failures are report entries, never errors.
pub fn validate_conditions(model: &Model, spec: &ProbeSpec) -> ConditionReport {
    let (d1, d2) = (model.d1(), model.d2());
    let px = probes(d1, spec);
    let py = probes(d2, spec);
    let mu1 = GibbsMeasure::new(model.phi.clone());
    let mu2 = GibbsMeasure::new(model.psi.clone());
    let mut entries = vec![];
    entries.extend(sigma_checks(model, &py, mu2.as_ref().ok()));
    entries.extend(phi_checks(model, &px, &mu1));
    entries.extend(psi_checks(&model.psi, &py, &mu2));
    ConditionReport { entries }
}

fn sigma_checks(model: &Model, p: &Probes, mu2: Option<&GibbsMeasure>) -> Vec<ConditionEntry> {
    let sigma = &model.sigma;
    let d = sigma.dim();
    let c = &sigma.constants;
    let mut out = vec![];

    // Σ1: symmetric, uniformly elliptic
    let mut min_eig = f64::INFINITY;
    let mut worst = 0;
    let mut asym = 0.0_f64;
    let mut s = vec![0.0; d * d];
    let mut entries_abs = Vec::with_capacity(p.points.len());
    for (k, y) in p.points.iter().enumerate() {
        sigma.sigma_into(y, &mut s);
        for i in 0..d {
            for j in 0..i {
                asym = asym.max((s[i * d + j] - s[j * d + i]).abs());
            }
        }
        let l = linalg::min_eigenvalue(&s, d);
        if l < min_eig || l.is_nan() {
            min_eig = if l.is_nan() { f64::NEG_INFINITY } else { l };
            worst = k;
        }
        entries_abs.push(s.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    let threshold = c.ellipticity.map_or(ELLIPTIC_FLOOR, |cs| 1.0 / cs);
    let margin = min_eig - threshold;
    let status = if asym > 1e-12 || !(margin >= 0.0) {
        Status::Fail
    } else {
        Status::Pass
    };
    let note = if asym > 1e-12 {
        format!("asymmetry {asym:.3e}")
    } else {
        format!("c_Σ ≈ {:.6}", 1.0 / min_eig)
    };
    out.push(entry(ConditionId::Sigma1, status, p.points[worst].clone(), min_eig, Some(margin), note));

    // Σ2: bounded, locally Lipschitz
    let (wi, max_abs) = argmax(&entries_abs);
    let mut grad = vec![0.0; d * d * d];
    let grad_ok = p.points.iter().all(|y| {
        sigma.gradient_into(y, &mut grad).is_ok() && grad.iter().all(|v| v.is_finite())
    });
    let has_grad = sigma.gradient_into(&vec![0.0; d], &mut grad).is_ok();
    let unbounded = grows_along_rays(p, &entries_abs) || !max_abs.is_finite();
    let margin = c.m_sigma.map(|m| m - max_abs);
    let status = if unbounded || margin.is_some_and(|m| m < 0.0) {
        Status::Fail
    } else if !has_grad {
        Status::Untestable
    } else if grad_ok {
        Status::Pass
    } else {
        Status::Fail
    };
    let note = if has_grad {
        format!("sup|a_ij| ≈ {max_abs:.6}")
    } else {
        "no gradient callback; local Lipschitz continuity not probed".into()
    };
    out.push(entry(ConditionId::Sigma2, status, p.points[wi].clone(), max_abs, margin, note));

    // Σ3: |∂_k a_ij| ≤ M(1_{B₁} + |y|^β)
    let beta = c.beta.unwrap_or(0.0);
    if !has_grad {
        out.push(entry(ConditionId::Sigma3, Status::Untestable, vec![], f64::NAN, None, "diffusion gradient unavailable"));
    } else {
        let ratios: Vec<f64> = p
            .points
            .iter()
            .map(|y| {
                let _ = sigma.gradient_into(y, &mut grad);
                let r = linalg::norm(y);
                let scale = if r <= 1.0 { 1.0 } else { 0.0 } + r.powf(beta);
                grad.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / scale
            })
            .collect();
        let (wi, m_est) = argmax(&ratios);
        let margin = c.growth.map(|m| m - m_est);
        let status = if !(0.0..1.0).contains(&beta)
            || !m_est.is_finite()
            || grows_along_rays(p, &ratios)
            || margin.is_some_and(|m| m < 0.0)
        {
            Status::Fail
        } else {
            Status::Pass
        };
        out.push(entry(ConditionId::Sigma3, status, p.points[wi].clone(), m_est, margin, format!("β = {beta}, M ≈ {m_est:.6}")));
    }

    // Σ4: |∇Σ| ∈ L^{2p}(μ₂)
    let p_sigma = c.p_sigma.unwrap_or(f64::INFINITY);
    if !has_grad {
        out.push(entry(ConditionId::Sigma4, Status::Untestable, vec![], f64::NAN, None, "diffusion gradient unavailable"));
    } else if p_sigma.is_infinite() {
        let norms: Vec<f64> = p
            .points
            .iter()
            .map(|y| {
                let _ = sigma.gradient_into(y, &mut grad);
                linalg::norm(&grad)
            })
            .collect();
        let (wi, sup) = argmax(&norms);
        let status = if sup.is_finite() && !grows_along_rays(p, &norms) {
            Status::Pass
        } else {
            Status::Fail
        };
        out.push(entry(ConditionId::Sigma4, status, p.points[wi].clone(), sup, None, "p_Σ = ∞: sup |∇Σ| on probes"));
    } else if let Some(mu2) = mu2 {
        let integral = mu2.moment(|y| match sigma.gradient(y) {
            Ok(g) => linalg::norm(&g).powf(2.0 * p_sigma),
            Err(_) => f64::NAN,
        });
        match integral {
            Ok(v) if v.is_finite() => out.push(entry(ConditionId::Sigma4, Status::Pass, vec![], v, None, format!("∫|∇Σ|^{{2p}} dμ₂ with p = {p_sigma}"))),
            _ => out.push(entry(ConditionId::Sigma4, Status::Fail, vec![], f64::INFINITY, None, "integral not finite")),
        }
    } else {
        out.push(entry(ConditionId::Sigma4, Status::Untestable, vec![], f64::NAN, None, "μ₂ quadrature unavailable"));
    }
    out
}

fn phi_checks(model: &Model, p: &Probes, mu1: &crate::error::Result<GibbsMeasure>) -> Vec<ConditionEntry> {
    let phi = &model.phi;
    let d = phi.dim();
    let meta = &phi.meta;
    let mut out = vec![];
    let values: Vec<f64> = p.points.iter().map(|x| phi.value(x)).collect();
    let grads: Vec<Vec<f64>> = p.points.iter().map(|x| phi.gradient(x)).collect();
    let gnorm: Vec<f64> = grads.iter().map(|g| linalg::norm(g)).collect();

    // Φ1: bounded below, locally Lipschitz, Z(Φ) < ∞
    let (wi, neg_min) = argmax(&values.iter().map(|v| -v).collect::<Vec<_>>());
    let finite = values.iter().all(|v| v.is_finite()) && gnorm.iter().all(|v| v.is_finite());
    let status = match (finite, mu1) {
        (true, Ok(_)) => Status::Pass,
        _ => Status::Fail,
    };
    let note = match mu1 {
        Ok(m) => format!("min Φ ≈ {:.6}, Z(Φ) ≈ {:.6e}", -neg_min, m.z()),
        Err(e) => format!("Z(Φ): {e}"),
    };
    out.push(entry(ConditionId::Phi1, status, p.points[wi].clone(), -neg_min, None, note));

    // Φ2: |∇Φ| ∈ L²(μ₁), |∇Φ| ≤ N(1 + |x|^γ) with γ < 1/β
    let gamma = meta.gradient_exponent.unwrap_or_else(|| {
        let slope = p
            .rays
            .iter()
            .map(|ray| {
                let n = ray.len();
                let (a, b) = (gnorm[ray[n - 2]], gnorm[ray[n - 1]]);
                let (ra, rb) = (linalg::norm(&p.points[ray[n - 2]]), linalg::norm(&p.points[ray[n - 1]]));
                (b / a).ln() / (rb / ra).ln()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let g = (slope.max(0.0) * 1e6).round() / 1e6;
        if g.is_finite() {
            g
        } else {
            f64::INFINITY
        }
    });
    let ratios: Vec<f64> = p
        .points
        .iter()
        .zip(&gnorm)
        .map(|(x, g)| g / (1.0 + linalg::norm(x).powf(gamma)))
        .collect();
    let (wi, n_est) = argmax(&ratios);
    let beta = model.sigma.constants.beta.unwrap_or(0.0);
    let gamma_ok = beta <= 0.0 || gamma < 1.0 / beta;
    let l2 = mu1.as_ref().ok().map(|m| m.grad_sq_moment());
    let margin = meta.gradient_growth.map(|n| n - n_est);
    let status = match l2 {
        Some(Ok(v)) if v.is_finite() && n_est.is_finite() && gamma_ok && margin.is_none_or(|m| m >= 0.0) => Status::Pass,
        None => Status::Untestable,
        _ => Status::Fail,
    };
    out.push(entry(
        ConditionId::Phi2,
        status,
        p.points[wi].clone(),
        n_est,
        margin,
        format!("γ = {gamma}, N ≈ {n_est:.6}"),
    ));

    // Φ3: |∇²Φ| ≤ C(1 + |∇Φ|)
    let mut h = vec![0.0; d * d];
    let ratios: Vec<f64> = p
        .points
        .iter()
        .zip(&gnorm)
        .map(|(x, g)| {
            phi.hessian_into(x, &mut h);
            linalg::frobenius(&h) / (1.0 + g)
        })
        .collect();
    let (wi, c_est) = argmax(&ratios);
    let margin = meta.hessian_gradient_ratio.map(|c| c - c_est);
    let status = if c_est.is_finite() && !grows_along_rays(p, &ratios) && margin.is_none_or(|m| m >= 0.0) {
        Status::Pass
    } else {
        Status::Fail
    };
    out.push(entry(ConditionId::Phi3, status, p.points[wi].clone(), c_est, margin, format!("C ≈ {c_est:.6}")));
    out
}

fn psi_checks(psi: &Potential, p: &Probes, mu2: &crate::error::Result<GibbsMeasure>) -> Vec<ConditionEntry> {
    let d = psi.dim();
    let meta = &psi.meta;
    let mut out = vec![];
    let values: Vec<f64> = p.points.iter().map(|y| psi.value(y)).collect();
    let grads: Vec<Vec<f64>> = p.points.iter().map(|y| psi.gradient(y)).collect();
    let gnorm: Vec<f64> = grads.iter().map(|g| linalg::norm(g)).collect();
    let hess: Vec<f64> = p
        .points
        .iter()
        .map(|y| linalg::frobenius(&psi.hessian(y)))
        .collect();

    // Ψ1: locally bounded, Z(Ψ) < ∞
    let (wi, vmax) = argmax(&values.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let status = match mu2 {
        Ok(_) if vmax.is_finite() => Status::Pass,
        _ => Status::Fail,
    };
    let note = match mu2 {
        Ok(m) => format!("Z(Ψ) ≈ {:.6e}", m.z()),
        Err(e) => format!("Z(Ψ): {e}"),
    };
    out.push(entry(ConditionId::Psi1, status, p.points[wi].clone(), vmax, None, note));

    // Ψ2: second derivatives locally integrable, ∂_jΨ ∈ L²_loc(μ₂)
    let (wi, hmax) = argmax(&hess);
    let status = match mu2 {
        Ok(m) => match (m.grad_sq_moment(), m.moment(|y| linalg::frobenius(&psi.hessian(y)))) {
            (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() && hmax.is_finite() => Status::Pass,
            _ => Status::Fail,
        },
        Err(_) => Status::Untestable,
    };
    out.push(entry(ConditionId::Psi2, status, p.points[wi].clone(), hmax, None, "Hessian finite on probes, |∇Ψ|² and |∇²Ψ| integrable"));

    // Ψ3: |∇²Ψ| ≤ K(1 + |∇Ψ|^α), α ∈ [1, 2)
    let alpha = meta.hessian_exponent.unwrap_or(1.0);
    let ratios: Vec<f64> = hess
        .iter()
        .zip(&gnorm)
        .map(|(h, g)| h / (1.0 + g.powf(alpha)))
        .collect();
    let (wi, k_est) = argmax(&ratios);
    let margin = meta.hessian_growth.map(|k| k - k_est);
    let status = if (1.0..2.0).contains(&alpha)
        && k_est.is_finite()
        && !grows_along_rays(p, &ratios)
        && margin.is_none_or(|m| m >= 0.0)
    {
        Status::Pass
    } else {
        Status::Fail
    };
    out.push(entry(ConditionId::Psi3, status, p.points[wi].clone(), k_est, margin, format!("α = {alpha}, K ≈ {k_est:.6}")));

    // Ψ5: Ψ(y) = ψ(|y|²)
    let devs: Vec<f64> = p
        .points
        .iter()
        .zip(&values)
        .map(|(y, v)| {
            let mut e = vec![0.0; d];
            e[0] = linalg::norm(y);
            let w = psi.value(&e);
            (w - v).abs() / (1.0 + v.abs())
        })
        .collect();
    let (wi, dev) = argmax(&devs);
    let status = if dev <= 1e-10 { Status::Pass } else { Status::Fail };
    out.push(entry(ConditionId::Psi5, status, p.points[wi].clone(), dev, Some(1e-10 - dev), "max relative deviation from radial symmetry"));

    // Ψ6: third derivatives in L²(μ₂), by central differences of the Hessian
    match mu2 {
        Ok(m) => {
            let integral = m.moment(|y| {
                let mut s = 0.0;
                for k in 0..d {
                    let h = 1e-4 * (1.0 + y[k].abs());
                    let (mut a, mut b) = (y.to_vec(), y.to_vec());
                    a[k] += h;
                    b[k] -= h;
                    let (ha, hb) = (psi.hessian(&a), psi.hessian(&b));
                    for ij in 0..d * d {
                        let t = (ha[ij] - hb[ij]) / (2.0 * h);
                        s += t * t;
                    }
                }
                s
            });
            match integral {
                Ok(v) if v.is_finite() => out.push(entry(ConditionId::Psi6, Status::Pass, vec![], v, None, "∫|∇³Ψ|² dμ₂ (finite differences)")),
                _ => out.push(entry(ConditionId::Psi6, Status::Fail, vec![], f64::INFINITY, None, "third derivatives not square integrable")),
            }
        }
        Err(_) => out.push(entry(ConditionId::Psi6, Status::Untestable, vec![], f64::NAN, None, "μ₂ quadrature unavailable")),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiffusionField, Potential};
    use std::sync::Arc;

    #[test]
    fn ou_all_pass() {
        let r = validate_conditions(&Model::ou(), &ProbeSpec::default());
        assert_eq!(r.entries.len(), 12);
        for id in ConditionId::ALL {
            assert_eq!(r.entries.iter().filter(|e| e.id == id).count(), 1);
        }
        assert!(r.all_pass(), "{r}");
        let s1 = r.get(ConditionId::Sigma1).unwrap();
        assert!((s1.value - 1.0).abs() < 1e-15);
        assert_eq!(r.get(ConditionId::Sigma3).unwrap().value, 0.0);
        assert_eq!(r.get(ConditionId::Sigma4).unwrap().value, 0.0);
    }

    #[test]
    fn stretched_psi_has_unit_alpha() {
        let m = Model::new(
            vec![1.0],
            Potential::power_law(1, 1.0, 0.5).unwrap(),
            Potential::power_law(1, 1.0, 0.5).unwrap(),
            DiffusionField::identity(1),
        )
        .unwrap();
        let r = validate_conditions(&m, &ProbeSpec::default());
        assert_eq!(r.status(ConditionId::Psi3), Some(Status::Pass));
        let phi2 = r.get(ConditionId::Phi2).unwrap();
        assert_eq!(phi2.status, Status::Pass);
        assert!(phi2.note.starts_with("γ = 0,"), "{}", phi2.note);
    }

    #[test]
    fn degenerate_ray_fails_ellipticity() {
        let sigma = DiffusionField::custom(
            1,
            Arc::new(|y, o| o[0] = 1.0 / (1.0 + y[0] * y[0])),
            Some(Arc::new(|y, o| {
                let q = 1.0 + y[0] * y[0];
                o[0] = -2.0 * y[0] / (q * q);
            })),
        );
        let m = Model::new(
            vec![1.0],
            Potential::standard_gaussian(1),
            Potential::standard_gaussian(1),
            sigma,
        )
        .unwrap();
        let r = validate_conditions(&m, &ProbeSpec::default());
        let e = r.get(ConditionId::Sigma1).unwrap();
        assert_eq!(e.status, Status::Fail);
        assert_eq!(e.worst_point.len(), 1);
        assert!(e.worst_point[0].abs() >= 1e5);
    }

    #[test]
    fn shifted_psi_is_not_radial() {
        let m = Model::new(
            vec![1.0],
            Potential::standard_gaussian(1),
            Potential::quadratic(vec![1.0], vec![0.5]).unwrap(),
            DiffusionField::identity(1),
        )
        .unwrap();
        let r = validate_conditions(&m, &ProbeSpec::default());
        assert_eq!(r.status(ConditionId::Psi5), Some(Status::Fail));
    }
}
