//! Numeric check of the weighted integrability inequality
//!
//! ```text
//! ∫|∇V|^{2k} g^{2k} dμ_V ≤ C_k (∫ g^{2k} dμ_V + ∫ |∇g|^{2k} dμ_V)
//! ```

use crate::error::{check_dim, Error, Result};
use crate::measures::gibbs::GibbsMeasure;
use crate::model::probes::{halton_cube, ray_points, ProbeSpec};
use crate::model::{Potential, TensorTerm, TestFunction, Univariate};

#[derive(Clone, Debug, PartialEq)]
pub struct LpReport {
    pub k: u32,
    /// Hessian-growth constants used: |∇²V| ≤ K(1 + |∇V|^α).
    pub k_const: f64,
    pub alpha: f64,
    pub lhs: f64,
    /// (∫ g^{2k} dμ, ∫ |∇g|^{2k} dμ)
    pub rhs_terms: (f64, f64),
    /// The constant tested against; for report-only cases this is the
    /// empirical ratio lhs / (sum of rhs terms).
    pub c_k: f64,
    /// `None` when the case is report-only (k ≥ 2 or α > 3/2).
    pub pass: Option<bool>,
    /// C_k·rhs − lhs.
    pub margin: f64,
}

/// max(4(√d K + d K² + d² K⁴), 16)
pub fn derived_constant(d: usize, k: f64) -> f64 {
    let d = d as f64;
    (4.0 * (d.sqrt() * k + d * k * k + d * d * k.powi(4))).max(16.0)
}

/// Estimates K for a given α by maximizing |∇²V|_F / (1 + |∇V|^α) on probes.
pub fn estimate_hessian_growth(v: &Potential, alpha: f64, probes: &ProbeSpec) -> f64 {
    let d = v.dim();
    let mut pts = halton_cube(d, probes.count, probes.radius);
    for ray in ray_points(d, &probes.ray_radii) {
        for p in ray {
            pts.extend(p);
        }
    }
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    let mut worst = 0.0_f64;
    for x in pts.chunks(d) {
        v.gradient_into(x, &mut g);
        v.hessian_into(x, &mut h);
        let gn = crate::linalg::norm(&g);
        let hn = crate::linalg::frobenius(&h);
        let r = hn / (1.0 + gn.powf(alpha));
        if r.is_finite() {
            worst = worst.max(r);
        }
    }
    worst
}

/// `g` is a function of x alone: a test function with `dy = 0`.
pub fn check_lp_inequality(measure: &GibbsMeasure, g: &TestFunction, k: u32) -> Result<LpReport> {
    let v = measure.potential();
    let d = v.dim();
    check_dim("g dimension", d, g.dx())?;
    check_dim("g y-dimension", 0, g.dy())?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be a positive integer".into()));
    }
    let alpha = v.meta.hessian_exponent.unwrap_or(1.0);
    if !(1.0..2.0).contains(&alpha) {
        return Err(Error::Precondition(format!(
            "Hessian-growth exponent must lie in [1, 2) (got {alpha})"
        )));
    }
    let k_const = v
        .meta
        .hessian_growth
        .unwrap_or_else(|| estimate_hessian_growth(v, alpha, &ProbeSpec::default()));
    let p = 2 * k as i32;
    let lhs = measure.moment(|x| {
        crate::linalg::norm(&v.gradient(x)).powi(p) * g.value(x, &[]).powi(p)
    })?;
    let r0 = measure.moment(|x| g.value(x, &[]).powi(p))?;
    let r1 = measure.moment(|x| {
        let mut gg = vec![0.0; d];
        g.grad_x_into(x, &[], &mut gg);
        crate::linalg::norm(&gg).powi(p)
    })?;
    let rhs = r0 + r1;
    let certified = k == 1 && 2.0 * (alpha - 1.0) <= 1.0;
    let (c_k, pass) = if certified {
        let c = derived_constant(d, k_const);
        (c, Some(lhs <= c * rhs))
    } else {
        let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
        (ratio, None)
    };
    Ok(LpReport {
        k,
        k_const,
        alpha,
        lhs,
        rhs_terms: (r0, r1),
        c_k,
        pass,
        margin: c_k * rhs - lhs,
    })
}

/// One (V, g) case of the built-in inequality suite.
#[derive(Clone, Debug)]
pub struct LpCase {
    pub label: String,
    pub potential: Potential,
    pub g: TestFunction,
}

fn of_x(d: usize, factors: Vec<Univariate>) -> TestFunction {
    debug_assert_eq!(factors.len(), d);
    TestFunction::tensor(
        d,
        0,
        vec![TensorTerm {
            coef: 1.0,
            fx: factors,
            fy: vec![],
        }],
    )
    .expect("dimensions match")
}

/// Potentials with Hessian-growth exponent α ≤ 3/2 crossed with smooth,
/// polynomial and compactly supported g.
pub fn builtin_corpus() -> Result<Vec<LpCase>> {
    let mut tilted = Potential::power_law(1, 1.0, 3.0)?;
    tilted.meta.hessian_exponent = Some(1.5);
    let potentials = vec![
        ("gaussian", Potential::standard_gaussian(1)),
        ("shifted_quadratic", Potential::quadratic(vec![2.0], vec![1.0])?),
        ("stretched_half", Potential::power_law(1, 1.0, 0.5)?),
        ("quartic_like", Potential::power_law(1, 0.5, 4.0)?),
        ("cubic_alpha_1.5", tilted),
        ("log_tail_10", Potential::log_power(1, 10.0)?),
        ("gaussian_2d", Potential::standard_gaussian(2)),
    ];
    let one_d = || {
        vec![
            ("one", Univariate::One),
            ("x", Univariate::linear()),
            ("tanh", Univariate::Tanh(1.5)),
            ("sin", Univariate::Sin { freq: 2.0, phase: 0.3 }),
            ("bump", Univariate::Bump { center: 0.5, radius: 1.0 }),
            ("gauss", Univariate::Gauss { center: -0.5, width: 0.7 }),
        ]
    };
    let mut out = Vec::new();
    for (vname, v) in potentials {
        let d = v.dim();
        for (gname, u) in one_d() {
            let mut factors = vec![Univariate::One; d];
            factors[0] = u;
            if d > 1 {
                factors[1] = Univariate::Tanh(0.5);
            }
            out.push(LpCase {
                label: format!("{vname}/{gname}"),
                potential: v.clone(),
                g: of_x(d, factors),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{TensorTerm, Univariate};

    fn spatial(u: Univariate) -> TestFunction {
        TestFunction::tensor(
            1,
            0,
            vec![TensorTerm {
                coef: 1.0,
                fx: vec![u],
                fy: vec![],
            }],
        )
        .unwrap()
    }

    #[test]
    fn gaussian_constant_function() {
        let m = GibbsMeasure::new(Potential::standard_gaussian(1)).unwrap();
        let r = check_lp_inequality(&m, &spatial(Univariate::One), 1).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-8);
        assert!((r.k_const - 1.0).abs() < 1e-12);
        assert_eq!(r.c_k, 16.0);
        assert!((r.c_k * (r.rhs_terms.0 + r.rhs_terms.1) - 16.0).abs() < 1e-12);
        assert_eq!(r.pass, Some(true));
    }

    #[test]
    fn zero_function_passes_trivially() {
        let m = GibbsMeasure::new(Potential::standard_gaussian(1)).unwrap();
        let r = check_lp_inequality(&m, &spatial(Univariate::Poly(vec![0.0])), 1).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs_terms, (0.0, 0.0));
        assert_eq!(r.pass, Some(true));
    }

    #[test]
    fn exponent_two_is_rejected() {
        let mut v = Potential::standard_gaussian(1);
        v.meta.hessian_exponent = Some(2.0);
        let m = GibbsMeasure::new(v).unwrap();
        let e = check_lp_inequality(&m, &spatial(Univariate::One), 1).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    #[test]
    fn higher_k_is_report_only() {
        let m = GibbsMeasure::new(Potential::standard_gaussian(1)).unwrap();
        let r = check_lp_inequality(&m, &spatial(Univariate::One), 2).unwrap();
        assert_eq!(r.pass, None);
        // E[x⁴] = 3
        assert!((r.lhs - 3.0).abs() < 1e-7, "{}", r.lhs - 3.0);
    }

    #[test]
    fn corpus_passes_with_derived_constant() {
        for case in builtin_corpus().unwrap() {
            let m = GibbsMeasure::new(case.potential.clone()).unwrap();
            let r = check_lp_inequality(&m, &case.g, 1).unwrap();
            assert_eq!(r.pass, Some(true), "{}: {r:?}", case.label);
        }
    }
}
