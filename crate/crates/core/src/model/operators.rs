//! Pointwise generator L, its symmetric part S and antisymmetric part A.

use crate::error::{check_dim, Result};
use crate::linalg;
use crate::model::{Model, TestFunction, MAX_DIM};

const M2: usize = MAX_DIM * MAX_DIM;

/// b_i(y) = Σ_j ∂_j a_ij(y) − a_ij(y) ∂_jΨ(y), written into `out`.
pub fn drift_b_into(model: &Model, y: &[f64], out: &mut [f64]) -> Result<()> {
    let d = model.d2();
    let mut sig = [0.0; M2];
    let mut gpsi = [0.0; MAX_DIM];
    model.sigma.divergence_into(y, out)?;
    model.sigma.sigma_into(y, &mut sig[..d * d]);
    model.psi.gradient_into(y, &mut gpsi[..d]);
    for i in 0..d {
        out[i] -= linalg::dot(&sig[i * d..(i + 1) * d], &gpsi[..d]);
    }
    Ok(())
}

pub fn drift_b(model: &Model, y: &[f64]) -> Result<Vec<f64>> {
    check_dim("drift argument", model.d2(), y.len())?;
    let mut out = vec![0.0; model.d2()];
    drift_b_into(model, y, &mut out)?;
    Ok(out)
}

fn check_shapes(model: &Model, f: &TestFunction, x: &[f64], y: &[f64]) -> Result<()> {
    check_dim("test function x dimension", model.d1(), f.dx())?;
    check_dim("test function y dimension", model.d2(), f.dy())?;
    check_dim("x", model.d1(), x.len())?;
    check_dim("y", model.d2(), y.len())
}

/// Q∇Ψ(y) (length d₁) and Q*∇Φ(x) (length d₂).
pub(crate) fn transport_fields(model: &Model, x: &[f64], y: &[f64], qpsi: &mut [f64], qphi: &mut [f64]) {
    let (d1, d2) = (model.d1(), model.d2());
    let mut gphi = [0.0; MAX_DIM];
    let mut gpsi = [0.0; MAX_DIM];
    model.phi.gradient_into(x, &mut gphi[..d1]);
    model.psi.gradient_into(y, &mut gpsi[..d2]);
    linalg::matvec(model.q(), d1, d2, &gpsi[..d2], qpsi);
    linalg::matvec_t(model.q(), d1, d2, &gphi[..d1], qphi);
}

/// tr[Σ H_y f] + ⟨b, ∇_y f⟩ + ⟨Q∇Ψ, ∇_x f⟩ − ⟨Q*∇Φ, ∇_y f⟩
pub fn apply_l(model: &Model, f: &TestFunction, x: &[f64], y: &[f64]) -> Result<f64> {
    check_shapes(model, f, x, y)?;
    let (d1, d2) = (model.d1(), model.d2());
    let mut sig = [0.0; M2];
    let mut hy = [0.0; M2];
    let mut gx = [0.0; MAX_DIM];
    let mut gy = [0.0; MAX_DIM];
    let mut b = [0.0; MAX_DIM];
    let mut qpsi = [0.0; MAX_DIM];
    let mut qphi = [0.0; MAX_DIM];
    f.hess_y_into(x, y, &mut hy[..d2 * d2])?;
    f.grad_x_into(x, y, &mut gx[..d1]);
    f.grad_y_into(x, y, &mut gy[..d2]);
    model.sigma.sigma_into(y, &mut sig[..d2 * d2]);
    drift_b_into(model, y, &mut b[..d2])?;
    transport_fields(model, x, y, &mut qpsi[..d1], &mut qphi[..d2]);
    let trace: f64 = (0..d2 * d2).map(|k| sig[k] * hy[k]).sum();
    Ok(trace + linalg::dot(&b[..d2], &gy[..d2]) + linalg::dot(&qpsi[..d1], &gx[..d1])
        - linalg::dot(&qphi[..d2], &gy[..d2]))
}

/// Σ a_ij ∂_ij f + Σ b_i ∂_i f (derivatives in y)
pub fn apply_s(model: &Model, f: &TestFunction, x: &[f64], y: &[f64]) -> Result<f64> {
    check_shapes(model, f, x, y)?;
    let d2 = model.d2();
    let mut sig = [0.0; M2];
    let mut hy = [0.0; M2];
    let mut gy = [0.0; MAX_DIM];
    let mut b = [0.0; MAX_DIM];
    f.hess_y_into(x, y, &mut hy[..d2 * d2])?;
    f.grad_y_into(x, y, &mut gy[..d2]);
    model.sigma.sigma_into(y, &mut sig[..d2 * d2]);
    drift_b_into(model, y, &mut b[..d2])?;
    let mut s = 0.0;
    for i in 0..d2 {
        for j in 0..d2 {
            s += sig[i * d2 + j] * hy[j * d2 + i];
        }
    }
    Ok(s + linalg::dot(&b[..d2], &gy[..d2]))
}

/// Q*∇Φ·∇_y f − Q∇Ψ·∇_x f
pub fn apply_a(model: &Model, f: &TestFunction, x: &[f64], y: &[f64]) -> Result<f64> {
    check_shapes(model, f, x, y)?;
    let (d1, d2) = (model.d1(), model.d2());
    let mut gx = [0.0; MAX_DIM];
    let mut gy = [0.0; MAX_DIM];
    let mut qpsi = [0.0; MAX_DIM];
    let mut qphi = [0.0; MAX_DIM];
    f.grad_x_into(x, y, &mut gx[..d1]);
    f.grad_y_into(x, y, &mut gy[..d2]);
    transport_fields(model, x, y, &mut qpsi[..d1], &mut qphi[..d2]);
    Ok(linalg::dot(&qphi[..d2], &gy[..d2]) - linalg::dot(&qpsi[..d1], &gx[..d1]))
}

/// ⟨∇f, [[0, −Q], [Q*, Σ]] ∇g⟩ at a point; the integrand of the gradient form.
pub fn gradient_form_density(
    model: &Model,
    f: &TestFunction,
    g: &TestFunction,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    check_shapes(model, f, x, y)?;
    check_shapes(model, g, x, y)?;
    let (d1, d2) = (model.d1(), model.d2());
    let mut fx = [0.0; MAX_DIM];
    let mut fy = [0.0; MAX_DIM];
    let mut gx = [0.0; MAX_DIM];
    let mut gy = [0.0; MAX_DIM];
    let mut sig = [0.0; M2];
    let mut tmp = [0.0; MAX_DIM];
    f.grad_x_into(x, y, &mut fx[..d1]);
    f.grad_y_into(x, y, &mut fy[..d2]);
    g.grad_x_into(x, y, &mut gx[..d1]);
    g.grad_y_into(x, y, &mut gy[..d2]);
    model.sigma.sigma_into(y, &mut sig[..d2 * d2]);
    // x-row: −Q ∇_y g
    linalg::matvec(model.q(), d1, d2, &gy[..d2], &mut tmp[..d1]);
    let mut s = -linalg::dot(&fx[..d1], &tmp[..d1]);
    // y-row: Q* ∇_x g + Σ ∇_y g
    linalg::matvec_t(model.q(), d1, d2, &gx[..d1], &mut tmp[..d2]);
    s += linalg::dot(&fy[..d2], &tmp[..d2]);
    linalg::matvec(&sig[..d2 * d2], d2, d2, &gy[..d2], &mut tmp[..d2]);
    s += linalg::dot(&fy[..d2], &tmp[..d2]);
    Ok(s)
}

/// ⟨∇_y f, Σ ∇_y g⟩ at a point.
pub fn carre_du_champ_y(
    model: &Model,
    f: &TestFunction,
    g: &TestFunction,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    check_shapes(model, f, x, y)?;
    let d2 = model.d2();
    let mut fy = [0.0; MAX_DIM];
    let mut gy = [0.0; MAX_DIM];
    let mut sig = [0.0; M2];
    let mut tmp = [0.0; MAX_DIM];
    f.grad_y_into(x, y, &mut fy[..d2]);
    g.grad_y_into(x, y, &mut gy[..d2]);
    model.sigma.sigma_into(y, &mut sig[..d2 * d2]);
    linalg::matvec(&sig[..d2 * d2], d2, d2, &gy[..d2], &mut tmp[..d2]);
    Ok(linalg::dot(&fy[..d2], &tmp[..d2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiffusionField, Potential, Univariate};

    fn f_x() -> TestFunction {
        TestFunction::product_1d(Univariate::linear(), Univariate::One)
    }
    fn f_y() -> TestFunction {
        TestFunction::product_1d(Univariate::One, Univariate::linear())
    }

    #[test]
    fn drift_examples() {
        let ou = Model::ou();
        assert_eq!(drift_b(&ou, &[2.0]).unwrap(), vec![-2.0]);
        let var = Model::variable_sigma(1.0).unwrap();
        let b = drift_b(&var, &[1.0]).unwrap();
        assert!((b[0] + 1.0).abs() < 1e-15);
        let m2 = Model::new(
            vec![1.0, 0.0, 0.0, 1.0],
            Potential::standard_gaussian(2),
            Potential::standard_gaussian(2),
            DiffusionField::identity(2),
        )
        .unwrap();
        assert_eq!(drift_b(&m2, &[1.0, -1.0]).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn drift_without_gradient_errors() {
        let sigma = DiffusionField::custom(1, std::sync::Arc::new(|_y, o| o[0] = 1.0), None);
        let m = Model::new(
            vec![1.0],
            Potential::standard_gaussian(1),
            Potential::standard_gaussian(1),
            sigma,
        )
        .unwrap();
        let e = drift_b(&m, &[0.0]).unwrap_err();
        assert_eq!(e.to_string(), "diffusion gradient unavailable");
    }

    #[test]
    fn generator_examples() {
        let ou = Model::ou();
        assert_eq!(apply_l(&ou, &f_x(), &[3.0], &[2.0]).unwrap(), 2.0);
        assert_eq!(apply_l(&ou, &f_y(), &[1.0], &[2.0]).unwrap(), -3.0);
        let y2 = TestFunction::product_1d(Univariate::One, Univariate::square());
        assert_eq!(apply_l(&ou, &y2, &[0.0], &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn split_examples() {
        let ou = Model::ou();
        let c = TestFunction::constant(1, 1, 3.0);
        assert_eq!(apply_s(&ou, &c, &[0.4], &[0.7]).unwrap(), 0.0);
        assert_eq!(apply_a(&ou, &c, &[0.4], &[0.7]).unwrap(), 0.0);
        let xy = TestFunction::product_1d(Univariate::linear(), Univariate::linear());
        assert_eq!(apply_a(&ou, &xy, &[1.0], &[1.0]).unwrap(), 0.0);
        for y in [-2.0, 0.3, 1.7] {
            assert_eq!(apply_s(&ou, &f_y(), &[0.0], &[y]).unwrap(), -y);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let ou = Model::ou();
        let f = TestFunction::constant(2, 1, 1.0);
        assert!(apply_l(&ou, &f, &[0.0, 0.0], &[0.0]).is_err());
    }
}
