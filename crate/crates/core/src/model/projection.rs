//! The projection P f = ∫ f(·, y) μ₂(dy) and G = P A A P.

use std::sync::Arc;

use crate::error::{check_dim, Result};
use crate::linalg;
use crate::measures::GibbsMeasure;
use crate::model::operators::apply_a;
use crate::model::{Callbacks, Model, TensorTerm, TestFunction, Univariate, MAX_DIM};

/// Value, gradient and Hessian of P f at a point x.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Projection {
    model: Model,
    mu2: Arc<GibbsMeasure>,
    grad_psi_sq: f64,
}

impl Projection {
    pub fn new(model: &Model, mu2: Arc<GibbsMeasure>) -> Result<Self> {
        check_dim("μ₂ dimension", model.d2(), mu2.dim())?;
        let grad_psi_sq = mu2.grad_sq_moment()?;
        Ok(Self {
            model: model.clone(),
            mu2,
            grad_psi_sq,
        })
    }

    /// μ₂(|∇Ψ|²)
    pub fn grad_psi_sq(&self) -> f64 {
        self.grad_psi_sq
    }

    pub fn measure(&self) -> &GibbsMeasure {
        &self.mu2
    }

    fn check(&self, f: &TestFunction, x: &[f64]) -> Result<()> {
        check_dim("test function x dimension", self.model.d1(), f.dx())?;
        check_dim("test function y dimension", self.model.d2(), f.dy())?;
        check_dim("x", self.model.d1(), x.len())
    }

    pub fn apply_p(&self, f: &TestFunction, x: &[f64]) -> Result<f64> {
        self.check(f, x)?;
        self.mu2.moment(|y| f.value(x, y))
    }

    /// P f and its x-derivatives, all by quadrature in y.
    pub fn jet(&self, f: &TestFunction, x: &[f64]) -> Result<Jet> {
        self.check(f, x)?;
        let d1 = self.model.d1();
        let d2 = self.model.d2();
        let mut value = 0.0;
        let mut grad = vec![0.0; d1];
        let mut hess = vec![0.0; d1 * d1];
        let mut g = vec![0.0; d1];
        let mut h = vec![0.0; d1 * d1];
        for (y, w) in self.mu2.nodes().chunks(d2).zip(self.mu2.weights()) {
            value += w * f.value(x, y);
            f.grad_x_into(x, y, &mut g);
            f.hess_x_into(x, y, &mut h)?;
            for i in 0..d1 {
                grad[i] += w * g[i];
            }
            for k in 0..d1 * d1 {
                hess[k] += w * h[k];
            }
        }
        Ok(Jet { value, grad, hess })
    }

    /// G f = (μ₂(|∇Ψ|²)/d₂) Σ (QQ*)_ij (∂_ij − ∂_jΦ ∂_i) P f
    pub fn apply_g(&self, f: &TestFunction, x: &[f64]) -> Result<f64> {
        let jet = self.jet(f, x)?;
        let d1 = self.model.d1();
        let qq = self.model.qq_star();
        let gphi = self.model.phi.gradient(x);
        let mut s = 0.0;
        for i in 0..d1 {
            for j in 0..d1 {
                s += qq[i * d1 + j] * (jet.hess[j * d1 + i] - gphi[j] * jet.grad[i]);
            }
        }
        Ok(self.grad_psi_sq / self.model.d2() as f64 * s)
    }

    /// P f as a test function of x alone (constant in y).
    pub fn project(&self, f: &TestFunction) -> Result<TestFunction> {
        let (d1, d2) = (self.model.d1(), self.model.d2());
        check_dim("test function x dimension", d1, f.dx())?;
        check_dim("test function y dimension", d2, f.dy())?;
        if let Some(terms) = f.terms() {
            let mut out = Vec::with_capacity(terms.len());
            for t in terms {
                let m = self.mu2.moment(|y| t.fy.iter().zip(y).map(|(u, &v)| u.eval(v).0).product())?;
                out.push(TensorTerm {
                    coef: t.coef * m,
                    fx: t.fx.clone(),
                    fy: vec![Univariate::One; d2],
                });
            }
            return TestFunction::tensor(d1, d2, out);
        }
        let this = Arc::new(self.clone());
        let f = Arc::new(f.clone());
        let (p1, p2, p3) = (this.clone(), this.clone(), this);
        let (f1, f2, f3) = (f.clone(), f.clone(), f);
        Ok(TestFunction::from_callbacks(
            d1,
            d2,
            Callbacks {
                value: Arc::new(move |x, _y| p1.apply_p(&f1, x).unwrap_or(f64::NAN)),
                grad_x: Arc::new(move |x, _y, out| match p2.jet(&f2, x) {
                    Ok(j) => out.copy_from_slice(&j.grad),
                    Err(_) => out.iter_mut().for_each(|v| *v = f64::NAN),
                }),
                grad_y: Arc::new(|_x, _y, out| out.iter_mut().for_each(|v| *v = 0.0)),
                hess_x: Some(Arc::new(move |x, _y, out| match p3.jet(&f3, x) {
                    Ok(j) => out.copy_from_slice(&j.hess),
                    Err(_) => out.iter_mut().for_each(|v| *v = f64::NAN),
                })),
                hess_y: Some(Arc::new(|_x, _y, out| out.iter_mut().for_each(|v| *v = 0.0))),
            },
        ))
    }

    /// P(A(A(P f)))(x), assembled from the pointwise operators.
    pub fn apply_paap(&self, f: &TestFunction, x: &[f64]) -> Result<f64> {
        self.check(f, x)?;
        let model = Arc::new(self.model.clone());
        let pf = Arc::new(self.project(f)?);
        // A(Pf) = −Q∇Ψ(y)·∇_x Pf(x), with
        //   ∇_x A(Pf) = −∇²_x Pf · Q∇Ψ(y)
        //   ∇_y A(Pf) = −∇²Ψ(y) Qᵀ ∇_x Pf(x)
        let (m1, m2, m3) = (model.clone(), model.clone(), model.clone());
        let (q1, q2, q3) = (pf.clone(), pf.clone(), pf);
        let (d1, d2) = (model.d1(), model.d2());
        let apf = TestFunction::from_callbacks(
            d1,
            d2,
            Callbacks {
                value: Arc::new(move |x, y| apply_a(&m1, &q1, x, y).unwrap_or(f64::NAN)),
                grad_x: Arc::new(move |x, y, out| {
                    let mut hx = [0.0; MAX_DIM * MAX_DIM];
                    let mut gpsi = [0.0; MAX_DIM];
                    let mut qpsi = [0.0; MAX_DIM];
                    if q2.hess_x_into(x, y, &mut hx[..d1 * d1]).is_err() {
                        out.iter_mut().for_each(|v| *v = f64::NAN);
                        return;
                    }
                    m2.psi.gradient_into(y, &mut gpsi[..d2]);
                    linalg::matvec(m2.q(), d1, d2, &gpsi[..d2], &mut qpsi[..d1]);
                    linalg::matvec(&hx[..d1 * d1], d1, d1, &qpsi[..d1], out);
                    out.iter_mut().for_each(|v| *v = -*v);
                }),
                grad_y: Arc::new(move |x, y, out| {
                    let mut gx = [0.0; MAX_DIM];
                    let mut qt = [0.0; MAX_DIM];
                    let mut hpsi = [0.0; MAX_DIM * MAX_DIM];
                    q3.grad_x_into(x, y, &mut gx[..d1]);
                    linalg::matvec_t(m3.q(), d1, d2, &gx[..d1], &mut qt[..d2]);
                    m3.psi.hessian_into(y, &mut hpsi[..d2 * d2]);
                    linalg::matvec(&hpsi[..d2 * d2], d2, d2, &qt[..d2], out);
                    out.iter_mut().for_each(|v| *v = -*v);
                }),
                hess_x: None,
                hess_y: None,
            },
        );
        let mut total = 0.0;
        for (y, w) in self.mu2.nodes().chunks(d2).zip(self.mu2.weights()) {
            total += w * apply_a(&model, &apf, x, y)?;
        }
        Ok(total)
    }
}
