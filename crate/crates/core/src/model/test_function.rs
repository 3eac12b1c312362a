//! Test functions f(x, y) with analytic first and second derivatives.
//!
//! Most test functions are finite sums of pure tensors
//! c·Π_i u_i(x_i)·Π_j v_j(y_j) built from [`Univariate`] factors. Arbitrary
//! functions can be supplied as callbacks.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};

/// Scalar function of one variable returning (value, first, second derivative).
pub type UnivariateFn = Arc<dyn Fn(f64) -> (f64, f64, f64) + Send + Sync>;
pub type PointFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// Writes a gradient (or row-major Hessian) at (x, y) into the output.
pub type PointVecFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum Univariate {
    One,
    /// Σ c_k z^k
    Poly(Vec<f64>),
    /// tanh(s·z)
    Tanh(f64),
    /// sin(ω z + φ)
    Sin { freq: f64, phase: f64 },
    /// exp(−(z − c)²/(2w²))
    Gauss { center: f64, width: f64 },
    /// exp(−1/(1 − s²)) with s = (z − c)/r, zero for |s| ≥ 1.
    Bump { center: f64, radius: f64 },
    Custom {
        eval: UnivariateFn,
        range: Option<(f64, f64)>,
    },
}

impl fmt::Debug for Univariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::One => write!(f, "One"),
            Self::Poly(c) => f.debug_tuple("Poly").field(c).finish(),
            Self::Tanh(s) => f.debug_tuple("Tanh").field(s).finish(),
            Self::Sin { freq, phase } => f
                .debug_struct("Sin")
                .field("freq", freq)
                .field("phase", phase)
                .finish(),
            Self::Gauss { center, width } => f
                .debug_struct("Gauss")
                .field("center", center)
                .field("width", width)
                .finish(),
            Self::Bump { center, radius } => f
                .debug_struct("Bump")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            Self::Custom { range, .. } => f
                .debug_struct("Custom")
                .field("range", range)
                .finish_non_exhaustive(),
        }
    }
}

impl Univariate {
    pub fn linear() -> Self {
        Self::Poly(vec![0.0, 1.0])
    }

    pub fn square() -> Self {
        Self::Poly(vec![0.0, 0.0, 1.0])
    }

    #[inline]
    pub fn eval(&self, z: f64) -> (f64, f64, f64) {
        match self {
            Self::One => (1.0, 0.0, 0.0),
            Self::Poly(c) => {
                // Horner for p, p', p''
                let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
                for &ck in c.iter().rev() {
                    ddp = ddp * z + 2.0 * dp;
                    dp = dp * z + p;
                    p = p * z + ck;
                }
                (p, dp, ddp)
            }
            Self::Tanh(s) => {
                let t = (s * z).tanh();
                let sech2 = 1.0 - t * t;
                (t, s * sech2, -2.0 * s * s * t * sech2)
            }
            Self::Sin { freq, phase } => {
                let a = freq * z + phase;
                let (sn, cs) = a.sin_cos();
                (sn, freq * cs, -freq * freq * sn)
            }
            Self::Gauss { center, width } => {
                let u = (z - center) / width;
                let g = (-0.5 * u * u).exp();
                let w2 = width * width;
                (g, -u / width * g, (u * u - 1.0) / w2 * g)
            }
            Self::Bump { center, radius } => {
                let s = (z - center) / radius;
                if s.abs() >= 1.0 {
                    return (0.0, 0.0, 0.0);
                }
                let q = 1.0 - s * s;
                let v = (-1.0 / q).exp();
                // d/ds e^{-1/q} = e^{-1/q}·(−2s/q²)
                let ds = -2.0 * s / (q * q);
                // d/ds (−2s/q²) = −2/q² − 8s²/q³
                let dds = -2.0 / (q * q) - 8.0 * s * s / (q * q * q);
                let r = *radius;
                (v, v * ds / r, v * (ds * ds + dds) / (r * r))
            }
            Self::Custom { eval, .. } => eval(z),
        }
    }

    /// Closed interval containing the range, when bounded.
    pub fn range(&self) -> Option<(f64, f64)> {
        match self {
            Self::One => Some((1.0, 1.0)),
            Self::Poly(c) => {
                if c.iter().skip(1).all(|v| *v == 0.0) {
                    let v = c.first().copied().unwrap_or(0.0);
                    Some((v, v))
                } else {
                    None
                }
            }
            Self::Tanh(_) | Self::Sin { .. } => Some((-1.0, 1.0)),
            Self::Gauss { .. } => Some((0.0, 1.0)),
            Self::Bump { .. } => Some((0.0, (-1.0f64).exp())),
            Self::Custom { range, .. } => *range,
        }
    }

    /// Support half-width around the centre, if compact.
    fn support(&self) -> Option<(f64, f64)> {
        match self {
            Self::Bump { center, radius } => Some((*center, *radius)),
            _ => None,
        }
    }
}

/// c · Π_i fx[i](x_i) · Π_j fy[j](y_j)
#[derive(Clone, Debug)]
pub struct TensorTerm {
    pub coef: f64,
    pub fx: Vec<Univariate>,
    pub fy: Vec<Univariate>,
}

#[derive(Clone)]
pub struct Callbacks {
    pub value: PointFn,
    pub grad_x: PointVecFn,
    pub grad_y: PointVecFn,
    pub hess_x: Option<PointVecFn>,
    pub hess_y: Option<PointVecFn>,
}

#[derive(Clone)]
enum Kind {
    Tensor(Vec<TensorTerm>),
    Callbacks(Callbacks),
}

#[derive(Clone)]
pub struct TestFunction {
    dx: usize,
    dy: usize,
    kind: Kind,
    osc: Option<f64>,
    support_radius: Option<f64>,
    pub label: String,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("TestFunction");
        s.field("label", &self.label)
            .field("dx", &self.dx)
            .field("dy", &self.dy);
        if let Kind::Tensor(t) = &self.kind {
            s.field("terms", t);
        }
        s.finish()
    }
}

fn factor_product(fs: &[Univariate], z: &[f64]) -> f64 {
    fs.iter().zip(z).map(|(u, &v)| u.eval(v).0).product()
}

/// Writes value, gradient and row-major Hessian of Π_i u_i(z_i).
fn factor_jet(fs: &[Univariate], z: &[f64], grad: &mut [f64], hess: Option<&mut [f64]>) -> f64 {
    let d = fs.len();
    let mut v = [0.0; 8];
    let mut dv = [0.0; 8];
    let mut ddv = [0.0; 8];
    assert!(d <= 8, "tensor factors support at most 8 coordinates");
    for i in 0..d {
        let (a, b, c) = fs[i].eval(z[i]);
        v[i] = a;
        dv[i] = b;
        ddv[i] = c;
    }
    let prod_except = |skip: &[usize]| -> f64 {
        (0..d)
            .filter(|k| !skip.contains(k))
            .map(|k| v[k])
            .product()
    };
    for i in 0..d {
        grad[i] = dv[i] * prod_except(&[i]);
    }
    if let Some(h) = hess {
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] = if i == j {
                    ddv[i] * prod_except(&[i])
                } else {
                    dv[i] * dv[j] * prod_except(&[i, j])
                };
            }
        }
    }
    (0..d).map(|k| v[k]).product()
}

impl TestFunction {
    pub fn tensor(dx: usize, dy: usize, terms: Vec<TensorTerm>) -> Result<Self> {
        for t in &terms {
            check_dim("tensor x-factors", dx, t.fx.len())?;
            check_dim("tensor y-factors", dy, t.fy.len())?;
        }
        let osc = tensor_osc(&terms);
        let support_radius = tensor_support(&terms);
        Ok(Self {
            dx,
            dy,
            kind: Kind::Tensor(terms),
            osc,
            support_radius,
            label: String::new(),
        })
    }

    /// Single pure tensor u(x)·v(y) in one dimension each.
    pub fn product_1d(u: Univariate, v: Univariate) -> Self {
        Self::tensor(
            1,
            1,
            vec![TensorTerm {
                coef: 1.0,
                fx: vec![u],
                fy: vec![v],
            }],
        )
        .expect("dimensions match")
    }

    /// f(x, y) = c
    pub fn constant(dx: usize, dy: usize, c: f64) -> Self {
        Self::tensor(
            dx,
            dy,
            vec![TensorTerm {
                coef: c,
                fx: vec![Univariate::One; dx],
                fy: vec![Univariate::One; dy],
            }],
        )
        .expect("dimensions match")
    }

    /// f(x, y) = u(x_i)
    pub fn of_x(dx: usize, dy: usize, i: usize, u: Univariate) -> Self {
        let mut fx = vec![Univariate::One; dx];
        fx[i] = u;
        Self::tensor(
            dx,
            dy,
            vec![TensorTerm {
                coef: 1.0,
                fx,
                fy: vec![Univariate::One; dy],
            }],
        )
        .expect("dimensions match")
    }

    /// f(x, y) = v(y_j)
    pub fn of_y(dx: usize, dy: usize, j: usize, v: Univariate) -> Self {
        let mut fy = vec![Univariate::One; dy];
        fy[j] = v;
        Self::tensor(
            dx,
            dy,
            vec![TensorTerm {
                coef: 1.0,
                fx: vec![Univariate::One; dx],
                fy,
            }],
        )
        .expect("dimensions match")
    }

    pub fn from_callbacks(dx: usize, dy: usize, callbacks: Callbacks) -> Self {
        Self {
            dx,
            dy,
            kind: Kind::Callbacks(callbacks),
            osc: None,
            support_radius: None,
            label: String::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_osc(mut self, osc: f64) -> Self {
        self.osc = Some(osc);
        self
    }

    pub fn with_support_radius(mut self, r: f64) -> Self {
        self.support_radius = Some(r);
        self
    }

    /// a·self + b·other, for tensor functions.
    pub fn combine(&self, a: f64, other: &TestFunction, b: f64) -> Result<Self> {
        check_dim("x dimension", self.dx, other.dx)?;
        check_dim("y dimension", self.dy, other.dy)?;
        match (&self.kind, &other.kind) {
            (Kind::Tensor(t1), Kind::Tensor(t2)) => {
                let mut terms: Vec<TensorTerm> = t1
                    .iter()
                    .map(|t| TensorTerm {
                        coef: a * t.coef,
                        ..t.clone()
                    })
                    .collect();
                terms.extend(t2.iter().map(|t| TensorTerm {
                    coef: b * t.coef,
                    ..t.clone()
                }));
                Self::tensor(self.dx, self.dy, terms)
            }
            _ => Err(Error::InvalidArgument(
                "only tensor test functions can be combined".into(),
            )),
        }
    }

    pub fn dx(&self) -> usize {
        self.dx
    }

    pub fn dy(&self) -> usize {
        self.dy
    }

    pub fn terms(&self) -> Option<&[TensorTerm]> {
        match &self.kind {
            Kind::Tensor(t) => Some(t),
            Kind::Callbacks(_) => None,
        }
    }

    /// Upper bound on sup f − inf f, when known.
    pub fn osc(&self) -> Option<f64> {
        self.osc
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    /// (center, radius) of compactly supported univariate factors, split into
    /// x- and y-factors and pooled over axes.
    pub fn compact_factors(&self) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        if let Kind::Tensor(terms) = &self.kind {
            for t in terms {
                for (fs, out) in [(&t.fx, &mut x), (&t.fy, &mut y)] {
                    out.extend(fs.iter().filter_map(Univariate::support));
                }
            }
        }
        (x, y)
    }

    /// Largest angular frequency among sine factors on the x- and y-side.
    pub fn max_frequency(&self) -> (f64, f64) {
        let (mut x, mut y) = (0.0_f64, 0.0_f64);
        if let Kind::Tensor(terms) = &self.kind {
            for t in terms {
                for (fs, out) in [(&t.fx, &mut x), (&t.fy, &mut y)] {
                    for u in fs {
                        if let Univariate::Sin { freq, .. } = u {
                            *out = out.max(freq.abs());
                        }
                    }
                }
            }
        }
        (x, y)
    }

    pub fn has_hessian_x(&self) -> bool {
        match &self.kind {
            Kind::Tensor(_) => true,
            Kind::Callbacks(c) => c.hess_x.is_some(),
        }
    }

    #[inline]
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            Kind::Tensor(terms) => terms
                .iter()
                .map(|t| t.coef * factor_product(&t.fx, x) * factor_product(&t.fy, y))
                .sum(),
            Kind::Callbacks(c) => (c.value)(x, y),
        }
    }

    pub fn grad_x_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Tensor(terms) => {
                out[..self.dx].iter_mut().for_each(|v| *v = 0.0);
                let mut g = [0.0; 8];
                for t in terms {
                    let fy = factor_product(&t.fy, y);
                    if fy == 0.0 {
                        continue;
                    }
                    factor_jet(&t.fx, x, &mut g, None);
                    for i in 0..self.dx {
                        out[i] += t.coef * fy * g[i];
                    }
                }
            }
            Kind::Callbacks(c) => (c.grad_x)(x, y, out),
        }
    }

    pub fn grad_y_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Tensor(terms) => {
                out[..self.dy].iter_mut().for_each(|v| *v = 0.0);
                let mut g = [0.0; 8];
                for t in terms {
                    let fx = factor_product(&t.fx, x);
                    if fx == 0.0 {
                        continue;
                    }
                    factor_jet(&t.fy, y, &mut g, None);
                    for j in 0..self.dy {
                        out[j] += t.coef * fx * g[j];
                    }
                }
            }
            Kind::Callbacks(c) => (c.grad_y)(x, y, out),
        }
    }

    pub fn hess_x_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            Kind::Tensor(terms) => {
                let d = self.dx;
                out[..d * d].iter_mut().for_each(|v| *v = 0.0);
                let mut g = [0.0; 8];
                let mut h = [0.0; 64];
                for t in terms {
                    let fy = factor_product(&t.fy, y);
                    if fy == 0.0 {
                        continue;
                    }
                    factor_jet(&t.fx, x, &mut g, Some(&mut h));
                    for k in 0..d * d {
                        out[k] += t.coef * fy * h[k];
                    }
                }
                Ok(())
            }
            Kind::Callbacks(c) => match &c.hess_x {
                Some(h) => {
                    h(x, y, out);
                    Ok(())
                }
                None => Err(Error::MissingDerivative("hessian_x")),
            },
        }
    }

    pub fn hess_y_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            Kind::Tensor(terms) => {
                let d = self.dy;
                out[..d * d].iter_mut().for_each(|v| *v = 0.0);
                let mut g = [0.0; 8];
                let mut h = [0.0; 64];
                for t in terms {
                    let fx = factor_product(&t.fx, x);
                    if fx == 0.0 {
                        continue;
                    }
                    factor_jet(&t.fy, y, &mut g, Some(&mut h));
                    for k in 0..d * d {
                        out[k] += t.coef * fx * h[k];
                    }
                }
                Ok(())
            }
            Kind::Callbacks(c) => match &c.hess_y {
                Some(h) => {
                    h(x, y, out);
                    Ok(())
                }
                None => Err(Error::MissingDerivative("hessian_y")),
            },
        }
    }

    /// Largest relative discrepancy between the analytic derivatives and
    /// central finite differences over the given probe points.
    pub fn derivative_check(&self, points: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let (dx, dy) = (self.dx, self.dy);
        let mut worst = 0.0_f64;
        let mut gx = vec![0.0; dx];
        let mut gy = vec![0.0; dy];
        let mut hx = vec![0.0; dx * dx];
        let mut hy = vec![0.0; dy * dy];
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
        for (x, y) in points {
            check_dim("probe x", dx, x.len())?;
            check_dim("probe y", dy, y.len())?;
            self.grad_x_into(x, y, &mut gx);
            self.grad_y_into(x, y, &mut gy);
            for i in 0..dx {
                let h = 1e-5 * (1.0 + x[i].abs());
                let (mut a, mut b) = (x.clone(), x.clone());
                a[i] += h;
                b[i] -= h;
                let fd = (self.value(&a, y) - self.value(&b, y)) / (2.0 * h);
                worst = worst.max(rel(fd, gx[i]));
                if self.hess_x_into(x, y, &mut hx).is_ok() {
                    let mut ga = vec![0.0; dx];
                    let mut gb = vec![0.0; dx];
                    self.grad_x_into(&a, y, &mut ga);
                    self.grad_x_into(&b, y, &mut gb);
                    for k in 0..dx {
                        worst = worst.max(rel((ga[k] - gb[k]) / (2.0 * h), hx[k * dx + i]));
                    }
                }
            }
            for j in 0..dy {
                let h = 1e-5 * (1.0 + y[j].abs());
                let (mut a, mut b) = (y.clone(), y.clone());
                a[j] += h;
                b[j] -= h;
                let fd = (self.value(x, &a) - self.value(x, &b)) / (2.0 * h);
                worst = worst.max(rel(fd, gy[j]));
                if self.hess_y_into(x, y, &mut hy).is_ok() {
                    let mut ga = vec![0.0; dy];
                    let mut gb = vec![0.0; dy];
                    self.grad_y_into(x, &a, &mut ga);
                    self.grad_y_into(x, &b, &mut gb);
                    for k in 0..dy {
                        worst = worst.max(rel((ga[k] - gb[k]) / (2.0 * h), hy[k * dy + j]));
                    }
                }
            }
        }
        Ok(worst)
    }
}

fn interval_mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let c = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        c.iter().copied().fold(f64::INFINITY, f64::min),
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn tensor_osc(terms: &[TensorTerm]) -> Option<f64> {
    let mut total = (0.0, 0.0);
    for t in terms {
        let mut r = (t.coef, t.coef);
        for u in t.fx.iter().chain(&t.fy) {
            r = interval_mul(r, u.range()?);
        }
        total = (total.0 + r.0, total.1 + r.1);
    }
    Some(total.1 - total.0)
}

fn tensor_support(terms: &[TensorTerm]) -> Option<f64> {
    let mut worst = 0.0_f64;
    for t in terms {
        // a term is compactly supported if every coordinate has a compact factor
        let mut r2 = 0.0;
        for u in t.fx.iter().chain(&t.fy) {
            let (c, r) = u.support()?;
            r2 += (c.abs() + r).powi(2);
        }
        worst = worst.max(r2);
    }
    Some(worst.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_derivatives() {
        let fs = [
            Univariate::Poly(vec![1.0, -2.0, 0.5, 0.25]),
            Univariate::Tanh(0.7),
            Univariate::Sin {
                freq: 1.3,
                phase: 0.2,
            },
            Univariate::Gauss {
                center: 0.3,
                width: 0.8,
            },
            Univariate::Bump {
                center: 0.1,
                radius: 1.5,
            },
        ];
        let h = 1e-5;
        for u in &fs {
            for z in [-1.0, -0.3, 0.0, 0.45, 1.2] {
                let (v, d1, d2) = u.eval(z);
                let (vp, d1p, _) = u.eval(z + h);
                let (vm, d1m, _) = u.eval(z - h);
                assert!((d1 - (vp - vm) / (2.0 * h)).abs() < 1e-7 * (1.0 + v.abs()), "{u:?} {z}");
                assert!((d2 - (d1p - d1m) / (2.0 * h)).abs() < 1e-6 * (1.0 + d1.abs()), "{u:?} {z}");
            }
        }
    }

    #[test]
    fn tensor_derivatives_match_finite_differences() {
        let f = TestFunction::tensor(
            2,
            2,
            vec![
                TensorTerm {
                    coef: 1.5,
                    fx: vec![Univariate::Tanh(1.0), Univariate::Poly(vec![0.0, 1.0, 1.0])],
                    fy: vec![
                        Univariate::Sin {
                            freq: 1.0,
                            phase: 0.0,
                        },
                        Univariate::One,
                    ],
                },
                TensorTerm {
                    coef: -0.5,
                    fx: vec![Univariate::One, Univariate::linear()],
                    fy: vec![
                        Univariate::Gauss {
                            center: 0.0,
                            width: 1.0,
                        },
                        Univariate::linear(),
                    ],
                },
            ],
        )
        .unwrap();
        let pts = vec![
            (vec![0.3, -0.7], vec![1.1, 0.4]),
            (vec![-1.2, 0.5], vec![-0.3, 2.0]),
        ];
        assert!(f.derivative_check(&pts).unwrap() < 1e-6);
    }

    #[test]
    fn osc_of_bounded_terms() {
        let f = TestFunction::product_1d(Univariate::Tanh(1.0), Univariate::One);
        assert_eq!(f.osc(), Some(2.0));
        let g = TestFunction::product_1d(Univariate::linear(), Univariate::One);
        assert_eq!(g.osc(), None);
    }

    #[test]
    fn bump_has_compact_support() {
        let f = TestFunction::product_1d(
            Univariate::Bump {
                center: 0.0,
                radius: 2.0,
            },
            Univariate::Bump {
                center: 1.0,
                radius: 1.0,
            },
        );
        let r = f.support_radius().unwrap();
        assert!((r - (4.0f64 + 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(f.value(&[2.5], &[0.0]), 0.0);
    }

    #[test]
    fn missing_hessian_reported() {
        let f = TestFunction::from_callbacks(
            1,
            1,
            Callbacks {
                value: Arc::new(|x, y| x[0] * y[0]),
                grad_x: Arc::new(|_x, y, o| o[0] = y[0]),
                grad_y: Arc::new(|x, _y, o| o[0] = x[0]),
                hess_x: None,
                hess_y: None,
            },
        );
        let mut h = [0.0];
        assert!(matches!(
            f.hess_y_into(&[1.0], &[1.0], &mut h),
            Err(Error::MissingDerivative("hessian_y"))
        ));
    }
}
