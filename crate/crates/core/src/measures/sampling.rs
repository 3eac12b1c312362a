//! Exact and table-based sampling from Gibbs measures.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::gibbs::GibbsMeasure;
use crate::measures::quadrature::{gl_pairs, Rule1D};
use crate::model::PotentialFamily;

const TABLE_POINTS_1D: usize = 4096;
const MARGINAL_POINTS_2D: usize = 2048;
const SLICES_2D: usize = 512;
const SLICE_POINTS_2D: usize = 1024;

/// Monotone table u ↦ x with piecewise cubic Hermite interpolation.
#[derive(Clone, Debug)]
pub struct InverseCdf {
    u: Vec<f64>,
    x: Vec<f64>,
    /// dx/du at the table points (PCHIP slopes).
    m: Vec<f64>,
    /// Normalized density at the table points, for the forward CDF.
    dens: Vec<f64>,
}

impl InverseCdf {
    /// From increasing abscissae, CDF values (starting at 0) and densities.
    fn new(x: Vec<f64>, cdf: Vec<f64>, dens: Vec<f64>) -> Self {
        let total = *cdf.last().expect("non-empty table");
        let mut u = vec![0.0];
        let mut xs = vec![x[0]];
        let mut ds = vec![dens[0] / total];
        for k in 1..x.len() {
            let v = cdf[k] / total;
            if v > *u.last().unwrap() {
                u.push(v);
                xs.push(x[k]);
                ds.push(dens[k] / total);
            }
        }
        *u.last_mut().unwrap() = 1.0;
        let m = pchip_slopes(&u, &xs);
        Self {
            u,
            x: xs,
            m,
            dens: ds,
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let k = match self.u.partition_point(|&v| v <= p) {
            0 => 0,
            n if n >= self.u.len() => self.u.len() - 2,
            n => n - 1,
        };
        hermite(self.u[k], self.u[k + 1], self.x[k], self.x[k + 1], self.m[k], self.m[k + 1], p)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.x[0] {
            return 0.0;
        }
        if x >= *self.x.last().unwrap() {
            return 1.0;
        }
        let k = self.x.partition_point(|&v| v <= x) - 1;
        hermite(
            self.x[k],
            self.x[k + 1],
            self.u[k],
            self.u[k + 1],
            self.dens[k],
            self.dens[k + 1],
            x,
        )
        .clamp(self.u[k], self.u[k + 1])
    }
}

fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = ((t - t0) / h).clamp(0.0, 1.0);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * m0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * m1
}

/// Fritsch–Carlson slopes for increasing data.
fn pchip_slopes(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b <= 0.0 {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    m
}

/// Splits each panel of `rule` into equal pieces so that the table has
/// roughly `target` points.
fn table_abscissae(rule: &Rule1D, target: usize) -> Vec<f64> {
    let panels = rule.breaks.len() - 1;
    let per = target.div_ceil(panels).max(1);
    let mut xs = vec![rule.breaks[0]];
    for w in rule.breaks.windows(2) {
        for j in 1..=per {
            xs.push(w[0] + (w[1] - w[0]) * j as f64 / per as f64);
        }
    }
    xs
}

/// Cumulative integrals of `density` at the abscissae (GL on each gap).
fn cumulate<F: Fn(f64) -> f64>(xs: &[f64], order: usize, density: F) -> Vec<f64> {
    let pairs = gl_pairs(order);
    let mut cdf = Vec::with_capacity(xs.len());
    cdf.push(0.0);
    let mut acc = 0.0;
    for w in xs.windows(2) {
        let (m, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        acc += h * pairs.iter().map(|&(t, wt)| wt * density(m + h * t)).sum::<f64>();
        cdf.push(acc);
    }
    cdf
}

#[derive(Debug)]
pub(crate) enum Sampler {
    /// y = Λ⁻¹(a + z), z standard normal.
    Gaussian {
        dim: usize,
        lambda_inv: Vec<f64>,
        shift: Vec<f64>,
    },
    Table1D(InverseCdf),
    Sliced2D {
        marginal: InverseCdf,
        slice_at: Vec<f64>,
        slices: Vec<InverseCdf>,
    },
}

impl Sampler {
    pub(crate) fn build(m: &GibbsMeasure) -> Result<Self> {
        let v = m.potential();
        let d = m.dim();
        if let PotentialFamily::Quadratic {
            shift, lambda_inv, ..
        } = v.family()
        {
            return Ok(Self::Gaussian {
                dim: d,
                lambda_inv: lambda_inv.clone(),
                shift: shift.clone(),
            });
        }
        let log_z = m.log_z();
        match d {
            1 => {
                let dens = |x: f64| (-v.value(&[x]) - log_z).exp();
                let xs = table_abscissae(&m.axes()[0], TABLE_POINTS_1D);
                let cdf = cumulate(&xs, 8, dens);
                let pdf = xs.iter().map(|&x| dens(x)).collect();
                Ok(Self::Table1D(InverseCdf::new(xs, cdf, pdf)))
            }
            2 => {
                let (ax, ay) = (&m.axes()[0], &m.axes()[1]);
                let marginal_density = |x: f64| -> f64 {
                    ay.nodes
                        .iter()
                        .zip(&ay.weights)
                        .map(|(&y, w)| w * (-v.value(&[x, y]) - log_z).exp())
                        .sum()
                };
                let xs = table_abscissae(ax, MARGINAL_POINTS_2D);
                let cdf = cumulate(&xs, 4, marginal_density);
                let pdf = xs.iter().map(|&x| marginal_density(x)).collect();
                let marginal = InverseCdf::new(xs, cdf, pdf);
                let slice_at: Vec<f64> = (0..SLICES_2D)
                    .map(|s| marginal.quantile((s as f64 + 0.5) / SLICES_2D as f64))
                    .collect();
                let ys = table_abscissae(ay, SLICE_POINTS_2D);
                let slices = slice_at
                    .iter()
                    .map(|&x| {
                        // unnormalized conditional density, scaled by its peak on the table
                        let v0 = ys.iter().map(|&y| v.value(&[x, y])).fold(f64::INFINITY, f64::min);
                        let dens = |y: f64| (v0 - v.value(&[x, y])).exp();
                        let cdf = cumulate(&ys, 4, dens);
                        let pdf = ys.iter().map(|&y| dens(y)).collect();
                        InverseCdf::new(ys.clone(), cdf, pdf)
                    })
                    .collect();
                Ok(Self::Sliced2D {
                    marginal,
                    slice_at,
                    slices,
                })
            }
            _ => Err(Error::SamplingDimension(d)),
        }
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Self::Gaussian {
                dim,
                lambda_inv,
                shift,
            } => {
                let mut z = [0.0; crate::model::MAX_DIM];
                for (zi, a) in z.iter_mut().zip(shift) {
                    let e: f64 = rng.sample(StandardNormal);
                    *zi = a + e;
                }
                linalg::matvec(lambda_inv, *dim, *dim, &z[..*dim], out);
            }
            Self::Table1D(t) => out[0] = t.quantile(rng.random::<f64>()),
            Self::Sliced2D {
                marginal,
                slice_at,
                slices,
            } => {
                let x = marginal.quantile(rng.random::<f64>());
                let u = rng.random::<f64>();
                let k = slice_at.partition_point(|&s| s <= x);
                let y = if k == 0 {
                    slices[0].quantile(u)
                } else if k == slice_at.len() {
                    slices[k - 1].quantile(u)
                } else {
                    let lam = (x - slice_at[k - 1]) / (slice_at[k] - slice_at[k - 1]);
                    (1.0 - lam) * slices[k - 1].quantile(u) + lam * slices[k].quantile(u)
                };
                out[0] = x;
                out[1] = y;
            }
        }
    }

    pub(crate) fn cdf_1d(&self, x: f64) -> Result<f64> {
        match self {
            Self::Table1D(t) => Ok(t.cdf(x)),
            Self::Gaussian {
                dim: 1,
                lambda_inv,
                shift,
            } => {
                // x = (a + z)/λ  ⇒  z = λx − a
                let lam = 1.0 / lambda_inv[0];
                let z = lam * x - shift[0];
                let p = normal_cdf(z);
                Ok(if lam > 0.0 { p } else { 1.0 - p })
            }
            _ => Err(Error::InvalidArgument("cdf is defined for 1-D measures".into())),
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Series in the core, continued fraction in the tails.
fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        // erf series
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        let mut n = 0.0;
        while term.abs() > 1e-17 * sum.abs() {
            n += 1.0;
            term *= -x2 / n;
            sum += term / (2.0 * n + 1.0);
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // Lentz continued fraction for erfc
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..200 {
            let a = k as f64 / 2.0;
            d = x + a * d;
            d = if d.abs() < tiny { tiny } else { d };
            c = x + a / c;
            c = if c.abs() < tiny { tiny } else { c };
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() / f / std::f64::consts::PI.sqrt()
    }
}

/// Two-sided Kolmogorov–Smirnov distance between samples and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
