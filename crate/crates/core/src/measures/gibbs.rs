//! Gibbs measures μ_V ∝ e^{−V} with tensorized composite quadrature.

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measures::quadrature::{initial_breaks, refine_breaks, Rule1D};
use crate::measures::sampling::Sampler;
use crate::model::Potential;

/// Largest dimension handled by the tensor rule.
pub const MAX_QUADRATURE_DIM: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Bound on the normalized mass outside [−R, R]^d.
    pub tail_tol: f64,
    /// Gauss–Legendre order per panel; `None` picks 16/12/8 for d = 1/2/3.
    pub order: Option<usize>,
    /// Relative tolerance for panel refinement along each axis.
    pub refine_tol: f64,
    /// Fixed truncation radius, bypassing the tail search.
    pub radius: Option<f64>,
    /// Extra panel edges on every axis, e.g. where an integrand stops being analytic.
    pub breaks: Vec<f64>,
    /// Upper bound on panel width, for oscillating integrands.
    pub max_panel: Option<f64>,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            tail_tol: 1e-13,
            order: None,
            refine_tol: 1e-13,
            radius: None,
            breaks: Vec::new(),
            max_panel: None,
        }
    }
}

/// Output of [`normalize`].
#[derive(Clone, Debug)]
pub struct Normalization {
    pub z: f64,
    pub log_z: f64,
    pub radius: f64,
    /// Analytic bound on the normalized mass outside the box.
    pub tail_mass: f64,
    pub axes: Vec<Rule1D>,
    /// Flat `n × d` node table.
    pub nodes: Vec<f64>,
    /// Probability weights summing to one.
    pub weights: Vec<f64>,
}

fn axis_scale(v: &Potential, center: &[f64], axis: usize) -> f64 {
    let h = v.hessian(center);
    let d = v.dim();
    let c = h[axis * d + axis];
    if c.is_finite() && c > 0.0 {
        (1.0 / c.sqrt()).clamp(1e-3, 1e3)
    } else {
        1.0
    }
}

fn axis_breaks(v: &Potential, center: &[f64], axis: usize, radius: f64, order: usize, opts: &QuadratureOptions) -> Vec<f64> {
    let s = axis_scale(v, center, axis);
    let c = center[axis];
    let mut breaks = initial_breaks(-radius, radius, c, s, 6.0 * s, 1.5);
    breaks.extend(opts.breaks.iter().copied().filter(|b| b.abs() < radius));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * radius);
    if let Some(w) = opts.max_panel {
        breaks = split_wide(&breaks, w);
    }
    let v0 = v.value(center);
    let weight = |z: f64| {
        let mut q = center.to_vec();
        q[axis] = z;
        let dz = (z - c) / s;
        let w = (v0 - v.value(&q)).exp() * (1.0 + dz * dz).powi(2);
        if w.is_finite() {
            w
        } else {
            0.0
        }
    };
    refine_breaks(&breaks, order, weight, opts.refine_tol)
}

fn split_wide(breaks: &[f64], max_width: f64) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let k = ((w[1] - w[0]) / max_width).ceil().max(1.0) as usize;
        out.extend((1..=k).map(|i| w[0] + (w[1] - w[0]) * i as f64 / k as f64));
    }
    out
}

/// Tensor rule on [−R, R]^d with the given per-axis panels; returns nodes,
/// raw Lebesgue weights and potential values.
fn tensor_nodes(v: &Potential, axes: &[Rule1D]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = axes.len();
    let n: usize = axes.iter().map(|a| a.len()).product();
    let mut nodes = Vec::with_capacity(n * d);
    let mut weights = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    for _ in 0..n {
        let mut w = 1.0;
        for k in 0..d {
            point[k] = axes[k].nodes[idx[k]];
            w *= axes[k].weights[idx[k]];
        }
        nodes.extend_from_slice(&point);
        weights.push(w);
        values.push(v.value(&point));
        // odometer, last axis fastest
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    (nodes, weights, values)
}

/// log Σ w_k e^{−V_k} for a rule, plus the shift used.
fn log_mass(weights: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    let vmin = values
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::INFINITY, f64::min);
    if !vmin.is_finite() {
        return Err(Error::NonFinite("potential on quadrature nodes".into()));
    }
    let s: f64 = weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * (vmin - v).exp())
        .sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::NonFinite("normalization sum".into()));
    }
    Ok((s.ln() - vmin, vmin))
}

fn coarse_log_z(v: &Potential, radius: f64) -> Result<f64> {
    let d = v.dim();
    let center = v.center();
    let axes: Vec<Rule1D> = (0..d)
        .map(|k| {
            let s = axis_scale(v, &center, k);
            Rule1D::from_breaks(initial_breaks(-radius, radius, center[k], s, 6.0 * s, 1.5), 8)
        })
        .collect();
    let (_, w, vals) = tensor_nodes(v, &axes);
    Ok(log_mass(&w, &vals)?.0)
}

/// Smallest radius (to bisection accuracy) whose analytic tail bound,
/// normalized by a lower estimate of Z, is below `tail_tol`.
pub fn tail_radius(v: &Potential, tail_tol: f64) -> Result<f64> {
    let mut r = v.initial_radius().max(1.0);
    if v.tail_bound(r).is_infinite() && v.tail_bound(1e150).is_infinite() {
        return Err(Error::NotIntegrable(format!(
            "tail of e^-V is not integrable ({:?})",
            v.family()
        )));
    }
    let probe_r = 4.0 * r;
    let log_z = coarse_log_z(v, probe_r)?;
    let ratio = |r: f64| (v.tail_bound(r).ln() - log_z).exp();
    let mut prev = 0.0;
    while !(ratio(r) < tail_tol) {
        prev = r;
        r *= 2.0;
        if r > 1e150 {
            return Err(Error::NotIntegrable(format!(
                "tail mass above {tail_tol:e} beyond radius 1e150"
            )));
        }
    }
    if prev > 0.0 {
        let (mut lo, mut hi) = (prev, r);
        for _ in 0..40 {
            let mid = (lo * hi).sqrt();
            if ratio(mid) < tail_tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        r = hi;
    }
    Ok(r)
}

/// Z(V) = ∫ e^{−V}, the truncation radius and the quadrature table.
pub fn normalize(v: &Potential, opts: &QuadratureOptions) -> Result<Normalization> {
    let d = v.dim();
    if d == 0 || d > MAX_QUADRATURE_DIM {
        return Err(Error::InvalidArgument(format!(
            "quadrature supports 1 <= d <= {MAX_QUADRATURE_DIM} (got {d})"
        )));
    }
    let radius = match opts.radius {
        Some(r) => r,
        // half the tolerance: the coarse Z used in the search is only approximate
        None => tail_radius(v, 0.5 * opts.tail_tol)?,
    };
    let order = opts.order.unwrap_or(match d {
        1 => 16,
        2 => 12,
        _ => 8,
    });
    let center: Vec<f64> = v.center().iter().map(|c| c.clamp(-radius, radius)).collect();
    let axes: Vec<Rule1D> = (0..d)
        .map(|k| Rule1D::from_breaks(axis_breaks(v, &center, k, radius, order, opts), order))
        .collect();
    let (nodes, raw, values) = tensor_nodes(v, &axes);
    let (log_z, vmin) = log_mass(&raw, &values)?;
    let z = log_z.exp();
    let mut weights: Vec<f64> = raw.iter().zip(&values).map(|(w, val)| w * (vmin - val).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let tail_mass = (v.tail_bound(radius).ln() - log_z).exp();
    if opts.radius.is_none() && !(tail_mass < opts.tail_tol) {
        return Err(Error::QuadratureNonConvergence { tail_mass });
    }
    Ok(Normalization {
        z,
        log_z,
        radius,
        tail_mass,
        axes,
        nodes,
        weights,
    })
}

#[derive(Debug)]
pub struct GibbsMeasure {
    potential: Potential,
    norm: Normalization,
    sampler: OnceLock<Sampler>,
}

impl GibbsMeasure {
    pub fn new(potential: Potential) -> Result<Self> {
        Self::with_options(potential, &QuadratureOptions::default())
    }

    pub fn with_options(potential: Potential, opts: &QuadratureOptions) -> Result<Self> {
        let norm = normalize(&potential, opts)?;
        Ok(Self {
            potential,
            norm,
            sampler: OnceLock::new(),
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn z(&self) -> f64 {
        self.norm.z
    }

    pub fn log_z(&self) -> f64 {
        self.norm.log_z
    }

    pub fn radius(&self) -> f64 {
        self.norm.radius
    }

    pub fn tail_mass(&self) -> f64 {
        self.norm.tail_mass
    }

    pub fn axes(&self) -> &[Rule1D] {
        &self.norm.axes
    }

    pub fn len(&self) -> usize {
        self.norm.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norm.weights.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.norm.nodes
    }

    pub fn node(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.norm.nodes[k * d..(k + 1) * d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.norm.weights
    }

    /// Normalized density e^{−V}/Z.
    pub fn density(&self, x: &[f64]) -> f64 {
        (-self.potential.value(x) - self.norm.log_z).exp()
    }

    /// ∫ g dμ on the quadrature table.
    pub fn moment<G: Fn(&[f64]) -> f64>(&self, g: G) -> Result<f64> {
        let d = self.dim();
        let mut s = 0.0;
        for (x, w) in self.norm.nodes.chunks(d).zip(&self.norm.weights) {
            let v = g(x);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("moment integrand at {x:?}")));
            }
            s += w * v;
        }
        Ok(s)
    }

    /// μ(|∇V|²)
    pub fn grad_sq_moment(&self) -> Result<f64> {
        let v = &self.potential;
        self.moment(|x| v.gradient(x).iter().map(|a| a * a).sum())
    }

    /// Normalized mass outside [−r, r]^d (analytic bound).
    pub fn mass_outside(&self, r: f64) -> f64 {
        (self.potential.tail_bound(r).ln() - self.norm.log_z).exp()
    }

    fn sampler(&self) -> Result<&Sampler> {
        if let Some(s) = self.sampler.get() {
            return Ok(s);
        }
        let s = Sampler::build(self)?;
        Ok(self.sampler.get_or_init(|| s))
    }

    /// Builds the sampling tables now (they are otherwise built on first use).
    pub fn prepare_sampler(&self) -> Result<()> {
        self.sampler().map(|_| ())
    }

    /// One draw written into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        self.sampler()?.draw(rng, out);
        Ok(())
    }

    /// `n` draws as a flat `n × d` table. Same seed, same output.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let d = self.dim();
        if n == 0 {
            return Ok(vec![]);
        }
        let sampler = self.sampler()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = vec![0.0; n * d];
        for row in out.chunks_mut(d) {
            sampler.draw(&mut rng, row);
        }
        Ok(out)
    }

    /// Quadrature CDF of a one-dimensional measure.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.sampler()?.cdf_1d(x)
    }

    /// Writes `node_0,…,node_{d−1},weight` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.dim();
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
        header.push("weight".into());
        wtr.write_record(&header)?;
        for (x, wt) in self.norm.nodes.chunks(d).zip(&self.norm.weights) {
            let mut rec: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
            rec.push(format!("{wt:e}"));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// μ = μ₁ ⊗ μ₂.
#[derive(Debug)]
pub struct ProductMeasure {
    pub mu1: GibbsMeasure,
    pub mu2: GibbsMeasure,
}

impl ProductMeasure {
    pub fn new(mu1: GibbsMeasure, mu2: GibbsMeasure) -> Self {
        Self { mu1, mu2 }
    }

    pub fn for_model(model: &crate::model::Model) -> Result<Self> {
        Ok(Self::new(
            GibbsMeasure::new(model.phi.clone())?,
            GibbsMeasure::new(model.psi.clone())?,
        ))
    }

    /// As [`ProductMeasure::for_model`], with extra panels covering the
    /// support of every compactly supported factor of `fs` and panels no
    /// wider than half a period of any sine factor.
    pub fn for_integrands(model: &crate::model::Model, fs: &[&crate::model::TestFunction]) -> Result<Self> {
        const PANELS: usize = 16;
        let split = |(c, r): (f64, f64)| (0..=PANELS).map(move |k| c - r + 2.0 * r * k as f64 / PANELS as f64);
        let (mut bx, mut by) = (Vec::new(), Vec::new());
        let (mut wx, mut wy) = (0.0_f64, 0.0_f64);
        for f in fs {
            let (x, y) = f.compact_factors();
            bx.extend(x.into_iter().flat_map(split));
            by.extend(y.into_iter().flat_map(split));
            let (ox, oy) = f.max_frequency();
            wx = wx.max(ox);
            wy = wy.max(oy);
        }
        let opts = |breaks, freq: f64| QuadratureOptions {
            breaks,
            max_panel: (freq > 0.0).then(|| std::f64::consts::PI / freq),
            ..QuadratureOptions::default()
        };
        Ok(Self::new(
            GibbsMeasure::with_options(model.phi.clone(), &opts(bx, wx))?,
            GibbsMeasure::with_options(model.psi.clone(), &opts(by, wy))?,
        ))
    }

    /// ∫ F(x, y) dμ; `F` may fail.
    pub fn integrate<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(&[f64], &[f64]) -> Result<f64>,
    {
        let (d1, d2) = (self.mu1.dim(), self.mu2.dim());
        let mut total = 0.0;
        for (x, wx) in self.mu1.nodes().chunks(d1).zip(self.mu1.weights()) {
            let mut row = 0.0;
            for (y, wy) in self.mu2.nodes().chunks(d2).zip(self.mu2.weights()) {
                let v = f(x, y)?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("integrand at x={x:?}, y={y:?}")));
                }
                row += wy * v;
            }
            total += wx * row;
        }
        Ok(total)
    }
}
