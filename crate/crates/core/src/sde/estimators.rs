//! Monte Carlo estimators: transition means, pair-coupled variance decay and
//! martingale residuals.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::mean_and_se;
use crate::measures::ProductMeasure;
use crate::model::operators::apply_l;
use crate::model::{Model, TestFunction, MAX_DIM};
use crate::rates::DecayData;
use crate::sde::rng::{fill_normal, stream, LANE_A, LANE_B, LANE_START};
use crate::sde::{IntegratorConfig, Stepper};

/// Initial state of simulated paths.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Start {
    Point { x: Vec<f64>, y: Vec<f64> },
    /// Drawn from μ = μ₁ ⊗ μ₂.
    Equilibrium,
}

/// Variance-decay estimate of μ((T_t f)²) − μ(T_t f)².
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayEstimate {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub se: Vec<f64>,
    pub n_outer: usize,
    /// Paths per outer start (the coupled pair).
    pub n_inner: usize,
    pub h: f64,
    pub seed: u64,
    /// μ(f) by quadrature.
    pub mu_f: f64,
    /// Var_μ(f) by quadrature.
    pub var_f: f64,
}

impl DecayEstimate {
    pub fn to_data(&self, osc_sq: f64) -> Result<DecayData> {
        DecayData::new(self.t.clone(), self.v.clone(), self.se.clone(), osc_sq)
    }

    /// Columns: t, v_hat, se, n_outer, h, seed.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "v_hat", "se", "n_outer", "h", "seed"])?;
        for k in 0..self.t.len() {
            out.write_record(&[
                self.t[k].to_string(),
                self.v[k].to_string(),
                self.se[k].to_string(),
                self.n_outer.to_string(),
                self.h.to_string(),
                self.seed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Equilibrium sampler plus cached quadrature.
struct Equilibrium {
    measure: ProductMeasure,
}

impl Equilibrium {
    fn new(model: &Model, fs: &[&TestFunction]) -> Result<Self> {
        let measure = ProductMeasure::for_integrands(model, fs)?;
        measure.mu1.prepare_sampler()?;
        measure.mu2.prepare_sampler()?;
        Ok(Self { measure })
    }

    fn draw(&self, seed: u64, i: u64, x: &mut [f64], y: &mut [f64]) -> Result<()> {
        let mut rng = stream(seed, i, LANE_START);
        self.measure.mu1.sample_into(&mut rng, x)?;
        self.measure.mu2.sample_into(&mut rng, y)
    }
}

/// Runs a path for `n` steps, calling `observe(k, x, y)` at every step
/// index k = 0..=n before stepping.
fn run_path<F>(stepper: &Stepper, x: &mut [f64], y: &mut [f64], n: usize, mut rng: ChaCha8Rng, mut observe: F) -> Result<()>
where
    F: FnMut(usize, &[f64], &[f64]) -> Result<()>,
{
    let mut xi = [0.0; MAX_DIM];
    let d2 = y.len();
    for k in 0..=n {
        observe(k, x, y)?;
        if k == n {
            break;
        }
        fill_normal(&mut rng, &mut xi[..d2]);
        stepper.step(x, y, &xi[..d2])?;
        stepper.check_guard(x, y, k + 1)?;
    }
    Ok(())
}

fn check_f(model: &Model, f: &TestFunction) -> Result<()> {
    check_dim("test function x dimension", model.d1(), f.dx())?;
    check_dim("test function y dimension", model.d2(), f.dy())
}

fn grid_steps(cfg: &IntegratorConfig, t_grid: &[f64]) -> Result<Vec<usize>> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("time grid is empty".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    let steps = t_grid.iter().map(|&t| cfg.steps_to(t)).collect::<Result<Vec<_>>>()?;
    if let Some(&last) = t_grid.last() {
        if last > cfg.horizon * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "time grid ends at {last}, beyond the horizon {}",
                cfg.horizon
            )));
        }
    }
    Ok(steps)
}

/// f evaluated at the grid steps along one path.
fn path_values(
    stepper: &Stepper,
    f: &TestFunction,
    x0: &[f64],
    y0: &[f64],
    steps: &[usize],
    rng: ChaCha8Rng,
) -> Result<Vec<f64>> {
    let (mut x, mut y) = (x0.to_vec(), y0.to_vec());
    let mut out = Vec::with_capacity(steps.len());
    let mut next = 0;
    let n = *steps.last().unwrap_or(&0);
    run_path(stepper, &mut x, &mut y, n, rng, |k, x, y| {
        while next < steps.len() && steps[next] == k {
            out.push(f.value(x, y));
            next += 1;
        }
        Ok(())
    })?;
    Ok(out)
}

/// p_t f(x, y) = E_{(x,y)}[f(X_t, Y_t)] from `m` independent paths.
#[allow(clippy::too_many_arguments)]
pub fn estimate_transition(
    model: &Model,
    f: &TestFunction,
    x: &[f64],
    y: &[f64],
    t: f64,
    m: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64)> {
    check_f(model, f)?;
    check_dim("x", model.d1(), x.len())?;
    check_dim("y", model.d2(), y.len())?;
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 paths (got {m})")));
    }
    cfg.validate(model)?;
    let n = cfg.steps_to(t)?;
    if n == 0 {
        return Ok((f.value(x, y), 0.0));
    }
    let stepper = Stepper::new(model, cfg)?;
    let values = (0..m as u64)
        .into_par_iter()
        .map(|i| Ok(path_values(&stepper, f, x, y, &[n], stream(seed, i, LANE_A))?[0]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_and_se(&values))
}

/// Pair-coupled estimate of μ((T_t f)²) − μ(f)² on `t_grid`.
///
/// Each outer start z ~ μ launches two independent paths; f(path₁)·f(path₂)
/// is unbiased for (T_t f)²(z).
pub fn estimate_decay(
    model: &Model,
    f: &TestFunction,
    t_grid: &[f64],
    n_outer: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<DecayEstimate> {
    check_f(model, f)?;
    if n_outer < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 outer samples (got {n_outer})")));
    }
    cfg.validate(model)?;
    let steps = grid_steps(cfg, t_grid)?;
    let eq = Equilibrium::new(model, &[f])?;
    let mu_f = eq.measure.integrate(|x, y| Ok(f.value(x, y)))?;
    let var_f = eq.measure.integrate(|x, y| Ok((f.value(x, y) - mu_f).powi(2)))?;
    let stepper = Stepper::new(model, cfg)?;
    let (d1, d2) = (model.d1(), model.d2());
    let rows = (0..n_outer as u64)
        .into_par_iter()
        .map(|i| {
            let (mut x0, mut y0) = (vec![0.0; d1], vec![0.0; d2]);
            eq.draw(seed, i, &mut x0, &mut y0)?;
            let a = path_values(&stepper, f, &x0, &y0, &steps, stream(seed, i, LANE_A))?;
            let b = path_values(&stepper, f, &x0, &y0, &steps, stream(seed, i, LANE_B))?;
            Ok(a.iter().zip(&b).map(|(u, v)| u * v).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut v = Vec::with_capacity(steps.len());
    let mut se = Vec::with_capacity(steps.len());
    let mut column = vec![0.0; n_outer];
    for k in 0..steps.len() {
        for (c, row) in column.iter_mut().zip(&rows) {
            *c = row[k];
        }
        let (m, s) = mean_and_se(&column);
        v.push(m - mu_f * mu_f);
        se.push(s);
    }
    Ok(DecayEstimate {
        t: t_grid.to_vec(),
        v,
        se,
        n_outer,
        n_inner: 2,
        h: cfg.h,
        seed,
        mu_f,
        var_f,
    })
}

/// Mean and SE of M_t = f(Z_t) − f(Z_0) − ∫₀ᵗ Lf(Z_s) ds over `n` paths
/// started from μ; the integral uses the left-point rule on the step grid.
pub fn martingale_residual(
    model: &Model,
    f: &TestFunction,
    t: f64,
    n: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64)> {
    check_f(model, f)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 paths (got {n})")));
    }
    cfg.validate(model)?;
    let steps = cfg.steps_to(t)?;
    if steps == 0 {
        return Ok((0.0, 0.0));
    }
    let eq = Equilibrium::new(model, &[])?;
    let stepper = Stepper::new(model, cfg)?;
    let (d1, d2) = (model.d1(), model.d2());
    let h = cfg.h;
    let residuals = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (mut x, mut y) = (vec![0.0; d1], vec![0.0; d2]);
            eq.draw(seed, i, &mut x, &mut y)?;
            let f0 = f.value(&x, &y);
            let mut integral = 0.0;
            let mut comp = 0.0;
            let mut f_end = f0;
            run_path(&stepper, &mut x, &mut y, steps, stream(seed, i, LANE_A), |k, x, y| {
                if k == steps {
                    f_end = f.value(x, y);
                } else {
                    // Kahan summation of h·Lf
                    let term = h * apply_l(model, f, x, y)? - comp;
                    let next = integral + term;
                    comp = (next - integral) - term;
                    integral = next;
                }
                Ok(())
            })?;
            Ok(f_end - f0 - integral)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_and_se(&residuals))
}

/// Mean of f(Z_t) for Z_0 ~ μ, with its SE and the quadrature value μ(f).
pub fn equilibrium_mean(
    model: &Model,
    f: &TestFunction,
    t: f64,
    n: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64, f64)> {
    check_f(model, f)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 paths (got {n})")));
    }
    cfg.validate(model)?;
    let steps = cfg.steps_to(t)?;
    let eq = Equilibrium::new(model, &[f])?;
    let mu_f = eq.measure.integrate(|x, y| Ok(f.value(x, y)))?;
    let stepper = Stepper::new(model, cfg)?;
    let (d1, d2) = (model.d1(), model.d2());
    let values = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (mut x, mut y) = (vec![0.0; d1], vec![0.0; d2]);
            eq.draw(seed, i, &mut x, &mut y)?;
            Ok(path_values(&stepper, f, &x, &y, &[steps], stream(seed, i, LANE_A))?[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    let (m, se) = mean_and_se(&values);
    Ok((m, se, mu_f))
}

/// State of one path at one recorded time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSample {
    pub path: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Records `n_paths` trajectories at the times in `t_grid`.
pub fn simulate_paths(
    model: &Model,
    start: &Start,
    n_paths: usize,
    t_grid: &[f64],
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<Vec<PathSample>> {
    cfg.validate(model)?;
    let steps = grid_steps(cfg, t_grid)?;
    let (d1, d2) = (model.d1(), model.d2());
    let eq = match start {
        Start::Equilibrium => Some(Equilibrium::new(model, &[])?),
        Start::Point { x, y } => {
            check_dim("x", d1, x.len())?;
            check_dim("y", d2, y.len())?;
            None
        }
    };
    let stepper = Stepper::new(model, cfg)?;
    let per_path = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let (mut x, mut y) = match start {
                Start::Point { x, y } => (x.clone(), y.clone()),
                Start::Equilibrium => {
                    let (mut x, mut y) = (vec![0.0; d1], vec![0.0; d2]);
                    eq.as_ref().expect("equilibrium sampler").draw(seed, p as u64, &mut x, &mut y)?;
                    (x, y)
                }
            };
            let mut out = Vec::with_capacity(steps.len());
            let mut next = 0;
            let n = *steps.last().unwrap_or(&0);
            run_path(&stepper, &mut x, &mut y, n, stream(seed, p as u64, LANE_A), |k, x, y| {
                while next < steps.len() && steps[next] == k {
                    out.push(PathSample {
                        path: p,
                        t: t_grid[next],
                        x: x.to_vec(),
                        y: y.to_vec(),
                    });
                    next += 1;
                }
                Ok(())
            })?;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_path.into_iter().flatten().collect())
}
