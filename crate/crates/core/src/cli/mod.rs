//! Config-driven runs: one JSON config in, CSV files and a manifest out.

pub mod config;
pub mod report;

pub use config::{load, Command, ExperimentConfig, LoadedConfig, ModelRef, ModelSpec, Source};
pub use report::ComparisonReport;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fporacle::{build_grid_operator, fp_distance, GridSemigroup, Stepping};
use crate::model::{validate_conditions, Model, ProbeSpec, TestFunction};
use crate::rates::{DecayData, DecayEnvelope};
use crate::sde::{estimate_decay, simulate_paths, DecayEstimate, IntegratorConfig, Start};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERICAL
    }
}

/// One output file held in memory until the run succeeds.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub command: Command,
    pub files: Vec<PathBuf>,
    /// Human-readable summary printed by the binary.
    pub text: String,
    /// `false` when the run completed but its verdict is negative
    /// (a failing condition in `validate`, a violation in `compare`).
    pub passed: bool,
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
    bytes: usize,
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_bytes<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        write(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

fn fmt(v: f64) -> String {
    v.to_string()
}

struct Products {
    artifacts: Vec<Artifact>,
    summary: serde_json::Value,
    text: String,
    passed: bool,
}

/// Runs the config at `path`.
pub fn run_file(path: &Path) -> Result<RunOutcome> {
    run(&load(path)?)
}

/// Executes a loaded config and writes its outputs. Nothing is left in the
/// output directory when the run fails.
pub fn run(cfg: &LoadedConfig) -> Result<RunOutcome> {
    let started = Instant::now();
    let c = &cfg.config;
    let products = match c.command {
        Command::Validate => cmd_validate(cfg)?,
        Command::Rate => cmd_rate(cfg)?,
        Command::Simulate => cmd_simulate(cfg)?,
        Command::Decay => cmd_decay(cfg)?,
        Command::Fpsolve => cmd_fpsolve(cfg)?,
        Command::Compare => cmd_compare(cfg)?,
    };
    let out_dir = cfg.resolve(&c.output_dir);
    let outputs: Vec<OutputEntry> = products
        .artifacts
        .iter()
        .map(|a| OutputEntry {
            file: a.name.clone(),
            sha256: hex_sha256(&a.bytes),
            bytes: a.bytes.len(),
        })
        .collect();
    let model_bytes = match &c.model {
        Some(ModelRef::Path(p)) => Some(fs::read(cfg.resolve(p))?),
        _ => None,
    };
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": c.command.name(),
        "seed": c.seed,
        "config": serde_json::to_value(c)?,
        "config_sha256": hex_sha256(&cfg.raw),
        "model_sha256": model_bytes.as_deref().map(hex_sha256),
        "outputs": outputs,
        "summary": products.summary,
        "passed": products.passed,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    let mut artifacts = products.artifacts;
    artifacts.push(Artifact {
        name: "manifest.json".into(),
        bytes: serde_json::to_vec_pretty(&manifest)?,
    });
    let files = write_all(&out_dir, &artifacts)?;
    Ok(RunOutcome {
        command: c.command,
        files,
        text: products.text,
        passed: products.passed,
    })
}

fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    let created_dir = !dir.exists();
    let mut written = Vec::new();
    let result = (|| -> Result<()> {
        fs::create_dir_all(dir)?;
        for a in artifacts {
            let p = dir.join(&a.name);
            fs::write(&p, &a.bytes)?;
            written.push(p);
        }
        Ok(())
    })();
    if let Err(e) = result {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        if created_dir {
            let _ = fs::remove_dir(dir);
        }
        return Err(e);
    }
    Ok(written)
}

fn integrator(cfg: &LoadedConfig) -> Result<IntegratorConfig> {
    let spec = cfg
        .config
        .integrator
        .as_ref()
        .ok_or_else(|| Error::config("integrator", "missing"))?;
    let last = cfg.t_grid().last().copied().unwrap_or(spec.h);
    let horizon = spec.horizon.unwrap_or(last.max(spec.h));
    if horizon < last {
        return Err(Error::config("integrator.horizon", format!("shorter than the last output time {last}")));
    }
    IntegratorConfig::new(spec.h, horizon)
        .map(|c| c.with_factorization(spec.factorization))
        .map_err(|e| Error::config("integrator", e.to_string()))
}

fn probes(cfg: &LoadedConfig) -> ProbeSpec {
    cfg.config.probes.as_ref().map(|p| p.to_spec()).unwrap_or_default()
}

fn cmd_validate(cfg: &LoadedConfig) -> Result<Products> {
    let model = cfg.model()?;
    let report = validate_conditions(&model, &probes(cfg));
    let bytes = csv_bytes(|w| {
        w.write_record(["id", "status", "value", "margin", "worst_point", "note"])?;
        for e in &report.entries {
            let pt: Vec<String> = e.worst_point.iter().map(|v| fmt(*v)).collect();
            w.write_record(&[
                e.id.label().to_string(),
                e.status.to_string(),
                fmt(e.value),
                e.margin.map(fmt).unwrap_or_default(),
                pt.join(" "),
                e.note.clone(),
            ])?;
        }
        Ok(())
    })?;
    Ok(Products {
        artifacts: vec![Artifact {
            name: "conditions.csv".into(),
            bytes,
        }],
        summary: json!({ "all_pass": report.all_pass(), "any_fail": report.any_fail() }),
        text: report.to_string(),
        passed: !report.any_fail(),
    })
}

fn cmd_rate(cfg: &LoadedConfig) -> Result<Products> {
    let specs = cfg.config.envelopes.as_deref().unwrap_or(&[]);
    let mut rows = Vec::new();
    let mut text = String::new();
    for (k, spec) in specs.iter().enumerate() {
        let preset = spec.preset()?;
        let env = DecayEnvelope::new(preset.shape()?, spec.c1, spec.c2)
            .map_err(|e| Error::config(format!("envelopes[{k}]"), e.to_string()))?;
        for &t in cfg.t_grid() {
            rows.push((spec.label(), t, env.xi(t), env.log_inv_xi(t)));
        }
        text.push_str(&format!("{}: omega = {:.6}\n", spec.label(), preset.omega()?));
    }
    let bytes = csv_bytes(|w| {
        w.write_record(["envelope", "t", "xi", "log_inv_xi"])?;
        for (label, t, xi, s) in &rows {
            w.write_record(&[label.clone(), fmt(*t), fmt(*xi), fmt(*s)])?;
        }
        Ok(())
    })?;
    Ok(Products {
        artifacts: vec![Artifact {
            name: "rate.csv".into(),
            bytes,
        }],
        summary: json!({ "envelopes": specs.len(), "points": rows.len() }),
        text,
        passed: true,
    })
}

fn cmd_simulate(cfg: &LoadedConfig) -> Result<Products> {
    let model = cfg.model()?;
    let icfg = integrator(cfg)?;
    let spec = cfg
        .config
        .simulate
        .as_ref()
        .ok_or_else(|| Error::config("simulate", "missing"))?;
    let start = match &spec.start {
        Some((x, y)) => Start::Point { x: x.clone(), y: y.clone() },
        None => Start::Equilibrium,
    };
    let paths = simulate_paths(&model, &start, spec.n_paths, cfg.t_grid(), cfg.config.seed, &icfg)?;
    let bytes = csv_bytes(|w| {
        let mut header = vec!["path".to_string(), "t".to_string()];
        header.extend((0..model.d1()).map(|i| format!("x{i}")));
        header.extend((0..model.d2()).map(|j| format!("y{j}")));
        w.write_record(&header)?;
        for p in &paths {
            let mut rec = vec![p.path.to_string(), fmt(p.t)];
            rec.extend(p.x.iter().chain(&p.y).map(|v| fmt(*v)));
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    Ok(Products {
        artifacts: vec![Artifact {
            name: "paths.csv".into(),
            bytes,
        }],
        summary: json!({ "paths": spec.n_paths, "records": paths.len() }),
        text: format!("{} paths, {} records\n", spec.n_paths, paths.len()),
        passed: true,
    })
}

fn mc_decay(cfg: &LoadedConfig, model: &Model, f: &TestFunction) -> Result<DecayEstimate> {
    let icfg = integrator(cfg)?;
    let n = cfg.config.n_outer.ok_or_else(|| Error::config("n_outer", "missing"))?;
    estimate_decay(model, f, cfg.t_grid(), n, cfg.config.seed, &icfg)
}

fn cmd_decay(cfg: &LoadedConfig) -> Result<Products> {
    let model = cfg.model()?;
    let f = cfg.test_function(&model)?;
    let est = mc_decay(cfg, &model, &f)?;
    let mut bytes = Vec::new();
    est.write_csv(&mut bytes)?;
    let text = est
        .t
        .iter()
        .zip(&est.v)
        .zip(&est.se)
        .map(|((t, v), se)| format!("t = {t:<8} v = {v:.6e} ± {se:.2e}\n"))
        .collect();
    Ok(Products {
        artifacts: vec![Artifact {
            name: "decay.csv".into(),
            bytes,
        }],
        summary: json!({ "mu_f": est.mu_f, "var_f": est.var_f, "n_outer": est.n_outer }),
        text,
        passed: true,
    })
}

fn grid(cfg: &LoadedConfig, model: &Model) -> Result<(GridSemigroup, config::GridSpec)> {
    let spec = cfg.config.grid.clone().unwrap_or_default();
    let gs = build_grid_operator(model, spec.radius, spec.nx, spec.ny)?;
    Ok((gs, spec))
}

/// Grid variance curve, optionally with field snapshots.
fn grid_curve(gs: &GridSemigroup, u0: &[f64], t_grid: &[f64], dt: f64, snapshots: bool) -> Result<(Vec<f64>, Vec<Artifact>)> {
    let mut stepping = Stepping::new(&gs.l, dt)?;
    let mut u = u0.to_vec();
    let mut done = 0usize;
    let mut var = Vec::with_capacity(t_grid.len());
    let mut snaps = Vec::new();
    for (k, &t) in t_grid.iter().enumerate() {
        let target = steps_of(t, dt)?;
        stepping.advance(&mut u, target - done)?;
        done = target;
        var.push(gs.variance(&u));
        if snapshots {
            snaps.push(Artifact {
                name: format!("field_{k:03}.csv"),
                bytes: field_csv(gs, t, &u)?,
            });
        }
    }
    Ok((var, snaps))
}

fn steps_of(t: f64, dt: f64) -> Result<usize> {
    let n = (t / dt).round();
    if (n * dt - t).abs() > 1e-9 * t.max(dt) {
        return Err(Error::config("t_grid", format!("time {t} is not a multiple of grid.dt = {dt}")));
    }
    Ok(n as usize)
}

fn field_csv(gs: &GridSemigroup, t: f64, u: &[f64]) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(["t", "x", "y", "u"])?;
        let ny = gs.y.len();
        for (k, v) in u.iter().enumerate() {
            w.write_record(&[fmt(t), fmt(gs.x[k / ny]), fmt(gs.y[k % ny]), fmt(*v)])?;
        }
        Ok(())
    })
}

fn cmd_fpsolve(cfg: &LoadedConfig) -> Result<Products> {
    let model = cfg.model()?;
    let f = cfg.test_function(&model)?;
    let (gs, spec) = grid(cfg, &model)?;
    let inv = gs.invariants(cfg.config.seed);
    let u0 = gs.sample(&f)?;
    let t_grid = cfg.t_grid();
    let (var, mut artifacts) = grid_curve(&gs, &u0, t_grid, spec.dt, spec.snapshots)?;
    let bytes = csv_bytes(|w| {
        w.write_record(["t", "variance"])?;
        for (t, v) in t_grid.iter().zip(&var) {
            w.write_record(&[fmt(*t), fmt(*v)])?;
        }
        Ok(())
    })?;
    artifacts.insert(
        0,
        Artifact {
            name: "fp_decay.csv".into(),
            bytes,
        },
    );
    if let Some(d) = &spec.density {
        artifacts.push(Artifact {
            name: "fp_density.csv".into(),
            bytes: density_run(&gs, d, t_grid, spec.dt)?,
        });
    }
    let mut text = format!(
        "grid {}x{} on [-{:.3}, {:.3}] x [-{:.3}, {:.3}], invariants max {:.2e}\n",
        gs.x.len(),
        gs.y.len(),
        gs.radius_x,
        gs.radius_x,
        gs.radius_y,
        gs.radius_y,
        inv.max()
    );
    for (t, v) in t_grid.iter().zip(&var) {
        text.push_str(&format!("t = {t:<8} var = {v:.6e}\n"));
    }
    Ok(Products {
        artifacts,
        summary: json!({
            "nx": gs.x.len(),
            "ny": gs.y.len(),
            "radius": [gs.radius_x, gs.radius_y],
            "mass_deficit": gs.mass_deficit,
            "invariants": inv,
        }),
        text,
        passed: true,
    })
}

/// Fokker–Planck run from a Gaussian bump; columns t, distance, mass, min_density.
fn density_run(gs: &GridSemigroup, d: &config::DensitySpec, t_grid: &[f64], dt: f64) -> Result<Vec<u8>> {
    if !(d.width > 0.0) {
        return Err(Error::config("grid.density.width", "must be positive"));
    }
    let ny = gs.y.len();
    let mut p: Vec<f64> = (0..gs.len())
        .map(|k| {
            let (x, y) = (gs.x[k / ny] - d.center.0, gs.y[k % ny] - d.center.1);
            (-(x * x + y * y) / (2.0 * d.width * d.width)).exp()
        })
        .collect();
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(Error::config("grid.density", "bump has no mass on the grid"));
    }
    p.iter_mut().for_each(|v| *v /= total);
    let states = crate::fporacle::fp_trajectory(gs, &p, t_grid, dt).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::config("t_grid", m),
        other => other,
    })?;
    let rows: Vec<_> = t_grid
        .iter()
        .zip(&states)
        .map(|(&t, p)| {
            let mass: f64 = p.iter().sum();
            let min = p.iter().copied().fold(f64::INFINITY, f64::min);
            (t, fp_distance(gs, p), mass, min)
        })
        .collect();
    csv_bytes(|w| {
        w.write_record(["t", "distance", "mass", "min_density"])?;
        for (t, dist, m, min) in &rows {
            w.write_record(&[fmt(*t), fmt(*dist), fmt(*m), fmt(*min)])?;
        }
        Ok(())
    })
}

fn cmd_compare(cfg: &LoadedConfig) -> Result<Products> {
    let model = cfg.model()?;
    let f = cfg.test_function(&model)?;
    let spec = cfg.config.compare.as_ref().ok_or_else(|| Error::config("compare", "missing"))?;
    let env = &cfg.config.envelopes.as_deref().unwrap_or(&[])[0];
    let preset = env.preset()?;
    let osc_sq = match (spec.osc_sq, f.osc()) {
        (Some(v), _) => v,
        (None, Some(o)) => o * o,
        // unbounded f: the scale is absorbed into c₁
        (None, None) => 1.0,
    };
    let t_grid = cfg.t_grid();
    let data = match spec.source {
        Source::Mc => mc_decay(cfg, &model, &f)?.to_data(osc_sq)?,
        Source::Grid => {
            let (gs, g) = grid(cfg, &model)?;
            let (var, _) = grid_curve(&gs, &gs.sample(&f)?, t_grid, g.dt, false)?;
            DecayData::exact(t_grid.to_vec(), var, osc_sq)?
        }
    };
    let fit_from = spec.fit_from.unwrap_or(t_grid[t_grid.len() / 2]);
    let report = ComparisonReport::build(spec.source, &env.family, &env.params, &preset, &data, fit_from)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    Ok(Products {
        artifacts: vec![
            Artifact {
                name: "compare.csv".into(),
                bytes: csv,
            },
            Artifact {
                name: "report.json".into(),
                bytes: serde_json::to_vec_pretty(&report)?,
            },
        ],
        summary: json!({ "violations": report.violations, "c1": report.envelope.c1, "c2": report.envelope.c2 }),
        text: report.to_string(),
        passed: report.violations == 0,
    })
}
