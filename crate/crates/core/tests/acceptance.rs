//! Acceptance checks, one line per criterion.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use langevin_decay::cli;
use langevin_decay::fporacle::{build_grid_operator, decay_curve};
use langevin_decay::measures::{builtin_corpus, check_lp_inequality, GibbsMeasure, ProductMeasure};
use langevin_decay::model::operators::gradient_form_density;
use langevin_decay::model::{apply_a, apply_l, apply_s, Model, TensorTerm, TestFunction, Univariate};
use langevin_decay::rates::{fit_constants, fit_stretch_exponent, xi_eval, DecayData, DecayEnvelope, EnvelopeShape, Preset};
use langevin_decay::sde::{estimate_decay, martingale_residual, IntegratorConfig};
use langevin_decay::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn tf(terms: Vec<(f64, Univariate, Univariate)>) -> TestFunction {
    TestFunction::tensor(
        1,
        1,
        terms
            .into_iter()
            .map(|(coef, u, v)| TensorTerm {
                coef,
                fx: vec![u],
                fy: vec![v],
            })
            .collect(),
    )
    .unwrap()
}

fn x() -> Univariate {
    Univariate::linear()
}
fn one() -> Univariate {
    Univariate::One
}

fn models() -> Vec<Model> {
    vec![
        Model::ou(),
        Model::variable_sigma(1.0).unwrap(),
        Model::stretched(1.0, 0.5).unwrap(),
    ]
}

fn identity_pairs() -> Vec<(TestFunction, TestFunction)> {
    let sq = || Univariate::Poly(vec![0.0, 0.0, 1.0]);
    vec![
        (tf(vec![(1.0, x(), one())]), tf(vec![(1.0, one(), x())])),
        (tf(vec![(1.0, x(), x())]), tf(vec![(1.0, sq(), one())])),
        (
            tf(vec![(1.0, Univariate::Tanh(1.0), sq())]),
            tf(vec![(1.0, Univariate::Sin { freq: 1.3, phase: 0.2 }, Univariate::Gauss { center: 0.3, width: 0.8 })]),
        ),
        (
            tf(vec![(1.0, Univariate::Bump { center: 0.2, radius: 1.5 }, Univariate::Tanh(0.7))]),
            tf(vec![(1.0, x(), x())]),
        ),
        (
            tf(vec![(1.0, x(), one()), (0.5, one(), sq())]),
            tf(vec![(1.0, one(), Univariate::Tanh(2.0))]),
        ),
        (
            tf(vec![(1.0, Univariate::Gauss { center: -0.4, width: 1.1 }, Univariate::Sin { freq: 0.7, phase: 0.0 })]),
            tf(vec![(2.0, Univariate::Tanh(0.5), x()), (-1.0, sq(), one())]),
        ),
    ]
}

/// (value, scale) of ∫F dμ with scale = ∫|F| dμ.
fn integral<F>(mu: &ProductMeasure, f: F) -> Result<(f64, f64)>
where
    F: Fn(&[f64], &[f64]) -> Result<f64>,
{
    let v = mu.integrate(|x, y| f(x, y))?;
    let s = mu.integrate(|x, y| f(x, y).map(f64::abs))?;
    Ok((v, s))
}

fn ac1() -> Result<Outcome> {
    let tol = 1e-6;
    let mut worst = 0.0_f64;
    let mut count = 0;
    for m in models() {
        for (f, g) in identity_pairs() {
            let mu = ProductMeasure::for_integrands(&m, &[&f, &g])?;
            let (lfg, s1) = integral(&mu, |x, y| Ok(apply_l(&m, &f, x, y)? * g.value(x, y)))?;
            let (form, s2) = integral(&mu, |x, y| gradient_form_density(&m, &f, &g, x, y))?;
            worst = worst.max((lfg + form).abs() / s1.max(s2));

            let (sfg, s3) = integral(&mu, |x, y| Ok(apply_s(&m, &f, x, y)? * g.value(x, y)))?;
            let (fsg, s4) = integral(&mu, |x, y| Ok(f.value(x, y) * apply_s(&m, &g, x, y)?))?;
            worst = worst.max((sfg - fsg).abs() / s3.max(s4));

            let (afg, s5) = integral(&mu, |x, y| Ok(apply_a(&m, &f, x, y)? * g.value(x, y)))?;
            let (fag, s6) = integral(&mu, |x, y| Ok(f.value(x, y) * apply_a(&m, &g, x, y)?))?;
            worst = worst.max((afg + fag).abs() / s5.max(s6));

            for h in [&f, &g] {
                let (sff, s7) = integral(&mu, |x, y| Ok(apply_s(&m, h, x, y)? * h.value(x, y)))?;
                if s7 > 0.0 {
                    worst = worst.max((sff / s7).max(0.0));
                }
                let (l1, s8) = integral(&mu, |x, y| apply_l(&m, h, x, y))?;
                worst = worst.max(l1.abs() / s8);
            }
            count += 1;
        }
    }
    Ok(Outcome {
        pass: worst <= tol,
        detail: format!("{count} (model, f, g) cases, worst relative defect {worst:.2e} (tol {tol:.0e})"),
    })
}

fn ac2() -> Result<Outcome> {
    let ou = Model::ou();
    let times = [0.5, 1.0, 2.0, 4.0];
    let f = tf(vec![(1.0, x(), one())]);
    let cfg = IntegratorConfig::new(1e-3, 4.0)?;
    let est = estimate_decay(&ou, &f, &times, 10_000, 2024, &cfg)?;
    let mut mc_ok = true;
    let mut mc_worst = 0.0_f64;
    for k in 0..times.len() {
        let o = common::ou_variance_x(times[k]);
        let allowance = 3.0 * est.se[k] + 0.02 * o;
        mc_ok &= (est.v[k] - o).abs() <= allowance;
        mc_worst = mc_worst.max((est.v[k] - o).abs() / allowance);
    }
    let gs = build_grid_operator(&ou, None, 257, 257)?;
    let curve = decay_curve(&gs, &gs.sample(&f)?, &times, 1e-3)?;
    let grid_worst = curve
        .iter()
        .map(|(t, v)| (v / common::ou_variance_x(*t) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(Outcome {
        pass: mc_ok && grid_worst <= 0.01,
        detail: format!(
            "MC |v̂ − oracle| / (3SE + 2%) max {mc_worst:.3}; grid 257² max relative error {grid_worst:.2e}"
        ),
    })
}

fn ac3() -> Result<Outcome> {
    let m = Model::variable_sigma(1.0)?;
    let times = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0];
    let f = tf(vec![(1.0, Univariate::Tanh(1.0), one()), (0.5, one(), Univariate::Tanh(1.0))]);
    let cfg = IntegratorConfig::new(1e-3, 4.0)?;
    let est = estimate_decay(&m, &f, &times, 10_000, 77, &cfg)?;
    let gs = build_grid_operator(&m, None, 129, 129)?;
    let curve = decay_curve(&gs, &gs.sample(&f)?, &times, 5e-3)?;
    let mut worst = 0.0_f64;
    for k in 0..times.len() {
        worst = worst.max((est.v[k] - curve[k].1).abs() / (3.0 * est.se[k]));
    }
    Ok(Outcome {
        pass: worst <= 1.0,
        detail: format!("max |v̂_MC − v_grid| / 3SE = {worst:.3} over {} times", times.len()),
    })
}

fn ac4() -> Result<Outcome> {
    let poly = Preset::Polylog { p: 10.0, q: 10.0, d: 1 };
    let env = DecayEnvelope::new(poly.shape()?, 1.0, 1.0)?;
    let omega = poly.omega()?;
    let (lt, lx): (Vec<f64>, Vec<f64>) = (100..=200)
        .step_by(5)
        .map(|k| {
            let t = 10f64.powi(k);
            (t.ln(), xi_eval(&env, t).ln())
        })
        .unzip();
    let n = lt.len() as f64;
    let (mt, mx) = (lt.iter().sum::<f64>() / n, lx.iter().sum::<f64>() / n);
    let slope = lt.iter().zip(&lx).map(|(a, b)| (a - mt) * (b - mx)).sum::<f64>()
        / lt.iter().map(|a| (a - mt).powi(2)).sum::<f64>();
    let poly_err = (slope / -omega - 1.0).abs();

    let stretched = Preset::Stretched { delta: 0.5, eps: 1.0 };
    let env = DecayEnvelope::new(stretched.shape()?, 1.0, 1.0)?;
    let t: Vec<f64> = (1..=20).map(|k| 10f64.powi(k)).collect();
    let xi: Vec<f64> = t.iter().map(|&t| xi_eval(&env, t)).collect();
    let fit = fit_stretch_exponent(&t, &xi)?;
    let str_err = (fit.value * 9.0 - 1.0).abs();
    Ok(Outcome {
        pass: poly_err <= 0.05 && str_err <= 0.10,
        detail: format!(
            "polylog slope {slope:.5} vs −ω = {:.5} ({:.2}%); stretched exponent {:.5} vs 1/9 ({:.2}%)",
            -omega,
            100.0 * poly_err,
            fit.value,
            100.0 * str_err
        ),
    })
}

fn ac5() -> Result<Outcome> {
    let times: Vec<f64> = (1..=16).map(|k| 0.25 * k as f64).collect();
    let f = tf(vec![(1.0, Univariate::Tanh(1.0), one())]);
    let osc_sq = f.osc().expect("bounded").powi(2);
    let cases = [
        (Model::ou(), EnvelopeShape::exponential()),
        (Model::variable_sigma(1.0)?, EnvelopeShape::exponential()),
        (Model::stretched(1.0, 0.5)?, Preset::Stretched { delta: 1.0, eps: 0.5 }.shape()?),
    ];
    let cfg = IntegratorConfig::new(2e-3, 4.0)?;
    let mut total = 0;
    let mut details = Vec::new();
    for (k, (m, shape)) in cases.iter().enumerate() {
        let mc = estimate_decay(m, &f, &times, 4000, 500 + k as u64, &cfg)?.to_data(osc_sq)?;
        let gs = build_grid_operator(m, None, 129, 129)?;
        let v: Vec<f64> = decay_curve(&gs, &gs.sample(&f)?, &times, 1e-2)?.into_iter().map(|p| p.1).collect();
        let grid = DecayData::exact(times.clone(), v, osc_sq)?;
        for data in [&mc, &grid] {
            let fit = fit_constants(data, shape)?;
            total += fit.violations + data.violations(&fit.envelope);
        }
        details.push(m.name.clone());
    }
    Ok(Outcome {
        pass: total == 0,
        detail: format!("{} violations over MC and grid fits for {}", total, details.join(", ")),
    })
}

fn ac6() -> Result<Outcome> {
    let mut failed = Vec::new();
    let mut min_margin = f64::INFINITY;
    let corpus = builtin_corpus()?;
    for case in &corpus {
        let m = GibbsMeasure::new(case.potential.clone())?;
        let r = check_lp_inequality(&m, &case.g, 1)?;
        if r.pass != Some(true) || r.alpha > 1.5 {
            failed.push(case.label.clone());
        }
        min_margin = min_margin.min(r.margin);
    }
    Ok(Outcome {
        pass: failed.is_empty(),
        detail: format!(
            "{} cases, {} failed {:?}, smallest margin {min_margin:.3e}",
            corpus.len(),
            failed.len(),
            failed
        ),
    })
}

fn ac7() -> Result<Outcome> {
    let sq = || Univariate::Poly(vec![0.0, 0.0, 1.0]);
    let suite = [
        (Model::ou(), tf(vec![(1.0, sq(), one())]), "ou/x²"),
        (Model::ou(), tf(vec![(1.0, one(), sq())]), "ou/y²"),
        (Model::ou(), tf(vec![(1.0, x(), x())]), "ou/xy"),
        (
            Model::variable_sigma(1.0)?,
            tf(vec![(1.0, Univariate::Tanh(1.0), Univariate::Tanh(1.0))]),
            "variable_sigma/tanh·tanh",
        ),
        (Model::stretched(1.0, 0.5)?, tf(vec![(1.0, x(), x())]), "stretched/xy"),
    ];
    let (h, n, t) = (2e-3, 10_000, 1.0);
    let mut bound_ok = true;
    let mut halving = Vec::new();
    for (k, (m, f, label)) in suite.iter().enumerate() {
        let seed = 900 + k as u64;
        let (m1, se1) = martingale_residual(m, f, t, n, seed, &IntegratorConfig::new(h, t)?)?;
        let (m2, se2) = martingale_residual(m, f, t, n, seed, &IntegratorConfig::new(h / 2.0, t)?)?;
        bound_ok &= m1.abs() <= 3.0 * se1 + 2.0 * h && m2.abs() <= 3.0 * se2 + h;
        // the ratio is only measurable where the bias dominates the noise
        if m1.abs() > 10.0 * se1 && m2.abs() > 10.0 * se2 {
            halving.push((label.to_string(), m1 / m2));
        }
    }
    let ratios_ok = !halving.is_empty() && halving.iter().all(|(_, r)| (1.6..=2.4).contains(r));
    let shown: Vec<String> = halving.iter().map(|(l, r)| format!("{l}: {r:.3}")).collect();
    Ok(Outcome {
        pass: bound_ok && ratios_ok,
        detail: format!(
            "{} cases within 3SE + 2h; bias ratio h/(h/2): {}",
            suite.len(),
            shown.join(", ")
        ),
    })
}

fn mat_vec(m: &sprs::CsMat<f64>, v: &[f64]) -> Vec<f64> {
    m.outer_iterator().map(|r| r.iter().map(|(j, a)| a * v[j]).sum()).collect()
}

/// Bilinear-form defects on random vectors, relative to Σ w|f||M||g|.
fn form_defects(gs: &langevin_decay::fporacle::GridSemigroup, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let w = &gs.weights;
    let n = gs.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(w).map(|((a, b), w)| a * b * w).sum::<f64>();
    let abs_form = |m: &sprs::CsMat<f64>, f: &[f64], g: &[f64]| {
        m.outer_iterator()
            .enumerate()
            .map(|(k, r)| w[k] * g[k].abs() * r.iter().map(|(l, v)| v.abs() * f[l].abs()).sum::<f64>())
            .sum::<f64>()
    };
    let ones = vec![1.0; n];
    let mut worst = gs
        .l
        .outer_iterator()
        .map(|r| {
            let (sum, abs) = r.iter().fold((0.0, 0.0), |(s, a), (_, v)| (s + v, a + v.abs()));
            sum.abs() / abs
        })
        .fold(0.0, f64::max);
    for _ in 0..20 {
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (sf, sg, af, ag, lf) = (
            mat_vec(&gs.s, &f),
            mat_vec(&gs.s, &g),
            mat_vec(&gs.a, &f),
            mat_vec(&gs.a, &g),
            mat_vec(&gs.l, &f),
        );
        let s_scale = abs_form(&gs.s, &f, &g).max(abs_form(&gs.s, &g, &f));
        let a_scale = abs_form(&gs.a, &f, &g).max(abs_form(&gs.a, &g, &f));
        worst = worst
            .max((dot(&sf, &g) - dot(&f, &sg)).abs() / s_scale)
            .max((dot(&af, &g) + dot(&f, &ag)).abs() / a_scale)
            .max((dot(&sf, &f) / abs_form(&gs.s, &f, &f)).max(0.0))
            .max(dot(&lf, &ones).abs() / abs_form(&gs.l, &f, &ones));
    }
    worst
}

fn ac8() -> Result<Outcome> {
    let mut ms = models();
    ms.push(Model::log_family(10.0, 10.0)?);
    let (mut worst, mut forms) = (0.0_f64, 0.0_f64);
    for m in &ms {
        for n in [65, 129] {
            let gs = build_grid_operator(m, None, n, n)?;
            worst = worst.max(gs.invariants(3).max());
            forms = forms.max(form_defects(&gs, 5));
        }
    }
    Ok(Outcome {
        pass: worst <= 1e-10 && forms <= 1e-10,
        detail: format!(
            "{} models at 65² and 129², worst invariant defect {worst:.2e}, bilinear-form defect {forms:.2e}",
            ms.len()
        ),
    })
}

fn write_configs(dir: &Path) -> Result<Vec<String>> {
    fs::write(
        dir.join("model.json"),
        r#"{ "q": [1.0],
             "phi": { "family": "gaussian", "dim": 1 },
             "psi": { "family": "gaussian", "dim": 1 },
             "sigma": { "family": "scalar_bounded", "dim": 1, "s": 1.0 } }"#,
    )?;
    let f = r#"{ "terms": [ { "x": [ { "tanh": 1.0 } ], "y": [ "one" ] } ] }"#;
    let configs = [
        ("validate", r#""probes": { "count": 512 }"#.to_string()),
        (
            "rate",
            r#""t_grid": [1, 10, 100, 1000],
               "envelopes": [ { "family": "stretched", "params": [0.5, 1.0] },
                              { "family": "polylog", "params": [10, 10] } ]"#
                .to_string(),
        ),
        (
            "simulate",
            r#""t_grid": [0.5, 1.0], "integrator": { "h": 0.01 }, "simulate": { "n_paths": 50 }"#.to_string(),
        ),
        (
            "decay",
            format!(r#""t_grid": [0.5, 1.0], "n_outer": 400, "integrator": {{ "h": 0.01 }}, "test_function": {f}"#),
        ),
        (
            "fpsolve",
            format!(
                r#""t_grid": [0.5, 1.0], "test_function": {f},
                   "grid": {{ "nx": 33, "ny": 33, "dt": 0.05, "snapshots": true,
                             "density": {{ "center": [1.0, 0.0], "width": 0.5 }} }}"#
            ),
        ),
        (
            "compare",
            format!(
                r#""t_grid": [0.5, 1, 1.5, 2, 2.5, 3], "n_outer": 400, "integrator": {{ "h": 0.01 }},
                   "test_function": {f}, "envelopes": [ {{ "family": "exponential" }} ],
                   "compare": {{ "source": "mc" }}"#
            ),
        ),
    ];
    let mut names = Vec::new();
    for (cmd, body) in configs {
        let text = format!(
            r#"{{ "command": "{cmd}", "output_dir": "out_{cmd}", "seed": 11, "model": "model.json", {body} }}"#
        );
        let name = format!("{cmd}.json");
        fs::write(dir.join(&name), text)?;
        names.push(name);
    }
    Ok(names)
}

/// Output files of one run with the manifest's wall time removed.
fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        let mut bytes = fs::read(&p)?;
        if name == "manifest.json" {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes)?;
            v.as_object_mut().unwrap().remove("wall_time_s");
            bytes = serde_json::to_vec(&v)?;
        }
        files.push((name, bytes));
    }
    files.sort();
    Ok(files)
}

fn ac9() -> Result<Outcome> {
    let tmp = tempfile::tempdir()?;
    let names = write_configs(tmp.path())?;
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    let mut differing = Vec::new();
    for name in &names {
        let cfg = cli::load(&tmp.path().join(name))?;
        let out = tmp.path().join(&cfg.config.output_dir);
        cli::run(&cfg)?;
        let first = snapshot(&out)?;
        fs::remove_dir_all(&out)?;
        single.install(|| cli::run(&cfg))?;
        let second = snapshot(&out)?;
        if first != second || first.is_empty() {
            differing.push(cfg.config.command.name());
        }
    }
    Ok(Outcome {
        pass: differing.is_empty(),
        detail: format!(
            "{} subcommands rerun (default pool, then 1 thread); differing: {:?}",
            names.len(),
            differing
        ),
    })
}

type Check = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let checks: [(&str, &str, Check, u64); 9] = [
        ("AC1", "structural identity suite", ac1, 60),
        ("AC2", "Gaussian oracle (MC and 257² grid)", ac2, 300),
        ("AC3", "MC/grid cross-validation", ac3, 600),
        ("AC4", "rate-engine asymptotics", ac4, 10),
        ("AC5", "envelope audit", ac5, 60),
        ("AC6", "weighted inequality suite", ac6, 30),
        ("AC7", "martingale residual", ac7, 300),
        ("AC8", "discrete structure", ac8, 60),
        ("AC9", "determinism", ac9, 600),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let mut failures = 0;
    for (id, name, check, budget) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{id} {} {name} [{:.1}s / {budget}s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
