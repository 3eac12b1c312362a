mod common;

use langevin_decay::fporacle::{build_grid_operator, decay_curve, fp_distance, fp_evolve, fp_trajectory, spectral_abscissa};
use langevin_decay::model::{Model, TensorTerm, TestFunction, Univariate};

fn of_x(u: Univariate) -> TestFunction {
    TestFunction::tensor(
        1,
        1,
        vec![TensorTerm {
            coef: 1.0,
            fx: vec![u],
            fy: vec![Univariate::One],
        }],
    )
    .unwrap()
}

#[test]
fn ou_grid_matches_matrix_exponential() {
    let gs = build_grid_operator(&Model::ou(), None, 97, 97).unwrap();
    let u = gs.sample(&of_x(Univariate::linear())).unwrap();
    let times = [0.5, 1.0, 2.0, 3.0];
    for (t, v) in decay_curve(&gs, &u, &times, 5e-3).unwrap() {
        let exact = common::ou_variance_x(t);
        assert!((v - exact).abs() < 0.01 * exact, "t = {t}: {v} vs {exact}");
    }
}

#[test]
fn decay_is_monotone_and_converges_in_dt() {
    let m = Model::variable_sigma(1.0).unwrap();
    let gs = build_grid_operator(&m, None, 65, 65).unwrap();
    let u = gs.sample(&of_x(Univariate::Tanh(1.0))).unwrap();
    let times = [0.0, 0.5, 1.0, 2.0, 4.0];
    let coarse = decay_curve(&gs, &u, &times, 0.02).unwrap();
    let fine = decay_curve(&gs, &u, &times, 0.01).unwrap();
    for w in fine.windows(2) {
        assert!(w[1].1 < w[0].1, "{w:?}");
    }
    // Crank–Nicolson is second order: the coarse-fine gap shrinks ~4x per halving
    let finer = decay_curve(&gs, &u, &times, 0.005).unwrap();
    for k in 1..times.len() {
        let d1 = (coarse[k].1 - fine[k].1).abs();
        let d2 = (fine[k].1 - finer[k].1).abs();
        assert!(d2 < 0.4 * d1 || d1 < 1e-12, "t = {}: {d1:e} {d2:e}", times[k]);
    }
}

#[test]
fn fokker_planck_distance_shrinks() {
    let gs = build_grid_operator(&Model::ou(), None, 65, 65).unwrap();
    let ny = gs.y.len();
    let mut p: Vec<f64> = (0..gs.len())
        .map(|k| {
            let (x, y) = (gs.x[k / ny], gs.y[k % ny]);
            (-((x - 1.0).powi(2) + (y + 0.5).powi(2)) / 0.5).exp()
        })
        .collect();
    let mass: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= mass);
    let mut last = fp_distance(&gs, &p);
    for q in fp_trajectory(&gs, &p, &[0.5, 1.0, 1.5, 2.0, 2.5], 0.01).unwrap() {
        let d = fp_distance(&gs, &q);
        assert!(d < last, "{d} !< {last}");
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        last = d;
    }
    let direct = fp_evolve(&gs, &p, 2.5, 0.01).unwrap();
    assert!((fp_distance(&gs, &direct) - last).abs() < 1e-14);
}

#[test]
fn ou_spectral_abscissa() {
    // eigenvalues of the drift [[0, 1], [-1, -1]] have real part -1/2
    let gs = build_grid_operator(&Model::ou(), None, 65, 65).unwrap();
    let lambda = spectral_abscissa(&gs, 1.0, 40, 0.01, 3).unwrap();
    assert!((lambda + 0.5).abs() < 0.01, "{lambda}");
}
