//! Monte Carlo variance decay for f(x, y) = x on the OU model, next to the
//! closed form from the drift matrix exponential.

use langevin_decay::model::{Model, TensorTerm, TestFunction, Univariate};
use langevin_decay::sde::{estimate_decay, IntegratorConfig};

/// e^{tB} for B = [[0, 1], [-1, -1]] via Taylor plus squaring.
fn expm(t: f64) -> [[f64; 2]; 2] {
    let s = t / 1024.0;
    let b = [[0.0, s], [-s, -s]];
    let mut e = [[1.0, 0.0], [0.0, 1.0]];
    let mut term = e;
    for k in 1..20 {
        term = mul(term, b).map(|r| r.map(|v| v / k as f64));
        for i in 0..2 {
            for j in 0..2 {
                e[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..10 {
        e = mul(e, e);
    }
    e
}

fn mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn main() -> langevin_decay::Result<()> {
    let ou = Model::ou();
    let f = TestFunction::tensor(
        1,
        1,
        vec![TensorTerm {
            coef: 1.0,
            fx: vec![Univariate::linear()],
            fy: vec![Univariate::One],
        }],
    )?;
    let times = [0.5, 1.0, 2.0, 4.0];
    let cfg = IntegratorConfig::new(1e-3, 4.0)?;
    let est = estimate_decay(&ou, &f, &times, 10_000, 7, &cfg)?;
    println!("Var_mu(f) = {:.4}", est.var_f);
    println!("{:>5} {:>10} {:>10} {:>10}", "t", "v_hat", "se", "exact");
    for ((t, v), se) in est.t.iter().zip(&est.v).zip(&est.se) {
        let e = expm(*t);
        println!("{t:>5} {v:>10.5} {se:>10.5} {:>10.5}", e[0][0].powi(2) + e[0][1].powi(2));
    }
    Ok(())
}
