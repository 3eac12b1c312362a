//! Grid semigroup on a box: discrete invariants, a variance-decay curve and
//! the spectral abscissa of the generator.

use langevin_decay::fporacle::{build_grid_operator, decay_curve, spectral_abscissa};
use langevin_decay::model::{Model, TensorTerm, TestFunction, Univariate};

fn main() -> langevin_decay::Result<()> {
    let ou = Model::ou();
    let gs = build_grid_operator(&ou, None, 129, 129)?;
    println!("box [-{:.2}, {:.2}] x [-{:.2}, {:.2}], {} nodes", gs.radius_x, gs.radius_x, gs.radius_y, gs.radius_y, gs.len());
    println!("invariants: {:?}", gs.invariants(1));

    let f = TestFunction::tensor(
        1,
        1,
        vec![TensorTerm {
            coef: 1.0,
            fx: vec![Univariate::Tanh(1.0)],
            fy: vec![Univariate::One],
        }],
    )?;
    let u = gs.sample(&f)?;
    for (t, v) in decay_curve(&gs, &u, &[0.0, 1.0, 2.0, 4.0, 8.0], 0.01)? {
        println!("t = {t:>4}  Var(T_t f) = {v:.6e}");
    }

    let coarse = build_grid_operator(&ou, None, 65, 65)?;
    let lambda = spectral_abscissa(&coarse, 1.0, 40, 0.01, 3)?;
    println!("spectral abscissa (65x65) = {lambda:.4}  (OU: -0.5)");
    Ok(())
}
