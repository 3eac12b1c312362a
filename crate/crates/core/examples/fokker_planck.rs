//! Forward evolution of a displaced Gaussian density towards μ.

use langevin_decay::fporacle::{build_grid_operator, fp_distance, fp_evolve};
use langevin_decay::model::Model;

fn main() -> langevin_decay::Result<()> {
    let m = Model::variable_sigma(1.0)?;
    let gs = build_grid_operator(&m, None, 97, 97)?;
    let (cx, cy, w) = (1.5, -1.0, 0.5);
    let ny = gs.y.len();
    let mut p: Vec<f64> = (0..gs.len())
        .map(|k| {
            let (x, y) = (gs.x[k / ny], gs.y[k % ny]);
            (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * w * w)).exp()
        })
        .collect();
    let mass: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= mass);

    let dt = 0.01;
    let mut t = 0.0;
    println!("t = {t:>4.1}  distance = {:.6e}", fp_distance(&gs, &p));
    for _ in 0..8 {
        p = fp_evolve(&gs, &p, 1.0, dt)?;
        t += 1.0;
        let mass: f64 = p.iter().sum();
        println!("t = {t:>4.1}  distance = {:.6e}  mass = {mass:.12}", fp_distance(&gs, &p));
    }
    Ok(())
}
