//! Structural checks on a few built-in models, plus one that breaks
//! uniform ellipticity of the noise.

use std::sync::Arc;

use langevin_decay::model::{validate_conditions, DiffusionField, Model, Potential, ProbeSpec};

fn main() -> langevin_decay::Result<()> {
    let probes = ProbeSpec::default();
    let degenerate = Model::new(
        vec![1.0],
        Potential::standard_gaussian(1),
        Potential::standard_gaussian(1),
        DiffusionField::custom(
            1,
            Arc::new(|y, o| o[0] = 1.0 / (1.0 + y[0] * y[0])),
            Some(Arc::new(|y, o| o[0] = -2.0 * y[0] / (1.0 + y[0] * y[0]).powi(2))),
        ),
    )?
    .with_name("vanishing_sigma");

    for m in [Model::ou(), Model::variable_sigma(1.0)?, Model::stretched(1.0, 0.5)?, degenerate] {
        let report = validate_conditions(&m, &probes);
        println!("## {}  (all pass: {})", m.name, report.all_pass());
        print!("{report}");
    }
    Ok(())
}
