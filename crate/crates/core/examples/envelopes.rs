//! Decay envelopes ξ(t) for the three preset families, with their
//! large-time exponents.

use langevin_decay::rates::{DecayEnvelope, Preset};

fn main() -> langevin_decay::Result<()> {
    let presets = [
        ("exponential", vec![]),
        ("stretched", vec![1.0, 0.5]),
        ("stretched", vec![0.5, 0.5]),
        ("polylog", vec![10.0, 10.0]),
    ];
    let times = [1.0, 10.0, 1e2, 1e3, 1e4, 1e6];
    for (family, params) in presets {
        let preset = Preset::parse(family, &params, 1)?;
        let env = DecayEnvelope::new(preset.shape()?, 1.0, 1.0)?;
        println!("{family} {params:?}: omega = {:.4} ({:?})", preset.omega()?, preset.kind());
        for t in times {
            println!("  t = {t:>8.0e}   xi = {:.6e}   ln(1/xi) = {:.6e}", env.xi(t), env.log_inv_xi(t));
        }
    }
    Ok(())
}
