//! The k = 1 moment inequality over the built-in corpus of (V, g) pairs.

use langevin_decay::measures::{builtin_corpus, check_lp_inequality, GibbsMeasure};

fn main() -> langevin_decay::Result<()> {
    println!("{:<28} {:>10} {:>12} {:>12} {:>8}", "case", "C_k", "lhs", "margin", "pass");
    for case in builtin_corpus()? {
        let mu = GibbsMeasure::new(case.potential.clone())?;
        let r = check_lp_inequality(&mu, &case.g, 1)?;
        let pass = r.pass.map_or("report", |p| if p { "yes" } else { "NO" });
        println!("{:<28} {:>10.3} {:>12.4e} {:>12.4e} {:>8}", case.label, r.c_k, r.lhs, r.margin, pass);
    }
    Ok(())
}
