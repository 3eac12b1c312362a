//! Runs a JSON experiment config the same way the binary does, writing the
//! outputs and a manifest into the config's `output_dir`.
//!
//! cargo run --example run_config -- examples/configs/decay_ou.json

use std::path::PathBuf;

use langevin_decay::cli;

fn main() {
    let path: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/rate.json").into())
        .into();
    match cli::run_file(&path) {
        Ok(out) => {
            print!("{}", out.text);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            std::process::exit(if out.passed { cli::EXIT_OK } else { cli::EXIT_VALIDATION });
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(cli::exit_code(&e));
        }
    }
}
