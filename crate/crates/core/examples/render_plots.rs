//! Loss curves, parameter tracks and force overlays of a finished run as
//! CSV tables and SVG charts under `<run_dir>/plots`.
//!
//! cargo run --release --example render_plots -- [run_dir]

use std::path::PathBuf;

use myopinn::cli;
use myopinn::config::RunConfig;
use myopinn::plot;

fn main() -> myopinn::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "runs/recovery".into());
    let cfg = RunConfig::load(&dir.join("config.toml"))?;
    let trials = cli::load_trials(&cfg, &dir)?;
    let files = plot::render_run(&dir, &trials)?;
    for p in files.csv.iter().chain(&files.svg) {
        println!("{}", p.display());
    }
    Ok(())
}
