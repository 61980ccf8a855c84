//! Metrics of a saved checkpoint on the held-out part of its run, plus a
//! per-trial breakdown over every sample.
//!
//! cargo run --release --example evaluate_run -- [run_dir]

use std::path::PathBuf;

use myopinn::cli;
use myopinn::config::RunConfig;
use myopinn::network::Checkpoint;
use myopinn::train::{self, RunArtifacts, Segment};

fn main() -> myopinn::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "runs/recovery".into());
    let cfg = RunConfig::load(&dir.join("config.toml"))?;
    let art = RunArtifacts::in_dir(&dir);
    let ck = Checkpoint::load(&art.checkpoint)?;
    println!("checkpoint from epoch {} (L_total {:.4e}), layers {:?}", ck.info.epoch, ck.info.l_total, ck.info.layer_sizes);

    let trials = cli::load_trials(&cfg, &dir)?;
    let split = train::load_split(&art.split)?;
    let held_out = train::evaluate(&ck, &trials, &split.test)?;
    println!("\nheld-out samples");
    for r in &held_out.rows {
        println!("  {:<12} rmse {:>9.4}  R2 {:>7.4}", r.channel, r.rmse, r.r2);
    }
    for (i, t) in trials.iter().enumerate() {
        let all = [Segment { trial: i, start: 0, end: t.len() }];
        let m = train::evaluate(&ck, &trials, &all)?;
        let cells: Vec<String> = m.rows.iter().map(|r| format!("{} {:.3}", r.channel, r.r2)).collect();
        println!("{}: R2 {}", t.meta.get("name").map_or("trial", String::as_str), cells.join(", "));
    }
    Ok(())
}
