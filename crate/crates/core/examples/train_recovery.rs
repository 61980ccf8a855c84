//! Closed-loop identification: simulate data from hidden parameters, train
//! the network and the bounded muscle parameters, then compare.
//!
//! cargo run --release --example train_recovery -- [epochs] [out_dir]
//!
//! Uses configs/recovery.toml. The trials are saved under `<out_dir>/data`
//! so the evaluate_run and render_plots examples can reuse the run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use myopinn::config::RunConfig;
use myopinn::dynamics;
use myopinn::signal;
use myopinn::train;

fn main() -> myopinn::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/recovery.toml");
    let mut cfg = RunConfig::load(&cfg_path)?;
    if let Some(e) = args.next() {
        cfg.train.epochs = e.parse().expect("epochs must be an integer");
    }
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "runs/recovery".into());

    let truth = cfg.ground_truth()?;
    let gen = cfg.generator.as_ref().expect("recovery config has a generator");
    let trials = dynamics::synth_dataset(&gen.spec(), &truth, &cfg.joint_model(), cfg.seed)?;
    for t in &trials {
        signal::save_trial(t, &out.join("data").join(format!("{}.csv", t.meta["name"])))?;
    }
    cfg.save(&out.join("config.toml"))?;

    let every = (cfg.train.epochs / 10).max(1);
    let t0 = Instant::now();
    train::fit(&cfg, &trials, Some(&truth), &out, |r| {
        if r.epoch % every == 0 {
            let p: Vec<String> = r.params.iter().map(|v| format!("{v:.4}")).collect();
            println!(
                "epoch {:>5} {:>6.1}s  L {:.4e}  [{}]",
                r.epoch,
                t0.elapsed().as_secs_f64(),
                r.losses.l_total,
                p.join(", ")
            );
        }
    })?;
    print!("{}", std::fs::read_to_string(out.join("identified.csv")).expect("written by fit"));
    print!("{}", std::fs::read_to_string(out.join("metrics.csv")).expect("written by fit"));
    Ok(())
}
