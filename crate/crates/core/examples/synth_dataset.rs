//! Generates the synthetic dataset of a config and writes the trial CSVs.
//!
//! cargo run --release --example synth_dataset -- [config.toml] [out_dir]

use std::path::PathBuf;

use myopinn::config::RunConfig;
use myopinn::dynamics;
use myopinn::signal;

fn main() -> myopinn::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(p) => RunConfig::load(&PathBuf::from(p))?,
        None => RunConfig::wrist_default(),
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "runs/synth".into());
    let gen = cfg.generator.as_ref().expect("config needs a generator block");
    let truth = cfg.ground_truth()?;
    let trials = dynamics::synth_dataset(&gen.spec(), &truth, &cfg.joint_model(), cfg.seed)?;
    for t in &trials {
        let name = &t.meta["name"];
        let path = out.join(format!("{name}.csv"));
        signal::save_trial(t, &path)?;
        let (lo, hi) = t.q.iter().fold((f64::MAX, f64::MIN), |(a, b), q| (a.min(*q), b.max(*q)));
        println!("{name}: {} samples, {} waveforms, q in [{lo:.3}, {hi:.3}] -> {}", t.len(), t.meta["waveforms"], path.display());
    }
    for m in &truth.muscles {
        println!("truth {}: F0 {} N, l0m {} m", m.name, m.f0m, m.l0m);
    }
    println!("truth A: {}", truth.a_shape);
    Ok(())
}
