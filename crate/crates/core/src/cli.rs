//! Command-line front end: `synth`, `preprocess`, `train`, `eval`, `plot`.
//!
//! A run directory (`--out`, default the config's `out_dir`) collects
//! everything: `data/*.csv` trials, `ground_truth.toml` for synthetic data,
//! the effective `config.toml`, and the training artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::dynamics::{self, GroundTruth, Trial};
use crate::error::{Error, Result};
use crate::network::Checkpoint;
use crate::signal;
use crate::train::{self, Segment, Split};

#[derive(Debug, Parser)]
#[command(name = "myopinn", version, about = "Physics-informed muscle force estimation from sEMG")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run config. Defaults to `<out>/config.toml` when present, else
    /// the built-in two-muscle wrist setup.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory; overrides the config `out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a synthetic dataset from the config generator block.
    Synth(Common),
    /// Turn raw sEMG recordings into trial CSVs under `<out>/data`.
    Preprocess {
        #[command(flatten)]
        common: Common,
        /// Raw CSV files with `t`, `q` and one column per electrode.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Train the network and identify muscle parameters.
    Train {
        #[command(flatten)]
        common: Common,
        /// Loss weights `w_q,w_fd,w_F`.
        #[arg(long, value_parser = parse_weights)]
        weights: Option<[f64; 3]>,
    },
    /// Force and angle metrics of a checkpoint on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/model.bin`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Plot data and SVG charts for a finished run.
    Plot(Common),
}

fn parse_weights(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected 3 comma-separated weights, got {}", v.len()))
}

/// Config with command-line overrides applied, plus the run directory.
fn resolve(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let saved = common.out.as_ref().map(|o| o.join("config.toml"));
            match saved.filter(|p| p.exists()) {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::wrist_default(),
            }
        }
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    let out = cfg.out_dir.clone();
    Ok((cfg, out))
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn trial_name(t: &Trial, i: usize) -> String {
    t.meta.get("name").cloned().unwrap_or_else(|| format!("trial{i}"))
}

/// Trials named in the config, else every CSV under `<out>/data`, sorted.
pub fn load_trials(cfg: &RunConfig, out: &Path) -> Result<Vec<Trial>> {
    let paths = if cfg.train.trials.is_empty() {
        let dir = out.join("data");
        if !dir.is_dir() {
            return Err(Error::MissingArtifact(dir));
        }
        let mut v: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        v.sort();
        if v.is_empty() {
            return Err(Error::MissingArtifact(dir.join("*.csv")));
        }
        v
    } else {
        cfg.train.trials.clone()
    };
    paths
        .iter()
        .map(|p| {
            if p.exists() {
                signal::load_trial(p)?.with_muscle_order(&cfg.muscle_names())
            } else {
                Err(Error::MissingArtifact(p.clone()))
            }
        })
        .collect()
}

fn load_truth(out: &Path) -> Result<Option<GroundTruth>> {
    let p = out.join("ground_truth.toml");
    if !p.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    toml::from_str(&text)
        .map(Some)
        .map_err(|e| Error::schema(p.display().to_string(), e.to_string()))
}

pub fn run(cli: Cli, w: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Synth(c) => synth(&c, w),
        Command::Preprocess { common, inputs } => preprocess(&common, &inputs, w),
        Command::Train { common, weights } => train_cmd(&common, weights, w),
        Command::Eval { common, checkpoint } => eval(&common, checkpoint, w),
        Command::Plot(c) => plot(&c, w),
    }
}

fn say(w: &mut dyn Write, s: impl AsRef<str>) {
    let _ = writeln!(w, "{}", s.as_ref());
}

fn synth(c: &Common, w: &mut dyn Write) -> Result<()> {
    let (cfg, out) = resolve(c)?;
    let gen = cfg
        .generator
        .as_ref()
        .ok_or_else(|| Error::config("generator", "synth needs a generator block"))?;
    let truth = cfg.ground_truth()?;
    let trials = dynamics::synth_dataset(&gen.spec(), &truth, &cfg.joint_model(), cfg.seed)?;
    let data = out.join("data");
    mkdir(&data)?;
    let mut samples = 0;
    let mut torque = [f64::INFINITY, f64::NEG_INFINITY];
    for (i, t) in trials.iter().enumerate() {
        signal::save_trial(t, &data.join(format!("{}.csv", trial_name(t, i))))?;
        samples += t.len();
        for tau in dynamics::trial_torque(t, &truth.muscles).unwrap_or_default() {
            torque = [torque[0].min(tau), torque[1].max(tau)];
        }
    }
    let p = out.join("ground_truth.toml");
    let text = toml::to_string(&truth).map_err(|e| Error::Numerical(e.to_string()))?;
    fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    cfg.save(&out.join("config.toml"))?;
    say(w, format!("trials: {}", trials.len()));
    say(w, format!("samples: {samples}"));
    say(w, format!("torque range: [{:.4}, {:.4}] N·m", torque[0], torque[1]));
    say(w, format!("written to {}", data.display()));
    Ok(())
}

fn preprocess(c: &Common, inputs: &[PathBuf], w: &mut dyn Write) -> Result<()> {
    let (cfg, out) = resolve(c)?;
    let env = &cfg.preprocess.envelope;
    let data = out.join("data");
    mkdir(&data)?;
    for path in inputs {
        let raw = signal::load_raw(path)?;
        let q = raw
            .q
            .as_ref()
            .ok_or_else(|| Error::schema(path.display().to_string(), "missing column `q`"))?;
        let q = signal::resample(q, raw.fs, env.output_rate)?;
        let mut emg = Vec::with_capacity(raw.channels.len());
        let mut names = Vec::with_capacity(raw.channels.len());
        for (name, x) in &raw.channels {
            let name = name.strip_prefix("emg_").unwrap_or(name).to_string();
            let mvc = cfg.preprocess.mvc.get(&name).copied().unwrap_or(1.0);
            emg.push(signal::preprocess_emg(x, raw.fs, mvc, env)?);
            names.push(name);
        }
        let dt = 1.0 / env.output_rate;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "trial".into());
        let trial = Trial {
            dt,
            time: (0..q.len()).map(|k| k as f64 * dt).collect(),
            muscle_names: names,
            emg,
            q,
            forces: None,
            meta: BTreeMap::from([("name".to_string(), stem.clone())]),
        };
        trial.validate()?;
        let dest = data.join(format!("{stem}.csv"));
        signal::save_trial(&trial, &dest)?;
        say(w, format!("{} -> {} ({} samples)", path.display(), dest.display(), trial.len()));
    }
    Ok(())
}

fn train_cmd(c: &Common, weights: Option<[f64; 3]>, w: &mut dyn Write) -> Result<()> {
    let (mut cfg, out) = resolve(c)?;
    if let Some(ws) = weights {
        cfg.train.weights = ws;
    }
    cfg.validate()?;
    let trials = load_trials(&cfg, &out)?;
    let truth = load_truth(&out)?;
    mkdir(&out)?;
    cfg.save(&out.join("config.toml"))?;
    let every = (cfg.train.epochs / 10).max(1);
    let art = train::fit(&cfg, &trials, truth.as_ref(), &out, |r| {
        if r.epoch % every == 0 {
            say(
                w,
                format!(
                    "epoch {:>5}  l_total {:.6e}  (l_q {:.3e}, l_fd {:.3e}, l_f {:.3e})",
                    r.epoch, r.losses.l_total, r.losses.l_q, r.losses.l_fd, r.losses.l_f
                ),
            );
        }
    })?;
    let ck = Checkpoint::load(&art.checkpoint)?;
    say(w, format!("best epoch {} with l_total {:.6e}", ck.info.epoch, ck.info.l_total));
    for (name, v) in &ck.info.identified {
        say(w, format!("  {name} = {v:.6}"));
    }
    Ok(())
}

fn eval(c: &Common, checkpoint: Option<PathBuf>, w: &mut dyn Write) -> Result<()> {
    let (cfg, out) = resolve(c)?;
    let ck_path = checkpoint.unwrap_or_else(|| train::RunArtifacts::in_dir(&out).checkpoint);
    let ck = Checkpoint::load(&ck_path)?;
    let sizes = &ck.info.layer_sizes;
    if ck.info.muscle_names != cfg.muscle_names() || sizes[1..sizes.len() - 1] != cfg.train.hidden[..] {
        return Err(Error::config(
            "train.hidden",
            format!(
                "checkpoint layers {sizes:?} for muscles {:?} do not match the config",
                ck.info.muscle_names
            ),
        ));
    }
    let trials = load_trials(&cfg, &out)?;
    let split_path = train::RunArtifacts::in_dir(&out).split;
    let test = if split_path.exists() {
        train::load_split(&split_path)?.test
    } else {
        all_samples(&trials).test
    };
    let metrics = train::evaluate(&ck, &trials, &test)?;
    mkdir(&out)?;
    metrics.save(&train::RunArtifacts::in_dir(&out).metrics)?;
    say(w, "channel            rmse          r2");
    for r in &metrics.rows {
        say(w, format!("{:<14} {:>12.5} {:>11.5}", r.channel, r.rmse, r.r2));
    }
    let missing: Vec<&str> = metrics
        .rows
        .iter()
        .filter(|r| !(r.rmse.is_finite() && r.r2.is_finite()))
        .map(|r| r.channel.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Numerical(format!(
            "metrics not computed for {missing:?} (no reference signal)"
        )));
    }
    Ok(())
}

fn all_samples(trials: &[Trial]) -> Split {
    Split {
        train: Vec::new(),
        test: trials
            .iter()
            .enumerate()
            .map(|(i, t)| Segment {
                trial: i,
                start: 0,
                end: t.len(),
            })
            .collect(),
    }
}

fn plot(c: &Common, w: &mut dyn Write) -> Result<()> {
    let (cfg, out) = resolve(c)?;
    let art = train::RunArtifacts::in_dir(&out);
    for p in [&art.training_log, &art.identified, &art.checkpoint, &art.split] {
        if !p.exists() {
            return Err(Error::MissingArtifact(p.clone()));
        }
    }
    let trials = load_trials(&cfg, &out)?;
    let files = crate::plot::render_run(&out, &trials)?;
    say(
        w,
        format!(
            "{} CSV and {} SVG files in {}",
            files.csv.len(),
            files.svg.len(),
            out.join("plots").display()
        ),
    );
    Ok(())
}
