//! Training loop, evaluation and run artifacts.
//!
//! Each epoch runs two passes:
//!
//! 1. the data path: per-sample (batch size 1 by default) Adam steps of the
//!    network weights on `L_q`, with dropout active;
//! 2. the physics path: one eval-mode forward pass over every training
//!    segment, evaluation of `L_q`, `L_fd` and `L_F`, and one Adam step on
//!    `w_fd·L_fd + w_F·L_F` for the network weights and the identified
//!    parameters.
//!
//! The physics pass runs without dropout: finite-difference accelerations of
//! a dropout-perturbed angle series are dominated by the mask noise.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Array, Tape};
use crate::config::RunConfig;
use crate::dynamics::{GroundTruth, Trial};
use crate::error::{Error, Result};
use crate::loss::{self, LossBreakdown, LossWeights, PhysicsInputs, TrainableParams};
use crate::network::{
    self, adam_step, AdamState, Checkpoint, CheckpointInfo, Mode, NetworkParams, Normalization,
    CHECKPOINT_VERSION,
};

/// Mixed into the run seed so the split and the weight init draw from
/// different streams.
const SPLIT_SALT: u64 = 0x5eed_5917;
const DROPOUT_SALT: u64 = 0xd40f_0017;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Adam step size for the network weights.
    pub lr: f64,
    /// Adam step size for the identified-parameter coordinates.
    pub param_lr: f64,
    pub batch_size: usize,
    pub dropout: f64,
    /// Weights of `(L_q, L_fd, L_F)`.
    pub weights: LossWeights,
    /// Fraction of segments (or samples) used for training.
    pub split: f64,
    /// Samples per contiguous segment when physics terms are on.
    pub segment_len: usize,
    pub hidden: Vec<usize>,
    /// Trial CSV files; empty means `<out_dir>/data/*.csv`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trials: Vec<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            lr: 1e-3,
            param_lr: 1e-2,
            batch_size: 1,
            dropout: 0.3,
            weights: [1.0, 1.0, 1.0],
            split: 0.7,
            segment_len: 250,
            hidden: vec![128; network::HIDDEN_BLOCKS],
            trials: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("train.epochs", "must be positive"));
        }
        for (field, v) in [("train.lr", self.lr), ("train.param_lr", self.param_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("train.dropout", "must lie in [0, 1)"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::config("train.split", "must lie in (0, 1)"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::config("train.weights", "must be nonnegative"));
        }
        if self.weights.iter().all(|w| *w == 0.0) {
            return Err(Error::config("train.weights", "at least one weight must be positive"));
        }
        if self.segment_len < 4 {
            return Err(Error::config("train.segment_len", "must be at least 4"));
        }
        if self.hidden.len() != network::HIDDEN_BLOCKS || self.hidden.contains(&0) {
            return Err(Error::config(
                "train.hidden",
                format!("expected {} positive widths", network::HIDDEN_BLOCKS),
            ));
        }
        Ok(())
    }

    pub fn physics_on(&self) -> bool {
        self.weights[1] > 0.0 || self.weights[2] > 0.0
    }
}

/// Contiguous sample range `start..end` of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub trial: usize,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub train: Vec<Segment>,
    pub test: Vec<Segment>,
}

/// Random train/test assignment. With `blocks` the unit is a contiguous
/// segment of about `segment_len` samples (a short tail is merged into the
/// previous block); otherwise single samples.
pub fn split_trials(
    trials: &[Trial],
    fraction: f64,
    segment_len: usize,
    blocks: bool,
    seed: u64,
) -> Result<Split> {
    let mut units = Vec::new();
    for (i, tr) in trials.iter().enumerate() {
        let n = tr.len();
        let len = if blocks { segment_len } else { 1 };
        let mut start = 0;
        while start < n {
            let mut end = (start + len).min(n);
            if blocks && n - end < 3 {
                end = n;
            }
            units.push(Segment { trial: i, start, end });
            start = end;
        }
        if blocks && units.last().is_some_and(|s| s.len() < 3) {
            return Err(Error::Domain(format!("trial {i} is too short to segment")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT);
    units.shuffle(&mut rng);
    let n_train = ((units.len() as f64) * fraction).round() as usize;
    if n_train == 0 || n_train == units.len() {
        return Err(Error::Domain(format!(
            "split of {} units at fraction {fraction} leaves one side empty",
            units.len()
        )));
    }
    let mut train = units[..n_train].to_vec();
    let mut test = units[n_train..].to_vec();
    let key = |s: &Segment| (s.trial, s.start);
    train.sort_by_key(key);
    test.sort_by_key(key);
    Ok(Split { train, test })
}

pub fn save_split(split: &Split, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(e, path))?;
    w.write_record(["set", "trial", "start", "end"])?;
    for (set, segs) in [("train", &split.train), ("test", &split.test)] {
        for s in segs {
            w.write_record([
                set.to_string(),
                s.trial.to_string(),
                s.start.to_string(),
                s.end.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_split(path: &Path) -> Result<Split> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(e, path))?;
    let mut split = Split::default();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<usize> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::schema(path.display().to_string(), "bad split row"))
        };
        let seg = Segment {
            trial: num(1)?,
            start: num(2)?,
            end: num(3)?,
        };
        match rec.get(0) {
            Some("train") => split.train.push(seg),
            Some("test") => split.test.push(seg),
            _ => return Err(Error::schema(path.display().to_string(), "bad split set")),
        }
    }
    Ok(split)
}

fn csv_io(e: csv::Error, path: &Path) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::schema(path.display().to_string(), format!("{other:?}")),
    }
}

/// Stacked network inputs and targets for a list of segments.
struct Stacked {
    /// `S x (N+1)` rows `(e₁..e_N, t_norm)`.
    x: Array,
    q: Vec<f64>,
    /// Per muscle, when the trials carry forces.
    forces: Option<Vec<Vec<f64>>>,
    /// Row offset of each segment in `x`.
    offsets: Vec<usize>,
    segments: Vec<Segment>,
}

fn stack(trials: &[Trial], segments: &[Segment]) -> Stacked {
    let n_m = trials[0].n_muscles();
    let total: usize = segments.iter().map(Segment::len).sum();
    let mut x = Vec::with_capacity(total * (n_m + 1));
    let mut q = Vec::with_capacity(total);
    let has_forces = trials.iter().all(|t| t.forces.is_some());
    let mut forces = vec![Vec::with_capacity(total); n_m];
    let mut offsets = Vec::with_capacity(segments.len());
    for s in segments {
        offsets.push(q.len());
        let tr = &trials[s.trial];
        let (t0, span) = (tr.time[0], tr.duration().max(f64::MIN_POSITIVE));
        for k in s.start..s.end {
            x.extend(tr.emg.iter().map(|c| c[k]));
            x.push((tr.time[k] - t0) / span);
            q.push(tr.q[k]);
            if let (true, Some(f)) = (has_forces, &tr.forces) {
                for (n, ch) in f.iter().enumerate() {
                    forces[n].push(ch[k]);
                }
            }
        }
    }
    Stacked {
        x: Array::new(total, n_m + 1, x),
        q,
        forces: has_forces.then_some(forces),
        offsets,
        segments: segments.to_vec(),
    }
}

impl Stacked {
    fn rows(&self, idx: &[usize]) -> (Array, Vec<f64>) {
        let cols = self.x.cols();
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            data.extend_from_slice(&self.x.as_slice()[i * cols..(i + 1) * cols]);
        }
        (
            Array::new(idx.len(), cols, data),
            idx.iter().map(|&i| self.q[i]).collect(),
        )
    }

    fn emg_block(&self, seg: usize) -> Array {
        let cols = self.x.cols();
        let (a, b) = (self.offsets[seg], self.offsets[seg] + self.segments[seg].len());
        let n_m = cols - 1;
        let mut data = Vec::with_capacity((b - a) * n_m);
        for r in a..b {
            data.extend_from_slice(&self.x.as_slice()[r * cols..r * cols + n_m]);
        }
        Array::new(b - a, n_m, data)
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub losses: LossBreakdown,
    /// Realized identified parameters, in [`TrainableParams::names`] order.
    pub params: Vec<f64>,
}

/// Files written by a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub checkpoint: PathBuf,
    pub training_log: PathBuf,
    pub metrics: PathBuf,
    pub identified: PathBuf,
    pub split: PathBuf,
}

impl RunArtifacts {
    pub fn in_dir(dir: &Path) -> Self {
        RunArtifacts {
            checkpoint: dir.join("model.bin"),
            training_log: dir.join("training_log.csv"),
            metrics: dir.join("metrics.csv"),
            identified: dir.join("identified.csv"),
            split: dir.join("split.csv"),
        }
    }
}

/// Physics-pass evaluation of one state; gradients when requested.
struct PhysicsEval {
    losses: LossBreakdown,
    grads: Option<(Vec<Array>, Array)>,
}

struct Trainer<'a> {
    cfg: &'a RunConfig,
    joint: crate::dynamics::JointModel,
    dts: Vec<f64>,
    train: Stacked,
    emg_blocks: Vec<Array>,
}

impl Trainer<'_> {
    fn physics_pass(
        &self,
        net: &NetworkParams,
        theta: &TrainableParams,
        with_grads: bool,
    ) -> Result<PhysicsEval> {
        let w = self.cfg.train.weights;
        if !self.cfg.train.physics_on() {
            let (q_hat, _) = network::predict(net, &self.train.x)?;
            let l_q = mean_sq_diff(&q_hat, &self.train.q);
            return Ok(PhysicsEval {
                losses: LossBreakdown::from_components(w[0] * l_q, 0.0, 0.0),
                grads: None,
            });
        }
        let tape = Tape::new();
        let bound = net.bind(&tape);
        let th = tape.leaf(theta.theta.clone());
        let realized = theta.realize_var(th);
        let x = tape.leaf(self.train.x.clone());
        let out = network::forward_batch(net, &bound, x, Mode::Eval, None)?;
        let l_q = loss::loss_q(out.q, &self.train.q)?;
        let total = self.train.q.len() as f64;
        let mut l_fd = tape.scalar(0.0);
        let mut l_f = tape.scalar(0.0);
        for (i, seg) in self.train.segments.iter().enumerate() {
            let (a, b) = (self.train.offsets[i], self.train.offsets[i] + seg.len());
            let inp = PhysicsInputs {
                emg: &self.emg_blocks[i],
                muscles: &self.cfg.muscles,
                joint: &self.joint,
                dt: self.dts[seg.trial],
            };
            let (fd, f) = loss::physics_losses(
                out.q.slice_rows(a, b),
                out.forces.slice_rows(a, b),
                &realized,
                &inp,
            )?;
            let share = seg.len() as f64 / total;
            l_fd = l_fd + fd * share;
            l_f = l_f + f * share;
        }
        let (_, losses) = loss::loss_total(l_q, l_fd, l_f, w);
        let grads = if with_grads {
            let objective = l_fd * w[1] + l_f * w[2];
            let g = tape.backward(objective)?;
            Some((bound.iter().map(|v| g.wrt(v)).collect(), g.wrt(&th)))
        } else {
            tape.check()?;
            None
        };
        Ok(PhysicsEval { losses, grads })
    }

    /// One pass of mini-batch Adam steps on `w_q·L_q` with dropout.
    fn data_pass(
        &self,
        net: &mut NetworkParams,
        state: &mut AdamState,
        names: &[String],
        order: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let w_q = self.cfg.train.weights[0];
        for batch in order.chunks(self.cfg.train.batch_size) {
            let (x, q) = self.train.rows(batch);
            let grads = {
                let tape = Tape::new();
                let bound = net.bind(&tape);
                let x = tape.leaf(x);
                let out = network::forward_batch(net, &bound, x, Mode::Train, Some(rng))?;
                let l = loss::loss_q(out.q, &q)? * w_q;
                let g = tape.backward(l)?;
                bound.iter().map(|v| g.wrt(v)).collect::<Vec<_>>()
            };
            adam_step(&mut net.blocks_mut(), &grads, names, state)?;
        }
        Ok(())
    }
}

fn mean_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

fn check_trials(trials: &[Trial], cfg: &RunConfig) -> Result<()> {
    if trials.is_empty() {
        return Err(Error::Domain("no trials to train on".into()));
    }
    let names = cfg.muscle_names();
    for tr in trials {
        tr.validate()?;
        if tr.muscle_names != names {
            return Err(Error::schema(
                tr.meta.get("name").cloned().unwrap_or_else(|| "trial".into()),
                format!(
                    "muscle columns {:?} do not match the configured muscles {names:?}",
                    tr.muscle_names
                ),
            ));
        }
    }
    Ok(())
}

fn log_header(names: &[String]) -> String {
    let mut h = vec!["epoch", "l_q", "l_fd", "l_f", "l_total"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    h.extend(names.iter().cloned());
    h.join(",")
}

fn log_row(r: &EpochRecord) -> String {
    let l = &r.losses;
    let mut cells = vec![
        r.epoch.to_string(),
        l.l_q.to_string(),
        l.l_fd.to_string(),
        l.l_f.to_string(),
        l.l_total.to_string(),
    ];
    cells.extend(r.params.iter().map(|v| v.to_string()));
    cells.join(",")
}

struct Best {
    net: NetworkParams,
    theta: TrainableParams,
    epoch: usize,
    losses: LossBreakdown,
}

/// Trains on `trials`, writing every artifact into `out_dir`.
///
/// `on_epoch` sees each log row as it is produced (row 0 is the untrained
/// state). With `epochs == 0` the initial state is saved as is.
pub fn fit(
    cfg: &RunConfig,
    trials: &[Trial],
    truth: Option<&GroundTruth>,
    out_dir: &Path,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<RunArtifacts> {
    check_trials(trials, cfg)?;
    let tc = &cfg.train;
    let physics = tc.physics_on();
    let split = split_trials(trials, tc.split, tc.segment_len, physics, cfg.seed)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let art = RunArtifacts::in_dir(out_dir);
    save_split(&split, &art.split)?;

    let train = stack(trials, &split.train);
    let emg_blocks = (0..train.segments.len()).map(|i| train.emg_block(i)).collect();
    let trainer = Trainer {
        cfg,
        joint: cfg.joint_model(),
        dts: trials.iter().map(|t| t.dt).collect(),
        train,
        emg_blocks,
    };

    let q_mean = trainer.train.q.iter().sum::<f64>() / trainer.train.q.len() as f64;
    let q_var = mean_sq_diff(&trainer.train.q, &vec![q_mean; trainer.train.q.len()]);
    let norm = Normalization {
        q_mean,
        q_std: q_var.sqrt().max(1e-6),
        force_scale: cfg.muscles.iter().map(|m| m.f0m).collect(),
    };
    let mut net = NetworkParams::init(cfg.muscles.len(), &tc.hidden, tc.dropout, norm, cfg.seed)?;
    let mut theta = TrainableParams::new(&cfg.muscles, &cfg.identify);
    let names = net.block_names();
    let mut data_state = AdamState::new(&net.blocks(), tc.lr);
    let mut phys_state = AdamState::new(&net.blocks(), tc.lr);
    let mut theta_state = AdamState::new(&[&theta.theta], tc.param_lr);
    let theta_names = vec!["theta".to_string()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DROPOUT_SALT);
    let mut order: Vec<usize> = (0..trainer.train.q.len()).collect();

    let mut log = fs::File::create(&art.training_log).map_err(|e| Error::io(&art.training_log, e))?;
    writeln!(log, "{}", log_header(&theta.names()))
        .map_err(|e| Error::io(&art.training_log, e))?;

    let mut best: Option<Best> = None;
    let mut failure = None;
    for epoch in 0..=tc.epochs {
        if epoch > 0 && tc.weights[0] > 0.0 {
            order.shuffle(&mut rng);
            if let Err(e) = trainer.data_pass(&mut net, &mut data_state, &names, &order, &mut rng) {
                failure = Some(e);
                break;
            }
        }
        let eval = match trainer.physics_pass(&net, &theta, epoch > 0 && physics) {
            Ok(e) => e,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        let l = eval.losses;
        if !l.l_total.is_finite() {
            failure = Some(Error::Numerical(format!("non-finite loss at epoch {epoch}: {l:?}")));
            break;
        }
        let record = EpochRecord {
            epoch,
            losses: l,
            params: theta.values(),
        };
        writeln!(log, "{}", log_row(&record)).map_err(|e| Error::io(&art.training_log, e))?;
        on_epoch(&record);
        if best.as_ref().is_none_or(|b| l.l_total < b.losses.l_total) {
            best = Some(Best {
                net: net.clone(),
                theta: theta.clone(),
                epoch,
                losses: l,
            });
        }
        if let Some((g_net, g_theta)) = eval.grads {
            let stepped = adam_step(&mut net.blocks_mut(), &g_net, &names, &mut phys_state)
                .and_then(|_| {
                    adam_step(&mut [&mut theta.theta], &[g_theta], &theta_names, &mut theta_state)
                });
            if let Err(e) = stepped {
                failure = Some(e);
                break;
            }
        }
    }
    if let Some(b) = &best {
        write_artifacts(cfg, trials, &split, truth, b, &art)?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(art),
    }
}

fn write_artifacts(
    cfg: &RunConfig,
    trials: &[Trial],
    split: &Split,
    truth: Option<&GroundTruth>,
    best: &Best,
    art: &RunArtifacts,
) -> Result<()> {
    let values = best.theta.values();
    let ck = Checkpoint {
        params: best.net.clone(),
        theta: best.theta.theta.as_slice().to_vec(),
        info: CheckpointInfo {
            format_version: CHECKPOINT_VERSION,
            layer_sizes: best.net.sizes(),
            dropout: best.net.dropout,
            seed: cfg.seed,
            epoch: best.epoch,
            normalization: best.net.norm.clone(),
            muscle_names: cfg.muscle_names(),
            param_names: best.theta.names(),
            identified: best.theta.names().into_iter().zip(values).collect(),
            l_total: best.losses.l_total,
        },
    };
    ck.save(&art.checkpoint)?;
    write_identified(cfg, &best.theta, truth, &art.identified)?;
    let metrics = evaluate(&ck, trials, &split.test)?;
    metrics.save(&art.metrics)
}

/// Estimates against bounds, initial guesses and (when known) the truth.
pub fn write_identified(
    cfg: &RunConfig,
    theta: &TrainableParams,
    truth: Option<&GroundTruth>,
    path: &Path,
) -> Result<()> {
    let initial = TrainableParams::new(&cfg.muscles, &cfg.identify).values();
    let truth_values: Option<Vec<f64>> = truth.map(|t| {
        let mut v: Vec<f64> = t.muscles.iter().flat_map(|m| [m.f0m, m.l0m]).collect();
        v.push(t.a_shape);
        v
    });
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(e, path))?;
    w.write_record([
        "param", "initial", "lower", "upper", "estimate", "truth", "abs_error", "rel_error",
    ])?;
    for (i, (b, est)) in theta.bounds.iter().zip(theta.values()).enumerate() {
        let (t, abs, rel) = match &truth_values {
            Some(tv) => {
                let t = tv[i];
                let abs = (est - t).abs();
                (t.to_string(), abs.to_string(), (abs / t.abs()).to_string())
            }
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            b.name.clone(),
            initial[i].to_string(),
            b.lo.to_string(),
            b.hi.to_string(),
            est.to_string(),
            t,
            abs,
            rel,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// RMSE and R² of one output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub channel: String,
    pub rmse: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub rows: Vec<ChannelMetrics>,
}

impl Metrics {
    pub fn get(&self, channel: &str) -> Option<&ChannelMetrics> {
        self.rows.iter().find(|r| r.channel == channel)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(e, path))?;
        w.write_record(["channel", "rmse", "r2"])?;
        for r in &self.rows {
            w.write_record([r.channel.clone(), r.rmse.to_string(), r.r2.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Force and angle accuracy of a checkpoint on `segments` of `trials`.
///
/// One row per muscle (`force_<name>`, NaN when the trials carry no forces)
/// and one for `q`.
pub fn evaluate(ck: &Checkpoint, trials: &[Trial], segments: &[Segment]) -> Result<Metrics> {
    if segments.is_empty() {
        return Err(Error::Domain("no samples to evaluate".into()));
    }
    let n_m = ck.params.n_muscles();
    for tr in trials {
        if tr.n_muscles() != n_m {
            return Err(Error::Shape {
                op: "evaluate",
                lhs: (tr.n_muscles() + 1, 1),
                rhs: (n_m + 1, 1),
            });
        }
    }
    let data = stack(trials, segments);
    let (q_hat, f_hat) = network::predict(&ck.params, &data.x)?;
    let mut rows = Vec::with_capacity(n_m + 1);
    for (n, name) in trials[0].muscle_names.iter().enumerate() {
        let (rmse, r2) = match &data.forces {
            Some(f) => (loss::rmse(&f[n], &f_hat[n])?, loss::r_squared(&f[n], &f_hat[n])?),
            None => (f64::NAN, f64::NAN),
        };
        rows.push(ChannelMetrics {
            channel: format!("force_{name}"),
            rmse,
            r2,
        });
    }
    rows.push(ChannelMetrics {
        channel: "q".into(),
        rmse: loss::rmse(&data.q, &q_hat)?,
        r2: loss::r_squared(&data.q, &q_hat)?,
    });
    Ok(Metrics { rows })
}

/// Reads a training log back as records.
pub fn read_training_log(path: &Path) -> Result<(Vec<String>, Vec<EpochRecord>)> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(e, path))?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.len() < 5 || header[..5] != ["epoch", "l_q", "l_fd", "l_f", "l_total"] {
        return Err(Error::schema(path.display().to_string(), "unexpected log header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::schema(path.display().to_string(), "non-numeric log cell"))?;
        out.push(EpochRecord {
            epoch: v[0] as usize,
            losses: LossBreakdown {
                l_q: v[1],
                l_fd: v[2],
                l_f: v[3],
                l_total: v[4],
            },
            params: v[5..].to_vec(),
        });
    }
    Ok((header[5..].to_vec(), out))
}

/// Realized values keyed by parameter name.
pub fn identified_map(theta: &TrainableParams) -> BTreeMap<String, f64> {
    theta.names().into_iter().zip(theta.values()).collect()
}
