//! Feed-forward surrogate `(e₁..e_N, t) → (q̂, F̂₁..F̂_N)` and the Adam
//! optimizer.
//!
//! Four hidden blocks (linear, ReLU, dropout) feed a linear regression head.
//! The head output is de-normalized with constants fixed at initialization:
//! `q̂ = q_mean + q_std·y₀` and `F̂ₙ = sₙ·relu(yₙ)`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Array, Tape, Var};
use crate::error::{Error, Result};

/// Number of hidden blocks.
pub const HIDDEN_BLOCKS: usize = 4;
/// Initial bias of the force outputs, keeping the ReLU head alive at start.
pub const FORCE_BIAS_INIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Output de-normalization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub q_mean: f64,
    pub q_std: f64,
    /// Newtons per unit of head output, one per muscle.
    pub force_scale: Vec<f64>,
}

/// Linear layer `y = x·W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array,
    pub b: Array,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// Four hidden layers then the head.
    pub layers: Vec<Dense>,
    pub dropout: f64,
    pub norm: Normalization,
}

impl NetworkParams {
    /// Kaiming-uniform weights, zero hidden biases, positive force biases.
    pub fn init(
        n_muscles: usize,
        hidden: &[usize],
        dropout: f64,
        norm: Normalization,
        seed: u64,
    ) -> Result<Self> {
        if hidden.len() != HIDDEN_BLOCKS || hidden.contains(&0) {
            return Err(Error::config(
                "train.hidden",
                format!("expected {HIDDEN_BLOCKS} positive widths, got {hidden:?}"),
            ));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::config("train.dropout", "must lie in [0, 1)"));
        }
        if norm.force_scale.len() != n_muscles {
            return Err(Error::Shape {
                op: "network init",
                lhs: (norm.force_scale.len(), 1),
                rhs: (n_muscles, 1),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![n_muscles + 1];
        sizes.extend_from_slice(hidden);
        sizes.push(n_muscles + 1);
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, io)| {
                let (fan_in, fan_out) = (io[0], io[1]);
                let bound = (6.0 / fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                let mut b = Array::zeros(1, fan_out);
                if i == HIDDEN_BLOCKS {
                    for c in 1..fan_out {
                        b.set(0, c, FORCE_BIAS_INIT);
                    }
                }
                Dense {
                    w: Array::new(fan_in, fan_out, data),
                    b,
                }
            })
            .collect();
        Ok(NetworkParams {
            layers,
            dropout,
            norm,
        })
    }

    /// Widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.rows()];
        s.extend(self.layers.iter().map(|l| l.w.cols()));
        s
    }

    pub fn n_muscles(&self) -> usize {
        self.layers[0].w.rows() - 1
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn block_names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| {
                let layer = if i == HIDDEN_BLOCKS {
                    "head".to_string()
                } else {
                    format!("fc{}", i + 1)
                };
                [format!("{layer}.weight"), format!("{layer}.bias")]
            })
            .collect()
    }

    pub fn blocks(&self) -> Vec<&Array> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Array> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    /// Registers every block as a leaf of `tape`.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.blocks().into_iter().map(|b| tape.leaf(b.clone())).collect()
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else
/// `1/(1 − rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut ChaCha8Rng) -> Array {
    let keep = 1.0 - rate;
    let data = (0..rows * cols)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    Array::new(rows, cols, data)
}

/// Network outputs for a batch of `B` samples.
#[derive(Clone, Copy)]
pub struct Output<'t> {
    /// `B x 1`, radians.
    pub q: Var<'t>,
    /// `B x N`, newtons.
    pub forces: Var<'t>,
}

/// Batched forward pass; `x` is `B x (N+1)` with rows `(e₁..e_N, t_norm)`.
///
/// `bound` must come from [`NetworkParams::bind`] on the same tape. Train
/// mode draws an inverted-dropout mask per hidden activation from `rng`.
pub fn forward_batch<'t>(
    params: &NetworkParams,
    bound: &[Var<'t>],
    x: Var<'t>,
    mode: Mode,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Output<'t>> {
    let tape = x.tape();
    let n_in = params.n_muscles() + 1;
    if x.shape().1 != n_in {
        return Err(Error::Shape {
            op: "network forward",
            lhs: x.shape(),
            rhs: (x.shape().0, n_in),
        });
    }
    let mut rng = match (mode, rng) {
        (Mode::Train, Some(r)) => Some(r),
        (Mode::Train, None) if params.dropout > 0.0 => {
            return Err(Error::Domain("train mode needs a random generator".into()))
        }
        _ => None,
    };
    let mut h = x;
    for i in 0..HIDDEN_BLOCKS {
        h = (h.matmul(bound[2 * i]) + bound[2 * i + 1]).relu();
        if let Some(r) = rng.as_deref_mut() {
            if params.dropout > 0.0 {
                let (rows, cols) = h.shape();
                h = h * tape.leaf(dropout_mask(rows, cols, params.dropout, r));
            }
        }
    }
    let y = h.matmul(bound[2 * HIDDEN_BLOCKS]) + bound[2 * HIDDEN_BLOCKS + 1];
    let n = params.n_muscles();
    let q = y.slice_cols(0, 1).scale(params.norm.q_std).offset(params.norm.q_mean);
    let scale = tape.leaf(Array::row(params.norm.force_scale.clone()));
    let forces = y.slice_cols(1, n + 1).relu() * scale;
    tape.check()?;
    Ok(Output { q, forces })
}

/// Single-sample forward pass returning plain values.
pub fn forward(
    emg: &[f64],
    t_norm: f64,
    params: &NetworkParams,
    mode: Mode,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Vec<f64>)> {
    if emg.len() != params.n_muscles() {
        return Err(Error::Shape {
            op: "network forward",
            lhs: (1, emg.len() + 1),
            rhs: (1, params.n_muscles() + 1),
        });
    }
    if !t_norm.is_finite() || emg.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("network inputs must be finite".into()));
    }
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let mut row = emg.to_vec();
    row.push(t_norm);
    let x = tape.leaf(Array::row(row));
    let out = forward_batch(params, &bound, x, mode, rng)?;
    Ok((out.q.item(), out.forces.value().into_vec()))
}

/// Eval-mode prediction without a tape. Returns `q̂` and per-muscle `F̂`
/// channels.
pub fn predict(params: &NetworkParams, x: &Array) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = params.n_muscles();
    if x.cols() != n + 1 {
        return Err(Error::Shape {
            op: "network predict",
            lhs: x.shape(),
            rhs: (x.rows(), n + 1),
        });
    }
    let mut h = x.clone();
    for (i, layer) in params.layers.iter().enumerate() {
        let mut z = h.matmul(&layer.w);
        let cols = z.cols();
        for (k, v) in z.as_mut_slice().iter_mut().enumerate() {
            *v += layer.b.as_slice()[k % cols];
            if i < HIDDEN_BLOCKS {
                *v = v.max(0.0);
            }
        }
        h = z;
    }
    let q = (0..h.rows())
        .map(|r| params.norm.q_mean + params.norm.q_std * h.get(r, 0))
        .collect();
    let forces = (0..n)
        .map(|m| {
            (0..h.rows())
                .map(|r| params.norm.force_scale[m] * h.get(r, m + 1).max(0.0))
                .collect()
        })
        .collect();
    Ok((q, forces))
}

/// Adam moments for a list of parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Array>,
    pub v: Vec<Array>,
}

impl AdamState {
    pub fn new(blocks: &[&Array], lr: f64) -> Self {
        AdamState {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: blocks.iter().map(|b| Array::zeros(b.rows(), b.cols())).collect(),
            v: blocks.iter().map(|b| Array::zeros(b.rows(), b.cols())).collect(),
        }
    }
}

/// Moments of parameters whose gradient stays zero (dead ReLU units) decay
/// geometrically into the subnormal range, where arithmetic is very slow.
fn flush(x: f64) -> f64 {
    if x.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}

/// One bias-corrected Adam update of every block.
///
/// Gradients are checked for shape and finiteness before anything is
/// modified; a failure names the offending block.
pub fn adam_step(
    params: &mut [&mut Array],
    grads: &[Array],
    names: &[String],
    state: &mut AdamState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape {
            op: "adam_step",
            lhs: (params.len(), 1),
            rhs: (grads.len(), 1),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        let name = names.get(i).map(String::as_str).unwrap_or("?");
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::Shape {
                op: "adam_step",
                lhs: p.shape(),
                rhs: g.shape(),
            });
        }
        if let Some(k) = g.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient in parameter block `{name}` at element {k}"
            )));
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2) = (state.beta1, state.beta2);
    let step_size = state.lr / (1.0 - b1.powf(t));
    let v_corr = 1.0 / (1.0 - b2.powf(t));
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].as_slice();
        let m = state.m[i].as_mut_slice();
        let v = state.v[i].as_mut_slice();
        for (k, x) in p.as_mut_slice().iter_mut().enumerate() {
            m[k] = flush(b1 * m[k] + (1.0 - b1) * g[k]);
            v[k] = flush(b2 * v[k] + (1.0 - b2) * g[k] * g[k]);
            *x -= step_size * m[k] / ((v[k] * v_corr).sqrt() + state.eps);
        }
    }
    Ok(())
}

const MAGIC: &[u8; 8] = b"MYOPINN\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Human-readable description stored next to the binary weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointInfo {
    pub format_version: u32,
    pub layer_sizes: Vec<usize>,
    pub dropout: f64,
    pub seed: u64,
    pub epoch: usize,
    pub normalization: Normalization,
    pub muscle_names: Vec<String>,
    pub param_names: Vec<String>,
    /// Realized identified parameters at save time.
    pub identified: BTreeMap<String, f64>,
    pub l_total: f64,
}

/// Network weights plus the raw identification coordinates `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub theta: Vec<f64>,
    pub info: CheckpointInfo,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

impl Checkpoint {
    /// Writes `path` (binary) and its `.json` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let blocks = self.params.blocks();
        buf.extend_from_slice(&(blocks.len() as u32 + 1).to_le_bytes());
        let theta = Array::column(self.theta.clone());
        for b in blocks.into_iter().chain(std::iter::once(&theta)) {
            buf.extend_from_slice(&(b.rows() as u32).to_le_bytes());
            buf.extend_from_slice(&(b.cols() as u32).to_le_bytes());
            for v in b.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))?;
        let side = sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.info)?;
        fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side = sidecar_path(path);
        for p in [path, side.as_path()] {
            if !p.exists() {
                return Err(Error::MissingArtifact(p.to_path_buf()));
            }
        }
        let info: CheckpointInfo =
            serde_json::from_str(&fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?)?;
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::schema(path.display().to_string(), reason.to_string());
        let mut cur = bytes.as_slice();
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(bad("truncated checkpoint"));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        if take(8)? != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        let version = u32_at(take(4)?);
        if version != CHECKPOINT_VERSION || info.format_version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported checkpoint version {version}")));
        }
        let n_blocks = u32_at(take(4)?) as usize;
        let mut arrays = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let rows = u32_at(take(4)?) as usize;
            let cols = u32_at(take(4)?) as usize;
            let data = take(rows * cols * 8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            arrays.push(Array::new(rows, cols, data));
        }
        if !cur.is_empty() {
            return Err(bad("trailing bytes after checkpoint blocks"));
        }
        let theta = arrays.pop().ok_or_else(|| bad("missing parameter block"))?;
        if arrays.len() != 2 * (HIDDEN_BLOCKS + 1) {
            return Err(bad("unexpected number of layer blocks"));
        }
        let mut it = arrays.into_iter();
        let mut layers = Vec::new();
        while let (Some(w), Some(b)) = (it.next(), it.next()) {
            layers.push(Dense { w, b });
        }
        let params = NetworkParams {
            layers,
            dropout: info.dropout,
            norm: info.normalization.clone(),
        };
        if params.sizes() != info.layer_sizes {
            return Err(Error::Shape {
                op: "checkpoint load",
                lhs: (params.sizes().len(), 0),
                rhs: (info.layer_sizes.len(), 0),
            });
        }
        Ok(Checkpoint {
            params,
            theta: theta.into_vec(),
            info,
        })
    }
}
