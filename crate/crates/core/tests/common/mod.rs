#![allow(dead_code)]

pub mod checks;
pub mod suite;

use myopinn::autodiff::{Array, Tape, Var};
use myopinn::config::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Five-point central difference of a scalar function along each input
/// coordinate. Fourth order, so truncation stays far below the gradient
/// tolerance for smooth functions.
pub fn fd_gradient(f: &dyn Fn(&Array) -> f64, x: &Array) -> Array {
    let mut g = Array::zeros(x.rows(), x.cols());
    for k in 0..x.len() {
        let h = 1e-5 * x.as_slice()[k].abs().max(1.0);
        let at = |d: f64| {
            let mut y = x.clone();
            y.as_mut_slice()[k] += d;
            f(&y)
        };
        let d = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
        g.as_mut_slice()[k] = d;
    }
    g
}

/// Normwise relative error `‖a − b‖∞ / ‖b‖∞`, with a floor on the
/// denominator for vanishing gradients.
pub fn rel_err(a: &Array, b: &Array) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let diff = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / b.max_abs().max(1e-10)
}

/// Gradient of `build(leaf)` by the tape, and by differences of the same
/// expression evaluated on fresh tapes.
pub fn check_gradient(build: &dyn for<'t> Fn(Var<'t>) -> Var<'t>, x: &Array) -> f64 {
    let tape = Tape::new();
    let leaf = tape.leaf(x.clone());
    let out = build(leaf);
    let g = tape.backward(out).expect("backward").wrt(&leaf);
    let f = |y: &Array| {
        let t = Tape::new();
        build(t.leaf(y.clone())).item()
    };
    rel_err(&g, &fd_gradient(&f, x))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform entries in `[lo, hi)`, kept at least `gap` away from `avoid`
/// (a kink location).
pub fn random_array(r: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64, avoid: Option<(f64, f64)>) -> Array {
    let data = (0..rows * cols)
        .map(|_| loop {
            let v = r.random_range(lo..hi);
            match avoid {
                Some((k, gap)) if (v - k).abs() < gap => continue,
                _ => break v,
            }
        })
        .collect();
    Array::new(rows, cols, data)
}

/// Default wrist setup shrunk for fast tests: short trials, a small
/// network and few epochs.
pub fn small_config(duration: f64, epochs: usize) -> RunConfig {
    let mut cfg = RunConfig::wrist_default();
    let g = cfg.generator.as_mut().unwrap();
    for t in &mut g.trials {
        t.duration = duration;
    }
    cfg.train.epochs = epochs;
    cfg.train.hidden = vec![8; 4];
    cfg.train.segment_len = 100;
    cfg
}

/// Synthetic trials for `cfg` with its own seed.
pub fn dataset(cfg: &RunConfig) -> Vec<myopinn::dynamics::Trial> {
    let spec = cfg.generator.as_ref().unwrap().spec();
    myopinn::dynamics::synth_dataset(&spec, &cfg.ground_truth().unwrap(), &cfg.joint_model(), cfg.seed).unwrap()
}

/// Runs the command line in process, returning the result and stdout.
pub fn cli(args: &[&str]) -> (myopinn::Result<()>, String) {
    use clap::Parser;
    let mut argv = vec!["myopinn"];
    argv.extend_from_slice(args);
    let parsed = myopinn::cli::Cli::try_parse_from(argv).expect("arguments parse");
    let mut out = Vec::new();
    let r = myopinn::cli::run(parsed, &mut out);
    (r, String::from_utf8(out).unwrap())
}

/// Every CSV under `dir`, relative path to bytes.
pub fn csv_files(dir: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
