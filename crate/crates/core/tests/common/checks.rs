//! Measurements shared by the module tests and the acceptance run.

use std::f64::consts::PI;

use myopinn::config::RunConfig;
use myopinn::dynamics::{self, JointModel, SampledExcitation};
use myopinn::hill::ActivationCoeff;
use myopinn::signal::{self, EnvelopeConfig};

/// Worst residual over all default trials relative to each trial's peak
/// muscle torque.
pub fn max_relative_residual(dt: f64) -> f64 {
    let cfg = RunConfig::wrist_default();
    let truth = cfg.ground_truth().unwrap();
    let mut spec = cfg.generator.as_ref().unwrap().spec();
    spec.dt = dt;
    let trials = dynamics::synth_dataset(&spec, &truth, &cfg.joint_model(), 0).unwrap();
    let mut worst = 0.0f64;
    for tr in &trials {
        let res = dynamics::trial_eom_residuals(tr, &truth.muscles, &cfg.joint_model()).unwrap();
        let tau = dynamics::trial_torque(tr, &truth.muscles).unwrap();
        let peak = tau.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(res.iter().fold(0.0f64, |m, v| m.max(v.abs())) / peak);
    }
    worst
}

pub fn pendulum() -> JointModel {
    JointModel {
        damping: 0.0,
        q_range: [-3.0, 0.5],
        ..RunConfig::wrist_default().joint_model()
    }
}

pub fn energy_drift(dt: f64, seconds: f64, q0: f64) -> f64 {
    let j = pendulum();
    let exc = SampledExcitation {
        dt,
        channels: vec![],
    };
    let a = ActivationCoeff::new(-1.0).unwrap();
    let n = (seconds / dt).round() as usize + 1;
    let (tr, qdot) = dynamics::simulate_states(&exc, q0, 0.0, a, &[], &j, dt, n).unwrap();
    let energy: Vec<f64> = tr
        .q
        .iter()
        .zip(&qdot)
        .map(|(q, v)| 0.5 * j.inertia * v * v + j.gravity_potential(*q))
        .collect();
    let scale = (energy[0] - j.gravity_potential(-std::f64::consts::FRAC_PI_2)).abs();
    energy.iter().fold(0.0f64, |m, e| m.max((e - energy[0]).abs())) / scale
}

pub const FS: f64 = 2000.0;

pub fn sine(f: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * f * i as f64 / FS).sin()).collect()
}

pub fn peak_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn argmax(x: &[f64]) -> usize {
    x.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, b), (i, v)| if *v > b { (i, *v) } else { (bi, b) })
        .0
}

/// Output-to-input amplitude ratio of the band-pass stage, measured away
/// from the record edges.
pub fn band_pass_gain_db(f: f64) -> f64 {
    let x = sine(f, 20_000);
    let y = signal::band_pass(&x, FS, &EnvelopeConfig::default()).unwrap();
    let mid = &y[4000..16_000];
    20.0 * (peak_abs(mid) / 1.0).log10()
}

/// Worst relative deviation of the 100 Hz rectified-sine envelope from
/// `2/π` after the start-up transient.
pub fn rectified_sine_error() -> f64 {
    let env = signal::preprocess_emg(&sine(100.0, 10_000), FS, 1.0, &EnvelopeConfig::default()).unwrap();
    let want = 2.0 / PI;
    env[1000..4000].iter().fold(0.0f64, |m, v| m.max((v - want).abs() / want))
}

/// Sample offset between the peak of a 2 Hz amplitude-modulated burst and
/// the peak of its envelope, at the output rate.
pub fn burst_peak_offset() -> i64 {
    let n = 8000;
    let centre = 4321.0;
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 - centre) / FS;
            let bump = if t.abs() < 0.25 { 0.5 * (1.0 + (2.0 * PI * 2.0 * t).cos()) } else { 0.0 };
            bump * (2.0 * PI * 100.0 * i as f64 / FS).sin()
        })
        .collect();
    let env = signal::preprocess_emg(&raw, FS, 1.0, &EnvelopeConfig::default()).unwrap();
    let raw_peak_out = centre * EnvelopeConfig::default().output_rate / FS;
    argmax(&env) as i64 - raw_peak_out.round() as i64
}

