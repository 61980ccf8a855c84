//! Envelope extraction from a synthetic raw sEMG burst train: band-pass,
//! rectify, low-pass, normalize and resample to 1 kHz.

use std::f64::consts::PI;

use myopinn::signal::{self, EnvelopeConfig};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> myopinn::Result<()> {
    let fs = 2000.0;
    let n = 6 * 2000;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    // Gaussian carrier modulated by a 0.5 Hz drive plus 3 Hz motion artifact.
    let drive = |t: f64| 0.5 * (1.0 - (2.0 * PI * 0.5 * t).cos());
    let carrier: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
    let raw: Vec<f64> = carrier
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let t = i as f64 / fs;
            drive(t) * c + 0.8 * (2.0 * PI * 3.0 * t).sin()
        })
        .collect();

    let cfg = EnvelopeConfig::default();
    // The band-pass keeps only part of the white carrier's power.
    let in_band = signal::band_pass(&carrier, fs, &cfg)?;
    let sigma = (in_band.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let artifact: Vec<f64> = (0..n).map(|i| 0.8 * (2.0 * PI * 3.0 * i as f64 / fs).sin()).collect();
    let kept = signal::band_pass(&artifact, fs, &cfg)?;
    let peak = |x: &[f64]| x[2000..n - 2000].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("3 Hz artifact after band-pass: {:.1} dB", 20.0 * (peak(&kept) / peak(&artifact)).log10());

    let mvc = 0.8;
    let env = signal::preprocess_emg(&raw, fs, mvc, &cfg)?;
    println!("{} raw samples at {fs} Hz -> {} envelope samples at {} Hz", raw.len(), env.len(), cfg.output_rate);
    println!("in-band carrier std {sigma:.3}");
    println!("t(s)  expected  envelope");
    for k in (0..env.len()).step_by(500) {
        let t = k as f64 / cfg.output_rate;
        let expected = drive(t) * sigma * (2.0 / PI).sqrt() / mvc;
        println!("{t:4.1}  {expected:.3}     {:.3}", env[k]);
    }
    Ok(())
}
