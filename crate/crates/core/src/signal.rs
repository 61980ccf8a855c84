//! sEMG envelope extraction and trial CSV input/output.
//!
//! The envelope chain is band-pass, full-wave rectification, low-pass,
//! division by the maximum voluntary contraction, clipping to `[0, 1]` and
//! linear resampling. Both filters are Butterworth cascades of second-order
//! sections applied forward and backward.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trial;
use crate::error::{Error, Result};

/// Output rate of [`preprocess_emg`], Hz.
pub const TARGET_RATE: f64 = 1000.0;
/// Allowed jitter of the time column, s.
pub const DT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    BandPass,
    LowPass,
    HighPass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    /// One corner for low/high-pass, `[low, high]` for band-pass.
    pub corners: Vec<f64>,
    pub order: usize,
    pub sample_rate: f64,
}

impl FilterSpec {
    pub fn band_pass(low: f64, high: f64, order: usize, sample_rate: f64) -> Self {
        FilterSpec {
            kind: FilterKind::BandPass,
            corners: vec![low, high],
            order,
            sample_rate,
        }
    }

    pub fn low_pass(corner: f64, order: usize, sample_rate: f64) -> Self {
        FilterSpec {
            kind: FilterKind::LowPass,
            corners: vec![corner],
            order,
            sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::Domain(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if self.order == 0 || !self.order.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "filter order must be even and positive, got {}",
                self.order
            )));
        }
        let want = match self.kind {
            FilterKind::BandPass => 2,
            _ => 1,
        };
        if self.corners.len() != want {
            return Err(Error::Domain(format!(
                "{:?} filter needs {want} corner frequencies",
                self.kind
            )));
        }
        let nyquist = self.sample_rate / 2.0;
        for &c in &self.corners {
            if !(c > 0.0 && c < nyquist) {
                return Err(Error::Domain(format!(
                    "corner {c} Hz must lie in (0, {nyquist}) Hz"
                )));
            }
        }
        if self.kind == FilterKind::BandPass && self.corners[0] >= self.corners[1] {
            return Err(Error::Domain("band-pass corners must be increasing".into()));
        }
        Ok(())
    }

    pub fn design(&self) -> Result<Butterworth> {
        self.validate()?;
        let fs = self.sample_rate;
        Ok(match self.kind {
            FilterKind::LowPass => Butterworth::lowpass(self.order, self.corners[0], fs)?,
            FilterKind::HighPass => Butterworth::highpass(self.order, self.corners[0], fs)?,
            FilterKind::BandPass => {
                let mut hp = Butterworth::highpass(self.order, self.corners[0], fs)?;
                let lp = Butterworth::lowpass(self.order, self.corners[1], fs)?;
                hp.sections.extend(lp.sections);
                hp
            }
        })
    }
}

/// Second-order section `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct form II state for a constant input `u` at rest.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let y = self.dc_gain() * u;
        let z2 = self.b[2] * u - self.a[1] * y;
        let z1 = self.b[1] * u - self.a[0] * y + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }

    /// Magnitude response at `f` Hz.
    pub fn gain_at(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num_re = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let num_im = -self.b[1] * s1 - self.b[2] * s2;
        let den_re = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let den_im = -self.a[0] * s1 - self.a[1] * s2;
        (num_re.hypot(num_im)) / (den_re.hypot(den_im))
    }
}

/// Butterworth filter as a cascade of second-order sections obtained by the
/// bilinear transform with frequency prewarping.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    pub sections: Vec<Biquad>,
}

impl Butterworth {
    pub fn lowpass(order: usize, corner: f64, fs: f64) -> Result<Self> {
        Self::build(order, corner, fs, false)
    }

    pub fn highpass(order: usize, corner: f64, fs: f64) -> Result<Self> {
        Self::build(order, corner, fs, true)
    }

    fn build(order: usize, corner: f64, fs: f64, high: bool) -> Result<Self> {
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "filter order must be even and positive, got {order}"
            )));
        }
        if !(corner > 0.0 && corner < fs / 2.0) {
            return Err(Error::Domain(format!(
                "corner {corner} Hz must lie in (0, {}) Hz",
                fs / 2.0
            )));
        }
        let w0 = 2.0 * PI * corner / fs;
        let (sw, cw) = w0.sin_cos();
        let sections = (1..=order / 2)
            .map(|k| {
                // Quality factor of the k-th conjugate pole pair.
                let q = 1.0 / (2.0 * ((2 * k - 1) as f64 * PI / (2 * order) as f64).sin());
                let alpha = sw / (2.0 * q);
                let a0 = 1.0 + alpha;
                let b = if high {
                    [(1.0 + cw) / 2.0, -(1.0 + cw), (1.0 + cw) / 2.0]
                } else {
                    [(1.0 - cw) / 2.0, 1.0 - cw, (1.0 - cw) / 2.0]
                };
                Biquad {
                    b: b.map(|v| v / a0),
                    a: [-2.0 * cw / a0, (1.0 - alpha) / a0],
                }
            })
            .collect();
        Ok(Butterworth { sections })
    }

    pub fn gain_at(&self, f: f64, fs: f64) -> f64 {
        self.sections.iter().map(|s| s.gain_at(f, fs)).product()
    }

    /// Single forward pass starting from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y, [0.0, 0.0]);
        }
        y
    }

    /// Zero-phase forward-backward filtering.
    ///
    /// The signal is extended at both ends by odd reflection and each pass
    /// starts from the steady state matching its first sample, which keeps
    /// edge transients small.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (6 * self.sections.len() + 3).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        self.pass(&mut ext);
        ext.reverse();
        self.pass(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    fn pass(&self, x: &mut [f64]) {
        let mut u = x[0];
        for s in &self.sections {
            s.run(x, s.steady_state(u));
            u *= s.dc_gain();
        }
    }
}

/// Settings of the envelope chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvelopeConfig {
    pub band: [f64; 2],
    pub band_order: usize,
    pub envelope_corner: f64,
    pub envelope_order: usize,
    pub output_rate: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        EnvelopeConfig {
            band: [20.0, 450.0],
            band_order: 4,
            envelope_corner: 6.0,
            envelope_order: 2,
            output_rate: TARGET_RATE,
        }
    }
}

/// Band-pass stage alone, exposed for inspection.
pub fn band_pass(raw: &[f64], fs: f64, cfg: &EnvelopeConfig) -> Result<Vec<f64>> {
    let bp = FilterSpec::band_pass(cfg.band[0], cfg.band[1], cfg.band_order, fs).design()?;
    Ok(bp.filtfilt(raw))
}

/// Raw sEMG sampled at `fs` to a normalized envelope at `cfg.output_rate`.
pub fn preprocess_emg(raw: &[f64], fs: f64, mvc: f64, cfg: &EnvelopeConfig) -> Result<Vec<f64>> {
    if !(mvc > 0.0) {
        return Err(Error::Domain(format!("MVC must be positive, got {mvc}")));
    }
    if !(fs >= cfg.output_rate) {
        return Err(Error::Domain(format!(
            "input rate {fs} Hz is below the output rate {} Hz",
            cfg.output_rate
        )));
    }
    if raw.is_empty() {
        return Err(Error::Domain("empty EMG series".into()));
    }
    let lp = FilterSpec::low_pass(cfg.envelope_corner, cfg.envelope_order, fs).design()?;
    let rectified: Vec<f64> = band_pass(raw, fs, cfg)?.iter().map(|v| v.abs()).collect();
    let env: Vec<f64> = lp
        .filtfilt(&rectified)
        .iter()
        .map(|v| (v / mvc).clamp(0.0, 1.0))
        .collect();
    resample(&env, fs, cfg.output_rate)
}

/// Linear interpolation onto a grid at `fs_out` sharing the first sample.
pub fn resample(x: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Domain("cannot resample an empty series".into()));
    }
    if !(fs_in > 0.0 && fs_out > 0.0) {
        return Err(Error::Domain("sample rates must be positive".into()));
    }
    if fs_in == fs_out {
        return Ok(x.to_vec());
    }
    let duration = (x.len() - 1) as f64 / fs_in;
    let n_out = (duration * fs_out + 1e-9).floor() as usize + 1;
    let ratio = fs_in / fs_out;
    Ok((0..n_out)
        .map(|j| {
            let pos = j as f64 * ratio;
            let i = (pos.floor() as usize).min(x.len() - 1);
            let frac = pos - i as f64;
            if i + 1 < x.len() && frac > 0.0 {
                x[i] + (x[i + 1] - x[i]) * frac
            } else {
                x[i]
            }
        })
        .collect())
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a trial as CSV. Metadata and `dt` go into leading `# key=value`
/// comment lines.
pub fn save_trial(trial: &Trial, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    let w = |e| Error::io(path, e);
    writeln!(out, "# dt={}", fmt_f64(trial.dt)).map_err(w)?;
    for (k, v) in &trial.meta {
        writeln!(out, "# {k}={v}").map_err(w)?;
    }
    {
        let mut csv = csv::Writer::from_writer(&mut out);
        let mut header = vec!["t".to_string()];
        header.extend(trial.muscle_names.iter().map(|n| format!("emg_{n}")));
        header.push("q".into());
        if trial.forces.is_some() {
            header.extend(trial.muscle_names.iter().map(|n| format!("force_{n}")));
        }
        csv.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for k in 0..trial.len() {
            row.clear();
            row.push(fmt_f64(trial.time[k]));
            row.extend(trial.emg.iter().map(|c| fmt_f64(c[k])));
            row.push(fmt_f64(trial.q[k]));
            if let Some(f) = &trial.forces {
                row.extend(f.iter().map(|c| fmt_f64(c[k])));
            }
            csv.write_record(&row)?;
        }
        csv.flush().map_err(w)?;
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(w)?;
        }
    }
    fs::write(path, out).map_err(w)
}

/// Splits leading `# key=value` lines from the CSV body.
fn split_meta(text: &str) -> (BTreeMap<String, String>, &str) {
    let mut meta = BTreeMap::new();
    let mut rest = text;
    while let Some(line) = rest.strip_prefix('#') {
        let (line, tail) = line.split_once('\n').unwrap_or((line, ""));
        if let Some((k, v)) = line.trim().split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
        rest = tail;
    }
    (meta, rest)
}

/// Header-keyed numeric columns of a CSV body.
struct Columns {
    names: Vec<String>,
    data: Vec<Vec<f64>>,
}

impl Columns {
    fn parse(body: &str, path: &Path) -> Result<Self> {
        let where_ = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut data = vec![Vec::new(); names.len()];
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::schema(&where_, format!("row {}: {e}", r + 1)))?;
            for (c, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::schema(
                        &where_,
                        format!("column `{}` row {}: `{cell}` is not a number", names[c], r + 1),
                    )
                })?;
                if !v.is_finite() {
                    return Err(Error::schema(
                        &where_,
                        format!("column `{}` row {}: non-finite value", names[c], r + 1),
                    ));
                }
                data[c].push(v);
            }
        }
        Ok(Columns { names, data })
    }

    fn take(&mut self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(std::mem::take(&mut self.data[i]))
    }

    fn require(&mut self, name: &str, path: &Path) -> Result<Vec<f64>> {
        self.take(name)
            .ok_or_else(|| Error::schema(path.display().to_string(), format!("missing column `{name}`")))
    }

    fn with_prefix(&self, prefix: &str) -> Vec<String> {
        self.names
            .iter()
            .filter_map(|n| n.strip_prefix(prefix).map(str::to_string))
            .collect()
    }
}

fn check_uniform(time: &[f64], path: &Path) -> Result<f64> {
    let where_ = path.display().to_string();
    if time.len() < 2 {
        return Err(Error::schema(where_, "need at least two samples"));
    }
    let dt = (time[time.len() - 1] - time[0]) / (time.len() - 1) as f64;
    for k in 1..time.len() {
        let step = time[k] - time[k - 1];
        if (step - dt).abs() > DT_TOLERANCE {
            return Err(Error::schema(
                where_,
                format!("non-uniform sampling at row {k}: step {step} vs {dt}"),
            ));
        }
    }
    Ok(dt)
}

/// Reads a trial CSV. Columns may come in any order; they are matched by
/// header name.
pub fn load_trial(path: &Path) -> Result<Trial> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut meta, body) = split_meta(&text);
    let mut cols = Columns::parse(body, path)?;
    let muscle_names = cols.with_prefix("emg_");
    if muscle_names.is_empty() {
        return Err(Error::schema(
            path.display().to_string(),
            "no `emg_<muscle>` columns",
        ));
    }
    let time = cols.require("t", path)?;
    let q = cols.require("q", path)?;
    let emg = muscle_names
        .iter()
        .map(|n| cols.require(&format!("emg_{n}"), path))
        .collect::<Result<Vec<_>>>()?;
    let force_names = cols.with_prefix("force_");
    let forces = if force_names.is_empty() {
        None
    } else {
        Some(
            muscle_names
                .iter()
                .map(|n| cols.require(&format!("force_{n}"), path))
                .collect::<Result<Vec<_>>>()?,
        )
    };
    let measured = check_uniform(&time, path)?;
    let dt = match meta.remove("dt") {
        Some(s) => s.parse::<f64>().map_err(|_| {
            Error::schema(path.display().to_string(), format!("bad dt entry `{s}`"))
        })?,
        None => measured,
    };
    if (dt - measured).abs() > DT_TOLERANCE {
        return Err(Error::schema(
            path.display().to_string(),
            format!("declared dt {dt} disagrees with time column ({measured})"),
        ));
    }
    let trial = Trial {
        dt,
        time,
        muscle_names,
        emg,
        q,
        forces,
        meta,
    };
    trial.validate().map_err(|e| match e {
        Error::Schema { reason, .. } => Error::schema(path.display().to_string(), reason),
        other => other,
    })?;
    Ok(trial)
}

/// Raw recording: sample rate plus named electrode channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub fs: f64,
    pub channels: Vec<(String, Vec<f64>)>,
    /// Joint angle, when the file has a `q` column.
    pub q: Option<Vec<f64>>,
}

/// Reads a raw CSV with `t`, optional `q` and one column per electrode.
pub fn load_raw(path: &Path) -> Result<RawRecording> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (_, body) = split_meta(&text);
    let mut cols = Columns::parse(body, path)?;
    let time = cols.require("t", path)?;
    let dt = check_uniform(&time, path)?;
    let q = cols.take("q");
    let channels: Vec<(String, Vec<f64>)> = cols
        .names
        .iter()
        .cloned()
        .zip(cols.data)
        .filter(|(n, _)| n != "t" && n != "q")
        .collect();
    if channels.is_empty() {
        return Err(Error::schema(path.display().to_string(), "no electrode columns"));
    }
    Ok(RawRecording {
        fs: 1.0 / dt,
        channels,
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn butterworth_gain_at_corner_is_half_power() {
        for order in [2, 4] {
            let lp = Butterworth::lowpass(order, 6.0, 1000.0).unwrap();
            assert!((lp.gain_at(6.0, 1000.0) - FRAC_1_SQRT_2).abs() < 1e-12);
            assert!((lp.gain_at(0.0, 1000.0) - 1.0).abs() < 1e-12);
            let hp = Butterworth::highpass(order, 20.0, 2000.0).unwrap();
            assert!((hp.gain_at(20.0, 2000.0) - FRAC_1_SQRT_2).abs() < 1e-12);
            assert!(hp.gain_at(0.0, 2000.0).abs() < 1e-12);
        }
    }

    #[test]
    fn butterworth_matches_analytic_magnitude_with_prewarp() {
        // |H|² = 1 / (1 + (Ω/Ωc)^(2N)) with Ω = tan(πf/fs).
        let (fs, fc, n) = (1000.0, 50.0, 4);
        let lp = Butterworth::lowpass(n, fc, fs).unwrap();
        for f in [5.0, 30.0, 80.0, 200.0, 400.0] {
            let r = (PI * f / fs).tan() / (PI * fc / fs).tan();
            let want = 1.0 / (1.0 + r.powi(2 * n as i32)).sqrt();
            assert!((lp.gain_at(f, fs) - want).abs() < 1e-12, "f={f}");
        }
    }

    #[test]
    fn spec_validation() {
        assert!(FilterSpec::low_pass(600.0, 2, 1000.0).validate().is_err());
        assert!(FilterSpec::low_pass(6.0, 3, 1000.0).validate().is_err());
        assert!(FilterSpec::band_pass(450.0, 20.0, 4, 2000.0).validate().is_err());
        assert!(FilterSpec::band_pass(20.0, 450.0, 4, 2000.0).validate().is_ok());
        assert!(FilterSpec::band_pass(20.0, 450.0, 4, 800.0).validate().is_err());
    }

    #[test]
    fn filtfilt_passes_constants_and_zero() {
        let lp = Butterworth::lowpass(2, 6.0, 1000.0).unwrap();
        let y = lp.filtfilt(&[0.7; 500]);
        assert!(y.iter().all(|v| (v - 0.7).abs() < 1e-12));
        assert!(lp.filtfilt(&[0.0; 50]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn filtfilt_squares_the_magnitude() {
        let (fs, f) = (1000.0, 10.0);
        let lp = Butterworth::lowpass(2, 6.0, fs).unwrap();
        let x = sine(f, fs, 5000);
        let y = lp.filtfilt(&x);
        let peak = y[1000..4000].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let g = lp.gain_at(f, fs);
        assert!((peak - g * g).abs() < 1e-3, "{peak} vs {}", g * g);
    }

    #[test]
    fn zero_input_gives_zero_envelope() {
        let env = preprocess_emg(&[0.0; 4000], 2000.0, 1.0, &EnvelopeConfig::default()).unwrap();
        assert_eq!(env.len(), 2000);
        assert!(env.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn preprocess_rejects_bad_inputs() {
        let cfg = EnvelopeConfig::default();
        assert!(preprocess_emg(&[0.0; 100], 2000.0, 0.0, &cfg).is_err());
        assert!(preprocess_emg(&[0.0; 100], 500.0, 1.0, &cfg).is_err());
        let hi = EnvelopeConfig {
            band: [20.0, 1200.0],
            ..cfg
        };
        assert!(preprocess_emg(&[0.0; 100], 2000.0, 1.0, &hi).is_err());
    }

    #[test]
    fn resample_cases() {
        let x = vec![1.0, 2.0, 3.0];
        assert_eq!(resample(&x, 100.0, 100.0).unwrap(), x);
        let ramp: Vec<f64> = (0..201).map(|i| 0.5 * i as f64).collect();
        let up = resample(&ramp, 200.0, 1000.0).unwrap();
        assert_eq!(up.len(), 1001);
        for (j, v) in up.iter().enumerate() {
            assert!((v - 0.5 * j as f64 / 5.0).abs() < 1e-12);
        }
        assert_eq!(*up.last().unwrap(), 100.0);
        assert!(resample(&[], 1.0, 2.0).is_err());
    }

    #[test]
    fn meta_lines_are_split() {
        let (meta, body) = split_meta("# dt=1e-3\n# name=a b\nt,q\n0,1\n");
        assert_eq!(meta["dt"], "1e-3");
        assert_eq!(meta["name"], "a b");
        assert_eq!(body, "t,q\n0,1\n");
    }
}
