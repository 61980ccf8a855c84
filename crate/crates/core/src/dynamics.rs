//! One-degree-of-freedom joint dynamics and synthetic trial generation.
//!
//! Equation of motion: `M·q̈ + C(q, q̇) + G(q) = τ`, with `C = c·q̇` (the
//! Coriolis term vanishes for a single hinge, only viscous damping is
//! kept) and `τ = Σₙ Fₙᵐᵗ·rₙ`. Integration is classical fixed-step RK4.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::hill::{self, ActivationCoeff, MuscleTendonParams};
use crate::signal;

/// Slack beyond the joint range tolerated before a run is declared unstable.
pub const RANGE_SLACK: f64 = 0.5;

/// Where the joint angle is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleOrigin {
    /// `q = 0` with the segment horizontal: `G(q) = g_c·cos q`.
    #[default]
    Horizontal,
    /// `q = 0` with the segment hanging straight down: `G(q) = g_c·sin q`.
    Hanging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    /// Segment inertia about the joint, kg·m².
    pub inertia: f64,
    /// `m·g·l_c`, N·m.
    pub grav_coeff: f64,
    /// Viscous damping, N·m·s/rad.
    pub damping: f64,
    /// Admissible joint range, rad.
    pub q_range: [f64; 2],
    #[serde(default)]
    pub angle_origin: AngleOrigin,
}

/// Gravitational acceleration used for anthropometric defaults, m/s².
pub const GRAVITY: f64 = 9.81;
/// Hand mass as a fraction of body mass.
pub const HAND_MASS_FRACTION: f64 = 0.006;

impl JointModel {
    /// Hand as a uniform rod pivoting at the wrist: `I = m·L²/3`, centre of
    /// mass at `L/2`.
    pub fn from_anthropometry(
        body_mass: f64,
        hand_length: f64,
        damping: f64,
        q_range: [f64; 2],
    ) -> Self {
        let m = HAND_MASS_FRACTION * body_mass;
        JointModel {
            inertia: m * hand_length * hand_length / 3.0,
            grav_coeff: m * GRAVITY * hand_length / 2.0,
            damping,
            q_range,
            angle_origin: AngleOrigin::Horizontal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inertia > 0.0) {
            return Err(Error::config("joint.inertia", "must be positive"));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::config("joint.damping", "must be nonnegative"));
        }
        if !(self.q_range[0] < self.q_range[1]) {
            return Err(Error::config("joint.q_range", "must be a nonempty interval"));
        }
        Ok(())
    }

    pub fn gravity_torque<T: Real>(&self, q: T) -> T {
        match self.angle_origin {
            AngleOrigin::Horizontal => q.cos() * self.grav_coeff,
            AngleOrigin::Hanging => q.sin() * self.grav_coeff,
        }
    }

    /// Potential whose derivative is [`JointModel::gravity_torque`].
    pub fn gravity_potential(&self, q: f64) -> f64 {
        match self.angle_origin {
            AngleOrigin::Horizontal => self.grav_coeff * q.sin(),
            AngleOrigin::Hanging => -self.grav_coeff * q.cos(),
        }
    }

    pub fn in_range(&self, q: f64, slack: f64) -> bool {
        q >= self.q_range[0] - slack && q <= self.q_range[1] + slack
    }
}

/// `M·q̈ + c·q̇ + G(q) − τ`; zero iff the motion obeys the equation of motion.
pub fn eom_residual_expr<T: Real>(q: T, qdot: T, qddot: T, tau: T, joint: &JointModel) -> T {
    qddot * joint.inertia + qdot * joint.damping + joint.gravity_torque(q) - tau
}

pub fn eom_residual(q: f64, qdot: f64, qddot: f64, tau: f64, joint: &JointModel) -> f64 {
    eom_residual_expr(q, qdot, qddot, tau, joint)
}

/// Net muscle torque `Σ Fₙ·rₙ`.
pub fn joint_torque(
    q: f64,
    qdot: f64,
    activations: &[f64],
    muscles: &[MuscleTendonParams],
) -> Result<f64> {
    if activations.len() != muscles.len() {
        return Err(Error::Shape {
            op: "joint_torque",
            lhs: (activations.len(), 1),
            rhs: (muscles.len(), 1),
        });
    }
    let mut tau = 0.0;
    for (a, m) in activations.iter().zip(muscles) {
        tau += hill::muscle_force(q, qdot, *a, m)? * hill::moment_arm(q, m);
    }
    Ok(tau)
}

/// Uniformly sampled recording: time, enveloped EMG, joint angle and,
/// for synthetic data, the muscle forces that produced the motion.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub dt: f64,
    pub time: Vec<f64>,
    pub muscle_names: Vec<String>,
    /// One channel per muscle, values in `[0, 1]`.
    pub emg: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    /// One channel per muscle, newtons.
    pub forces: Option<Vec<Vec<f64>>>,
    pub meta: BTreeMap<String, String>,
}

impl Trial {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn n_muscles(&self) -> usize {
        self.muscle_names.len()
    }

    pub fn duration(&self) -> f64 {
        self.time.last().copied().unwrap_or(0.0) - self.time.first().copied().unwrap_or(0.0)
    }

    pub fn emg_at(&self, k: usize) -> Vec<f64> {
        self.emg.iter().map(|ch| ch[k]).collect()
    }

    /// Checks channel lengths, the sampling grid and value ranges.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let where_ = self.meta.get("name").cloned().unwrap_or_else(|| "trial".into());
        if n < 3 {
            return Err(Error::schema(where_, "trial needs at least 3 samples"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::schema(where_, "dt must be positive"));
        }
        if self.emg.len() != self.muscle_names.len() {
            return Err(Error::schema(where_, "one EMG channel per muscle required"));
        }
        let check = |name: &str, ch: &[f64]| -> Result<()> {
            if ch.len() != n {
                return Err(Error::schema(
                    where_.clone(),
                    format!("column `{name}` has {} samples, expected {n}", ch.len()),
                ));
            }
            if let Some(i) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::schema(
                    where_.clone(),
                    format!("column `{name}` has a non-finite value at row {i}"),
                ));
            }
            Ok(())
        };
        check("q", &self.q)?;
        for (name, ch) in self.muscle_names.iter().zip(&self.emg) {
            check(&format!("emg_{name}"), ch)?;
            if let Some(i) = ch.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::schema(
                    where_.clone(),
                    format!("column `emg_{name}` leaves [0, 1] at row {i}"),
                ));
            }
        }
        if let Some(forces) = &self.forces {
            if forces.len() != self.muscle_names.len() {
                return Err(Error::schema(where_, "one force channel per muscle required"));
            }
            for (name, ch) in self.muscle_names.iter().zip(forces) {
                check(&format!("force_{name}"), ch)?;
            }
        }
        for k in 1..n {
            let step = self.time[k] - self.time[k - 1];
            if (step - self.dt).abs() > 1e-9 {
                return Err(Error::schema(
                    where_,
                    format!("non-uniform sampling at row {k}: step {step} vs dt {}", self.dt),
                ));
            }
        }
        Ok(())
    }

    /// Samples `start..end` as a new trial (time axis kept).
    pub fn segment(&self, start: usize, end: usize) -> Trial {
        Trial {
            dt: self.dt,
            time: self.time[start..end].to_vec(),
            muscle_names: self.muscle_names.clone(),
            emg: self.emg.iter().map(|c| c[start..end].to_vec()).collect(),
            q: self.q[start..end].to_vec(),
            forces: self
                .forces
                .as_ref()
                .map(|f| f.iter().map(|c| c[start..end].to_vec()).collect()),
            meta: self.meta.clone(),
        }
    }

    /// Channels rearranged into the muscle order `names`. Column order in a
    /// file is arbitrary, so loaded trials are aligned to the configured
    /// muscles before use.
    pub fn with_muscle_order(mut self, names: &[String]) -> Result<Trial> {
        let mut sorted_have = self.muscle_names.clone();
        let mut sorted_want = names.to_vec();
        sorted_have.sort();
        sorted_want.sort();
        if sorted_have != sorted_want {
            return Err(Error::schema(
                self.meta.get("name").cloned().unwrap_or_else(|| "trial".into()),
                format!(
                    "muscle columns {:?} do not match the configured muscles {names:?}",
                    self.muscle_names
                ),
            ));
        }
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.muscle_names.iter().position(|m| m == n).expect("checked above"))
            .collect();
        self.emg = idx.iter().map(|&i| std::mem::take(&mut self.emg[i])).collect();
        if let Some(f) = &mut self.forces {
            *f = idx.iter().map(|&i| std::mem::take(&mut f[i])).collect();
        }
        self.muscle_names = names.to_vec();
        Ok(self)
    }
}

/// Continuous-time excitation source for the integrator.
pub trait Excitation {
    fn n_channels(&self) -> usize;
    /// Writes the excitation of every channel at time `t` into `out`.
    fn sample(&self, t: f64, out: &mut [f64]);
}

/// Uniformly sampled excitations, linearly interpolated between samples.
#[derive(Debug, Clone)]
pub struct SampledExcitation {
    pub dt: f64,
    pub channels: Vec<Vec<f64>>,
}

impl Excitation for SampledExcitation {
    fn n_channels(&self) -> usize {
        self.channels.len()
    }

    fn sample(&self, t: f64, out: &mut [f64]) {
        for (o, ch) in out.iter_mut().zip(&self.channels) {
            let x = (t / self.dt).max(0.0);
            let i = (x.floor() as usize).min(ch.len() - 1);
            let j = (i + 1).min(ch.len() - 1);
            let frac = (x - i as f64).clamp(0.0, 1.0);
            *o = ch[i] + (ch[j] - ch[i]) * frac;
        }
    }
}

/// Analytic excitation waveform, clamped to `[0, 1]` when evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Waveform {
    Constant {
        level: f64,
    },
    Sine {
        mean: f64,
        amplitude: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Symmetric triangle wave.
    Triangle {
        mean: f64,
        amplitude: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Square wave with `tanh` edges of width `sharpness` (larger is
    /// steeper).
    SmoothSquare {
        mean: f64,
        amplitude: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
        sharpness: f64,
    },
    /// Sum of sines with given frequencies and amplitudes.
    MultiSine {
        mean: f64,
        components: Vec<[f64; 3]>,
    },
}

impl Waveform {
    pub fn family(&self) -> &'static str {
        match self {
            Waveform::Constant { .. } => "constant",
            Waveform::Sine { .. } => "sine",
            Waveform::Triangle { .. } => "triangle",
            Waveform::SmoothSquare { .. } => "smooth_square",
            Waveform::MultiSine { .. } => "multi_sine",
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let v = match *self {
            Waveform::Constant { level } => level,
            Waveform::Sine {
                mean,
                amplitude,
                freq,
                phase,
            } => mean + amplitude * (2.0 * PI * freq * t + phase).sin(),
            Waveform::Triangle {
                mean,
                amplitude,
                freq,
                phase,
            } => {
                // asin(sin(x)) is a unit triangle in [-π/2, π/2].
                let s = (2.0 * PI * freq * t + phase).sin();
                mean + amplitude * s.asin() * 2.0 / PI
            }
            Waveform::SmoothSquare {
                mean,
                amplitude,
                freq,
                phase,
                sharpness,
            } => {
                let s = (2.0 * PI * freq * t + phase).sin();
                mean + amplitude * (sharpness * s).tanh() / sharpness.tanh()
            }
            Waveform::MultiSine {
                mean,
                ref components,
            } => {
                mean + components
                    .iter()
                    .map(|[amp, f, ph]| amp * (2.0 * PI * f * t + ph).sin())
                    .sum::<f64>()
            }
        };
        v.clamp(0.0, 1.0)
    }
}

/// One waveform per muscle.
#[derive(Debug, Clone)]
pub struct WaveformExcitation(pub Vec<Waveform>);

impl Excitation for WaveformExcitation {
    fn n_channels(&self) -> usize {
        self.0.len()
    }

    fn sample(&self, t: f64, out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(&self.0) {
            *o = w.eval(t);
        }
    }
}

struct Rhs<'a> {
    muscles: &'a [MuscleTendonParams],
    joint: &'a JointModel,
    a_shape: ActivationCoeff,
    excitation: &'a dyn Excitation,
    buf: Vec<f64>,
    act: Vec<f64>,
}

impl Rhs<'_> {
    fn activations(&mut self, t: f64) -> Result<()> {
        self.excitation.sample(t, &mut self.buf);
        for (a, e) in self.act.iter_mut().zip(&self.buf) {
            *a = hill::activation(*e, self.a_shape)?;
        }
        Ok(())
    }

    fn qddot(&mut self, t: f64, q: f64, qdot: f64) -> Result<f64> {
        self.activations(t)?;
        let tau = joint_torque(q, qdot, &self.act, self.muscles)?;
        Ok((tau - qdot * self.joint.damping - self.joint.gravity_torque(q)) / self.joint.inertia)
    }
}

/// Angle in the joint range where muscle torque at rest balances gravity
/// under the excitation at `t = 0`, found by bisection.
pub fn static_equilibrium(
    excitation: &dyn Excitation,
    a_shape: ActivationCoeff,
    muscles: &[MuscleTendonParams],
    joint: &JointModel,
) -> Result<f64> {
    let mut e = vec![0.0; excitation.n_channels()];
    excitation.sample(0.0, &mut e);
    let act = e
        .iter()
        .map(|v| hill::activation(*v, a_shape))
        .collect::<Result<Vec<_>>>()?;
    let net = |q: f64| -> Result<f64> {
        Ok(joint_torque(q, 0.0, &act, muscles)? - joint.gravity_torque(q))
    };
    let [mut lo, mut hi] = joint.q_range;
    let (mut f_lo, f_hi) = (net(lo)?, net(hi)?);
    if f_lo * f_hi > 0.0 {
        return Err(Error::Domain(
            "no static equilibrium inside the joint range".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = net(mid)?;
        if f_mid == 0.0 || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Forward simulation from `(q0, qdot0)` over `n_samples` samples.
///
/// Returns a [`Trial`] whose EMG channels are the excitations at the sample
/// instants and whose force channels are the muscle forces at each sampled
/// state.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    excitation: &dyn Excitation,
    q0: f64,
    qdot0: f64,
    a_shape: ActivationCoeff,
    muscles: &[MuscleTendonParams],
    joint: &JointModel,
    dt: f64,
    n_samples: usize,
) -> Result<Trial> {
    simulate_states(excitation, q0, qdot0, a_shape, muscles, joint, dt, n_samples).map(|(t, _)| t)
}

/// [`simulate`], also returning the integrated angular velocity at each
/// sample.
#[allow(clippy::too_many_arguments)]
pub fn simulate_states(
    excitation: &dyn Excitation,
    q0: f64,
    qdot0: f64,
    a_shape: ActivationCoeff,
    muscles: &[MuscleTendonParams],
    joint: &JointModel,
    dt: f64,
    n_samples: usize,
) -> Result<(Trial, Vec<f64>)> {
    if excitation.n_channels() != muscles.len() {
        return Err(Error::Shape {
            op: "simulate",
            lhs: (excitation.n_channels(), 1),
            rhs: (muscles.len(), 1),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    if !joint.in_range(q0, 0.0) {
        return Err(Error::Domain(format!(
            "initial angle {q0} outside joint range {:?}",
            joint.q_range
        )));
    }
    let n_m = muscles.len();
    let mut rhs = Rhs {
        muscles,
        joint,
        a_shape,
        excitation,
        buf: vec![0.0; n_m],
        act: vec![0.0; n_m],
    };

    let mut time = Vec::with_capacity(n_samples);
    let mut q_out = Vec::with_capacity(n_samples);
    let mut qdot_out = Vec::with_capacity(n_samples);
    let mut emg = vec![Vec::with_capacity(n_samples); n_m];
    let mut forces = vec![Vec::with_capacity(n_samples); n_m];

    let (mut q, mut qdot) = (q0, qdot0);
    for k in 0..n_samples {
        let t = k as f64 * dt;
        rhs.activations(t)?;
        time.push(t);
        q_out.push(q);
        qdot_out.push(qdot);
        for n in 0..n_m {
            emg[n].push(rhs.buf[n]);
            forces[n].push(hill::muscle_force(q, qdot, rhs.act[n], &muscles[n])?);
        }
        if k + 1 == n_samples {
            break;
        }
        let h = dt;
        let k1v = rhs.qddot(t, q, qdot)?;
        let k1q = qdot;
        let k2v = rhs.qddot(t + h / 2.0, q + h / 2.0 * k1q, qdot + h / 2.0 * k1v)?;
        let k2q = qdot + h / 2.0 * k1v;
        let k3v = rhs.qddot(t + h / 2.0, q + h / 2.0 * k2q, qdot + h / 2.0 * k2v)?;
        let k3q = qdot + h / 2.0 * k2v;
        let k4v = rhs.qddot(t + h, q + h * k3q, qdot + h * k3v)?;
        let k4q = qdot + h * k3v;
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        qdot += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if !q.is_finite() || !joint.in_range(q, RANGE_SLACK) {
            return Err(Error::Unstable {
                t: t + h,
                q,
                range: joint.q_range,
            });
        }
    }

    let trial = Trial {
        dt,
        time,
        muscle_names: muscles.iter().map(|m| m.name.clone()).collect(),
        emg,
        q: q_out,
        forces: Some(forces),
        meta: BTreeMap::new(),
    };
    Ok((trial, qdot_out))
}

/// Central-difference residual of the equation of motion at every interior
/// sample, using the trial's own force channels for `τ`.
pub fn trial_eom_residuals(
    trial: &Trial,
    muscles: &[MuscleTendonParams],
    joint: &JointModel,
) -> Result<Vec<f64>> {
    let forces = trial
        .forces
        .as_ref()
        .ok_or_else(|| Error::Domain("trial carries no force channels".into()))?;
    let (q, dt) = (&trial.q, trial.dt);
    let mut out = Vec::with_capacity(q.len().saturating_sub(2));
    for k in 1..q.len() - 1 {
        let qdot = (q[k + 1] - q[k - 1]) / (2.0 * dt);
        let qddot = (q[k + 1] - 2.0 * q[k] + q[k - 1]) / (dt * dt);
        let tau: f64 = muscles
            .iter()
            .zip(forces)
            .map(|(m, f)| f[k] * hill::moment_arm(q[k], m))
            .sum();
        out.push(eom_residual(q[k], qdot, qddot, tau, joint));
    }
    Ok(out)
}

/// Net muscle torque per sample from a trial's force channels.
pub fn trial_torque(trial: &Trial, muscles: &[MuscleTendonParams]) -> Option<Vec<f64>> {
    let forces = trial.forces.as_ref()?;
    Some(
        (0..trial.len())
            .map(|k| {
                muscles
                    .iter()
                    .zip(forces)
                    .map(|(m, f)| f[k] * hill::moment_arm(trial.q[k], m))
                    .sum()
            })
            .collect(),
    )
}

/// One synthetic trial to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub name: String,
    /// Seconds.
    pub duration: f64,
    #[serde(default)]
    pub q0: f64,
    #[serde(default)]
    pub qdot0: f64,
    /// Start at rest in static equilibrium with the initial excitation,
    /// ignoring `q0` and `qdot0`. Avoids the fast start-up transient of an
    /// arbitrary initial state.
    #[serde(default)]
    pub start_at_equilibrium: bool,
    /// One waveform per muscle, in muscle order.
    pub excitations: Vec<Waveform>,
}

/// Hidden parameters used to generate synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub a_shape: f64,
    pub muscles: Vec<MuscleTendonParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Sample interval, s.
    pub dt: f64,
    /// Standard deviation of additive EMG noise.
    #[serde(default)]
    pub noise_sigma: f64,
    /// Low-pass corner of the EMG noise, Hz.
    #[serde(default = "default_noise_bandwidth")]
    pub noise_bandwidth: f64,
    pub trials: Vec<TrialSpec>,
}

fn default_noise_bandwidth() -> f64 {
    20.0
}

impl GeneratorSpec {
    pub fn n_samples(&self, spec: &TrialSpec) -> usize {
        (spec.duration / self.dt).round() as usize + 1
    }
}

/// Generates every configured trial with the ground-truth parameters.
///
/// Noise, when requested, is band-limited Gaussian noise added to the EMG
/// channels only; the joint angle and forces stay exactly as simulated.
pub fn synth_dataset(
    spec: &GeneratorSpec,
    truth: &GroundTruth,
    joint: &JointModel,
    seed: u64,
) -> Result<Vec<Trial>> {
    let a_shape = ActivationCoeff::new(truth.a_shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(spec.trials.len());
    for ts in &spec.trials {
        if ts.excitations.len() != truth.muscles.len() {
            return Err(Error::config(
                format!("generator.trials.{}.excitations", ts.name),
                format!(
                    "expected {} waveforms, found {}",
                    truth.muscles.len(),
                    ts.excitations.len()
                ),
            ));
        }
        let exc = WaveformExcitation(ts.excitations.clone());
        let (q0, qdot0) = if ts.start_at_equilibrium {
            (static_equilibrium(&exc, a_shape, &truth.muscles, joint)?, 0.0)
        } else {
            (ts.q0, ts.qdot0)
        };
        let mut trial = simulate(
            &exc,
            q0,
            qdot0,
            a_shape,
            &truth.muscles,
            joint,
            spec.dt,
            spec.n_samples(ts),
        )?;
        trial.meta.insert("name".into(), ts.name.clone());
        let families: Vec<&str> = ts.excitations.iter().map(|w| w.family()).collect();
        trial.meta.insert("waveforms".into(), families.join("+"));
        if spec.noise_sigma > 0.0 {
            for ch in &mut trial.emg {
                let noise = band_limited_noise(
                    ch.len(),
                    spec.noise_sigma,
                    spec.noise_bandwidth,
                    1.0 / spec.dt,
                    &mut rng,
                )?;
                for (v, n) in ch.iter_mut().zip(noise) {
                    *v = (*v + n).clamp(0.0, 1.0);
                }
            }
        }
        out.push(trial);
    }
    Ok(out)
}

/// Zero-mean Gaussian noise low-passed at `bandwidth` Hz and rescaled to
/// sample standard deviation `sigma`.
fn band_limited_noise(
    n: usize,
    sigma: f64,
    bandwidth: f64,
    fs: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let white: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
    let lp = signal::Butterworth::lowpass(2, bandwidth, fs)?;
    let mut x = lp.filtfilt(&white);
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    for v in &mut x {
        *v = (*v - mean) / sd * sigma;
    }
    Ok(x)
}

/// Signal-to-noise ratio in dB of `noisy` relative to `clean`.
pub fn snr_db(clean: &[f64], noisy: &[f64]) -> f64 {
    let ps: f64 = clean.iter().map(|v| v * v).sum();
    let pn: f64 = clean.iter().zip(noisy).map(|(c, n)| (n - c).powi(2)).sum();
    10.0 * (ps / pn).log10()
}
