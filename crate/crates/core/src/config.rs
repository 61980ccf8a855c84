//! Run configuration: subject, joint, muscles, identification bounds,
//! synthetic-data generator, preprocessing and training settings.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{AngleOrigin, GeneratorSpec, GroundTruth, JointModel, TrialSpec, Waveform};
use crate::error::{Error, Result};
use crate::hill::{ActivationCoeff, MuscleTendonParams, Polynomial};
use crate::loss::BoundRules;
use crate::signal::EnvelopeConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subject {
    /// kg
    pub body_mass: f64,
    /// m
    pub hand_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    #[serde(default = "default_damping")]
    pub damping: f64,
    pub q_range: [f64; 2],
    #[serde(default)]
    pub angle_origin: AngleOrigin,
    /// Overrides the anthropometric inertia, kg·m².
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
    /// Overrides the anthropometric gravity coefficient, N·m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grav_coeff: Option<f64>,
}

fn default_damping() -> f64 {
    0.05
}

/// Ground-truth overrides of the initial muscle parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthOverride {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l0m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub a_shape: f64,
    #[serde(default)]
    pub muscles: Vec<TruthOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub dt: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_noise_bandwidth")]
    pub noise_bandwidth: f64,
    pub truth: TruthConfig,
    pub trials: Vec<TrialSpec>,
}

fn default_noise_bandwidth() -> f64 {
    20.0
}

impl GeneratorConfig {
    pub fn spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            dt: self.dt,
            noise_sigma: self.noise_sigma,
            noise_bandwidth: self.noise_bandwidth,
            trials: self.trials.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    #[serde(flatten)]
    pub envelope: EnvelopeConfig,
    /// MVC amplitude per electrode column; 1.0 when absent.
    pub mvc: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub subject: Subject,
    pub joint: JointConfig,
    pub muscles: Vec<MuscleTendonParams>,
    #[serde(default)]
    pub identify: BoundRules,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("run")
}

impl RunConfig {
    /// Parses TOML text. Errors carry the dotted path of the offending field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::config("<document>", e.to_string().trim().to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut field = e.path().to_string();
            let msg = e.inner().to_string();
            if let Some(name) = msg
                .split("missing field `")
                .nth(1)
                .and_then(|s| s.split('`').next())
            {
                field = if field == "." || field.is_empty() {
                    name.to_string()
                } else {
                    format!("{field}.{name}")
                };
            }
            Error::config(field, msg.trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn joint_model(&self) -> JointModel {
        let mut j = JointModel::from_anthropometry(
            self.subject.body_mass,
            self.subject.hand_length,
            self.joint.damping,
            self.joint.q_range,
        );
        j.angle_origin = self.joint.angle_origin;
        if let Some(i) = self.joint.inertia {
            j.inertia = i;
        }
        if let Some(g) = self.joint.grav_coeff {
            j.grav_coeff = g;
        }
        j
    }

    pub fn muscle_names(&self) -> Vec<String> {
        self.muscles.iter().map(|m| m.name.clone()).collect()
    }

    /// Initial muscle parameters with the generator's overrides applied.
    pub fn ground_truth(&self) -> Result<GroundTruth> {
        let gen = self
            .generator
            .as_ref()
            .ok_or_else(|| Error::config("generator", "no generator block in config"))?;
        let mut muscles = self.muscles.clone();
        for o in &gen.truth.muscles {
            let m = muscles.iter_mut().find(|m| m.name == o.name).ok_or_else(|| {
                Error::config("generator.truth.muscles", format!("unknown muscle `{}`", o.name))
            })?;
            if let Some(f) = o.f0m {
                m.f0m = f;
            }
            if let Some(l) = o.l0m {
                m.l0m = l;
            }
        }
        Ok(GroundTruth {
            a_shape: gen.truth.a_shape,
            muscles,
        })
    }

    pub fn a_init(&self) -> f64 {
        self.identify.a_init()
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |field: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        pos("subject.body_mass", self.subject.body_mass)?;
        pos("subject.hand_length", self.subject.hand_length)?;
        if !(self.joint.damping >= 0.0) {
            return Err(Error::config("joint.damping", "must be nonnegative"));
        }
        if let Some(i) = self.joint.inertia {
            pos("joint.inertia", i)?;
        }
        let [qlo, qhi] = self.joint.q_range;
        if !(qlo < qhi) {
            return Err(Error::config("joint.q_range", "must be a nonempty interval"));
        }
        if self.muscles.is_empty() {
            return Err(Error::config("muscles", "at least one muscle is required"));
        }
        let mut seen = HashSet::new();
        for (i, m) in self.muscles.iter().enumerate() {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::config(
                    format!("muscles[{i}].name"),
                    format!("duplicate muscle name `{}`", m.name),
                ));
            }
            m.validate(self.joint.q_range).map_err(|e| match e {
                Error::Config { .. } => e,
                other => Error::config(format!("muscles.{}", m.name), other.to_string()),
            })?;
        }

        let id = &self.identify;
        if !(id.f0m_fraction > 0.0 && id.f0m_fraction < 1.0) {
            return Err(Error::config("identify.f0m_fraction", "must lie in (0, 1)"));
        }
        pos("identify.l0m_delta", id.l0m_delta)?;
        for m in &self.muscles {
            if m.l0m - id.l0m_delta <= 0.0 {
                return Err(Error::config(
                    format!("muscles.{}.l0m", m.name),
                    "lower identification bound would be nonpositive",
                ));
            }
        }
        let [alo, ahi] = id.a_range;
        if !(ActivationCoeff::MIN <= alo && alo < ahi && ahi <= ActivationCoeff::MAX) {
            return Err(Error::config(
                "identify.a_range",
                format!(
                    "must be an increasing pair inside [{}, {}]",
                    ActivationCoeff::MIN,
                    ActivationCoeff::MAX
                ),
            ));
        }
        if let Some(a) = id.a_init {
            if !(alo < a && a < ahi) {
                return Err(Error::config("identify.a_init", "must lie strictly inside a_range"));
            }
        }

        if let Some(gen) = &self.generator {
            pos("generator.dt", gen.dt)?;
            if !(gen.noise_sigma >= 0.0) {
                return Err(Error::config("generator.noise_sigma", "must be nonnegative"));
            }
            pos("generator.noise_bandwidth", gen.noise_bandwidth)?;
            if gen.noise_bandwidth >= 0.5 / gen.dt {
                return Err(Error::config(
                    "generator.noise_bandwidth",
                    "must be below the Nyquist frequency",
                ));
            }
            ActivationCoeff::new(gen.truth.a_shape)
                .map_err(|e| Error::config("generator.truth.a_shape", e.to_string()))?;
            for (i, o) in gen.truth.muscles.iter().enumerate() {
                let field = format!("generator.truth.muscles[{i}]");
                if !seen.contains(o.name.as_str()) {
                    return Err(Error::config(
                        format!("{field}.name"),
                        format!("unknown muscle `{}`", o.name),
                    ));
                }
                if let Some(f) = o.f0m {
                    pos(&format!("{field}.f0m"), f)?;
                }
                if let Some(l) = o.l0m {
                    pos(&format!("{field}.l0m"), l)?;
                }
            }
            if gen.trials.is_empty() {
                return Err(Error::config("generator.trials", "at least one trial is required"));
            }
            let mut names = HashSet::new();
            for (i, t) in gen.trials.iter().enumerate() {
                let field = format!("generator.trials[{i}]");
                if !names.insert(t.name.as_str()) {
                    return Err(Error::config(
                        format!("{field}.name"),
                        format!("duplicate trial name `{}`", t.name),
                    ));
                }
                pos(&format!("{field}.duration"), t.duration)?;
                if t.excitations.len() != self.muscles.len() {
                    return Err(Error::config(
                        format!("{field}.excitations"),
                        format!(
                            "expected {} waveforms, found {}",
                            self.muscles.len(),
                            t.excitations.len()
                        ),
                    ));
                }
                if !(qlo <= t.q0 && t.q0 <= qhi) {
                    return Err(Error::config(format!("{field}.q0"), "outside joint.q_range"));
                }
            }
            for m in self.ground_truth()?.muscles {
                m.validate(self.joint.q_range)
                    .map_err(|e| Error::config("generator.truth", e.to_string()))?;
            }
        }

        for (name, v) in &self.preprocess.mvc {
            pos(&format!("preprocess.mvc.{name}"), *v)?;
        }
        let env = &self.preprocess.envelope;
        if !(env.band[0] > 0.0 && env.band[0] < env.band[1]) {
            return Err(Error::config("preprocess.band", "must be an increasing positive pair"));
        }
        pos("preprocess.envelope_corner", env.envelope_corner)?;
        pos("preprocess.output_rate", env.output_rate)?;
        for (field, order) in [
            ("preprocess.band_order", env.band_order),
            ("preprocess.envelope_order", env.envelope_order),
        ] {
            if order == 0 || !order.is_multiple_of(2) {
                return Err(Error::config(field, "must be a positive even number"));
            }
        }

        self.train.validate()
    }

    /// Two-muscle wrist (one flexor, one extensor) with Table-I-style
    /// initial guesses and a two-trial generator.
    pub fn wrist_default() -> Self {
        let muscles = vec![
            table_muscle("FCR", 407.0, 0.062, 0.62, 0.24, 0.05, -0.015, 0.006),
            table_muscle("ECRL", 337.0, 0.081, 0.81, 0.24, 0.0, 0.012, 0.005),
        ];
        let sine = |mean, amp, freq, phase| Waveform::Sine {
            mean,
            amplitude: amp,
            freq,
            phase,
        };
        let generator = GeneratorConfig {
            dt: 1e-3,
            noise_sigma: 0.0,
            noise_bandwidth: 20.0,
            truth: TruthConfig {
                a_shape: -2.29,
                muscles: vec![
                    TruthOverride {
                        name: "FCR".into(),
                        f0m: Some(300.0),
                        l0m: Some(0.071),
                    },
                    TruthOverride {
                        name: "ECRL".into(),
                        f0m: Some(470.0),
                        l0m: Some(0.09),
                    },
                ],
            },
            trials: vec![
                TrialSpec {
                    name: "sine".into(),
                    duration: 15.0,
                    q0: 0.0,
                    qdot0: 0.0,
                    start_at_equilibrium: true,
                    excitations: vec![
                        sine(0.3, 0.2, 0.5, 0.0),
                        sine(0.3, 0.2, 0.5, std::f64::consts::PI),
                    ],
                },
                TrialSpec {
                    name: "sine_wide".into(),
                    duration: 15.0,
                    q0: 0.0,
                    qdot0: 0.0,
                    start_at_equilibrium: true,
                    excitations: vec![
                        sine(0.35, 0.25, 0.5, 0.5 * std::f64::consts::PI),
                        sine(0.35, 0.25, 0.5, 1.5 * std::f64::consts::PI),
                    ],
                },
            ],
        };
        RunConfig {
            seed: 0,
            out_dir: default_out_dir(),
            subject: Subject {
                body_mass: 70.0,
                hand_length: 0.19,
            },
            joint: JointConfig {
                damping: default_damping(),
                q_range: [-1.2, 1.2],
                angle_origin: AngleOrigin::Horizontal,
                inertia: None,
                grav_coeff: None,
            },
            muscles,
            identify: BoundRules::default(),
            generator: Some(generator),
            preprocess: PreprocessConfig::default(),
            train: TrainConfig::default(),
        }
    }

    /// Five wrist muscles with the full Table-I initial guesses. Path
    /// polynomials are illustrative.
    pub fn wrist5() -> Self {
        let muscles = vec![
            table_muscle("FCR", 407.0, 0.062, 0.62, 0.24, 0.05, -0.015, 0.006),
            table_muscle("FCU", 479.0, 0.051, 0.51, 0.26, 0.2, -0.014, 0.005),
            table_muscle("ECRL", 337.0, 0.081, 0.81, 0.24, 0.0, 0.012, 0.005),
            table_muscle("ECRB", 252.0, 0.058, 0.58, 0.22, 0.16, 0.011, 0.005),
            table_muscle("ECU", 192.0, 0.062, 0.62, 0.2285, 0.06, 0.008, 0.004),
        ];
        RunConfig {
            muscles,
            generator: None,
            ..Self::wrist_default()
        }
    }
}

/// Muscle whose fiber sits at 0.85 of optimal length at `q = 0`, with a
/// quadratic path `lᵐᵗ(q) = c₀ + c₁·q + c₂·q²`.
#[allow(clippy::too_many_arguments)]
fn table_muscle(
    name: &str,
    f0m: f64,
    l0m: f64,
    v0: f64,
    lst: f64,
    phi0: f64,
    c1: f64,
    c2: f64,
) -> MuscleTendonParams {
    let c0 = lst + 0.85 * l0m * phi0.cos();
    MuscleTendonParams {
        name: name.into(),
        f0m,
        l0m,
        v0,
        lst,
        phi0,
        mt_length_poly: Polynomial::new(vec![c0, c1, c2]),
        moment_arm_poly: None,
    }
}
