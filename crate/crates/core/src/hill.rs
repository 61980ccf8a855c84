//! Hill-type musculotendon model with a rigid tendon.
//!
//! Every function here is pure. The `*_expr` variants are generic over
//! [`Real`] so the same expressions drive the forward simulator (`f64`) and
//! the training losses (tape variables); the plain-`f64` entry points add
//! precondition checks on top.
//!
//! Curve shapes:
//! - active force-length: Gaussian `exp(-(l̄-1)²/0.45)`
//! - passive force-length: normalized exponential with `k_pe = 4`,
//!   `ε₀ = 0.6`, zero for slack fibers
//! - force-velocity: Hill hyperbola for shortening (`a_f = 0.25`) joined C¹
//!   at zero velocity to a rational lengthening branch saturating at 1.4.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};

/// Width of the active force-length Gaussian.
pub const FL_ACTIVE_WIDTH: f64 = 0.45;
/// Passive exponential shape factor.
pub const FL_PASSIVE_SHAPE: f64 = 4.0;
/// Passive strain at which the passive force equals `F₀ᵐ`.
pub const FL_PASSIVE_STRAIN: f64 = 0.6;
/// Hill hyperbola curvature for shortening.
pub const FV_SHORTENING_CURVATURE: f64 = 0.25;
/// Asymptotic eccentric force multiplier.
pub const FV_LENGTHENING_MAX: f64 = 1.4;
/// Rational-branch offset that makes the lengthening slope at zero equal to
/// the shortening slope `1 + 1/a_f = 5`.
pub const FV_LENGTHENING_OFFSET: f64 = 0.08;
/// Below this magnitude the activation nonlinearity is replaced by its
/// linear limit.
pub const ACTIVATION_LINEAR_LIMIT: f64 = 1e-6;
/// Upper clip applied to the pennation `asin` argument.
pub const ASIN_UPPER: f64 = 1.0 - 1e-12;

/// Polynomial in the joint angle, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval<T: Real>(&self, q: T) -> T {
        let mut iter = self.0.iter().rev();
        let Some(&lead) = iter.next() else {
            return q * 0.0;
        };
        let mut acc = q * 0.0 + lead;
        for &c in iter {
            acc = acc * q + c;
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }
}

/// Per-muscle Hill parameters plus the musculotendon-length polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleTendonParams {
    pub name: String,
    /// Maximum isometric force, N.
    pub f0m: f64,
    /// Optimal fiber length, m.
    pub l0m: f64,
    /// Maximum contraction velocity, m/s.
    pub v0: f64,
    /// Tendon slack length, m.
    pub lst: f64,
    /// Pennation at optimal fiber length, rad.
    pub phi0: f64,
    /// `lᵐᵗ(q)` in meters.
    pub mt_length_poly: Polynomial,
    /// Optional explicit moment-arm polynomial. When absent the moment arm
    /// is `-dlᵐᵗ/dq`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_arm_poly: Option<Polynomial>,
}

impl MuscleTendonParams {
    /// Checks the parameter invariants, and that `lᵐᵗ(q) > lₛᵗ` on a dense
    /// grid over `q_range`.
    pub fn validate(&self, q_range: [f64; 2]) -> Result<()> {
        let field = |f: &str| format!("muscles.{}.{f}", self.name);
        if !(self.f0m > 0.0) {
            return Err(Error::config(field("f0m"), "must be positive"));
        }
        if !(self.l0m > 0.0) {
            return Err(Error::config(field("l0m"), "must be positive"));
        }
        if !(self.v0 > 0.0) {
            return Err(Error::config(field("v0"), "must be positive"));
        }
        if !(self.lst >= 0.0) {
            return Err(Error::config(field("lst"), "must be nonnegative"));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.phi0) {
            return Err(Error::config(field("phi0"), "must lie in [0, pi/2)"));
        }
        if self.mt_length_poly.degree() < 1 {
            return Err(Error::config(
                field("mt_length_poly"),
                "needs degree >= 1",
            ));
        }
        const GRID: usize = 200;
        for i in 0..=GRID {
            let q = q_range[0] + (q_range[1] - q_range[0]) * i as f64 / GRID as f64;
            let lmt = self.mt_length(q);
            if lmt <= self.lst {
                return Err(self.geometry_error(q, lmt));
            }
        }
        Ok(())
    }

    pub fn mt_length(&self, q: f64) -> f64 {
        self.mt_length_poly.eval(q)
    }

    pub fn mt_length_slope(&self, q: f64) -> f64 {
        self.mt_length_poly.derivative().eval(q)
    }

    /// Constant fiber thickness `l₀ᵐ·sin φ₀`.
    pub fn thickness(&self) -> f64 {
        self.l0m * self.phi0.sin()
    }

    pub(crate) fn geometry_error(&self, q: f64, lmt: f64) -> Error {
        Error::Geometry {
            muscle: self.name.clone(),
            q,
            lmt,
            lst: self.lst,
        }
    }
}

/// Shape factor `A` of the exponential EMG-to-activation map.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivationCoeff(f64);

impl ActivationCoeff {
    pub const MIN: f64 = -3.0;
    pub const MAX: f64 = 0.01;

    pub fn new(a: f64) -> Result<Self> {
        if !(Self::MIN..=Self::MAX).contains(&a) {
            return Err(Error::Domain(format!(
                "activation coefficient {a} outside [{}, {}]",
                Self::MIN,
                Self::MAX
            )));
        }
        Ok(ActivationCoeff(a))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Instantaneous fiber state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuscleState {
    /// Fiber length, m.
    pub lm: f64,
    /// Pennation, rad.
    pub phi: f64,
    /// Fiber velocity, m/s (shortening negative).
    pub vm: f64,
    pub activation: f64,
}

/// `(exp(A·e) − 1)/(exp(A) − 1)`.
pub fn activation_expr<T: Real>(e: T, a_shape: T) -> T {
    if a_shape.max_value().abs() < ACTIVATION_LINEAR_LIMIT {
        return e;
    }
    ((e * a_shape).exp() - 1.0) / (a_shape.exp() - 1.0)
}

/// Activation from an enveloped EMG sample in `[0, 1]`.
pub fn activation(e: f64, a_shape: ActivationCoeff) -> Result<f64> {
    const TOL: f64 = 1e-9;
    if !(-TOL..=1.0 + TOL).contains(&e) {
        return Err(Error::Domain(format!("EMG envelope {e} outside [0, 1]")));
    }
    let e = e.clamp(0.0, 1.0);
    // `+ 0.0` turns a rounded -0.0 at e = 0 into +0.0.
    Ok(activation_expr(e, a_shape.value()).clamp(0.0, 1.0) + 0.0)
}

/// Rigid-tendon fiber length and pennation from `lᵐᵗ`.
///
/// With the tendon at slack length and constant thickness `w`, the fiber
/// satisfies `lm·cos φ = lᵐᵗ − lₛᵗ` and `lm·sin φ = w`.
pub fn fiber_geometry_expr<T: Real>(lmt: T, lst: f64, l0m: T, phi0: f64) -> (T, T) {
    let along = lmt - lst;
    let w = l0m * phi0.sin();
    let lm = (along.square() + w.square()).sqrt();
    let phi = (w / lm).asin_clamped(0.0, ASIN_UPPER);
    (lm, phi)
}

/// Fiber velocity by the chain rule on the closed-form fiber length.
pub fn fiber_velocity_expr<T: Real>(lmt: T, dlmt_dq: T, qdot: T, lst: f64, lm: T) -> T {
    (lmt - lst) * dlmt_dq * qdot / lm
}

pub fn fiber_geometry(q: f64, params: &MuscleTendonParams) -> Result<(f64, f64)> {
    let lmt = params.mt_length(q);
    if lmt <= params.lst {
        return Err(params.geometry_error(q, lmt));
    }
    Ok(fiber_geometry_expr(lmt, params.lst, params.l0m, params.phi0))
}

pub fn fiber_velocity(q: f64, qdot: f64, params: &MuscleTendonParams) -> Result<f64> {
    let lmt = params.mt_length(q);
    let (lm, _) = fiber_geometry(q, params)?;
    Ok(fiber_velocity_expr(
        lmt,
        params.mt_length_slope(q),
        qdot,
        params.lst,
        lm,
    ))
}

pub fn force_length_active<T: Real>(lbar: T) -> T {
    ((lbar - 1.0).square() * (-1.0 / FL_ACTIVE_WIDTH)).exp()
}

pub fn force_length_passive<T: Real>(lbar: T) -> T {
    let denom = FL_PASSIVE_SHAPE.exp() - 1.0;
    (((lbar - 1.0) * (FL_PASSIVE_SHAPE / FL_PASSIVE_STRAIN)).exp() - 1.0)
        .clip_lower(0.0)
        / denom
}

/// Force-velocity multiplier; `vbar` is `vm/v0`, shortening negative.
pub fn force_velocity<T: Real>(vbar: T) -> T {
    let v = vbar.clip_lower(-1.0);
    let pos = v.relu();
    let neg = -((-v).relu());
    let shortening = (neg + 1.0) / (neg * (-1.0 / FV_SHORTENING_CURVATURE) + 1.0);
    let lengthening =
        (pos * FV_LENGTHENING_MAX + FV_LENGTHENING_OFFSET) / (pos + FV_LENGTHENING_OFFSET);
    shortening + lengthening - 1.0
}

/// Inputs to [`muscle_force_expr`]. Identified parameters (`f0m`, `l0m`) are
/// generic so they can be tape variables; the rest stay fixed.
#[derive(Clone, Copy)]
pub struct ForceInputs<T> {
    pub lmt: T,
    pub dlmt_dq: T,
    pub qdot: T,
    pub activation: T,
    pub f0m: T,
    pub l0m: T,
    pub v0: f64,
    pub lst: f64,
    pub phi0: f64,
}

/// `F₀ᵐ·(a·f_v(v̄)·f_a(l̄) + f_p(l̄))·cos φ`.
pub fn muscle_force_expr<T: Real>(inp: ForceInputs<T>) -> T {
    let (lm, phi) = fiber_geometry_expr(inp.lmt, inp.lst, inp.l0m, inp.phi0);
    let vm = fiber_velocity_expr(inp.lmt, inp.dlmt_dq, inp.qdot, inp.lst, lm);
    let lbar = lm / inp.l0m;
    let vbar = vm / inp.v0;
    let active = inp.activation * force_velocity(vbar) * force_length_active(lbar);
    inp.f0m * (active + force_length_passive(lbar)) * phi.cos()
}

pub fn muscle_force(q: f64, qdot: f64, a: f64, params: &MuscleTendonParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Domain(format!("activation {a} outside [0, 1]")));
    }
    let lmt = params.mt_length(q);
    if lmt <= params.lst {
        return Err(params.geometry_error(q, lmt));
    }
    Ok(muscle_force_expr(ForceInputs {
        lmt,
        dlmt_dq: params.mt_length_slope(q),
        qdot,
        activation: a,
        f0m: params.f0m,
        l0m: params.l0m,
        v0: params.v0,
        lst: params.lst,
        phi0: params.phi0,
    }))
}

/// Moment arm in meters: the explicit polynomial when configured, else the
/// tendon-excursion value `-dlᵐᵗ/dq`.
pub fn moment_arm(q: f64, params: &MuscleTendonParams) -> f64 {
    match &params.moment_arm_poly {
        Some(p) => p.eval(q),
        None => -params.mt_length_slope(q),
    }
}

/// Fiber state at `(q, qdot)` for activation `a`.
pub fn muscle_state(q: f64, qdot: f64, a: f64, params: &MuscleTendonParams) -> Result<MuscleState> {
    let (lm, phi) = fiber_geometry(q, params)?;
    let vm = fiber_velocity(q, qdot, params)?;
    Ok(MuscleState {
        lm,
        phi,
        vm,
        activation: a,
    })
}
