//! Composite physics-informed loss, bounded parameter coordinates,
//! finite-difference kinematics and evaluation metrics.
//!
//! `L_total = w_q·L_q + w_fd·L_fd + w_F·L_F`, all weights 1 by default:
//!
//! * `L_q`: mean squared joint-angle error.
//! * `L_fd`: mean squared equation-of-motion residual, with the torque
//!   computed by the Hill model at the predicted kinematics.
//! * `L_F`: mean squared gap between predicted forces and Hill forces.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Array, Real, Tape, Var};
use crate::dynamics::{eom_residual_expr, JointModel};
use crate::error::{Error, Result};
use crate::hill::{self, ActivationCoeff, ForceInputs, MuscleTendonParams};

/// Rules that turn initial guesses into identification bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundRules {
    /// `F₀ᵐ ∈ [(1 − f)·F₀, (1 + f)·F₀]`.
    pub f0m_fraction: f64,
    /// `l₀ᵐ ∈ [l₀ − d, l₀ + d]`, m.
    pub l0m_delta: f64,
    pub a_range: [f64; 2],
    /// Initial activation shape factor; the middle of `a_range` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_init: Option<f64>,
}

impl Default for BoundRules {
    fn default() -> Self {
        BoundRules {
            f0m_fraction: 0.5,
            l0m_delta: 0.01,
            a_range: [ActivationCoeff::MIN, ActivationCoeff::MAX],
            a_init: None,
        }
    }
}

impl BoundRules {
    pub fn a_init(&self) -> f64 {
        self.a_init
            .unwrap_or(0.5 * (self.a_range[0] + self.a_range[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBound {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// Bound table in training order: `F0_<m>`, `l0m_<m>` per muscle, then `A`.
pub fn bound_table(muscles: &[MuscleTendonParams], rules: &BoundRules) -> Vec<ParamBound> {
    let mut out = Vec::with_capacity(2 * muscles.len() + 1);
    for m in muscles {
        out.push(ParamBound {
            name: format!("F0_{}", m.name),
            lo: m.f0m * (1.0 - rules.f0m_fraction),
            hi: m.f0m * (1.0 + rules.f0m_fraction),
        });
        out.push(ParamBound {
            name: format!("l0m_{}", m.name),
            lo: m.l0m - rules.l0m_delta,
            hi: m.l0m + rules.l0m_delta,
        });
    }
    out.push(ParamBound {
        name: "A".into(),
        lo: rules.a_range[0],
        hi: rules.a_range[1],
    });
    out
}

/// `lo + (hi − lo)·σ(θ)`.
pub fn sigmoid_bound<T: Real>(theta: T, lo: f64, hi: f64) -> T {
    ((-theta).exp() + 1.0).rdiv(1.0) * (hi - lo) + lo
}

/// Inverse of [`sigmoid_bound`].
pub fn sigmoid_unbound(x: f64, lo: f64, hi: f64) -> f64 {
    let s = (x - lo) / (hi - lo);
    (s / (1.0 - s)).ln()
}

/// Raw coordinates `θ` of the identified parameters plus their bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainableParams {
    /// Column of length `2N + 1`.
    pub theta: Array,
    pub bounds: Vec<ParamBound>,
}

/// Identified parameters realized on a tape.
#[derive(Clone)]
pub struct RealizedVars<'t> {
    pub f0m: Vec<Var<'t>>,
    pub l0m: Vec<Var<'t>>,
    pub a_shape: Var<'t>,
}

impl TrainableParams {
    /// Coordinates that realize the initial guesses (`θ = 0` for the
    /// symmetric muscle bounds).
    pub fn new(muscles: &[MuscleTendonParams], rules: &BoundRules) -> Self {
        let bounds = bound_table(muscles, rules);
        let mut theta = vec![0.0; bounds.len()];
        let a = bounds.last().expect("A bound");
        theta[bounds.len() - 1] = sigmoid_unbound(rules.a_init(), a.lo, a.hi);
        TrainableParams {
            theta: Array::column(theta),
            bounds,
        }
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.bounds.iter().map(|b| b.name.clone()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.theta
            .as_slice()
            .iter()
            .zip(&self.bounds)
            .map(|(t, b)| sigmoid_bound(*t, b.lo, b.hi))
            .collect()
    }

    /// Copies of `initial` with the identified fields replaced.
    pub fn realize(
        &self,
        initial: &[MuscleTendonParams],
    ) -> Result<(Vec<MuscleTendonParams>, ActivationCoeff)> {
        let v = self.values();
        if v.len() != 2 * initial.len() + 1 {
            return Err(Error::Shape {
                op: "realize",
                lhs: (v.len(), 1),
                rhs: (2 * initial.len() + 1, 1),
            });
        }
        let muscles = initial
            .iter()
            .enumerate()
            .map(|(i, m)| MuscleTendonParams {
                f0m: v[2 * i],
                l0m: v[2 * i + 1],
                ..m.clone()
            })
            .collect();
        // The sigmoid can round onto a closed bound; nudge back inside.
        let a = v[v.len() - 1].clamp(ActivationCoeff::MIN, ActivationCoeff::MAX);
        Ok((muscles, ActivationCoeff::new(a)?))
    }

    /// Realizes `θ` (a leaf holding [`TrainableParams::theta`]) on its tape.
    pub fn realize_var<'t>(&self, theta: Var<'t>) -> RealizedVars<'t> {
        let n = (self.bounds.len() - 1) / 2;
        let at = |i: usize| {
            let b = &self.bounds[i];
            sigmoid_bound(theta.slice_rows(i, i + 1), b.lo, b.hi)
        };
        RealizedVars {
            f0m: (0..n).map(|i| at(2 * i)).collect(),
            l0m: (0..n).map(|i| at(2 * i + 1)).collect(),
            a_shape: at(2 * n),
        }
    }
}

/// Velocity and acceleration of a uniformly sampled column: second-order
/// central differences inside, second-order one-sided at both ends.
pub fn fd_derivatives<'t>(q: Var<'t>, dt: f64) -> Result<(Var<'t>, Var<'t>)> {
    let n = q.shape().0;
    if n < 3 || q.shape().1 != 1 {
        return Err(Error::Domain(format!(
            "finite differences need a column of at least 3 samples, got {:?}",
            q.shape()
        )));
    }
    let tape = q.tape();
    let at = |k: usize| q.slice_rows(k, k + 1);
    let (prev, mid, next) = (q.slice_rows(0, n - 2), q.slice_rows(1, n - 1), q.slice_rows(2, n));
    let h2 = 1.0 / (2.0 * dt);
    let hh = 1.0 / (dt * dt);

    let v_in = (next - prev) * h2;
    let v0 = (at(0) * -3.0 + at(1) * 4.0 - at(2)) * h2;
    let v1 = (at(n - 1) * 3.0 - at(n - 2) * 4.0 + at(n - 3)) * h2;
    let qdot = tape.concat_rows(&[v0, v_in, v1]);

    let a_in = (next - mid * 2.0 + prev) * hh;
    let (a0, a1) = if n >= 4 {
        (
            (at(0) * 2.0 - at(1) * 5.0 + at(2) * 4.0 - at(3)) * hh,
            (at(n - 1) * 2.0 - at(n - 2) * 5.0 + at(n - 3) * 4.0 - at(n - 4)) * hh,
        )
    } else {
        (a_in, a_in)
    };
    let qddot = tape.concat_rows(&[a0, a_in, a1]);
    tape.check()?;
    Ok((qdot, qddot))
}

/// Plain-value version of [`fd_derivatives`].
pub fn fd_derivatives_values(q: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let tape = Tape::new();
    let (v, a) = fd_derivatives(tape.leaf(Array::column(q.to_vec())), dt)?;
    Ok((v.value().into_vec(), a.value().into_vec()))
}

/// `mean((q̂ − q)²)`.
pub fn loss_q<'t>(q_hat: Var<'t>, q: &[f64]) -> Result<Var<'t>> {
    if q_hat.shape() != (q.len(), 1) {
        return Err(Error::Shape {
            op: "loss_q",
            lhs: q_hat.shape(),
            rhs: (q.len(), 1),
        });
    }
    let target = q_hat.tape().leaf(Array::column(q.to_vec()));
    Ok((q_hat - target).square().mean())
}

/// Inputs shared by the physics terms for one contiguous segment.
pub struct PhysicsInputs<'a> {
    /// `T x N` enveloped EMG.
    pub emg: &'a Array,
    pub muscles: &'a [MuscleTendonParams],
    pub joint: &'a JointModel,
    pub dt: f64,
}

/// Hill force and moment arm of every muscle at the predicted kinematics.
pub fn hill_forces<'t>(
    q_hat: Var<'t>,
    qdot_hat: Var<'t>,
    realized: &RealizedVars<'t>,
    inp: &PhysicsInputs<'_>,
) -> Result<(Vec<Var<'t>>, Vec<Var<'t>>)> {
    let tape = q_hat.tape();
    let t = q_hat.shape().0;
    if inp.emg.shape() != (t, inp.muscles.len()) || realized.f0m.len() != inp.muscles.len() {
        return Err(Error::Shape {
            op: "hill_forces",
            lhs: inp.emg.shape(),
            rhs: (t, inp.muscles.len()),
        });
    }
    let mut forces = Vec::with_capacity(inp.muscles.len());
    let mut arms = Vec::with_capacity(inp.muscles.len());
    for (n, m) in inp.muscles.iter().enumerate() {
        let lmt = m.mt_length_poly.eval(q_hat);
        {
            let vals = lmt.value();
            if let Some(k) = vals.as_slice().iter().position(|l| *l <= m.lst) {
                let q = q_hat.value().as_slice()[k];
                return Err(m.geometry_error(q, vals.as_slice()[k]));
            }
        }
        let slope = m.mt_length_poly.derivative().eval(q_hat);
        let e = tape.leaf(Array::column(inp.emg.column_vec(n)));
        let a = hill::activation_expr(e, realized.a_shape);
        forces.push(hill::muscle_force_expr(ForceInputs {
            lmt,
            dlmt_dq: slope,
            qdot: qdot_hat,
            activation: a,
            f0m: realized.f0m[n],
            l0m: realized.l0m[n],
            v0: m.v0,
            lst: m.lst,
            phi0: m.phi0,
        }));
        arms.push(match &m.moment_arm_poly {
            Some(p) => p.eval(q_hat),
            None => -slope,
        });
    }
    Ok((forces, arms))
}

/// `L_fd` and `L_F` for one segment, sharing the Hill evaluation.
pub fn physics_losses<'t>(
    q_hat: Var<'t>,
    f_hat: Var<'t>,
    realized: &RealizedVars<'t>,
    inp: &PhysicsInputs<'_>,
) -> Result<(Var<'t>, Var<'t>)> {
    let tape = q_hat.tape();
    let (qdot, qddot) = fd_derivatives(q_hat, inp.dt)?;
    let (forces, arms) = hill_forces(q_hat, qdot, realized, inp)?;
    if f_hat.shape() != (q_hat.shape().0, forces.len()) {
        return Err(Error::Shape {
            op: "loss_force",
            lhs: f_hat.shape(),
            rhs: (q_hat.shape().0, forces.len()),
        });
    }
    let tau = forces
        .iter()
        .zip(&arms)
        .map(|(f, r)| *f * *r)
        .reduce(|a, b| a + b)
        .expect("at least one muscle");
    let l_fd = eom_residual_expr(q_hat, qdot, qddot, tau, inp.joint)
        .square()
        .mean();
    let l_f = (f_hat - tape.concat_cols(&forces)).square().mean();
    tape.check()?;
    Ok((l_fd, l_f))
}

/// `mean_t (M·q̈̂ + c·q̇̂ + G(q̂) − τ(κ))²`.
pub fn loss_fd<'t>(
    q_hat: Var<'t>,
    realized: &RealizedVars<'t>,
    inp: &PhysicsInputs<'_>,
) -> Result<Var<'t>> {
    let zeros = q_hat
        .tape()
        .leaf(Array::zeros(q_hat.shape().0, inp.muscles.len()));
    Ok(physics_losses(q_hat, zeros, realized, inp)?.0)
}

/// `mean_{t,n} (F̂ₙ − Fₙ(κ))²`.
pub fn loss_force<'t>(
    f_hat: Var<'t>,
    q_hat: Var<'t>,
    realized: &RealizedVars<'t>,
    inp: &PhysicsInputs<'_>,
) -> Result<Var<'t>> {
    Ok(physics_losses(q_hat, f_hat, realized, inp)?.1)
}

/// Per-term weights of the composite loss.
pub type LossWeights = [f64; 3];

/// Weighted components of one loss evaluation; `l_total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_q: f64,
    pub l_fd: f64,
    pub l_f: f64,
    pub l_total: f64,
}

impl LossBreakdown {
    pub fn from_components(l_q: f64, l_fd: f64, l_f: f64) -> Self {
        LossBreakdown {
            l_q,
            l_fd,
            l_f,
            l_total: l_q + l_fd + l_f,
        }
    }
}

/// Weighted sum of the three terms, plus the breakdown of weighted values.
pub fn loss_total<'t>(
    l_q: Var<'t>,
    l_fd: Var<'t>,
    l_f: Var<'t>,
    weights: LossWeights,
) -> (Var<'t>, LossBreakdown) {
    let (a, b, c) = (l_q * weights[0], l_fd * weights[1], l_f * weights[2]);
    let total = a + b + c;
    (
        total,
        LossBreakdown::from_components(a.item(), b.item(), c.item()),
    )
}

fn check_pair(u: &[f64], u_hat: &[f64], op: &'static str) -> Result<()> {
    if u.is_empty() || u.len() != u_hat.len() {
        return Err(Error::Shape {
            op,
            lhs: (u.len(), 1),
            rhs: (u_hat.len(), 1),
        });
    }
    Ok(())
}

/// Root mean square error.
pub fn rmse(u: &[f64], u_hat: &[f64]) -> Result<f64> {
    check_pair(u, u_hat, "rmse")?;
    let ss: f64 = u.iter().zip(u_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / u.len() as f64).sqrt())
}

/// Coefficient of determination `1 − SS_res/SS_tot`; may be negative.
pub fn r_squared(u: &[f64], u_hat: &[f64]) -> Result<f64> {
    check_pair(u, u_hat, "r_squared")?;
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    let ss_tot: f64 = u.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Domain(
            "R² is undefined for a reference series with zero variance".into(),
        ));
    }
    let ss_res: f64 = u.iter().zip(u_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}
