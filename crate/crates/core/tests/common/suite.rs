//! Tape gradients against finite differences, one case per differentiable
//! operation plus the full composite loss on a toy problem.

use myopinn::autodiff::{Array, Tape, Var};
use myopinn::config::RunConfig;
use myopinn::dynamics::{eom_residual_expr, JointModel};
use myopinn::hill::{self, ForceInputs};
use myopinn::loss::{self, PhysicsInputs, TrainableParams};
use myopinn::network::{self, Mode, NetworkParams, Normalization};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_gradient, fd_gradient, random_array, rel_err};

type Build = Box<dyn for<'t> Fn(Var<'t>) -> Var<'t>>;

fn build<F: for<'t> Fn(Var<'t>) -> Var<'t> + 'static>(f: F) -> Build {
    Box::new(f)
}

/// Random weights to contract a non-scalar output into a scalar.
fn contract<'t>(v: Var<'t>, w: &Array) -> Var<'t> {
    (v * v.tape().leaf(w.clone())).sum()
}

fn weights(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array {
    random_array(r, rows, cols, -1.0, 1.0, None)
}

fn fcr() -> hill::MuscleTendonParams {
    RunConfig::wrist_default().muscles[0].clone()
}

fn force_of<'t>(
    p: &hill::MuscleTendonParams,
    q: Var<'t>,
    qdot: Var<'t>,
    a: Var<'t>,
    f0: Var<'t>,
    l0: Var<'t>,
) -> Var<'t> {
    hill::muscle_force_expr(ForceInputs {
        lmt: p.mt_length_poly.eval(q),
        dlmt_dq: p.mt_length_poly.derivative().eval(q),
        qdot,
        activation: a,
        f0m: f0,
        l0m: l0,
        v0: p.v0,
        lst: p.lst,
        phi0: p.phi0,
    })
}

/// One random instance of every case: `(name, input, expression)`.
fn cases(r: &mut ChaCha8Rng) -> Vec<(&'static str, Array, Build)> {
    let (m, n) = (3, 4);
    let w = weights(r, m, n);
    let mut out: Vec<(&'static str, Array, Build)> = Vec::new();
    macro_rules! unary {
        ($name:expr, $lo:expr, $hi:expr, $avoid:expr, |$x:ident| $body:expr) => {{
            let w = w.clone();
            out.push((
                $name,
                random_array(r, m, n, $lo, $hi, $avoid),
                build(move |$x: Var<'_>| contract($body, &w)),
            ));
        }};
    }
    unary!("exp", -2.0, 2.0, None, |x| x.exp());
    unary!("sin", -3.0, 3.0, None, |x| x.sin());
    unary!("cos", -3.0, 3.0, None, |x| x.cos());
    unary!("sqrt", 0.2, 3.0, None, |x| x.sqrt());
    unary!("square", -2.0, 2.0, None, |x| x.square());
    unary!("powf", 0.2, 3.0, None, |x| x.powf(2.7));
    unary!("relu", -2.0, 2.0, Some((0.0, 1e-2)), |x| x.relu());
    unary!("clip_lower", -2.0, 2.0, Some((0.3, 1e-2)), |x| x.clip_lower(0.3));
    unary!("asin_clamped", -0.9, 0.9, None, |x| x.asin_clamped(-0.95, 0.95));
    unary!("scale", -2.0, 2.0, None, |x| x.scale(-1.7));
    unary!("offset", -2.0, 2.0, None, |x| x.offset(0.4).square());
    unary!("neg", -2.0, 2.0, None, |x| -x);
    unary!("scalar_ops", 0.5, 2.0, None, |x| (x + 1.0) * 2.0 - 3.0 / 1.0 + (x - 0.5) / 4.0);
    unary!("sum", -2.0, 2.0, None, |x| x.square().sum() * x);
    unary!("mean", -2.0, 2.0, None, |x| x.exp().mean() * x);
    unary!("slice_rows", -2.0, 2.0, None, |x| {
        let t = x.tape();
        t.concat_rows(&[x.slice_rows(1, 3).square(), x.slice_rows(0, 1)])
    });
    unary!("slice_cols", -2.0, 2.0, None, |x| {
        let t = x.tape();
        t.concat_cols(&[x.slice_cols(2, 4), x.slice_cols(0, 2).sin()])
    });

    // Binary operators, gradient w.r.t. each side, including a broadcast
    // row on either side.
    let other = random_array(r, m, n, 0.5, 2.0, None);
    let row = random_array(r, 1, n, 0.5, 2.0, None);
    macro_rules! binary {
        ($name:expr, $op:tt) => {{
            let (w1, o) = (w.clone(), other.clone());
            out.push((
                $name,
                random_array(r, m, n, 0.5, 2.0, None),
                build(move |x: Var<'_>| contract(x $op x.tape().leaf(o.clone()), &w1)),
            ));
            let (w1, o) = (w.clone(), other.clone());
            out.push((
                $name,
                random_array(r, m, n, 0.5, 2.0, None),
                build(move |x: Var<'_>| contract(x.tape().leaf(o.clone()) $op x, &w1)),
            ));
            let (w1, o) = (w.clone(), other.clone());
            out.push((
                $name,
                random_array(r, 1, n, 0.5, 2.0, None),
                build(move |x: Var<'_>| contract(x.tape().leaf(o.clone()) $op x, &w1)),
            ));
            let (w1, rw) = (w.clone(), row.clone());
            out.push((
                $name,
                random_array(r, m, n, 0.5, 2.0, None),
                build(move |x: Var<'_>| contract(x $op x.tape().leaf(rw.clone()), &w1)),
            ));
        }};
    }
    binary!("add", +);
    binary!("sub", -);
    binary!("mul", *);
    binary!("div", /);

    // Matrix product, each operand.
    let b = weights(r, n, 2);
    let wo = weights(r, m, 2);
    {
        let (b, wo) = (b.clone(), wo.clone());
        out.push((
            "matmul",
            weights(r, m, n),
            build(move |x: Var<'_>| contract(x.matmul(x.tape().leaf(b.clone())), &wo)),
        ));
    }
    {
        let (a, wo) = (weights(r, m, n), wo.clone());
        out.push((
            "matmul",
            b,
            build(move |x: Var<'_>| contract(x.tape().leaf(a.clone()).matmul(x), &wo)),
        ));
    }

    // Hill chain.
    let e_w = weights(r, 5, 1);
    {
        let a_shape = r.random_range(-3.0..-0.05);
        let w = e_w.clone();
        out.push((
            "activation_expr(e)",
            random_array(r, 5, 1, 0.0, 1.0, None),
            build(move |e: Var<'_>| contract(hill::activation_expr(e, e.tape().scalar(a_shape)), &w)),
        ));
        let e = random_array(r, 5, 1, 0.05, 1.0, None);
        let w = e_w.clone();
        out.push((
            "activation_expr(A)",
            Array::scalar(r.random_range(-3.0..-0.05)),
            build(move |a: Var<'_>| contract(hill::activation_expr(a.tape().leaf(e.clone()), a), &w)),
        ));
    }
    let m0 = fcr();
    {
        let w = e_w.clone();
        let p = m0.clone();
        out.push((
            "fiber_geometry(lmt)",
            random_array(r, 5, 1, 0.27, 0.32, None),
            build(move |lmt: Var<'_>| {
                let (lm, phi) = hill::fiber_geometry_expr(lmt, p.lst, lmt.tape().scalar(p.l0m), p.phi0);
                contract(lm + phi, &w)
            }),
        ));
        let w = e_w.clone();
        let p = m0.clone();
        let lmt = random_array(r, 5, 1, 0.27, 0.32, None);
        out.push((
            "fiber_geometry(l0m)",
            Array::scalar(r.random_range(0.052..0.072)),
            build(move |l0m: Var<'_>| {
                let (lm, phi) = hill::fiber_geometry_expr(l0m.tape().leaf(lmt.clone()), p.lst, l0m, p.phi0);
                contract(lm + phi, &w)
            }),
        ));
    }
    {
        let w = e_w.clone();
        out.push((
            "force_length_active",
            random_array(r, 5, 1, 0.4, 1.6, None),
            build(move |l: Var<'_>| contract(hill::force_length_active(l), &w)),
        ));
        let w = e_w.clone();
        out.push((
            "force_length_passive",
            random_array(r, 5, 1, 0.5, 1.6, Some((1.0, 1e-2))),
            build(move |l: Var<'_>| contract(hill::force_length_passive(l), &w)),
        ));
        let w = e_w.clone();
        out.push((
            "force_velocity",
            random_array(r, 5, 1, -1.5, 1.5, Some((0.0, 1e-2))).map(|v| if (v + 1.0).abs() < 1e-2 { -0.9 } else { v }),
            build(move |v: Var<'_>| contract(hill::force_velocity(v), &w)),
        ));
    }
    {
        // Composite force w.r.t. q (through lmt, slope and geometry), q̇,
        // activation, F0 and l0m.
        let w = e_w.clone();
        let qdot = random_array(r, 5, 1, -1.0, 1.0, None);
        let act = random_array(r, 5, 1, 0.0, 1.0, None);
        let (qd, ac) = (qdot.clone(), act.clone());
        let (f, pp) = (m0.clone(), m0.clone());
        out.push((
            "muscle_force(q)",
            random_array(r, 5, 1, -0.8, 0.8, None),
            build(move |q: Var<'_>| {
                let t = q.tape();
                contract(force_of(&f, q, t.leaf(qd.clone()), t.leaf(ac.clone()), t.scalar(pp.f0m), t.scalar(pp.l0m)), &w)
            }),
        ));
        let q = random_array(r, 5, 1, -0.8, 0.8, None);
        let (f, pp, w2, ac, q2) = (m0.clone(), m0.clone(), e_w.clone(), act.clone(), q.clone());
        out.push((
            "muscle_force(qdot)",
            qdot.clone(),
            build(move |qd: Var<'_>| {
                let t = qd.tape();
                contract(force_of(&f, t.leaf(q2.clone()), qd, t.leaf(ac.clone()), t.scalar(pp.f0m), t.scalar(pp.l0m)), &w2)
            }),
        ));
        let (f, pp, w3, qd, q3) = (m0.clone(), m0.clone(), e_w.clone(), qdot.clone(), q.clone());
        out.push((
            "muscle_force(a)",
            act.clone(),
            build(move |a: Var<'_>| {
                let t = a.tape();
                contract(force_of(&f, t.leaf(q3.clone()), t.leaf(qd.clone()), a, t.scalar(pp.f0m), t.scalar(pp.l0m)), &w3)
            }),
        ));
        let (f, w4, qd, ac, q4) = (m0.clone(), e_w.clone(), qdot.clone(), act.clone(), q.clone());
        out.push((
            "muscle_force(F0,l0m)",
            Array::column(vec![r.random_range(250.0..550.0), r.random_range(0.055..0.07)]),
            build(move |k: Var<'_>| {
                let t = k.tape();
                contract(
                    force_of(&f, t.leaf(q4.clone()), t.leaf(qd.clone()), t.leaf(ac.clone()), k.slice_rows(0, 1), k.slice_rows(1, 2)),
                    &w4,
                )
            }),
        ));
    }
    {
        let joint = RunConfig::wrist_default().joint_model();
        let w = e_w.clone();
        out.push((
            "eom_residual",
            random_array(r, 5, 4, -1.0, 1.0, None),
            build(move |s: Var<'_>| {
                let res = eom_residual_expr(
                    s.slice_cols(0, 1),
                    s.slice_cols(1, 2),
                    s.slice_cols(2, 3),
                    s.slice_cols(3, 4),
                    &joint,
                );
                contract(res.square(), &w)
            }),
        ));
    }
    {
        let w = weights(r, 8, 1);
        let w2 = w.clone();
        out.push((
            "fd_derivatives",
            random_array(r, 8, 1, -1.0, 1.0, None),
            build(move |q: Var<'_>| {
                let (v, a) = loss::fd_derivatives(q, 0.01).unwrap();
                contract(v, &w) + contract(a, &w2).scale(1e-3)
            }),
        ));
        let target: Vec<f64> = (0..8).map(|_| r.random_range(-1.0..1.0)).collect();
        out.push((
            "loss_q",
            random_array(r, 8, 1, -1.0, 1.0, None),
            build(move |q: Var<'_>| loss::loss_q(q, &target).unwrap()),
        ));
    }
    {
        let b = weights(r, 1, 1);
        let (lo, hi) = (-3.0, 0.01);
        out.push((
            "sigmoid_bound",
            random_array(r, 3, 1, -4.0, 4.0, None),
            build(move |t: Var<'_>| contract(loss::sigmoid_bound(t, lo, hi).square(), &Array::filled(3, 1, b.item()))),
        ));
    }
    out
}

/// Worst relative error over `instances` random draws of every case.
pub fn op_errors(instances: u64) -> Vec<(&'static str, f64)> {
    let mut worst: Vec<(&'static str, f64)> = Vec::new();
    for seed in 0..instances {
        let mut r = super::rng(1000 + seed);
        for (name, x, build) in cases(&mut r) {
            let e = check_gradient(&*build, &x);
            match worst.iter_mut().find(|(n, _)| *n == name) {
                Some(slot) => slot.1 = slot.1.max(e),
                None => worst.push((name, e)),
            }
        }
    }
    worst
}

/// Toy problem for the composite loss: two muscles, 10 samples, a small
/// network with random weights and random bounded parameters.
pub struct Toy {
    pub cfg: RunConfig,
    pub joint: JointModel,
    pub net: NetworkParams,
    pub theta: TrainableParams,
    pub x: Array,
    pub emg: Array,
    pub q: Vec<f64>,
    pub dt: f64,
}

impl Toy {
    pub fn new(seed: u64) -> Toy {
        let mut r = super::rng(seed);
        let cfg = RunConfig::wrist_default();
        let norm = Normalization {
            q_mean: -0.2,
            q_std: 0.3,
            force_scale: cfg.muscles.iter().map(|m| m.f0m).collect(),
        };
        let mut net = NetworkParams::init(2, &[6; 4], 0.0, norm, seed).unwrap();
        // Fresh biases are zero, which puts units fed only by dead inputs
        // exactly on the ReLU kink.
        for (i, b) in net.blocks_mut().into_iter().enumerate() {
            if i % 2 == 1 {
                for v in b.as_mut_slice() {
                    *v += r.random_range(0.05..0.3) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
                }
            }
        }
        let mut theta = TrainableParams::new(&cfg.muscles, &cfg.identify);
        for t in theta.theta.as_mut_slice() {
            *t += r.random_range(-1.5..1.5);
        }
        let n = 10;
        let emg = random_array(&mut r, n, 2, 0.05, 0.8, None);
        let mut x = Vec::new();
        for k in 0..n {
            x.extend([emg.get(k, 0), emg.get(k, 1), k as f64 / (n - 1) as f64]);
        }
        let q = (0..n).map(|_| r.random_range(-0.5..0.3)).collect();
        Toy {
            joint: cfg.joint_model(),
            cfg,
            net,
            theta,
            x: Array::new(n, 3, x),
            emg,
            q,
            dt: 0.01,
        }
    }

    /// `L_total` with the network blocks and `θ` all as leaves.
    pub fn loss<'t>(&self, tape: &'t Tape, blocks: &[Var<'t>], theta: Var<'t>) -> Var<'t> {
        let out = network::forward_batch(&self.net, blocks, tape.leaf(self.x.clone()), Mode::Eval, None).unwrap();
        let realized = self.theta.realize_var(theta);
        let inp = PhysicsInputs {
            emg: &self.emg,
            muscles: &self.cfg.muscles,
            joint: &self.joint,
            dt: self.dt,
        };
        let l_q = loss::loss_q(out.q, &self.q).unwrap();
        let (l_fd, l_f) = loss::physics_losses(out.q, out.forces, &realized, &inp).unwrap();
        loss::loss_total(l_q, l_fd, l_f, [1.0, 1.0, 1.0]).0
    }

    fn flat(&self) -> Vec<Array> {
        let mut v: Vec<Array> = self.net.blocks().into_iter().cloned().collect();
        v.push(self.theta.theta.clone());
        v
    }

    fn eval_flat(&self, parts: &[Array]) -> f64 {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = parts.iter().map(|a| tape.leaf(a.clone())).collect();
        let (blocks, theta) = vars.split_at(vars.len() - 1);
        self.loss(&tape, blocks, theta[0]).item()
    }

    /// Normwise relative error of the full gradient, every network block
    /// and `θ` stacked into one vector. Per-block ratios are meaningless
    /// when a whole layer is dead: the exact gradient is zero and the
    /// difference quotient is pure rounding noise.
    pub fn gradient_error(&self) -> f64 {
        let parts = self.flat();
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = parts.iter().map(|a| tape.leaf(a.clone())).collect();
        let (blocks, theta) = vars.split_at(vars.len() - 1);
        let l = self.loss(&tape, blocks, theta[0]);
        let g = tape.backward(l).unwrap();
        let (mut ad, mut fd) = (Vec::new(), Vec::new());
        for (i, v) in vars.iter().enumerate() {
            let f = |x: &Array| {
                let mut p = parts.clone();
                p[i] = x.clone();
                self.eval_flat(&p)
            };
            ad.extend_from_slice(g.wrt(v).as_slice());
            fd.extend_from_slice(fd_gradient(&f, &parts[i]).as_slice());
        }
        rel_err(&Array::column(ad), &Array::column(fd))
    }
}
