//! Forward simulation of the two-muscle wrist under antagonist sine
//! excitation, with the equation-of-motion residual of the result.

use myopinn::config::RunConfig;
use myopinn::dynamics::{self, WaveformExcitation};
use myopinn::hill::ActivationCoeff;

fn main() -> myopinn::Result<()> {
    let cfg = RunConfig::wrist_default();
    let truth = cfg.ground_truth()?;
    let joint = cfg.joint_model();
    let trial = &cfg.generator.as_ref().expect("preset has a generator").trials[0];
    let exc = WaveformExcitation(trial.excitations.clone());
    let a = ActivationCoeff::new(truth.a_shape)?;
    let q0 = dynamics::static_equilibrium(&exc, a, &truth.muscles, &joint)?;
    let dt = 1e-3;
    let n = (trial.duration / dt).round() as usize + 1;
    let tr = dynamics::simulate(&exc, q0, 0.0, a, &truth.muscles, &joint, dt, n)?;

    println!("inertia {:.5} kg m^2, gravity {:.4} N m", joint.inertia, joint.grav_coeff);
    println!("start at equilibrium q0 = {q0:.4} rad");
    println!("t(s)   e_FCR  e_ECRL  q(rad)   F_FCR(N)  F_ECRL(N)");
    let f = tr.forces.as_ref().expect("simulated trials carry forces");
    for k in (0..tr.len()).step_by(1000) {
        println!(
            "{:5.1}  {:.3}  {:.3}   {:+.4}  {:8.2}  {:8.2}",
            tr.time[k], tr.emg[0][k], tr.emg[1][k], tr.q[k], f[0][k], f[1][k]
        );
    }
    let res = dynamics::trial_eom_residuals(&tr, &truth.muscles, &joint)?;
    let tau = dynamics::trial_torque(&tr, &truth.muscles).expect("forces present");
    let peak = tau.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("max residual {worst:.2e} N m ({:.2e} of peak torque)", worst / peak);
    Ok(())
}
