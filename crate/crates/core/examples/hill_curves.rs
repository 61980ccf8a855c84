//! Tabulates the activation map and the normalized force-length and
//! force-velocity curves used by the muscle model.

use myopinn::hill::{self, ActivationCoeff};

fn main() -> myopinn::Result<()> {
    println!("e      a(A=-3)  a(A=-2.29)  a(A=0.01)");
    for k in 0..=10 {
        let e = k as f64 / 10.0;
        let a = |s: f64| hill::activation(e, ActivationCoeff::new(s).unwrap());
        println!("{e:.1}    {:.4}   {:.4}      {:.4}", a(-3.0)?, a(-2.29)?, a(0.01)?);
    }

    println!("\nl/l0   active  passive");
    for k in 0..=12 {
        let l = 0.4 + 0.1 * k as f64;
        println!(
            "{l:.1}    {:.4}  {:.4}",
            hill::force_length_active(l),
            hill::force_length_passive(l)
        );
    }

    println!("\nv/vmax  f_v");
    for k in -5..=5 {
        let v = 0.2 * k as f64;
        println!("{v:+.1}    {:.4}", hill::force_velocity(v));
    }

    let fcr = &myopinn::config::RunConfig::wrist_default().muscles[0];
    println!("\nq      lm(mm)  pennation  F(a=1)  arm(mm)");
    for k in -4..=2 {
        let q = 0.2 * k as f64;
        let (lm, phi) = hill::fiber_geometry(q, fcr)?;
        println!(
            "{q:+.1}   {:.2}   {:.4}     {:.1}   {:.2}",
            lm * 1e3,
            phi,
            hill::muscle_force(q, 0.0, 1.0, fcr)?,
            hill::moment_arm(q, fcr) * 1e3
        );
    }
    Ok(())
}
