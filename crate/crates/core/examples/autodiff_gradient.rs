//! Reverse-mode gradient of a small expression, checked against central
//! differences.

use myopinn::autodiff::{Array, Tape};

fn f(x: f64, y: f64) -> f64 {
    (x * y).sin() + (x * x + 1.0).sqrt() * y.exp()
}

fn main() -> myopinn::Result<()> {
    let (x0, y0) = (0.7, -0.3);
    let tape = Tape::new();
    let x = tape.leaf(Array::scalar(x0));
    let y = tape.leaf(Array::scalar(y0));
    let out = (x * y).sin() + (x.square() + 1.0).sqrt() * y.exp();
    let g = tape.backward(out)?;

    let h = 1e-6;
    let dx = (f(x0 + h, y0) - f(x0 - h, y0)) / (2.0 * h);
    let dy = (f(x0, y0 + h) - f(x0, y0 - h)) / (2.0 * h);
    println!("f        = {:.12}", out.item());
    println!("df/dx    = {:.12}  (differences {dx:.12})", g.wrt(&x).item());
    println!("df/dy    = {:.12}  (differences {dy:.12})", g.wrt(&y).item());

    // Matrices work the same way: gradient of sum(relu(W·v)).
    let w = tape.leaf(Array::new(2, 3, vec![0.5, -1.0, 0.2, 0.3, 0.8, -0.4]));
    let v = tape.leaf(Array::column(vec![1.0, 0.5, -2.0]));
    let s = w.matmul(v).relu().sum();
    let g = tape.backward(s)?;
    println!("d sum(relu(Wv))/dW = {:?}", g.wrt(&w));
    Ok(())
}
