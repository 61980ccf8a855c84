//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s. Calling
//! [`Tape::backward`] on a scalar result sweeps the record in reverse and
//! returns [`Gradients`] for every recorded node.
//!
//! ```
//! use myopinn::autodiff::{Array, Tape};
//!
//! let tape = Tape::new();
//! let x = tape.scalar(3.0);
//! let y = x.square();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(&x).item(), 6.0);
//! ```
//!
//! Binary operations broadcast `1 x 1`, `1 x n` and `m x 1` operands against
//! `m x n`. Physics code is written against the [`Real`] trait so the same
//! expression runs on plain floats (simulation) and on tape variables
//! (training).

mod array;
mod tape;

pub use array::Array;
pub use tape::{Gradients, Real, Tape, Var, MIN_DENOMINATOR};

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn square_derivative() {
        let tape = Tape::new();
        let x = tape.scalar(3.0);
        let g = tape.backward(x.square()).unwrap();
        assert_eq!(g.wrt(&x).item(), 6.0);
    }

    #[test]
    fn identity_and_constant_losses() {
        let tape = Tape::new();
        let x = tape.scalar(2.5);
        let g = tape.backward(x).unwrap();
        assert_eq!(g.wrt(&x).item(), 1.0);

        let tape = Tape::new();
        let x = tape.leaf(Array::column(vec![1.0, 2.0]));
        let c = tape.scalar(4.0);
        let g = tape.backward(c).unwrap();
        assert_eq!(g.wrt(&x).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn matmul_sum_gradient_is_outer_product_with_ones() {
        let tape = Tape::new();
        let w = tape.leaf(Array::new(2, 3, vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0]));
        let x = tape.leaf(Array::column(vec![0.3, -1.2, 2.0]));
        let loss = w.matmul(x).sum();
        let g = tape.backward(loss).unwrap();
        let gw = g.wrt(&w);
        for r in 0..2 {
            for c in 0..3 {
                assert_eq!(gw.get(r, c), [0.3, -1.2, 2.0][c]);
            }
        }
        assert_eq!(g.wrt(&x).as_slice(), &[4.0, -2.0, 1.5]);
    }

    #[test]
    fn broadcasting_reduces_gradients() {
        let tape = Tape::new();
        let m = tape.leaf(Array::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let row = tape.leaf(Array::row(vec![10.0, 20.0]));
        let s = tape.scalar(0.5);
        let loss = ((m + row) * s).sum();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(&row).as_slice(), &[1.0, 1.0]);
        assert_eq!(g.wrt(&s).item(), 1.0 + 2.0 + 3.0 + 4.0 + 60.0);
        assert_eq!(g.wrt(&m).as_slice(), &[0.5; 4]);
    }

    #[test]
    fn shape_mismatch_is_reported_by_backward() {
        let tape = Tape::new();
        let a = tape.leaf(Array::column(vec![1.0, 2.0]));
        let b = tape.leaf(Array::column(vec![1.0, 2.0, 3.0]));
        let loss = (a + b).sum();
        assert!(matches!(
            tape.backward(loss),
            Err(crate::Error::Shape { .. })
        ));
    }

    #[test]
    fn tiny_denominator_is_a_domain_error() {
        let tape = Tape::new();
        let a = tape.scalar(1.0);
        let b = tape.scalar(1e-13);
        let loss = a / b;
        assert!(matches!(tape.backward(loss), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let tape = Tape::new();
        let a = tape.leaf(Array::column(vec![1.0, 2.0]));
        assert!(tape.backward(a).is_err());
    }

    #[test]
    fn asin_clamped_zero_gradient_when_clipped() {
        let tape = Tape::new();
        let x = tape.scalar(0.999_999);
        let y = x.asin_clamped(0.0, 0.5);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(&x).item(), 0.0);
        assert!((y.item() - 0.5_f64.asin()).abs() < 1e-15);
    }

    #[test]
    fn relu_subgradient_at_zero() {
        let tape = Tape::new();
        let x = tape.leaf(Array::column(vec![-1.0, 0.0, 2.0]));
        let g = tape.backward(x.relu().sum()).unwrap();
        assert_eq!(g.wrt(&x).as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn unary_ops_match_finite_differences() {
        type F = fn(f64) -> f64;
        type G = fn(Var<'_>) -> Var<'_>;
        let cases: Vec<(&str, F, G)> = vec![
            ("exp", f64::exp, |v| v.exp()),
            ("sin", f64::sin, |v| v.sin()),
            ("cos", f64::cos, |v| v.cos()),
            ("sqrt", f64::sqrt, |v| v.sqrt()),
            ("pow", |x| x.powf(2.7), |v| v.powf(2.7)),
            ("asin", |x| x.asin(), |v| v.asin_clamped(-1.0, 1.0)),
            ("rdiv", |x| 2.0 / x, |v| v.rdiv(2.0)),
            ("rsub", |x| 2.0 - x, |v| v.rsub(2.0)),
        ];
        for (name, f, op) in cases {
            for &x0 in &[0.3, 0.7, 0.9] {
                let tape = Tape::new();
                let x = tape.scalar(x0);
                let g = tape.backward(op(x)).unwrap().wrt(&x).item();
                let want = fd(f, x0);
                assert!(
                    (g - want).abs() <= 1e-6 * want.abs().max(1.0),
                    "{name} at {x0}: {g} vs {want}"
                );
            }
        }
    }

    #[test]
    fn slices_and_concats_route_gradients() {
        let tape = Tape::new();
        let x = tape.leaf(Array::column(vec![1.0, 2.0, 3.0, 4.0]));
        let head = x.slice_rows(0, 2);
        let tail = x.slice_rows(2, 4).scale(3.0);
        let joined = tape.concat_rows(&[tail, head]);
        let wide = tape.concat_cols(&[joined, joined.square()]);
        let loss = wide.slice_cols(1, 2).sum() + joined.sum();
        let g = tape.backward(loss).unwrap();
        // head: d(x² + x) = 2x + 1 ; tail: d(9x² + 3x) = 18x + 3
        assert_eq!(g.wrt(&x).as_slice(), &[3.0, 5.0, 57.0, 75.0]);
    }

    #[test]
    fn backward_twice_is_identical() {
        let tape = Tape::new();
        let x = tape.leaf(Array::column(vec![0.1, 0.2, 0.3]));
        let loss = (x.exp() * x.sin()).mean();
        let a = tape.backward(loss).unwrap().wrt(&x);
        let b = tape.backward(loss).unwrap().wrt(&x);
        assert_eq!(a, b);
    }

    #[test]
    fn real_trait_is_shared_by_f64_and_var() {
        fn f<T: Real>(x: T) -> T {
            (x * 2.0 + 1.0).exp().rdiv(1.0) + x.square().sqrt()
        }
        let tape = Tape::new();
        let x = tape.scalar(0.4);
        assert!((f(x).item() - f(0.4_f64)).abs() < 1e-15);
    }
}
