use std::cell::{Ref, RefCell};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::array::Array;
use crate::error::{Error, Result};

/// Smallest denominator magnitude accepted by [`Var`] division.
pub const MIN_DENOMINATOR: f64 = 1e-12;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    Offset(usize),
    Powf(usize, f64),
    Exp(usize),
    Sin(usize),
    Cos(usize),
    AsinClamped { x: usize, lo: f64, hi: f64 },
    Sqrt(usize),
    Relu(usize),
    ClipLower(usize, f64),
    Square(usize),
    Matmul(usize, usize),
    Sum(usize),
    Mean(usize),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    SliceRows { x: usize, start: usize },
    SliceCols { x: usize, start: usize },
}

struct Node {
    value: Array,
    op: Op,
}

/// Recording tape for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so walking the node list
/// backwards from the loss visits every node after all of its consumers.
/// Shape and domain errors raised while recording are sticky: the first one
/// is kept, the offending op produces a NaN placeholder, and
/// [`Tape::backward`] reports it.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    error: RefCell<Option<Error>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.borrow().len())
            .finish()
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({:?})", self.id, self.value())
    }
}

/// Gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Array>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the loss with respect to the leaf `var`; zeros if `var`
    /// did not influence the loss. Intermediate nodes are not retained.
    pub fn wrt(&self, var: &Var<'_>) -> Array {
        match &self.grads[var.id] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.id];
                Array::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            error: RefCell::new(None),
        }
    }

    /// Records an input value. Leaves are the only nodes whose gradients
    /// callers normally ask for, but every node can be queried.
    pub fn leaf(&self, value: Array) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.leaf(Array::scalar(value))
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First error recorded on this tape, if any.
    pub fn check(&self) -> Result<()> {
        match self.error.borrow().as_ref() {
            Some(e) => Err(clone_error(e)),
            None => Ok(()),
        }
    }

    fn push(&self, value: Array, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn fail(&self, err: Error, shape: (usize, usize)) -> Var<'_> {
        let mut slot = self.error.borrow_mut();
        if slot.is_none() {
            *slot = Some(err);
        }
        drop(slot);
        self.push(Array::filled(shape.0, shape.1, f64::NAN), Op::Leaf)
    }

    fn value_of(&self, id: usize) -> Ref<'_, Array> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    /// Concatenates along rows (stacks vertically). All parts need equal
    /// column counts.
    pub fn concat_rows<'t>(&'t self, parts: &[Var<'t>]) -> Var<'t> {
        let (value, ids) = {
            let nodes = self.nodes.borrow();
            let cols = nodes[parts[0].id].value.cols();
            let mut data = Vec::new();
            let mut rows = 0;
            for p in parts {
                let v = &nodes[p.id].value;
                if v.cols() != cols {
                    let (lhs, rhs) = ((rows, cols), v.shape());
                    drop(nodes);
                    return self.fail(
                        Error::Shape {
                            op: "concat_rows",
                            lhs,
                            rhs,
                        },
                        (1, cols),
                    );
                }
                rows += v.rows();
                data.extend_from_slice(v.as_slice());
            }
            (
                Array::new(rows, cols, data),
                parts.iter().map(|p| p.id).collect(),
            )
        };
        self.push(value, Op::ConcatRows(ids))
    }

    /// Concatenates along columns. All parts need equal row counts.
    pub fn concat_cols<'t>(&'t self, parts: &[Var<'t>]) -> Var<'t> {
        let (value, ids) = {
            let nodes = self.nodes.borrow();
            let rows = nodes[parts[0].id].value.rows();
            let mut cols = 0;
            for p in parts {
                let v = &nodes[p.id].value;
                if v.rows() != rows {
                    let (lhs, rhs) = ((rows, cols), v.shape());
                    drop(nodes);
                    return self.fail(
                        Error::Shape {
                            op: "concat_cols",
                            lhs,
                            rhs,
                        },
                        (rows, 1),
                    );
                }
                cols += v.cols();
            }
            let mut out = Array::zeros(rows, cols);
            let mut offset = 0;
            for p in parts {
                let v = &nodes[p.id].value;
                for r in 0..rows {
                    for c in 0..v.cols() {
                        out.set(r, offset + c, v.get(r, c));
                    }
                }
                offset += v.cols();
            }
            (out, parts.iter().map(|p| p.id).collect())
        };
        self.push(value, Op::ConcatCols(ids))
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Visits each recorded node at most once, in reverse creation order.
    /// The tape is not modified, so repeated calls give identical results.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        self.check()?;
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id].value;
        if root.shape() != (1, 1) {
            return Err(Error::Shape {
                op: "backward (loss must be scalar)",
                lhs: root.shape(),
                rhs: (1, 1),
            });
        }
        let n = loss.id + 1;
        let mut grads: Vec<Option<Array>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Array::scalar(1.0));

        for id in (0..n).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, reduce_to(&g, nodes[*a].value.shape()));
                    accumulate(&mut grads, *b, reduce_to(&g, nodes[*b].value.shape()));
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, reduce_to(&g, nodes[*a].value.shape()));
                    let neg = g.map(|x| -x);
                    accumulate(&mut grads, *b, reduce_to(&neg, nodes[*b].value.shape()));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    let ga = zip_broadcast(&g, vb, |g, y| g * y);
                    let gb = zip_broadcast(&g, va, |g, x| g * x);
                    accumulate(&mut grads, *a, reduce_to(&ga, va.shape()));
                    accumulate(&mut grads, *b, reduce_to(&gb, vb.shape()));
                }
                Op::Div(a, b) => {
                    let vb = &nodes[*b].value;
                    let out = &node.value;
                    let ga = zip_broadcast(&g, vb, |g, y| g / y);
                    // d(x/y)/dy = -(x/y)/y
                    let q = zip_broadcast(out, vb, |o, y| -o / y);
                    let gb = zip_broadcast(&g, &q, |g, q| g * q);
                    accumulate(&mut grads, *a, reduce_to(&ga, nodes[*a].value.shape()));
                    accumulate(&mut grads, *b, reduce_to(&gb, vb.shape()));
                }
                Op::Neg(x) => accumulate(&mut grads, *x, g.map(|v| -v)),
                Op::Scale(x, c) => {
                    let c = *c;
                    accumulate(&mut grads, *x, g.map(|v| v * c))
                }
                Op::Offset(x) => accumulate(&mut grads, *x, g),
                Op::Powf(x, p) => {
                    let p = *p;
                    let d = zip_same(&g, &nodes[*x].value, |g, x| g * p * x.powf(p - 1.0));
                    accumulate(&mut grads, *x, d)
                }
                Op::Exp(x) => {
                    let d = zip_same(&g, &node.value, |g, y| g * y);
                    accumulate(&mut grads, *x, d)
                }
                Op::Sin(x) => {
                    let d = zip_same(&g, &nodes[*x].value, |g, x| g * x.cos());
                    accumulate(&mut grads, *x, d)
                }
                Op::Cos(x) => {
                    let d = zip_same(&g, &nodes[*x].value, |g, x| -g * x.sin());
                    accumulate(&mut grads, *x, d)
                }
                Op::AsinClamped { x, lo, hi } => {
                    let (lo, hi) = (*lo, *hi);
                    let d = zip_same(&g, &nodes[*x].value, |g, x| {
                        if x < lo || x > hi {
                            0.0
                        } else {
                            g / (1.0 - x * x).sqrt()
                        }
                    });
                    accumulate(&mut grads, *x, d)
                }
                Op::Sqrt(x) => {
                    let d = zip_same(&g, &node.value, |g, y| 0.5 * g / y);
                    accumulate(&mut grads, *x, d)
                }
                Op::Relu(x) => {
                    let d = zip_same(&g, &nodes[*x].value, |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads, *x, d)
                }
                Op::ClipLower(x, lo) => {
                    let lo = *lo;
                    let d = zip_same(&g, &nodes[*x].value, |g, x| if x > lo { g } else { 0.0 });
                    accumulate(&mut grads, *x, d)
                }
                Op::Square(x) => {
                    let d = zip_same(&g, &nodes[*x].value, |g, x| 2.0 * g * x);
                    accumulate(&mut grads, *x, d)
                }
                Op::Matmul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    accumulate(&mut grads, *a, g.matmul_t(vb));
                    accumulate(&mut grads, *b, va.t_matmul(&g));
                }
                Op::Sum(x) => {
                    let (r, c) = nodes[*x].value.shape();
                    accumulate(&mut grads, *x, Array::filled(r, c, g.item()))
                }
                Op::Mean(x) => {
                    let (r, c) = nodes[*x].value.shape();
                    let n = (r * c) as f64;
                    accumulate(&mut grads, *x, Array::filled(r, c, g.item() / n))
                }
                Op::ConcatRows(ids) => {
                    let cols = g.cols();
                    let mut start = 0;
                    for &p in ids {
                        let rows = nodes[p].value.rows();
                        let part = g.as_slice()[start * cols..(start + rows) * cols].to_vec();
                        accumulate(&mut grads, p, Array::new(rows, cols, part));
                        start += rows;
                    }
                }
                Op::ConcatCols(ids) => {
                    let rows = g.rows();
                    let mut start = 0;
                    for &p in ids {
                        let cols = nodes[p].value.cols();
                        let mut part = Array::zeros(rows, cols);
                        for r in 0..rows {
                            for c in 0..cols {
                                part.set(r, c, g.get(r, start + c));
                            }
                        }
                        accumulate(&mut grads, p, part);
                        start += cols;
                    }
                }
                Op::SliceRows { x, start } => {
                    let (r, c) = nodes[*x].value.shape();
                    let mut full = Array::zeros(r, c);
                    full.as_mut_slice()[start * c..start * c + g.len()].copy_from_slice(g.as_slice());
                    accumulate(&mut grads, *x, full)
                }
                Op::SliceCols { x, start } => {
                    let (r, c) = nodes[*x].value.shape();
                    let mut full = Array::zeros(r, c);
                    for i in 0..r {
                        for j in 0..g.cols() {
                            full.set(i, start + j, g.get(i, j));
                        }
                    }
                    accumulate(&mut grads, *x, full)
                }
            }
        }

        Ok(Gradients {
            grads,
            shapes: nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::Shape { op, lhs, rhs } => Error::Shape {
            op,
            lhs: *lhs,
            rhs: *rhs,
        },
        other => Error::Domain(other.to_string()),
    }
}

fn accumulate(grads: &mut [Option<Array>], id: usize, g: Array) {
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    let dim = |x: usize, y: usize| {
        if x == y {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else if y == 1 {
            Some(x)
        } else {
            None
        }
    };
    Some((dim(a.0, b.0)?, dim(a.1, b.1)?))
}

fn zip_same(a: &Array, b: &Array, f: impl Fn(f64, f64) -> f64) -> Array {
    debug_assert_eq!(a.shape(), b.shape());
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Array::new(a.rows(), a.cols(), data)
}

/// Elementwise `f(a, b)` with row/column/scalar broadcasting. Callers have
/// already validated that the shapes broadcast.
fn zip_broadcast(a: &Array, b: &Array, f: impl Fn(f64, f64) -> f64) -> Array {
    if a.shape() == b.shape() {
        return zip_same(a, b, f);
    }
    let (rows, cols) = broadcast_shape(a.shape(), b.shape()).expect("shapes validated");
    let idx = |arr: &Array, r: usize, c: usize| {
        let rr = if arr.rows() == 1 { 0 } else { r };
        let cc = if arr.cols() == 1 { 0 } else { c };
        arr.get(rr, cc)
    };
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            data.push(f(idx(a, r, c), idx(b, r, c)));
        }
    }
    Array::new(rows, cols, data)
}

/// Sums a broadcast gradient back down to `shape`.
fn reduce_to(g: &Array, shape: (usize, usize)) -> Array {
    if g.shape() == shape {
        return g.clone();
    }
    let mut out = Array::zeros(shape.0, shape.1);
    for r in 0..g.rows() {
        for c in 0..g.cols() {
            let rr = if shape.0 == 1 { 0 } else { r };
            let cc = if shape.1 == 1 { 0 } else { c };
            let v = out.get(rr, cc) + g.get(r, c);
            out.set(rr, cc, v);
        }
    }
    out
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Copy of the forward value.
    pub fn value(&self) -> Array {
        self.tape.value_of(self.id).clone()
    }

    /// Forward value of a `1 x 1` variable.
    pub fn item(&self) -> f64 {
        self.tape.value_of(self.id).item()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.value_of(self.id).shape()
    }

    fn unary(self, op: Op, f: impl Fn(f64) -> f64) -> Var<'t> {
        let value = self.tape.value_of(self.id).map(f);
        self.tape.push(value, op)
    }

    fn binary(
        self,
        other: Var<'t>,
        name: &'static str,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Var<'t> {
        let (sa, sb) = (self.shape(), other.shape());
        match broadcast_shape(sa, sb) {
            Some(_) => {
                let value = {
                    let a = self.tape.value_of(self.id);
                    let b = self.tape.value_of(other.id);
                    zip_broadcast(&a, &b, f)
                };
                self.tape.push(value, op)
            }
            None => self.tape.fail(
                Error::Shape {
                    op: name,
                    lhs: sa,
                    rhs: sb,
                },
                sa,
            ),
        }
    }

    fn constant_like(self, c: f64) -> Var<'t> {
        self.tape.scalar(c)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Op::Exp(self.id), f64::exp)
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(Op::Sin(self.id), f64::sin)
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(Op::Cos(self.id), f64::cos)
    }

    pub fn sqrt(self) -> Var<'t> {
        self.unary(Op::Sqrt(self.id), f64::sqrt)
    }

    pub fn square(self) -> Var<'t> {
        self.unary(Op::Square(self.id), |x| x * x)
    }

    pub fn powf(self, p: f64) -> Var<'t> {
        self.unary(Op::Powf(self.id, p), |x| x.powf(p))
    }

    /// `max(x, 0)`; subgradient 0 at the kink.
    pub fn relu(self) -> Var<'t> {
        self.unary(Op::Relu(self.id), |x| x.max(0.0))
    }

    /// `max(x, lo)`; zero gradient wherever the clip is active.
    pub fn clip_lower(self, lo: f64) -> Var<'t> {
        self.unary(Op::ClipLower(self.id, lo), move |x| x.max(lo))
    }

    /// `asin(clamp(x, lo, hi))`; zero gradient outside `[lo, hi]`.
    pub fn asin_clamped(self, lo: f64, hi: f64) -> Var<'t> {
        self.unary(
            Op::AsinClamped {
                x: self.id,
                lo,
                hi,
            },
            move |x| x.clamp(lo, hi).asin(),
        )
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.unary(Op::Scale(self.id, c), move |x| x * c)
    }

    pub fn offset(self, c: f64) -> Var<'t> {
        self.unary(Op::Offset(self.id), move |x| x + c)
    }

    pub fn sum(self) -> Var<'t> {
        let v = self.tape.value_of(self.id).sum();
        self.tape.push(Array::scalar(v), Op::Sum(self.id))
    }

    pub fn mean(self) -> Var<'t> {
        let v = {
            let a = self.tape.value_of(self.id);
            a.sum() / a.len() as f64
        };
        self.tape.push(Array::scalar(v), Op::Mean(self.id))
    }

    pub fn matmul(self, other: Var<'t>) -> Var<'t> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa.1 != sb.0 {
            return self.tape.fail(
                Error::Shape {
                    op: "matmul",
                    lhs: sa,
                    rhs: sb,
                },
                (sa.0, sb.1),
            );
        }
        let value = {
            let a = self.tape.value_of(self.id);
            let b = self.tape.value_of(other.id);
            a.matmul(&b)
        };
        self.tape.push(value, Op::Matmul(self.id, other.id))
    }

    /// Rows `start..end`.
    pub fn slice_rows(self, start: usize, end: usize) -> Var<'t> {
        let (r, c) = self.shape();
        if start > end || end > r {
            return self.tape.fail(
                Error::Shape {
                    op: "slice_rows",
                    lhs: (r, c),
                    rhs: (start, end),
                },
                (end.saturating_sub(start).max(1), c),
            );
        }
        let value = {
            let a = self.tape.value_of(self.id);
            Array::new(end - start, c, a.as_slice()[start * c..end * c].to_vec())
        };
        self.tape.push(value, Op::SliceRows { x: self.id, start })
    }

    /// Columns `start..end`.
    pub fn slice_cols(self, start: usize, end: usize) -> Var<'t> {
        let (r, c) = self.shape();
        if start > end || end > c {
            return self.tape.fail(
                Error::Shape {
                    op: "slice_cols",
                    lhs: (r, c),
                    rhs: (start, end),
                },
                (r, end.saturating_sub(start).max(1)),
            );
        }
        let value = {
            let a = self.tape.value_of(self.id);
            let mut out = Array::zeros(r, end - start);
            for i in 0..r {
                for j in start..end {
                    out.set(i, j - start, a.get(i, j));
                }
            }
            out
        };
        self.tape.push(value, Op::SliceCols { x: self.id, start })
    }

    fn checked_div(self, other: Var<'t>) -> Var<'t> {
        let tiny = {
            let b = self.tape.value_of(other.id);
            b.as_slice().iter().position(|d| d.abs() < MIN_DENOMINATOR)
        };
        if let Some(i) = tiny {
            let d = self.tape.value_of(other.id).as_slice()[i];
            let shape = broadcast_shape(self.shape(), other.shape()).unwrap_or(self.shape());
            return self.tape.fail(
                Error::Domain(format!(
                    "division by {d:e} (|denominator| below {MIN_DENOMINATOR:e}) at element {i}"
                )),
                shape,
            );
        }
        self.binary(other, "div", Op::Div(self.id, other.id), |x, y| x / y)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "add", Op::Add(self.id, rhs.id), |x, y| x + y)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "sub", Op::Sub(self.id, rhs.id), |x, y| x - y)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "mul", Op::Mul(self.id, rhs.id), |x, y| x * y)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.checked_div(rhs)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(Op::Neg(self.id), |x| -x)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.offset(rhs)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.offset(-rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.scale(rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        if rhs.abs() < MIN_DENOMINATOR {
            let c = self.constant_like(rhs);
            return self.checked_div(c);
        }
        self.scale(1.0 / rhs)
    }
}

/// Elementwise real arithmetic shared by plain `f64` and tape variables, so
/// that physics code is written once and evaluated either way.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn square(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn relu(self) -> Self;
    fn clip_lower(self, lo: f64) -> Self;
    fn asin_clamped(self, lo: f64, hi: f64) -> Self;
    /// `c - self`
    fn rsub(self, c: f64) -> Self;
    /// `c / self`
    fn rdiv(self, c: f64) -> Self;
    /// Smallest forward value (the value itself for `f64`).
    fn min_value(&self) -> f64;
    fn max_value(&self) -> f64;
}

impl Real for f64 {
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn square(self) -> Self {
        self * self
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn relu(self) -> Self {
        self.max(0.0)
    }
    fn clip_lower(self, lo: f64) -> Self {
        self.max(lo)
    }
    fn asin_clamped(self, lo: f64, hi: f64) -> Self {
        self.clamp(lo, hi).asin()
    }
    fn rsub(self, c: f64) -> Self {
        c - self
    }
    fn rdiv(self, c: f64) -> Self {
        c / self
    }
    fn min_value(&self) -> f64 {
        *self
    }
    fn max_value(&self) -> f64 {
        *self
    }
}

impl<'t> Real for Var<'t> {
    fn exp(self) -> Self {
        Var::exp(self)
    }
    fn sin(self) -> Self {
        Var::sin(self)
    }
    fn cos(self) -> Self {
        Var::cos(self)
    }
    fn sqrt(self) -> Self {
        Var::sqrt(self)
    }
    fn square(self) -> Self {
        Var::square(self)
    }
    fn powf(self, p: f64) -> Self {
        Var::powf(self, p)
    }
    fn relu(self) -> Self {
        Var::relu(self)
    }
    fn clip_lower(self, lo: f64) -> Self {
        Var::clip_lower(self, lo)
    }
    fn asin_clamped(self, lo: f64, hi: f64) -> Self {
        Var::asin_clamped(self, lo, hi)
    }
    fn rsub(self, c: f64) -> Self {
        (-self).offset(c)
    }
    fn rdiv(self, c: f64) -> Self {
        let num = self.constant_like(c);
        num / self
    }
    fn min_value(&self) -> f64 {
        self.tape
            .value_of(self.id)
            .as_slice()
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x))
    }
    fn max_value(&self) -> f64 {
        self.tape
            .value_of(self.id)
            .as_slice()
            .iter()
            .fold(f64::NEG_INFINITY, |m, &x| m.max(x))
    }
}
