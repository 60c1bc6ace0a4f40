//! Tape-based reverse-mode automatic differentiation over `f64`.
//!
//! A [`Tape`] is an append-only list of nodes in evaluation order. Each node
//! stores the indices of its (up to two) operands together with the local
//! partial derivatives computed during the forward pass, so the backward
//! sweep is a single reverse loop multiplying adjoints by stored partials —
//! no re-interpretation of operation kinds is needed.
//!
//! [`Var`] is a copyable handle `(tape, index, value)`. All `Var`s combined
//! in one expression must come from the same tape; mixing tapes panics.
//! Producing a NaN or infinity during the forward pass is a hard error
//! (panic): silent non-finite values make every later diagnostic useless.
//!
//! Non-smooth primitives use fixed subgradient conventions:
//! `relu` at 0 propagates 0, and `clamp_min` propagates 0 whenever the
//! clamp is active. `sqrt` has an unbounded derivative at 0; callers avoid
//! it by branching on the value first (see the geometry code).

use std::cell::RefCell;
use std::panic::{catch_unwind, AssertUnwindSafe};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sentinel for "no operand".
const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    a: u32,
    b: u32,
    da: f64,
    db: f64,
}

/// Append-only record of a forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Number of nodes recorded so far.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drop all nodes but keep the allocation. Any `Var` created before the
    /// reset is invalidated; the borrow checker cannot see that, so callers
    /// must scope their `Var`s to one reset window (the training loop does).
    pub fn reset(&mut self) {
        self.nodes.get_mut().clear();
    }

    /// Create an input node. Its adjoint is available after [`Tape::backward`].
    pub fn leaf(&self, value: f64) -> Var<'_> {
        self.push(NONE, NONE, 0.0, 0.0, value)
    }

    fn push(&self, a: u32, b: u32, da: f64, db: f64, value: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        if !value.is_finite() {
            panic!("non-finite value ({value}) produced at tape node {idx}");
        }
        nodes.push(Node { a, b, da, db });
        Var {
            tape: self,
            idx,
            v: value,
        }
    }

    /// Reverse sweep from a scalar root. Roots are scalars by construction
    /// (`Var` is a single node), so no non-scalar case can arise. Returns
    /// one adjoint per node; nodes the root does not depend on get 0.
    /// The sweep is deterministic: repeated calls give bit-identical results.
    pub fn backward(&self, root: Var<'_>) -> Gradients {
        assert!(
            std::ptr::eq(root.tape, self),
            "backward called with a root from a different tape"
        );
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0f64; nodes.len()];
        adj[root.idx as usize] = 1.0;
        for i in (0..=root.idx as usize).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let n = nodes[i];
            if n.a != NONE {
                adj[n.a as usize] += g * n.da;
            }
            if n.b != NONE {
                adj[n.b as usize] += g * n.db;
            }
        }
        Gradients { adj }
    }
}

/// Adjoints produced by one backward sweep.
pub struct Gradients {
    adj: Vec<f64>,
}

impl Gradients {
    /// Adjoint of `var` (typically a leaf). 0 for nodes the root ignores.
    pub fn wrt(&self, var: Var<'_>) -> f64 {
        self.adj[var.idx as usize]
    }
}

/// Handle to one tape node: copyable, carries the forward value.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    v: f64,
}

impl<'t> Var<'t> {
    /// Forward value of this node.
    pub fn value(self) -> f64 {
        self.v
    }

    fn unary(self, value: f64, da: f64) -> Var<'t> {
        self.tape.push(self.idx, NONE, da, 0.0, value)
    }

    fn binary(self, rhs: Var<'t>, value: f64, da: f64, db: f64) -> Var<'t> {
        assert!(
            std::ptr::eq(self.tape, rhs.tape),
            "combined Vars from two different tapes"
        );
        self.tape.push(self.idx, rhs.idx, da, db, value)
    }
}

impl<'t> std::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.v + rhs.v, 1.0, 1.0)
    }
}

impl<'t> std::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.v - rhs.v, 1.0, -1.0)
    }
}

impl<'t> std::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.v * rhs.v, rhs.v, self.v)
    }
}

impl<'t> std::ops::Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(
            rhs,
            self.v / rhs.v,
            1.0 / rhs.v,
            -self.v / (rhs.v * rhs.v),
        )
    }
}

impl<'t> std::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.v, -1.0)
    }
}

impl<'t> std::ops::Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, k: f64) -> Var<'t> {
        self.add_const(k)
    }
}

impl<'t> std::ops::Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, k: f64) -> Var<'t> {
        self.add_const(-k)
    }
}

impl<'t> std::ops::Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, k: f64) -> Var<'t> {
        self.scale(k)
    }
}

impl<'t> std::ops::Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, k: f64) -> Var<'t> {
        self.scale(1.0 / k)
    }
}

impl<'t> std::ops::Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, v: Var<'t>) -> Var<'t> {
        v.add_const(self)
    }
}

impl<'t> std::ops::Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, v: Var<'t>) -> Var<'t> {
        (-v).add_const(self)
    }
}

impl<'t> std::ops::Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, v: Var<'t>) -> Var<'t> {
        v.scale(self)
    }
}

impl<'t> std::ops::Div<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn div(self, v: Var<'t>) -> Var<'t> {
        // d(k/x)/dx = -k/x^2
        v.unary(self / v.v, -self / (v.v * v.v))
    }
}

impl<'t> Real for Var<'t> {
    fn val(self) -> f64 {
        self.v
    }

    fn lift(self, constant: f64) -> Self {
        self.tape.leaf(constant)
    }

    fn scale(self, k: f64) -> Self {
        self.unary(self.v * k, k)
    }

    fn add_const(self, k: f64) -> Self {
        self.unary(self.v + k, 1.0)
    }

    fn clamp_min(self, lo: f64) -> Self {
        if self.v < lo {
            self.unary(lo, 0.0)
        } else {
            self.unary(self.v, 1.0)
        }
    }

    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.unary(s, 0.5 / s)
    }

    fn exp(self) -> Self {
        let e = self.v.exp();
        self.unary(e, e)
    }

    fn ln(self) -> Self {
        self.unary(self.v.ln(), 1.0 / self.v)
    }

    fn cosh(self) -> Self {
        self.unary(self.v.cosh(), self.v.sinh())
    }

    fn sinh(self) -> Self {
        self.unary(self.v.sinh(), self.v.cosh())
    }

    fn acosh(self) -> Self {
        self.unary(self.v.acosh(), 1.0 / (self.v * self.v - 1.0).sqrt())
    }

    fn tanh(self) -> Self {
        let t = self.v.tanh();
        self.unary(t, 1.0 - t * t)
    }

    fn relu(self) -> Self {
        if self.v > 0.0 {
            self.unary(self.v, 1.0)
        } else {
            self.unary(0.0, 0.0)
        }
    }

    fn sigmoid(self) -> Self {
        let s = Real::sigmoid(self.v);
        self.unary(s, s * (1.0 - s))
    }

    fn softplus(self) -> Self {
        self.unary(Real::softplus(self.v), Real::sigmoid(self.v))
    }
}

/// Outcome of a finite-difference check of the reverse-mode gradient.
#[derive(Debug, Clone)]
pub struct GradientCheck {
    /// Largest relative error over all coordinates.
    pub max_rel_err: f64,
    /// Coordinate attaining `max_rel_err`.
    pub worst_coordinate: usize,
    /// Relative error per coordinate.
    pub per_coordinate: Vec<f64>,
    /// Reverse-mode gradient.
    pub analytic: Vec<f64>,
    /// Central-difference gradient.
    pub numeric: Vec<f64>,
}

/// Compare the reverse-mode gradient of `f` at `p` against central
/// differences `(f(p + h·e_i) − f(p − h·e_i)) / 2h`.
///
/// The relative error per coordinate is
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`, so coordinates
/// where both gradients vanish report an error near zero instead of 0/0.
/// A non-finite value during any evaluation is reported as an error naming
/// the perturbed coordinate.
pub fn gradient_check<F>(f: F, p: &[f64], step: f64) -> Result<GradientCheck>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gradient-check step must be a positive finite number, got {step}"
        )));
    }
    if p.is_empty() {
        return Err(Error::InvalidArgument(
            "gradient check needs at least one coordinate".into(),
        ));
    }
    if let Some(i) = p.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gradient-check point has non-finite coordinate {i}"
        )));
    }

    let mut tape = Tape::new();

    // Forward + backward once for the analytic gradient.
    let analytic = {
        let vars: Vec<Var> = p.iter().map(|&x| tape.leaf(x)).collect();
        let root = catch_unwind(AssertUnwindSafe(|| f(&tape, &vars))).map_err(|_| {
            Error::NonFinite("gradient check: forward pass failed at the base point".into())
        })?;
        let grads = tape.backward(root);
        vars.iter().map(|&v| grads.wrt(v)).collect::<Vec<f64>>()
    };

    // Central differences, one coordinate at a time.
    let mut work = p.to_vec();
    let mut numeric = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let mut eval_at = |x: f64, tape: &mut Tape| -> Result<f64> {
            work[i] = x;
            tape.reset();
            let value = {
                let coords = &work;
                catch_unwind(AssertUnwindSafe(|| {
                    let vars: Vec<Var> = coords.iter().map(|&c| tape.leaf(c)).collect();
                    f(tape, &vars).value()
                }))
                .map_err(|_| {
                    Error::NonFinite(format!(
                        "gradient check: non-finite value while perturbing coordinate {i}"
                    ))
                })?
            };
            work[i] = p[i];
            Ok(value)
        };
        let plus = eval_at(p[i] + step, &mut tape)?;
        let minus = eval_at(p[i] - step, &mut tape)?;
        numeric.push((plus - minus) / (2.0 * step));
    }

    let mut per_coordinate = Vec::with_capacity(p.len());
    let mut max_rel_err = 0.0f64;
    let mut worst_coordinate = 0;
    for i in 0..p.len() {
        let denom = analytic[i].abs().max(numeric[i].abs()).max(1e-8);
        let rel = (analytic[i] - numeric[i]).abs() / denom;
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_coordinate = i;
        }
        per_coordinate.push(rel);
    }

    Ok(GradientCheck {
        max_rel_err,
        worst_coordinate,
        per_coordinate,
        analytic,
        numeric,
    })
}
