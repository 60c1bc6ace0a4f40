//! Scalar abstraction shared by the plain-number and autodiff code paths.
//!
//! Geometry and model code is written once, generically over [`Real`]. The
//! two implementations are `f64` (fast inference/evaluation path) and
//! [`crate::autodiff::Var`] (records every operation on a tape so gradients
//! can be replayed backwards). Branch decisions inside generic code must be
//! made on [`Real::val`], never on the symbolic value, so that both paths
//! take identical branches for identical inputs.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar numbers the geometry and the model can compute with.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Current numeric value. Used for branching and diagnostics only.
    fn val(self) -> f64;

    /// A constant in the same computational context as `self`
    /// (same tape for tape variables; plain number for `f64`).
    fn lift(self, constant: f64) -> Self;

    /// Multiply by a plain constant.
    fn scale(self, k: f64) -> Self;

    /// Add a plain constant.
    fn add_const(self, k: f64) -> Self;

    /// Lower clamp against a plain constant: `max(self, lo)`.
    /// The clamped regime propagates zero gradient on the tape path.
    fn clamp_min(self, lo: f64) -> Self;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn cosh(self) -> Self;
    fn sinh(self) -> Self;
    fn acosh(self) -> Self;
    fn tanh(self) -> Self;

    /// `max(self, 0)`, with the zero-input subgradient taken as 0.
    fn relu(self) -> Self;

    /// Numerically stable logistic function.
    fn sigmoid(self) -> Self;

    /// Numerically stable `ln(1 + exp(self))`.
    fn softplus(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn val(self) -> f64 {
        self
    }

    #[inline]
    fn lift(self, constant: f64) -> Self {
        constant
    }

    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }

    #[inline]
    fn add_const(self, k: f64) -> Self {
        self + k
    }

    #[inline]
    fn clamp_min(self, lo: f64) -> Self {
        if self < lo {
            lo
        } else {
            self
        }
    }

    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }

    #[inline]
    fn cosh(self) -> Self {
        f64::cosh(self)
    }

    #[inline]
    fn sinh(self) -> Self {
        f64::sinh(self)
    }

    #[inline]
    fn acosh(self) -> Self {
        f64::acosh(self)
    }

    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }

    #[inline]
    fn sigmoid(self) -> Self {
        // Split on sign so the exponential never overflows.
        if self >= 0.0 {
            1.0 / (1.0 + (-self).exp())
        } else {
            let e = self.exp();
            e / (1.0 + e)
        }
    }

    #[inline]
    fn softplus(self) -> Self {
        // softplus(x) = max(x, 0) + ln(1 + exp(-|x|))
        self.max(0.0) + (-self.abs()).exp().ln_1p()
    }
}

/// Borrowed row-major matrix view over a scalar slice.
#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a, S> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [S],
}

impl<'a, S: Real> MatRef<'a, S> {
    pub fn new(rows: usize, cols: usize, data: &'a [S]) -> Self {
        assert_eq!(
            rows * cols,
            data.len(),
            "matrix data length must equal rows*cols"
        );
        MatRef { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &'a [S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Dense matrix–vector product. Panics if `x.len() != self.cols`.
    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }
}

/// Inner product of equal-length slices, accumulated left to right.
pub fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    assert_eq!(a.len(), b.len(), "dot dimension mismatch");
    assert!(!a.is_empty(), "dot of empty vectors");
    let mut acc = a[0] * b[0];
    for i in 1..a.len() {
        acc = acc + a[i] * b[i];
    }
    acc
}

/// Elementwise sum `a + b`.
pub fn add_vec<S: Real>(a: &[S], b: &[S]) -> Vec<S> {
    assert_eq!(a.len(), b.len(), "add_vec dimension mismatch");
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

/// Elementwise scale by a scalar of the same kind.
pub fn scale_vec<S: Real>(v: &[S], k: S) -> Vec<S> {
    v.iter().map(|&x| x * k).collect()
}
