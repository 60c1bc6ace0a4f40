//! The Lorentz (hyperboloid) model of hyperbolic space.
//!
//! Points live on the upper sheet of a hyperboloid embedded in Minkowski
//! space: with intrinsic dimension `n` a point has `n + 1` ambient
//! coordinates `x = (x_0, x_1, …, x_n)` and satisfies
//!
//! ```text
//! ⟨x, x⟩_M = −c,   x_0 > 0,   where  ⟨x, y⟩_M = −x_0 y_0 + Σ_{i≥1} x_i y_i
//! ```
//!
//! for a curvature parameter `c > 0`. The origin is `(√c, 0, …, 0)`.
//! Tangent vectors at `x` are ambient vectors `v` with `⟨x, v⟩_M = 0`;
//! tangent vectors at the origin have first coordinate 0.
//!
//! Key maps (with `‖v‖_M = √⟨v,v⟩_M` and distance
//! `d(x,y) = √c · arcosh(−⟨x,y⟩_M / c)`):
//!
//! ```text
//! exp_x(v) = cosh(‖v‖_M/√c) x + √c sinh(‖v‖_M/√c) v/‖v‖_M
//! log_x(y) = d(x,y) · u/‖u‖_M,   u = y + (1/c)⟨x,y⟩_M x
//! ```
//!
//! At the origin these reduce to closed forms acting on the spatial block
//! only, which is how Euclidean parameter vectors are moved on and off the
//! manifold. Neural-network primitives (linear map, bias, concatenation,
//! activation) operate in the origin's tangent space: pull back with
//! `log`, act, push forward with `exp`.
//!
//! Numerical guards, applied identically on the plain and autodiff paths:
//! the `arcosh` argument is clamped to `max(arg, 1 + 1e-15)` (clamped
//! regime propagates zero gradient), squared Minkowski norms are clamped
//! at 0 before square roots, `exp` of a tangent vector shorter than
//! `1e-12` returns its base point, and `log` of two numerically coincident
//! points returns the zero tangent vector. All arithmetic is `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, MatRef, Real};

/// Norm/distance threshold below which points are treated as coincident
/// and tangent vectors as zero.
pub const EPS_ZERO: f64 = 1e-12;

/// Padding added to 1 when clamping `arcosh` arguments.
pub const ARCOSH_PAD: f64 = 1e-15;

/// Additive floor of the curvature reparameterization.
pub const CURVATURE_FLOOR: f64 = 1e-4;

/// Map an unconstrained parameter to a strictly positive curvature:
/// `c = softplus(theta) + CURVATURE_FLOOR`.
pub fn positive_reparam(theta: f64) -> f64 {
    Real::softplus(theta) + CURVATURE_FLOOR
}

/// Trainable curvature, stored as the unconstrained parameter `theta`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Curvature {
    theta: f64,
}

impl Curvature {
    pub fn from_theta(theta: f64) -> Self {
        Curvature { theta }
    }

    /// Curvature with `c = 1` (the default initialization).
    pub fn unit() -> Self {
        Curvature::from_c(1.0).expect("1.0 is above the curvature floor")
    }

    /// Invert the reparameterization. Fails for `c` at or below the floor.
    pub fn from_c(c: f64) -> Result<Self> {
        if !(c > CURVATURE_FLOOR && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "curvature must be a finite number above {CURVATURE_FLOOR}, got {c}"
            )));
        }
        let y = c - CURVATURE_FLOOR;
        // softplus⁻¹(y) = ln(e^y − 1); switch to the asymptote early enough
        // that e^y cannot overflow.
        let theta = if y > 30.0 { y } else { y.exp_m1().ln() };
        Ok(Curvature { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn c(&self) -> f64 {
        positive_reparam(self.theta)
    }
}

/// Minkowski inner product without shape checking (internal hot path).
fn mink<S: Real>(x: &[S], y: &[S]) -> S {
    debug_assert_eq!(x.len(), y.len());
    debug_assert!(x.len() >= 2);
    dot(&x[1..], &y[1..]) - x[0] * y[0]
}

fn zeros_like<S: Real>(exemplar: S, n: usize) -> Vec<S> {
    vec![exemplar.lift(0.0); n]
}

/// Minkowski inner product `−x_0 y_0 + Σ_{i≥1} x_i y_i`.
pub fn minkowski_inner<S: Real>(x: &[S], y: &[S]) -> Result<S> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "minkowski inner product needs two equal-length ambient vectors \
             of dimension >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(mink(x, y))
}

/// The origin `(√c, 0, …, 0)` with `n` spatial dimensions.
pub fn origin<S: Real>(n: usize, c: S) -> Vec<S> {
    let mut out = zeros_like(c, n + 1);
    out[0] = c.sqrt();
    out
}

/// Geodesic distance `√c · arcosh(−⟨x,y⟩_M / c)`.
///
/// The `arcosh` argument is clamped to `1 + 1e-15`; for on-manifold inputs
/// it only drops below 1 through rounding, so the clamp perturbs distances
/// by at most `√c · 4.5e-8`.
pub fn lorentz_distance<S: Real>(x: &[S], y: &[S], c: S) -> S {
    let raw = -(mink(x, y) / c);
    #[cfg(debug_assertions)]
    if raw.val() < 1.0 {
        log::trace!("arcosh argument {} clamped to 1 + {ARCOSH_PAD}", raw.val());
    }
    c.sqrt() * raw.clamp_min(1.0 + ARCOSH_PAD).acosh()
}

/// Rescale the first coordinate so `x` lands on the hyperboloid:
/// keeps the spatial block, sets `x_0 = √(c + ‖x_{1:n}‖₂²)`.
pub fn project_to_manifold<S: Real>(x: &[S], c: S) -> Vec<S> {
    let mut out = x.to_vec();
    out[0] = (c + dot(&x[1..], &x[1..])).sqrt();
    out
}

/// Project an ambient vector onto the tangent space at `x`:
/// `v + (⟨x,v⟩_M / c) · x`.
pub fn project_to_tangent<S: Real>(x: &[S], v: &[S], c: S) -> Vec<S> {
    let k = mink(x, v) / c;
    x.iter().zip(v).map(|(&xi, &vi)| vi + k * xi).collect()
}

/// Exponential map at `x`. `v` must be tangent at `x`; vectors shorter
/// than [`EPS_ZERO`] return `x` itself.
pub fn exp_map<S: Real>(x: &[S], v: &[S], c: S) -> Vec<S> {
    assert_eq!(x.len(), v.len(), "exp_map dimension mismatch");
    let n2 = mink(v, v).clamp_min(0.0);
    if n2.val().sqrt() < EPS_ZERO {
        return x.to_vec();
    }
    let norm = n2.sqrt();
    let sc = c.sqrt();
    let t = norm / sc;
    let ch = t.cosh();
    let coef = sc * t.sinh() / norm;
    x.iter()
        .zip(v)
        .map(|(&xi, &vi)| ch * xi + coef * vi)
        .collect()
}

/// Logarithmic map at `x`: the tangent vector pointing to `y` with length
/// `d(x, y)`. Numerically coincident points give the zero vector.
pub fn log_map<S: Real>(x: &[S], y: &[S], c: S) -> Vec<S> {
    assert_eq!(x.len(), y.len(), "log_map dimension mismatch");
    let m = mink(x, y);
    let d = {
        let raw = -(m / c);
        c.sqrt() * raw.clamp_min(1.0 + ARCOSH_PAD).acosh()
    };
    let k = m / c;
    let u: Vec<S> = y.iter().zip(x).map(|(&yi, &xi)| yi + k * xi).collect();
    let un2 = mink(&u, &u).clamp_min(0.0);
    if d.val() < EPS_ZERO || un2.val().sqrt() < EPS_ZERO {
        return zeros_like(c, x.len());
    }
    let coef = d / un2.sqrt();
    u.into_iter().map(|ui| ui * coef).collect()
}

/// Origin-specialized exponential map over the spatial block:
/// `vs ↦ (√c cosh(‖vs‖/√c), √c sinh(‖vs‖/√c) vs/‖vs‖)`.
pub fn exp_origin_spatial<S: Real>(vs: &[S], c: S) -> Vec<S> {
    assert!(!vs.is_empty(), "spatial dimension must be at least 1");
    let r2 = dot(vs, vs);
    if r2.val().sqrt() < EPS_ZERO {
        return origin(vs.len(), c);
    }
    let r = r2.sqrt();
    let sc = c.sqrt();
    let t = r / sc;
    let mut out = Vec::with_capacity(vs.len() + 1);
    out.push(sc * t.cosh());
    let coef = sc * t.sinh() / r;
    out.extend(vs.iter().map(|&vi| vi * coef));
    out
}

/// Origin-specialized logarithmic map, returning the spatial block of the
/// tangent vector: `y ↦ √c arcosh(y_0/√c) · y_{1:n}/‖y_{1:n}‖`.
pub fn log_origin_spatial<S: Real>(y: &[S], c: S) -> Vec<S> {
    assert!(y.len() >= 2, "ambient dimension must be at least 2");
    let ys = &y[1..];
    let r2 = dot(ys, ys);
    if r2.val().sqrt() < EPS_ZERO {
        return zeros_like(c, ys.len());
    }
    let r = r2.sqrt();
    let arg = (y[0] / c.sqrt()).clamp_min(1.0 + ARCOSH_PAD);
    let coef = c.sqrt() * arg.acosh() / r;
    ys.iter().map(|&yi| yi * coef).collect()
}

/// Exponential map at the origin for an ambient tangent vector
/// (first coordinate 0).
pub fn exp_map_origin<S: Real>(v: &[S], c: S) -> Vec<S> {
    assert!(v.len() >= 2, "ambient dimension must be at least 2");
    debug_assert!(
        v[0].val().abs() < 1e-9,
        "origin tangent vectors have first coordinate 0"
    );
    exp_origin_spatial(&v[1..], c)
}

/// Logarithmic map at the origin, as an ambient vector with first
/// coordinate exactly 0.
pub fn log_map_origin<S: Real>(y: &[S], c: S) -> Vec<S> {
    let mut out = Vec::with_capacity(y.len());
    out.push(c.lift(0.0));
    out.extend(log_origin_spatial(y, c));
    out
}

/// Lift a Euclidean vector onto the manifold: `exp` at the origin of
/// `(0, xE)`. The zero vector maps to the origin.
pub fn encode_euclidean<S: Real>(xe: &[S], c: S) -> Vec<S> {
    exp_origin_spatial(xe, c)
}

/// Matrix action in the origin's tangent space:
/// `A ⊙ x = exp_o(A · log_o(x))`. `a` is `n_out × n_in` over spatial
/// blocks, so the ambient dimension may change.
pub fn lorentz_linear<S: Real>(a: MatRef<'_, S>, x: &[S], c: S) -> Result<Vec<S>> {
    if a.cols != x.len() - 1 {
        return Err(Error::InvalidArgument(format!(
            "lorentz_linear shape mismatch: matrix is {}x{}, point has spatial dimension {}",
            a.rows,
            a.cols,
            x.len() - 1
        )));
    }
    let v = log_origin_spatial(x, c);
    Ok(exp_origin_spatial(&a.matvec(&v), c))
}

/// Bias translation `x ⊕ b` for an origin-tangent bias `b`
/// (ambient, first coordinate 0):
///
/// ```text
/// x ⊕ b = exp_x(b − γ (log_o(x) + log_x(o))),
/// γ = ⟨log_o(x), b⟩_M / (c · arcosh(−⟨o,x⟩_M/c)²)
/// ```
///
/// The correction term makes the argument tangent at `x`. When `x` is
/// numerically the origin the limit `γ → 0` applies and this becomes
/// `exp_o(project_to_tangent(o, b))`.
pub fn lorentz_bias_add<S: Real>(x: &[S], b: &[S], c: S) -> Vec<S> {
    assert_eq!(x.len(), b.len(), "bias dimension mismatch");
    debug_assert!(
        b[0].val().abs() < 1e-9,
        "bias vectors are origin-tangent (first coordinate 0)"
    );
    let sc = c.sqrt();
    let arg_raw = x[0] / sc; // = −⟨o,x⟩_M / c
    let o = origin(x.len() - 1, c);
    if arg_raw.val() - 1.0 < 1e-12 {
        let bt = project_to_tangent(&o, b, c);
        return exp_map(&o, &bt, c);
    }
    let arc = arg_raw.clamp_min(1.0 + ARCOSH_PAD).acosh();
    let a = log_map_origin(x, c);
    let m = log_map(x, &o, c);
    let gamma = mink(&a, b) / (c * arc * arc);
    let arg_v: Vec<S> = (0..x.len())
        .map(|i| b[i] - gamma * (a[i] + m[i]))
        .collect();
    exp_map(x, &arg_v, c)
}

/// Hyperbolic concatenation: log both points at their origins, concatenate
/// the spatial blocks, and exp back at the origin of the summed dimension.
pub fn lorentz_concat<S: Real>(a: &[S], b: &[S], c: S) -> Vec<S> {
    let mut v = log_origin_spatial(a, c);
    v.extend(log_origin_spatial(b, c));
    exp_origin_spatial(&v, c)
}

/// Pointwise non-linearities usable on the manifold. All options fix 0,
/// which keeps the origin a fixed point of [`hyperbolic_activation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply<S: Real>(self, x: S) -> S {
        match self {
            Activation::Relu => x.relu(),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }
}

/// Pointwise activation through the origin's tangent space:
/// `exp_o(σ(log_o(x)))`.
pub fn hyperbolic_activation<S: Real>(x: &[S], act: Activation, c: S) -> Vec<S> {
    let v: Vec<S> = log_origin_spatial(x, c)
        .into_iter()
        .map(|vi| act.apply(vi))
        .collect();
    exp_origin_spatial(&v, c)
}

/// `|⟨x,x⟩_M + c|` — zero exactly on the hyperboloid. Test/diagnostic aid.
pub fn constraint_residual(x: &[f64], c: f64) -> f64 {
    (mink(x, x) + c).abs()
}
