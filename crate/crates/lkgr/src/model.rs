//! The scoring model: knowledge-aware attention, information propagation,
//! and aggregation over the unified graph, in hyperbolic or flat geometry.
//!
//! All trainable state lives in one flat `f64` vector ([`ModelParams`])
//! whose layout is fixed by [`ModelShape`]: node embeddings (Euclidean,
//! encoded onto the manifold per forward pass), one d×d attention matrix
//! per relation (including the interaction relation), one aggregator
//! weight/bias pair per hop depth `j ∈ {0..L}`, and the curvature
//! parameter `theta` with `c = softplus(theta) + floor`.
//!
//! The forward pass for a `(user, item)` pair over its sampled
//! neighborhood:
//!
//! 1. the user is updated once from its sampled items (hop-0 aggregator),
//! 2. for `l = L..1`, every layer-(l−1) position is updated from its
//!    sampled layer-l neighbors with attention weights recomputed from
//!    the current points (hop-l aggregator); at `l = 1` the single
//!    layer-0 position — the item — additionally mixes in its sampled
//!    users, each edge class normalized by its own softmax,
//! 3. the score is the Euclidean inner product of the two final
//!    representations in the origin's tangent space.
//!
//! Every step is generic over [`Real`], so the same code runs on plain
//! numbers for inference and on tape variables for training. Positions
//! are kept distinct even when sampling draws the same node twice: the
//! update is positional, mirroring the rectangular sample layout.

use std::fmt;
use std::ops::Range;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{NeighborSample, NodeId, RelationId, SampledNeighborhood};
use crate::manifold::{
    encode_euclidean, exp_map, exp_origin_spatial, hyperbolic_activation, log_map,
    log_origin_spatial, lorentz_bias_add, lorentz_concat, lorentz_linear, Activation, Curvature,
    CURVATURE_FLOOR,
};
use crate::scalar::{dot, MatRef, Real};

/// How a node's own representation is combined with its neighborhood
/// aggregate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    /// Combine the two points, then transform:
    /// `σ(A ⊙ (x ⊞ s) ⊕ b)` with `x ⊞ s = exp_o(log_o(x) + log_o(s))`.
    Sum,
    /// Concatenate in the origin's tangent space, then transform with the
    /// wide matrix: `σ(A ⊙ concat(x, s) ⊕ b)`.
    Concat,
    /// Ignore the node itself: `σ(A ⊙ s ⊕ b)`.
    Neighbor,
}

impl Aggregator {
    pub const ALL: [Aggregator; 3] = [Aggregator::Sum, Aggregator::Concat, Aggregator::Neighbor];
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Aggregator::Sum => "sum",
            Aggregator::Concat => "concat",
            Aggregator::Neighbor => "neighbor",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregator::Sum),
            "concat" => Ok(Aggregator::Concat),
            "neighbor" => Ok(Aggregator::Neighbor),
            other => Err(Error::InvalidArgument(format!(
                "unknown aggregator {other:?} (expected sum, concat, or neighbor)"
            ))),
        }
    }
}

/// Feature toggles for the ablation variants. All-true is the full model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationSwitches {
    /// User–item edges contribute to propagation. Off: the user keeps its
    /// own point as the neighborhood aggregate and the item ignores its
    /// sampled users.
    pub use_interactive_signals: bool,
    /// Knowledge-graph edges contribute. Off: entity updates are skipped
    /// and the item sees only its sampled users.
    pub use_kg_extraction: bool,
    /// Work on the manifold. Off: every exp/log is the identity and the
    /// score is a plain dot product.
    pub use_hyperbolic: bool,
    /// Attention scores weight the neighbors. Off: every pre-softmax
    /// score is 1, i.e. uniform weights.
    pub use_attention: bool,
}

impl Default for AblationSwitches {
    fn default() -> Self {
        AblationSwitches::full()
    }
}

impl AblationSwitches {
    pub fn full() -> Self {
        AblationSwitches {
            use_interactive_signals: true,
            use_kg_extraction: true,
            use_hyperbolic: true,
            use_attention: true,
        }
    }

    /// Turn one component off by its short name (is, ke, hg, lka).
    pub fn disable(mut self, name: &str) -> Result<Self> {
        match name {
            "is" => self.use_interactive_signals = false,
            "ke" => self.use_kg_extraction = false,
            "hg" => self.use_hyperbolic = false,
            "lka" => self.use_attention = false,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown ablation {other:?} (expected is, ke, hg, or lka)"
                )))
            }
        }
        Ok(self)
    }
}

/// Tensor shapes; fixes the layout of the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    /// Unified node count (entities + users).
    pub n_nodes: u32,
    /// Relation vocabulary including the interaction relation.
    pub n_relations: u32,
    /// Intrinsic embedding dimension d (ambient points have d+1 coords).
    pub dim: usize,
    /// Propagation depth L.
    pub depth: usize,
    pub aggregator: Aggregator,
    pub activation: Activation,
}

impl ModelShape {
    /// Columns of the aggregator weight matrices.
    pub fn agg_input_dim(&self) -> usize {
        match self.aggregator {
            Aggregator::Concat => 2 * self.dim,
            _ => self.dim,
        }
    }

    fn emb_len(&self) -> usize {
        self.n_nodes as usize * self.dim
    }

    fn rel_len(&self) -> usize {
        self.n_relations as usize * self.dim * self.dim
    }

    fn agg_w_len(&self) -> usize {
        (self.depth + 1) * self.dim * self.agg_input_dim()
    }

    fn agg_b_len(&self) -> usize {
        (self.depth + 1) * self.dim
    }

    /// Total length of the flat parameter vector.
    pub fn n_params(&self) -> usize {
        self.emb_len() + self.rel_len() + self.agg_w_len() + self.agg_b_len() + 1
    }

    pub fn embedding_range(&self, node: NodeId) -> Range<usize> {
        assert!(node < self.n_nodes, "node {node} out of range");
        let start = node as usize * self.dim;
        start..start + self.dim
    }

    pub fn relation_range(&self, relation: RelationId) -> Result<Range<usize>> {
        if relation >= self.n_relations {
            return Err(Error::InvalidArgument(format!(
                "unknown relation id {relation} (vocabulary size {})",
                self.n_relations
            )));
        }
        let sq = self.dim * self.dim;
        let start = self.emb_len() + relation as usize * sq;
        Ok(start..start + sq)
    }

    pub fn agg_weight_range(&self, hop: usize) -> Range<usize> {
        assert!(hop <= self.depth, "hop {hop} exceeds depth {}", self.depth);
        let per = self.dim * self.agg_input_dim();
        let start = self.emb_len() + self.rel_len() + hop * per;
        start..start + per
    }

    pub fn agg_bias_range(&self, hop: usize) -> Range<usize> {
        assert!(hop <= self.depth, "hop {hop} exceeds depth {}", self.depth);
        let start = self.emb_len() + self.rel_len() + self.agg_w_len() + hop * self.dim;
        start..start + self.dim
    }

    pub fn theta_index(&self) -> usize {
        self.n_params() - 1
    }
}

/// The trainable state: shape plus the flat value vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub shape: ModelShape,
    pub values: Vec<f64>,
}

impl ModelParams {
    /// Xavier-uniform initialization, deterministic per seed. Draw order:
    /// embeddings, relation matrices, aggregator weights, aggregator
    /// biases. Biases are small but bounded away from zero — a zero bias
    /// would sit in the exponential map's zero-tangent branch, whose
    /// gradient is zero, and could never start moving. `theta` starts at
    /// the value that makes the curvature exactly 1.
    pub fn init(shape: ModelShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; shape.n_params()];

        let bound = (6.0 / (f64::from(shape.n_nodes) + shape.dim as f64)).sqrt();
        for v in &mut values[..shape.emb_len()] {
            *v = rng.gen_range(-bound..bound);
        }

        let rel_start = shape.emb_len();
        let bound = (6.0 / (2.0 * shape.dim as f64)).sqrt();
        for v in &mut values[rel_start..rel_start + shape.rel_len()] {
            *v = rng.gen_range(-bound..bound);
        }

        let w_start = rel_start + shape.rel_len();
        let bound = (6.0 / (shape.agg_input_dim() as f64 + shape.dim as f64)).sqrt();
        for v in &mut values[w_start..w_start + shape.agg_w_len()] {
            *v = rng.gen_range(-bound..bound);
        }

        for hop in 0..=shape.depth {
            loop {
                let range = shape.agg_bias_range(hop);
                for k in range.clone() {
                    values[k] = rng.gen_range(-0.05..0.05);
                }
                let norm: f64 = values[range].iter().map(|b| b * b).sum::<f64>().sqrt();
                if norm >= 1e-3 {
                    break;
                }
            }
        }

        values[shape.theta_index()] = Curvature::unit().theta();
        ModelParams { shape, values }
    }

    /// Current curvature value.
    pub fn curvature(&self) -> f64 {
        crate::manifold::positive_reparam(self.values[self.shape.theta_index()])
    }
}

/// Uniform access to the parameter tensors for any scalar kind: plain
/// numbers for inference, tape variables for training.
pub trait ParamSource<S: Real> {
    fn shape(&self) -> &ModelShape;

    /// The full flat parameter vector.
    fn flat(&self) -> &[S];

    /// Euclidean embedding of a node (spatial, length d).
    fn embedding(&self, node: NodeId) -> &[S] {
        &self.flat()[self.shape().embedding_range(node)]
    }

    /// Attention matrix of a relation (d×d, row-major).
    fn relation_matrix(&self, relation: RelationId) -> Result<&[S]> {
        Ok(&self.flat()[self.shape().relation_range(relation)?])
    }

    /// Aggregator weight matrix of a hop (d × agg_input_dim, row-major).
    fn agg_weight(&self, hop: usize) -> &[S] {
        &self.flat()[self.shape().agg_weight_range(hop)]
    }

    /// Aggregator bias of a hop (origin-tangent, spatial, length d).
    fn agg_bias(&self, hop: usize) -> &[S] {
        &self.flat()[self.shape().agg_bias_range(hop)]
    }

    fn theta(&self) -> S {
        self.flat()[self.shape().theta_index()]
    }

    /// Curvature `c = softplus(theta) + floor`, differentiable in theta.
    fn curvature(&self) -> S {
        self.theta().softplus().add_const(CURVATURE_FLOOR)
    }
}

/// Inference-time view over [`ModelParams`].
pub struct PlainParams<'a>(pub &'a ModelParams);

impl ParamSource<f64> for PlainParams<'_> {
    fn shape(&self) -> &ModelShape {
        &self.0.shape
    }

    fn flat(&self) -> &[f64] {
        &self.0.values
    }
}

/// Training-time view: every parameter bound to the tape as a leaf, in
/// layout order, so gradients align with the flat value vector.
pub struct TapeParams<'t> {
    shape: ModelShape,
    vars: Vec<Var<'t>>,
}

impl<'t> TapeParams<'t> {
    pub fn bind(tape: &'t Tape, params: &ModelParams) -> Self {
        TapeParams {
            shape: params.shape,
            vars: params.values.iter().map(|&v| tape.leaf(v)).collect(),
        }
    }

    /// Wrap an existing leaf slice (as handed out by the gradient
    /// checker). The slice must match the shape's parameter count.
    pub fn from_vars(shape: ModelShape, vars: &[Var<'t>]) -> Self {
        assert_eq!(vars.len(), shape.n_params(), "parameter count mismatch");
        TapeParams {
            shape,
            vars: vars.to_vec(),
        }
    }

    /// Squared L2 norm of every parameter except theta, so the
    /// regularizer never pulls the curvature toward its floor.
    pub fn l2_penalty(&self) -> Var<'t> {
        let theta_index = self.shape.theta_index();
        let mut acc = self.vars[0].lift(0.0);
        for &v in &self.vars[..theta_index] {
            acc = acc + v * v;
        }
        acc
    }

    /// Dense gradient aligned with [`ModelParams::values`].
    pub fn gradient(&self, grads: &Gradients) -> Vec<f64> {
        self.vars.iter().map(|&v| grads.wrt(v)).collect()
    }
}

impl<'t> ParamSource<Var<'t>> for TapeParams<'t> {
    fn shape(&self) -> &ModelShape {
        &self.shape
    }

    fn flat(&self) -> &[Var<'t>] {
        &self.vars
    }
}

/// Geometry dispatch: the manifold operations or their flat (identity
/// exp/log) counterparts, chosen once per forward pass.
#[derive(Clone, Copy, Debug)]
pub struct Geometry {
    pub hyperbolic: bool,
}

impl Geometry {
    /// Map a Euclidean spatial vector to an ambient point.
    pub fn encode<S: Real>(self, xs: &[S], c: S) -> Vec<S> {
        if self.hyperbolic {
            encode_euclidean(xs, c)
        } else {
            let mut p = Vec::with_capacity(xs.len() + 1);
            p.push(c.lift(0.0));
            p.extend_from_slice(xs);
            p
        }
    }

    /// Spatial tangent coordinates of a point at the origin.
    pub fn log_origin<S: Real>(self, x: &[S], c: S) -> Vec<S> {
        if self.hyperbolic {
            log_origin_spatial(x, c)
        } else {
            x[1..].to_vec()
        }
    }

    /// Inverse of [`Geometry::log_origin`].
    pub fn exp_origin<S: Real>(self, vs: &[S], c: S) -> Vec<S> {
        if self.hyperbolic {
            exp_origin_spatial(vs, c)
        } else {
            let mut p = Vec::with_capacity(vs.len() + 1);
            p.push(c.lift(0.0));
            p.extend_from_slice(vs);
            p
        }
    }

    /// Ambient tangent vector at `base` pointing to `y`.
    pub fn log_at<S: Real>(self, base: &[S], y: &[S], c: S) -> Vec<S> {
        if self.hyperbolic {
            log_map(base, y, c)
        } else {
            base.iter().zip(y).map(|(&b, &p)| p - b).collect()
        }
    }

    /// Geodesic step from `base` along the ambient tangent vector `v`.
    pub fn exp_at<S: Real>(self, base: &[S], v: &[S], c: S) -> Vec<S> {
        if self.hyperbolic {
            exp_map(base, v, c)
        } else {
            base.iter().zip(v).map(|(&b, &t)| b + t).collect()
        }
    }

    /// Matrix transform in the origin's tangent space.
    pub fn linear<S: Real>(self, a: MatRef<'_, S>, x: &[S], c: S) -> Result<Vec<S>> {
        if self.hyperbolic {
            lorentz_linear(a, x, c)
        } else {
            if a.cols != x.len() - 1 {
                return Err(Error::InvalidArgument(format!(
                    "matrix of {} columns cannot transform a point with {} spatial \
                     coordinates",
                    a.cols,
                    x.len() - 1
                )));
            }
            let mut p = Vec::with_capacity(a.rows + 1);
            p.push(c.lift(0.0));
            p.extend(a.matvec(&x[1..]));
            Ok(p)
        }
    }

    /// Translate a point by an origin-tangent bias (spatial coordinates).
    pub fn bias_add<S: Real>(self, x: &[S], b_spatial: &[S], c: S) -> Vec<S> {
        let mut b = Vec::with_capacity(b_spatial.len() + 1);
        b.push(c.lift(0.0));
        b.extend_from_slice(b_spatial);
        if self.hyperbolic {
            lorentz_bias_add(x, &b, c)
        } else {
            x.iter().zip(&b).map(|(&p, &t)| p + t).collect()
        }
    }

    /// Combine two points through their origin tangents.
    pub fn point_sum<S: Real>(self, x: &[S], s: &[S], c: S) -> Vec<S> {
        let vx = self.log_origin(x, c);
        let vs = self.log_origin(s, c);
        let sum: Vec<S> = vx.iter().zip(&vs).map(|(&a, &b)| a + b).collect();
        self.exp_origin(&sum, c)
    }

    /// Concatenate two points in the origin's tangent space.
    pub fn concat<S: Real>(self, a: &[S], b: &[S], c: S) -> Vec<S> {
        if self.hyperbolic {
            lorentz_concat(a, b, c)
        } else {
            let mut v = self.log_origin(a, c);
            v.extend(self.log_origin(b, c));
            self.exp_origin(&v, c)
        }
    }

    /// Pointwise non-linearity in the origin's tangent space.
    pub fn activation<S: Real>(self, x: &[S], act: Activation, c: S) -> Vec<S> {
        if self.hyperbolic {
            hyperbolic_activation(x, act, c)
        } else {
            let v: Vec<S> = x[1..].iter().map(|&t| act.apply(t)).collect();
            self.exp_origin(&v, c)
        }
    }
}

/// Pre-softmax score of one edge: bilinear form of the two endpoints'
/// origin-tangent coordinates under the relation's matrix.
pub fn attention_weight<S: Real>(
    geo: Geometry,
    head: &[S],
    w_r: MatRef<'_, S>,
    tail: &[S],
    c: S,
) -> S {
    let lh = geo.log_origin(head, c);
    let lt = geo.log_origin(tail, c);
    dot(&lh, &w_r.matvec(&lt))
}

/// Max-shifted softmax. The shift is a constant, so the gradient is
/// exactly the softmax gradient.
pub fn normalize_attention<S: Real>(scores: &[S]) -> Result<Vec<S>> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot normalize an empty attention score list".into(),
        ));
    }
    let m = scores
        .iter()
        .map(|s| s.val())
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<S> = scores.iter().map(|&s| s.add_const(-m).exp()).collect();
    let mut total = exps[0];
    for &e in &exps[1..] {
        total = total + e;
    }
    Ok(exps.iter().map(|&e| e / total).collect())
}

/// Weighted tangent-space average pulled back onto the manifold:
/// `exp_base(Σ_k w_k · log_base(n_k))`. No neighbors → the base itself.
fn propagate<S: Real>(
    geo: Geometry,
    base: &[S],
    neighbors: &[Vec<S>],
    weights: &[S],
    c: S,
) -> Vec<S> {
    debug_assert_eq!(neighbors.len(), weights.len());
    if neighbors.is_empty() {
        return base.to_vec();
    }
    let mut acc = vec![c.lift(0.0); base.len()];
    for (point, &w) in neighbors.iter().zip(weights) {
        let lg = geo.log_at(base, point, c);
        for (a, l) in acc.iter_mut().zip(lg) {
            *a = *a + w * l;
        }
    }
    geo.exp_at(base, &acc, c)
}

/// Neighborhood representation of a user from its sampled items.
pub fn propagate_user<S: Real>(
    geo: Geometry,
    user: &[S],
    items: &[Vec<S>],
    weights: &[S],
    c: S,
) -> Vec<S> {
    propagate(geo, user, items, weights, c)
}

/// Neighborhood representation of an entity from its sampled entities.
pub fn propagate_entity<S: Real>(
    geo: Geometry,
    entity: &[S],
    neighbors: &[Vec<S>],
    weights: &[S],
    c: S,
) -> Vec<S> {
    propagate(geo, entity, neighbors, weights, c)
}

/// Neighborhood representation of an item: both edge classes summed in
/// the item's tangent space under their separately normalized weights.
pub fn propagate_item<S: Real>(
    geo: Geometry,
    item: &[S],
    users: &[Vec<S>],
    user_weights: &[S],
    entities: &[Vec<S>],
    entity_weights: &[S],
    c: S,
) -> Vec<S> {
    debug_assert_eq!(users.len(), user_weights.len());
    debug_assert_eq!(entities.len(), entity_weights.len());
    if users.is_empty() && entities.is_empty() {
        return item.to_vec();
    }
    let mut acc = vec![c.lift(0.0); item.len()];
    for (point, &w) in users
        .iter()
        .zip(user_weights)
        .chain(entities.iter().zip(entity_weights))
    {
        let lg = geo.log_at(item, point, c);
        for (a, l) in acc.iter_mut().zip(lg) {
            *a = *a + w * l;
        }
    }
    geo.exp_at(item, &acc, c)
}

/// One aggregator application: combine `x` with the neighborhood point
/// `s`, transform, translate, activate.
#[allow(clippy::too_many_arguments)] // one argument per tensor in the update rule
pub fn aggregate<S: Real>(
    geo: Geometry,
    kind: Aggregator,
    x: &[S],
    s: &[S],
    a: MatRef<'_, S>,
    b_spatial: &[S],
    act: Activation,
    c: S,
) -> Result<Vec<S>> {
    let transformed = match kind {
        Aggregator::Sum => {
            let combined = geo.point_sum(x, s, c);
            geo.linear(a, &combined, c)?
        }
        Aggregator::Concat => {
            let combined = geo.concat(x, s, c);
            geo.linear(a, &combined, c)?
        }
        Aggregator::Neighbor => geo.linear(a, s, c)?,
    };
    let biased = geo.bias_add(&transformed, b_spatial, c);
    Ok(geo.activation(&biased, act, c))
}

/// Final representations and the score of one `(user, item)` pair.
pub struct ForwardOutputs<S> {
    pub score: S,
    pub user_point: Vec<S>,
    pub item_point: Vec<S>,
}

/// Softmax-normalized weights of a sampled edge list given the parent's
/// and children's current points. With attention off the weights are
/// uniform (every pre-softmax score fixed to 1).
fn edge_weights<S: Real, P: ParamSource<S>>(
    params: &P,
    geo: Geometry,
    parent: &[S],
    edges: &[(RelationId, NodeId)],
    children: &[Vec<S>],
    switches: &AblationSwitches,
    c: S,
) -> Result<Vec<S>> {
    debug_assert_eq!(edges.len(), children.len());
    let dim = params.shape().dim;
    if !switches.use_attention {
        let w = 1.0 / edges.len() as f64;
        return Ok(vec![c.lift(w); edges.len()]);
    }
    let scores = edges
        .iter()
        .zip(children)
        .map(|(&(r, _), child)| {
            let w_r = MatRef::new(dim, dim, params.relation_matrix(r)?);
            Ok(attention_weight(geo, parent, w_r, child, c))
        })
        .collect::<Result<Vec<S>>>()?;
    normalize_attention(&scores)
}

/// Score one `(user, item)` pair over its sampled neighborhood, keeping
/// the final points for diagnostics.
pub fn forward_detailed<S: Real, P: ParamSource<S>>(
    params: &P,
    sampled: &SampledNeighborhood,
    switches: &AblationSwitches,
) -> Result<ForwardOutputs<S>> {
    let shape = *params.shape();
    if sampled.kg_layers.len() != shape.depth {
        return Err(Error::InvalidArgument(format!(
            "sampled neighborhood has depth {} but the model expects depth {}",
            sampled.kg_layers.len(),
            shape.depth
        )));
    }
    let geo = Geometry {
        hyperbolic: switches.use_hyperbolic,
    };
    let c = params.curvature();
    let act = shape.activation;
    let kind = shape.aggregator;
    let agg_w = |hop: usize| MatRef::new(shape.dim, shape.agg_input_dim(), params.agg_weight(hop));
    let encode = |node: NodeId| geo.encode(params.embedding(node), c);

    // User update (hop-0 aggregator). The neighborhood degenerates to the
    // user itself when the interaction signal is off or absent.
    let u0 = encode(sampled.user_node);
    let s_u = match (&sampled.user_items, switches.use_interactive_signals) {
        (NeighborSample::Drawn(edges), true) => {
            let points: Vec<Vec<S>> = edges.iter().map(|&(_, n)| encode(n)).collect();
            let weights = edge_weights(params, geo, &u0, edges, &points, switches, c)?;
            propagate_user(geo, &u0, &points, &weights, c)
        }
        _ => u0.clone(),
    };
    let user_final = aggregate(geo, kind, &u0, &s_u, agg_w(0), params.agg_bias(0), act, c)?;

    // Entity representations, one per sampled position and layer.
    let mut reps: Vec<Vec<Vec<S>>> = (0..=shape.depth)
        .map(|l| sampled.layer_nodes(l).iter().map(|&n| encode(n)).collect())
        .collect();

    // Peel layers from the outside in: iteration l rewrites layer l−1
    // from layer l (hop-l aggregator). Layer 0 is the item, which also
    // mixes in its sampled users.
    for l in (1..=shape.depth).rev() {
        let item_turn = l == 1;
        if !switches.use_kg_extraction && !item_turn {
            continue;
        }
        let samples = &sampled.kg_layers[l - 1];
        let mut updated: Vec<Vec<S>> = Vec::with_capacity(reps[l - 1].len());
        let mut child_off = 0;
        for (k, sample) in samples.iter().enumerate() {
            let parent = &reps[l - 1][k];
            let edges = sample.edges();
            let children = &reps[l][child_off..child_off + edges.len()];
            child_off += edges.len();

            let kg_active = switches.use_kg_extraction && !edges.is_empty();
            let s = if item_turn && k == 0 {
                let (kg_points, kg_weights) = if kg_active {
                    let w = edge_weights(params, geo, parent, edges, children, switches, c)?;
                    (children.to_vec(), w)
                } else {
                    (Vec::new(), Vec::new())
                };
                let (ui_points, ui_weights) =
                    match (&sampled.item_users, switches.use_interactive_signals) {
                        (NeighborSample::Drawn(ui_edges), true) => {
                            let points: Vec<Vec<S>> =
                                ui_edges.iter().map(|&(_, n)| encode(n)).collect();
                            let w = edge_weights(
                                params, geo, parent, ui_edges, &points, switches, c,
                            )?;
                            (points, w)
                        }
                        _ => (Vec::new(), Vec::new()),
                    };
                propagate_item(
                    geo,
                    parent,
                    &ui_points,
                    &ui_weights,
                    &kg_points,
                    &kg_weights,
                    c,
                )
            } else if kg_active {
                let weights = edge_weights(params, geo, parent, edges, children, switches, c)?;
                propagate_entity(geo, parent, children, &weights, c)
            } else {
                parent.clone()
            };
            updated.push(aggregate(
                geo,
                kind,
                parent,
                &s,
                agg_w(l),
                params.agg_bias(l),
                act,
                c,
            )?);
        }
        reps[l - 1] = updated;
    }

    let item_final = reps[0][0].clone();
    let lu = geo.log_origin(&user_final, c);
    let li = geo.log_origin(&item_final, c);
    Ok(ForwardOutputs {
        score: dot(&lu, &li),
        user_point: user_final,
        item_point: item_final,
    })
}

/// Score one `(user, item)` pair over its sampled neighborhood.
pub fn forward<S: Real, P: ParamSource<S>>(
    params: &P,
    sampled: &SampledNeighborhood,
    switches: &AblationSwitches,
) -> Result<S> {
    forward_detailed(params, sampled, switches).map(|o| o.score)
}
