//! Training: pairwise binary cross-entropy over sampled neighborhoods,
//! Adam over every parameter (curvature included), early stopping on the
//! evaluation split, and versioned checkpoints.
//!
//! One fit call owns its determinism story: the dataset split, parameter
//! initialization, per-epoch shuffles, negative draws, and neighborhood
//! samples are all seeded from the run seed through tagged sub-streams
//! ([`crate::graph::derive_seed`]), and evaluation sampling depends only
//! on (seed, user, item) — never the epoch — so re-evaluating a saved
//! checkpoint reproduces the numbers logged while training it. Training
//! itself is serial; parallelism lives in the read-only evaluation pass,
//! which reduces in user order and is bit-exact at any thread count.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::eval::{evaluate_topk, split_dataset, EvalTarget, Split};
use crate::graph::{
    build_ukg, derive_seed, sample_khop, InteractionMatrix, SampledNeighborhood, Triple,
    UnifiedKnowledgeGraph,
};
use crate::manifold::Activation;
use crate::model::{
    forward, AblationSwitches, Aggregator, ModelParams, ModelShape, TapeParams,
};
use crate::scalar::Real;

/// Seed-stream tag for parameter initialization.
pub const STREAM_INIT: u64 = 0x171A;
/// Seed-stream tag for one epoch's shuffle/negative/neighborhood draws.
pub const STREAM_EPOCH: u64 = 0xE90C;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Which form the ranking loss takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Standard additive binary cross-entropy on positives and negatives.
    Bce,
    /// The literal written form that subtracts the negative-sample term.
    /// Unbounded below — kept for comparison runs only.
    Literal,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Bce => "bce",
            LossKind::Literal => "literal",
        })
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bce" => Ok(LossKind::Bce),
            "literal" => Ok(LossKind::Literal),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss {other:?} (expected bce or literal)"
            ))),
        }
    }
}

/// Which epoch's parameters a checkpoint stores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeepRule {
    /// The epoch with the best evaluation-split recall (model selection).
    #[default]
    Best,
    /// The last epoch run, ignoring evaluation-split performance. Useful
    /// for fixed-budget comparisons where selection noise must not pick
    /// the snapshot.
    Final,
}

impl std::fmt::Display for KeepRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KeepRule::Best => "best",
            KeepRule::Final => "final",
        })
    }
}

impl std::str::FromStr for KeepRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best" => Ok(KeepRule::Best),
            "final" => Ok(KeepRule::Final),
            other => Err(Error::InvalidArgument(format!(
                "unknown keep rule {other:?} (expected best or final)"
            ))),
        }
    }
}

/// Everything one training run needs to know.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Embedding dimension d.
    pub dim: usize,
    /// Propagation depth L.
    pub depth: usize,
    pub batch_size: usize,
    /// Neighbors drawn per node and class.
    pub sample_size: usize,
    /// Adam learning rate η.
    pub eta: f64,
    /// L2 weight λ.
    pub lambda: f64,
    pub aggregator: Aggregator,
    pub activation: Activation,
    pub loss: LossKind,
    pub epochs_max: usize,
    /// Consecutive non-improving epochs tolerated before stopping.
    pub patience: usize,
    /// K for the per-epoch evaluation metric.
    pub eval_k: usize,
    pub seed: u64,
}

impl TrainConfig {
    fn base() -> Self {
        TrainConfig {
            dim: 16,
            depth: 1,
            batch_size: 32,
            sample_size: 8,
            eta: 1e-3,
            lambda: 5e-7,
            aggregator: Aggregator::Concat,
            activation: Activation::Tanh,
            loss: LossKind::Bce,
            epochs_max: 100,
            patience: 10,
            eval_k: 20,
            seed: 0,
        }
    }

    /// Book benchmark column: d=64, L=1, batch 128, sample 8, η=1e−3,
    /// λ=5e−7, concat.
    pub fn book() -> Self {
        TrainConfig {
            dim: 64,
            depth: 1,
            batch_size: 128,
            sample_size: 8,
            eta: 1e-3,
            lambda: 5e-7,
            aggregator: Aggregator::Concat,
            ..Self::base()
        }
    }

    /// Movie benchmark column: d=32, L=2, batch 4096, sample 4, η=2e−3,
    /// λ=1e−7, concat.
    pub fn movie() -> Self {
        TrainConfig {
            dim: 32,
            depth: 2,
            batch_size: 4096,
            sample_size: 4,
            eta: 2e-3,
            lambda: 1e-7,
            aggregator: Aggregator::Concat,
            ..Self::base()
        }
    }

    /// Restaurant benchmark column: d=32, L=1, batch 4096, sample 8,
    /// η=2e−3, λ=1e−7, sum.
    pub fn restaurant() -> Self {
        TrainConfig {
            dim: 32,
            depth: 1,
            batch_size: 4096,
            sample_size: 8,
            eta: 2e-3,
            lambda: 1e-7,
            aggregator: Aggregator::Sum,
            ..Self::base()
        }
    }

    /// Small defaults for desk-scale data (also the no-preset default).
    pub fn desk() -> Self {
        Self::base()
    }
}

/// Uniform draws from the items the user never interacted with. Fresh per
/// call; determinism comes from the caller's seeded generator. A user who
/// has interacted with the whole universe yields an empty list (with a
/// warning) and should be skipped.
pub fn sample_negatives<R: Rng>(
    user: u32,
    interactions: &InteractionMatrix,
    k: usize,
    rng: &mut R,
) -> Vec<u32> {
    let positives = interactions.items_of(user);
    let candidates: Vec<u32> = interactions
        .items()
        .iter()
        .copied()
        .filter(|i| positives.binary_search(i).is_err())
        .collect();
    if candidates.is_empty() {
        log::warn!("user {user} has interacted with every item; skipping");
        return Vec::new();
    }
    (0..k)
        .map(|_| candidates[rng.gen_range(0..candidates.len())])
        .collect()
}

/// One training example: a user with one positive and one paired negative
/// item, both with their sampled neighborhoods.
#[derive(Clone, Debug)]
pub struct BatchSample {
    pub user: u32,
    pub pos_item: u32,
    pub neg_item: u32,
    pub pos_neighborhood: SampledNeighborhood,
    pub neg_neighborhood: SampledNeighborhood,
}

/// Draw the epoch's examples in pair order. Per pair the generator is
/// consumed as: negative item, positive neighborhood, negative
/// neighborhood. Users with no possible negative are skipped.
pub fn draw_epoch_samples<R: Rng>(
    shuffled_pairs: &[(u32, u32)],
    interactions: &InteractionMatrix,
    ukg: &UnifiedKnowledgeGraph,
    depth: usize,
    sample_size: usize,
    rng: &mut R,
) -> Vec<BatchSample> {
    let mut out = Vec::with_capacity(shuffled_pairs.len());
    for &(user, pos_item) in shuffled_pairs {
        let negs = sample_negatives(user, interactions, 1, rng);
        let Some(&neg_item) = negs.first() else {
            continue;
        };
        let pos_neighborhood = sample_khop(ukg, user, pos_item, depth, sample_size, rng);
        let neg_neighborhood = sample_khop(ukg, user, neg_item, depth, sample_size, rng);
        out.push(BatchSample {
            user,
            pos_item,
            neg_item,
            pos_neighborhood,
            neg_neighborhood,
        });
    }
    out
}

/// One scored example ready for the loss.
#[derive(Clone, Copy, Debug)]
pub struct ScoredSample<S> {
    pub user: u32,
    pub item: u32,
    pub positive: bool,
    pub score: S,
}

/// Cross-entropy over logits with the logistic link folded in:
/// `J(1, σ(z)) = softplus(−z)` and `J(0, σ(z)) = softplus(z)`, summed over
/// the batch, plus `λ‖Θ‖²` (the penalty excludes theta by construction —
/// see [`TapeParams::l2_penalty`]). The literal variant subtracts the
/// negative-sample terms instead of adding them.
pub fn lkgr_loss<S: Real>(
    samples: &[ScoredSample<S>],
    l2_norm_sq: Option<S>,
    lambda: f64,
    kind: LossKind,
) -> Result<S> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("loss over an empty batch".into()));
    }
    for s in samples {
        if !s.score.val().is_finite() {
            return Err(Error::NonFinite(format!(
                "score for user {}, item {} ({}) is not finite",
                s.user,
                s.item,
                if s.positive { "positive" } else { "negative" },
            )));
        }
    }
    let mut acc = samples[0].score.lift(0.0);
    for s in samples {
        let term = if s.positive {
            (-s.score).softplus()
        } else {
            s.score.softplus()
        };
        acc = match (kind, s.positive) {
            (LossKind::Literal, false) => acc - term,
            _ => acc + term,
        };
    }
    if lambda != 0.0 {
        if let Some(p) = l2_norm_sq {
            acc = acc + p.scale(lambda);
        }
    }
    Ok(acc)
}

/// First and second gradient moments plus the step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One dense Adam update with bias-corrected moments.
pub fn adam_step(values: &mut [f64], grads: &[f64], eta: f64, state: &mut AdamState) {
    assert_eq!(values.len(), grads.len(), "gradient length mismatch");
    assert_eq!(values.len(), state.m.len(), "Adam state length mismatch");
    state.step += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.step as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.step as i32);
    for i in 0..values.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        values[i] -= eta * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// One line of training history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample loss over the epoch.
    pub loss: f64,
    /// K of the evaluation metric below.
    pub k: usize,
    /// Evaluation-split Recall@K.
    pub recall: f64,
    /// Evaluation-split NDCG@K.
    pub ndcg: f64,
}

/// Everything `fit` produces.
#[derive(Clone, Debug)]
pub struct FitResult {
    /// Parameters of the best epoch (initial parameters if no epoch ran).
    pub params: ModelParams,
    /// Adam state snapshot taken at the same epoch as `params`.
    pub adam: AdamState,
    /// Epoch whose parameters were kept; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
    /// Parameters as they stood after the last epoch run.
    pub final_params: ModelParams,
    /// Adam state after the last epoch run.
    pub final_adam: AdamState,
    /// The last epoch run; `None` when no epoch ran.
    pub last_epoch: Option<usize>,
    pub history: Vec<EpochRecord>,
    pub split: Split,
    /// The training graph: interaction edges come from the train split
    /// only, while node ids and the candidate item list cover the whole
    /// dataset.
    pub ukg: UnifiedKnowledgeGraph,
}

/// Train a model: split the positives 6:2:2, build the graph from the
/// train split, and run Adam epochs with per-epoch evaluation-split
/// metrics and early stopping. Interactions must already be in entity id
/// space. Both the best-scoring epoch's parameters and the last epoch's
/// parameters are returned; checkpoints pick one via [`KeepRule`].
pub fn fit(
    triples: &[Triple],
    interactions: &InteractionMatrix,
    config: &TrainConfig,
    switches: &AblationSwitches,
) -> Result<FitResult> {
    let split = split_dataset(interactions, (0.6, 0.2, 0.2), config.seed)?;
    if split.train.is_empty() {
        return Err(Error::InvalidInput(
            "the training split is empty; nothing to fit".into(),
        ));
    }
    let train_im = interactions.with_pairs(split.train.clone())?;
    let (ukg, train_im) = build_ukg(triples, &train_im, None)?;

    let shape = ModelShape {
        n_nodes: ukg.n_nodes(),
        n_relations: ukg.n_relations(),
        dim: config.dim,
        depth: config.depth,
        aggregator: config.aggregator,
        activation: config.activation,
    };
    let mut params = ModelParams::init(shape, derive_seed(config.seed, &[STREAM_INIT]));
    let mut adam = AdamState::new(shape.n_params());

    let mut history = Vec::new();
    let mut best: Option<(ModelParams, AdamState, usize)> = None;
    let mut best_recall = f64::NEG_INFINITY;
    let mut stale = 0usize;
    let mut tape = Tape::new();

    for epoch in 1..=config.epochs_max {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            config.seed,
            &[STREAM_EPOCH, epoch as u64],
        ));
        let mut pairs = train_im.pairs().to_vec();
        pairs.shuffle(&mut rng);
        let samples = draw_epoch_samples(
            &pairs,
            interactions,
            &ukg,
            config.depth,
            config.sample_size,
            &mut rng,
        );

        let mut loss_sum = 0.0;
        let mut n_scored = 0usize;
        for batch in samples.chunks(config.batch_size) {
            tape.reset();
            let tp = TapeParams::bind(&tape, &params);
            let mut scored = Vec::with_capacity(batch.len() * 2);
            for b in batch {
                scored.push(ScoredSample {
                    user: b.user,
                    item: b.pos_item,
                    positive: true,
                    score: forward(&tp, &b.pos_neighborhood, switches)?,
                });
                scored.push(ScoredSample {
                    user: b.user,
                    item: b.neg_item,
                    positive: false,
                    score: forward(&tp, &b.neg_neighborhood, switches)?,
                });
            }
            let loss = lkgr_loss(&scored, Some(tp.l2_penalty()), config.lambda, config.loss)?;
            let grads = tape.backward(loss);
            let dense = tp.gradient(&grads);
            adam_step(&mut params.values, &dense, config.eta, &mut adam);
            loss_sum += loss.value();
            n_scored += scored.len();
        }
        let mean_loss = loss_sum / n_scored.max(1) as f64;

        let rows = evaluate_topk(
            &params,
            &ukg,
            &split,
            EvalTarget::Eval,
            &[config.eval_k],
            config.sample_size,
            switches,
            config.seed,
        )?;
        let (recall, ndcg) = (rows[0].recall, rows[0].ndcg);
        log::info!(
            "epoch {epoch}: loss {mean_loss:.6}, eval recall@{} {recall:.4}, ndcg@{0} {ndcg:.4}",
            config.eval_k
        );
        history.push(EpochRecord {
            epoch,
            loss: mean_loss,
            k: config.eval_k,
            recall,
            ndcg,
        });

        if recall > best_recall {
            best_recall = recall;
            best = Some((params.clone(), adam.clone(), epoch));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                log::info!("no improvement for {stale} epochs; stopping at epoch {epoch}");
                break;
            }
        }
    }

    let last_epoch = history.last().map(|r| r.epoch);
    let (best_params, best_adam, best_epoch) = match best {
        Some((p, a, e)) => (p, a, Some(e)),
        None => (params.clone(), adam.clone(), None),
    };
    Ok(FitResult {
        params: best_params,
        adam: best_adam,
        best_epoch,
        final_params: params,
        final_adam: adam,
        last_epoch,
        history,
        split,
        ukg,
    })
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned training snapshot: configuration, ablation switches, the
/// parameter tensors, Adam state, and the epoch the parameters came from.
/// Serialized as a single JSON document; floating-point values survive
/// the round trip bit-for-bit (shortest-round-trip formatting).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub switches: AblationSwitches,
    pub params: ModelParams,
    pub adam: AdamState,
    /// Epoch the stored parameters came from: the best evaluation epoch
    /// under [`KeepRule::Best`], the last epoch run under
    /// [`KeepRule::Final`]; `None` when no epoch ran.
    pub epoch: Option<usize>,
}

impl Checkpoint {
    pub fn from_fit(
        config: TrainConfig,
        switches: AblationSwitches,
        fit: &FitResult,
        keep: KeepRule,
    ) -> Self {
        let (params, adam, epoch) = match keep {
            KeepRule::Best => (&fit.params, &fit.adam, fit.best_epoch),
            KeepRule::Final => (&fit.final_params, &fit.final_adam, fit.last_epoch),
        };
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config,
            switches,
            params: params.clone(),
            adam: adam.clone(),
            epoch,
        }
    }

    /// Internal-consistency checks; every failure is a checkpoint/config
    /// mismatch error.
    pub fn validate(&self) -> Result<()> {
        let mismatch = |msg: String| Err(Error::CheckpointMismatch(msg));
        if self.version != CHECKPOINT_VERSION {
            return mismatch(format!(
                "checkpoint version {} (this binary reads version {CHECKPOINT_VERSION})",
                self.version
            ));
        }
        let shape = &self.params.shape;
        if self.params.values.len() != shape.n_params() {
            return mismatch(format!(
                "parameter vector has {} values but the shape needs {}",
                self.params.values.len(),
                shape.n_params()
            ));
        }
        if self.params.values.iter().any(|v| !v.is_finite()) {
            return mismatch("parameter vector contains non-finite values".into());
        }
        if self.adam.m.len() != self.params.values.len()
            || self.adam.v.len() != self.params.values.len()
        {
            return mismatch("Adam state length does not match the parameters".into());
        }
        if shape.dim != self.config.dim
            || shape.depth != self.config.depth
            || shape.aggregator != self.config.aggregator
            || shape.activation != self.config.activation
        {
            return mismatch(format!(
                "config says dim={}, depth={}, aggregator={}, but the tensors were \
                 shaped for dim={}, depth={}, aggregator={}",
                self.config.dim,
                self.config.depth,
                self.config.aggregator,
                shape.dim,
                shape.depth,
                shape.aggregator
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut text =
            serde_json::to_string(self).map_err(|e| Error::Serde(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint =
            serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}
