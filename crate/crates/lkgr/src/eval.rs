//! Dataset splitting and Top-K ranking metrics.
//!
//! Positives are split 6:2:2 (train/eval/test) by a seeded shuffle with
//! largest-remainder rounding, so part sizes are within ±1 of the exact
//! shares. Ranking is filtered: when scoring a user against the eval or
//! test split, items the user already touched in earlier splits are
//! removed from the candidate set. Ties are broken by ascending item id,
//! per-user work runs in parallel but is collected in user order and
//! reduced serially with compensated summation, so results are bit-exact
//! at any thread count.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{derive_seed, sample_khop, InteractionMatrix, UnifiedKnowledgeGraph};
use crate::model::{forward, AblationSwitches, ModelParams, PlainParams};

/// Seed-stream tag for per-(user, item) evaluation sampling. Evaluation
/// draws depend only on the run seed, the user, and the item — never on
/// the epoch — so re-evaluating a checkpoint reproduces the metrics that
/// were logged while training it.
pub const STREAM_EVAL: u64 = 0xE7A1;
/// Seed-stream tag for the dataset split shuffle.
pub const STREAM_SPLIT: u64 = 0x59171;

/// Default K grid for reported metrics.
pub const DEFAULT_K_GRID: [usize; 6] = [1, 5, 10, 20, 50, 100];

/// Disjoint positive-pair sets covering all interactions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<(u32, u32)>,
    pub eval: Vec<(u32, u32)>,
    pub test: Vec<(u32, u32)>,
    pub seed: u64,
}

/// Which split supplies the relevant items (and, with it, the filtering
/// rule for the candidate set).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalTarget {
    /// Relevant = train positives; nothing filtered.
    Train,
    /// Relevant = eval positives; train positives filtered out.
    Eval,
    /// Relevant = test positives; train and eval positives filtered out.
    Test,
}

impl std::fmt::Display for EvalTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EvalTarget::Train => "train",
            EvalTarget::Eval => "eval",
            EvalTarget::Test => "test",
        };
        f.write_str(s)
    }
}

/// Split all positive pairs by a seeded shuffle. Part sizes follow the
/// ratios with largest-remainder rounding (±1 of the exact shares).
pub fn split_dataset(
    interactions: &InteractionMatrix,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Split> {
    let parts = [ratios.0, ratios.1, ratios.2];
    if parts.iter().any(|&r| r < 0.0 || !r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be non-negative and finite, got {parts:?}"
        )));
    }
    let total: f64 = parts.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must sum to 1, got {total}"
        )));
    }

    let mut pairs = interactions.pairs().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_SPLIT]));
    pairs.shuffle(&mut rng);

    let n = pairs.len();
    let shares: Vec<f64> = parts.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = shares.iter().map(|&s| s.floor() as usize).collect();
    let mut leftover = n - counts.iter().sum::<usize>();
    // Hand the remainder to the largest fractional parts; ties go to the
    // earlier part so the rule is deterministic.
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &k in &order {
        if leftover == 0 {
            break;
        }
        counts[k] += 1;
        leftover -= 1;
    }

    let eval_start = counts[0];
    let test_start = counts[0] + counts[1];
    let mut split = Split {
        train: pairs[..eval_start].to_vec(),
        eval: pairs[eval_start..test_start].to_vec(),
        test: pairs[test_start..].to_vec(),
        seed,
    };
    split.train.sort_unstable();
    split.eval.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

impl Split {
    fn part(&self, target: EvalTarget) -> &[(u32, u32)] {
        match target {
            EvalTarget::Train => &self.train,
            EvalTarget::Eval => &self.eval,
            EvalTarget::Test => &self.test,
        }
    }

    /// Per-user relevant items of one part.
    pub fn relevant_by_user(&self, target: EvalTarget) -> BTreeMap<u32, BTreeSet<u32>> {
        let mut map: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for &(u, i) in self.part(target) {
            map.entry(u).or_default().insert(i);
        }
        map
    }

    /// Items filtered from the candidate set when ranking for `target`.
    pub fn excluded_items(&self, user: u32, target: EvalTarget) -> BTreeSet<u32> {
        let mut ex = BTreeSet::new();
        match target {
            EvalTarget::Train => {}
            EvalTarget::Eval => {
                ex.extend(self.train.iter().filter(|&&(u, _)| u == user).map(|&(_, i)| i));
            }
            EvalTarget::Test => {
                ex.extend(self.train.iter().filter(|&&(u, _)| u == user).map(|&(_, i)| i));
                ex.extend(self.eval.iter().filter(|&&(u, _)| u == user).map(|&(_, i)| i));
            }
        }
        ex
    }
}

/// Fraction of the relevant items that appear in the first K ranks.
pub fn recall_at_k(ranked: &[u32], relevant: &BTreeSet<u32>, k: usize) -> f64 {
    assert!(k >= 1, "K must be at least 1");
    assert!(!relevant.is_empty(), "recall needs at least one relevant item");
    let hits = ranked
        .iter()
        .take(k)
        .filter(|i| relevant.contains(i))
        .count();
    hits as f64 / relevant.len() as f64
}

/// Binary-relevance NDCG: position-discounted hit gain over the ideal
/// ranking's gain, with the ideal capped at `min(K, |relevant|)` hits.
pub fn ndcg_at_k(ranked: &[u32], relevant: &BTreeSet<u32>, k: usize) -> f64 {
    assert!(k >= 1, "K must be at least 1");
    assert!(!relevant.is_empty(), "NDCG needs at least one relevant item");
    let mut dcg = 0.0;
    for (idx, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            dcg += 1.0 / ((idx + 2) as f64).log2();
        }
    }
    let ideal_hits = k.min(relevant.len());
    let mut idcg = 0.0;
    for idx in 0..ideal_hits {
        idcg += 1.0 / ((idx + 2) as f64).log2();
    }
    dcg / idcg
}

/// Compensated (Kahan) summation so parallel-collected per-user terms
/// reduce to the same bits as a serial pass.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(self) -> f64 {
        self.sum
    }
}

/// Score every candidate item for one user and return the top `top_k`
/// `(item, score)` rows, ordered by descending score with ascending item
/// id as the tie-break. Every (user, item) pair gets its own derived
/// sampling seed, so rankings are independent of evaluation order.
#[allow(clippy::too_many_arguments)] // mirrors the evaluation contract
pub fn rank_items_for_user(
    params: &ModelParams,
    ukg: &UnifiedKnowledgeGraph,
    user: u32,
    excluded: &BTreeSet<u32>,
    top_k: usize,
    sample_size: usize,
    switches: &AblationSwitches,
    seed: u64,
) -> Result<Vec<(u32, f64)>> {
    let source = PlainParams(params);
    let mut scored = Vec::with_capacity(ukg.items().len());
    for &item in ukg.items() {
        if excluded.contains(&item) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            &[STREAM_EVAL, u64::from(user), u64::from(item)],
        ));
        let sampled = sample_khop(
            ukg,
            user,
            item,
            params.shape.depth,
            sample_size,
            &mut rng,
        );
        let score = forward(&source, &sampled, switches)?;
        if !score.is_finite() {
            return Err(Error::NonFinite(format!(
                "score for user {user}, item {item} is not finite"
            )));
        }
        scored.push((item, score));
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("scores are finite")
            .then(a.0.cmp(&b.0))
    });
    scored.truncate(top_k);
    Ok(scored)
}

/// One averaged metric row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
    /// Users averaged over (those with ≥1 relevant item and ≥1 candidate).
    pub n_users: usize,
}

/// Average Recall@K and NDCG@K over the users of one split part, for each
/// requested K. Users with no relevant items are excluded; candidate sets
/// are filtered per [`EvalTarget`].
#[allow(clippy::too_many_arguments)] // mirrors the evaluation contract
pub fn evaluate_topk(
    params: &ModelParams,
    ukg: &UnifiedKnowledgeGraph,
    split: &Split,
    target: EvalTarget,
    ks: &[usize],
    sample_size: usize,
    switches: &AblationSwitches,
    seed: u64,
) -> Result<Vec<MetricRow>> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidArgument(
            "the K list must be nonempty with every K ≥ 1".into(),
        ));
    }
    let kmax = *ks.iter().max().unwrap();
    let relevant = split.relevant_by_user(target);
    let users: Vec<(u32, BTreeSet<u32>)> = relevant.into_iter().collect();

    // Parallel per-user rankings, collected in user order; `None` marks a
    // user whose candidate set vanished entirely under filtering.
    let per_user: Vec<Option<Vec<(f64, f64)>>> = users
        .par_iter()
        .map(|(user, items)| {
            let excluded = split.excluded_items(*user, target);
            let ranked = rank_items_for_user(
                params,
                ukg,
                *user,
                &excluded,
                kmax,
                sample_size,
                switches,
                seed,
            )?;
            if ranked.is_empty() {
                return Ok(None);
            }
            let ranked_items: Vec<u32> = ranked.iter().map(|&(i, _)| i).collect();
            Ok(Some(
                ks.iter()
                    .map(|&k| {
                        (
                            recall_at_k(&ranked_items, items, k),
                            ndcg_at_k(&ranked_items, items, k),
                        )
                    })
                    .collect(),
            ))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(ks.len());
    for (kidx, &k) in ks.iter().enumerate() {
        let mut recall = Kahan::default();
        let mut ndcg = Kahan::default();
        let mut n_users = 0usize;
        for metrics in per_user.iter().flatten() {
            recall.add(metrics[kidx].0);
            ndcg.add(metrics[kidx].1);
            n_users += 1;
        }
        let denom = if n_users == 0 { 1.0 } else { n_users as f64 };
        rows.push(MetricRow {
            k,
            recall: recall.value() / denom,
            ndcg: ndcg.value() / denom,
            n_users,
        });
    }
    Ok(rows)
}
