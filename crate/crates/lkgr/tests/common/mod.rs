//! Shared fixtures and independent oracles for the integration suites.
//!
//! The oracles here deliberately avoid the library's geometry and metric
//! code paths: they recompute everything with plain `f64` vector
//! arithmetic so that agreement is evidence, not tautology.

#![allow(dead_code)] // each test target uses a different subset

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Output;

use lkgr::graph::{NeighborSample, SampledNeighborhood};
use lkgr::manifold::Activation;
use lkgr::model::{AblationSwitches, Aggregator, ModelParams};
use lkgr::synthetic::{scale_free_ukg, SyntheticSpec};
use rand::Rng;

// ------------------------------------------------------------ CLI driver

/// Run the compiled binary with the given arguments in `dir`.
pub fn run_cli(dir: &Path, args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_lkgr"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to spawn the lkgr binary")
}

pub fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Write the desk-scale synthetic dataset as TSVs and ingest it into a
/// bundle directory, returning the bundle path.
pub fn ingest_desk_bundle(dir: &Path, seed: u64) -> std::path::PathBuf {
    let data = scale_free_ukg(&SyntheticSpec::desk(seed)).expect("synthetic");
    let (kg, inter) = data.write_tsv(dir).expect("write tsvs");
    let bundle = dir.join("bundle");
    let out = run_cli(
        dir,
        &[
            "ingest",
            "--kg",
            kg.to_str().unwrap(),
            "--interactions",
            inter.to_str().unwrap(),
            "--out",
            bundle.to_str().unwrap(),
        ],
    );
    assert!(
        out.status.success(),
        "ingest failed: {}",
        stderr_of(&out)
    );
    bundle
}

// --------------------------------------------------------- metric oracle

/// Brute-force Recall@K: hits among the first K over |relevant|.
pub fn recall_oracle(ranked: &[u32], relevant: &BTreeSet<u32>, k: usize) -> f64 {
    let hits = ranked
        .iter()
        .take(k)
        .filter(|i| relevant.contains(i))
        .count();
    hits as f64 / relevant.len() as f64
}

/// Brute-force NDCG@K with binary gains: DCG sums 1/log2(p+1) at each
/// relevant position p ≤ K; the ideal DCG fills the first
/// min(K, |relevant|) positions.
pub fn ndcg_oracle(ranked: &[u32], relevant: &BTreeSet<u32>, k: usize) -> f64 {
    let mut dcg = 0.0;
    for (idx, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            dcg += 1.0 / ((idx + 2) as f64).log2();
        }
    }
    let mut idcg = 0.0;
    for idx in 0..k.min(relevant.len()) {
        idcg += 1.0 / ((idx + 2) as f64).log2();
    }
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

// ------------------------------------------------- unit-curvature oracle

/// Minkowski inner product `−x₀y₀ + Σ xᵢyᵢ` (plain loop version).
pub fn mink(x: &[f64], y: &[f64]) -> f64 {
    let mut s = -x[0] * y[0];
    for i in 1..x.len() {
        s += x[i] * y[i];
    }
    s
}

/// Hyperboloid distance at c = 1: `arcosh(−⟨x,y⟩)`.
pub fn unit_distance(x: &[f64], y: &[f64]) -> f64 {
    (-mink(x, y)).max(1.0).acosh()
}

/// Hyperboloid exponential map at c = 1:
/// `cosh(‖v‖) x + sinh(‖v‖) v/‖v‖` with `‖v‖ = √⟨v,v⟩`.
pub fn unit_exp(x: &[f64], v: &[f64]) -> Vec<f64> {
    let n = mink(v, v).max(0.0).sqrt();
    if n < 1e-15 {
        return x.to_vec();
    }
    x.iter()
        .zip(v)
        .map(|(&xi, &vi)| n.cosh() * xi + n.sinh() * vi / n)
        .collect()
}

/// Hyperboloid logarithm map at c = 1:
/// `d(x,y) · (y − α x) / √(α² − 1)` with `α = −⟨x,y⟩`.
pub fn unit_log(x: &[f64], y: &[f64]) -> Vec<f64> {
    let alpha = -mink(x, y);
    let denom = (alpha * alpha - 1.0).max(0.0).sqrt();
    if denom < 1e-15 {
        return vec![0.0; x.len()];
    }
    let d = alpha.max(1.0).acosh();
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| d * (yi - alpha * xi) / denom)
        .collect()
}

/// Hyperboloid lift at c = 1: time coordinate `√(1 + ‖xs‖²)`.
pub fn unit_project(spatial: &[f64]) -> Vec<f64> {
    let norm_sq: f64 = spatial.iter().map(|v| v * v).sum();
    let mut p = Vec::with_capacity(spatial.len() + 1);
    p.push((1.0 + norm_sq).sqrt());
    p.extend_from_slice(spatial);
    p
}

// ------------------------------------------------------ random man. data

/// A random point on the manifold of curvature `c`: the spatial lift of a
/// uniform vector in `[-2, 2]^dim`.
pub fn random_manifold_point<R: Rng>(rng: &mut R, dim: usize, c: f64) -> Vec<f64> {
    let spatial: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let norm_sq: f64 = spatial.iter().map(|v| v * v).sum();
    let mut p = Vec::with_capacity(dim + 1);
    p.push((norm_sq + c).sqrt());
    p.extend(spatial);
    p
}

/// A random tangent vector at `x` with Minkowski norm at most `max_norm`:
/// a random ambient vector projected onto the tangent space and rescaled.
pub fn random_tangent_at<R: Rng>(rng: &mut R, x: &[f64], c: f64, max_norm: f64) -> Vec<f64> {
    let ambient: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // v = a + (⟨x,a⟩/c) x is Minkowski-orthogonal to x.
    let coeff = mink(x, ambient.as_slice()) / c;
    let mut v: Vec<f64> = ambient
        .iter()
        .zip(x)
        .map(|(&ai, &xi)| ai + coeff * xi)
        .collect();
    let norm = mink(&v, &v).max(0.0).sqrt();
    let target = rng.gen_range(0.0..max_norm);
    if norm > 1e-12 {
        for vi in &mut v {
            *vi *= target / norm;
        }
    } else {
        v.fill(0.0);
    }
    v
}

// ------------------------------------------------------ flat-GCN oracle

fn oracle_activation(act: Activation, v: f64) -> f64 {
    match act {
        Activation::Relu => v.max(0.0),
        Activation::Tanh => v.tanh(),
        Activation::Identity => v,
    }
}

/// Score a `(user, item)` pair in flat (Euclidean) mode with straight-line
/// vector arithmetic: embedding lookups, bilinear attention with a plain
/// softmax, convex neighbor mixing, affine aggregation, and a dot-product
/// score. Mirrors the sampled-neighborhood semantics but shares no
/// geometry code with the library.
pub fn flat_forward_oracle(
    params: &ModelParams,
    sampled: &SampledNeighborhood,
    switches: &AblationSwitches,
) -> f64 {
    assert!(
        !switches.use_hyperbolic,
        "the straight-line oracle only covers flat mode"
    );
    let shape = &params.shape;
    let d = shape.dim;
    let vals = &params.values;
    let emb = |n: u32| vals[shape.embedding_range(n)].to_vec();

    let matvec = |m: &[f64], rows: usize, cols: usize, x: &[f64]| -> Vec<f64> {
        assert_eq!(x.len(), cols);
        (0..rows)
            .map(|r| (0..cols).map(|j| m[r * cols + j] * x[j]).sum())
            .collect()
    };
    let weights = |parent: &[f64], edges: &[(u32, u32)], children: &[Vec<f64>]| -> Vec<f64> {
        if !switches.use_attention {
            return vec![1.0 / edges.len() as f64; edges.len()];
        }
        let scores: Vec<f64> = edges
            .iter()
            .zip(children)
            .map(|(&(r, _), child)| {
                let w_r = &vals[shape.relation_range(r).unwrap()];
                let wt = matvec(w_r, d, d, child);
                parent.iter().zip(&wt).map(|(a, b)| a * b).sum()
            })
            .collect();
        let exps: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    };
    let mix = |base: &[f64], families: &[(&[Vec<f64>], &[f64])]| -> Vec<f64> {
        if families.iter().all(|(pts, _)| pts.is_empty()) {
            return base.to_vec();
        }
        let mut out = base.to_vec();
        for (points, ws) in families {
            for (p, &w) in points.iter().zip(*ws) {
                for i in 0..out.len() {
                    out[i] += w * (p[i] - base[i]);
                }
            }
        }
        out
    };
    let agg = |hop: usize, x: &[f64], s: &[f64]| -> Vec<f64> {
        let a = &vals[shape.agg_weight_range(hop)];
        let b = &vals[shape.agg_bias_range(hop)];
        let combined: Vec<f64> = match shape.aggregator {
            Aggregator::Sum => x.iter().zip(s).map(|(p, q)| p + q).collect(),
            Aggregator::Concat => x.iter().chain(s.iter()).copied().collect(),
            Aggregator::Neighbor => s.to_vec(),
        };
        let mut t = matvec(a, d, combined.len(), &combined);
        for i in 0..d {
            t[i] += b[i];
        }
        t.into_iter()
            .map(|v| oracle_activation(shape.activation, v))
            .collect()
    };

    // User: hop-0 update from its sampled items.
    let u0 = emb(sampled.user_node);
    let s_u = match (&sampled.user_items, switches.use_interactive_signals) {
        (NeighborSample::Drawn(edges), true) => {
            let pts: Vec<Vec<f64>> = edges.iter().map(|&(_, n)| emb(n)).collect();
            let ws = weights(&u0, edges, &pts);
            mix(&u0, &[(pts.as_slice(), ws.as_slice())])
        }
        _ => u0.clone(),
    };
    let user_final = agg(0, &u0, &s_u);

    // Entities: peel layers from the outside in.
    let depth = shape.depth;
    let mut reps: Vec<Vec<Vec<f64>>> = (0..=depth)
        .map(|l| sampled.layer_nodes(l).iter().map(|&n| emb(n)).collect())
        .collect();
    for l in (1..=depth).rev() {
        let item_turn = l == 1;
        if !switches.use_kg_extraction && !item_turn {
            continue;
        }
        let samples = &sampled.kg_layers[l - 1];
        let mut updated = Vec::with_capacity(reps[l - 1].len());
        let mut off = 0;
        for (k, sample) in samples.iter().enumerate() {
            let parent = reps[l - 1][k].clone();
            let edges = sample.edges();
            let children: Vec<Vec<f64>> = reps[l][off..off + edges.len()].to_vec();
            off += edges.len();
            let kg_active = switches.use_kg_extraction && !edges.is_empty();
            let s = if item_turn && k == 0 {
                let (kg_pts, kg_ws) = if kg_active {
                    let w = weights(&parent, edges, &children);
                    (children.clone(), w)
                } else {
                    (Vec::new(), Vec::new())
                };
                let (ui_pts, ui_ws) =
                    match (&sampled.item_users, switches.use_interactive_signals) {
                        (NeighborSample::Drawn(ue), true) => {
                            let pts: Vec<Vec<f64>> =
                                ue.iter().map(|&(_, n)| emb(n)).collect();
                            let w = weights(&parent, ue, &pts);
                            (pts, w)
                        }
                        _ => (Vec::new(), Vec::new()),
                    };
                mix(
                    &parent,
                    &[
                        (ui_pts.as_slice(), ui_ws.as_slice()),
                        (kg_pts.as_slice(), kg_ws.as_slice()),
                    ],
                )
            } else if kg_active {
                let w = weights(&parent, edges, &children);
                mix(&parent, &[(children.as_slice(), w.as_slice())])
            } else {
                parent.clone()
            };
            updated.push(agg(l, &parent, &s));
        }
        reps[l - 1] = updated;
    }

    let item_final = &reps[0][0];
    user_final.iter().zip(item_final).map(|(a, b)| a * b).sum()
}
