//! Acceptance suite: one test per release criterion, each printing a
//! single `criterion N (...): PASS|FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! Every check aggregates its evidence first and concludes once, so a
//! failure still produces exactly one line plus the collected reasons.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use lkgr::eval::{
    evaluate_topk, ndcg_at_k, recall_at_k, split_dataset, EvalTarget, DEFAULT_K_GRID,
};
use lkgr::graph::{build_ukg, sample_khop, InteractionMatrix};
use lkgr::manifold::{
    constraint_residual, encode_euclidean, exp_map, exp_map_origin, exp_origin_spatial,
    hyperbolic_activation, log_map, log_map_origin, log_origin_spatial, lorentz_bias_add,
    lorentz_concat, lorentz_distance, lorentz_linear, origin, project_to_manifold, Activation,
};
use lkgr::model::{forward, AblationSwitches, Aggregator, ModelParams, ModelShape, PlainParams};
use lkgr::scalar::MatRef;
use lkgr::synthetic::{scale_free_ukg, SyntheticSpec};
use lkgr::training::{fit, TrainConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check(failures: &mut Vec<String>, ok: bool, msg: String) {
    if !ok {
        failures.push(msg);
    }
}

fn conclude(label: &str, failures: Vec<String>) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {label}: {verdict}");
    assert!(
        failures.is_empty(),
        "criterion {label}: FAIL\n  - {}",
        failures.join("\n  - ")
    );
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖₂ / max(1, ‖b‖₂)`.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2(&diff) / l2(b).max(1.0)
}

const CURVATURES: [f64; 3] = [0.5, 1.0, 2.0];

// ---------------------------------------------------------------------
// 1. Every manifold-producing operation returns points that satisfy the
//    hyperboloid constraint with a positive time coordinate.
// ---------------------------------------------------------------------

#[test]
fn criterion_1_manifold_constraints() {
    const N: usize = 10_000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC01);
    let acts = [Activation::Relu, Activation::Tanh, Activation::Identity];
    let mut worst = 0.0_f64;
    let mut nonpositive_time = 0_usize;
    for &c in &CURVATURES {
        for op in 0..8 {
            for i in 0..N {
                let dim = rng.gen_range(2..=6);
                let point: Vec<f64> = match op {
                    0 => {
                        let amb: Vec<f64> =
                            (0..=dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
                        project_to_manifold(&amb, c)
                    }
                    1 => {
                        let x = common::random_manifold_point(&mut rng, dim, c);
                        let v = common::random_tangent_at(&mut rng, &x, c, 5.0);
                        exp_map(&x, &v, c)
                    }
                    2 => {
                        let mut v = vec![0.0];
                        v.extend((0..dim).map(|_| rng.gen_range(-3.0..3.0)));
                        exp_map_origin(&v, c)
                    }
                    3 => {
                        let xe: Vec<f64> =
                            (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
                        encode_euclidean(&xe, c)
                    }
                    4 => {
                        let rows = rng.gen_range(2..=6);
                        let a: Vec<f64> =
                            (0..rows * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let x = common::random_manifold_point(&mut rng, dim, c);
                        lorentz_linear(MatRef::new(rows, dim, &a), &x, c)
                            .expect("matching shapes")
                    }
                    5 => {
                        let x = common::random_manifold_point(&mut rng, dim, c);
                        let mut b = vec![0.0];
                        b.extend((0..dim).map(|_| rng.gen_range(-1.0..1.0)));
                        lorentz_bias_add(&x, &b, c)
                    }
                    6 => {
                        let a = common::random_manifold_point(&mut rng, dim, c);
                        let b_dim = rng.gen_range(2..=6);
                        let b = common::random_manifold_point(&mut rng, b_dim, c);
                        lorentz_concat(&a, &b, c)
                    }
                    _ => {
                        let x = common::random_manifold_point(&mut rng, dim, c);
                        hyperbolic_activation(&x, acts[i % acts.len()], c)
                    }
                };
                worst = worst.max(constraint_residual(&point, c));
                if point[0] <= 0.0 {
                    nonpositive_time += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();

    let mut failures = Vec::new();
    check(
        &mut failures,
        worst <= 1e-6,
        format!("worst constraint residual {worst:.3e} exceeds 1e-6"),
    );
    check(
        &mut failures,
        nonpositive_time == 0,
        format!("{nonpositive_time} points have a non-positive time coordinate"),
    );
    check(
        &mut failures,
        elapsed.as_secs_f64() < 10.0,
        format!("constraint sweep took {elapsed:.2?} (budget 10 s)"),
    );
    conclude("1 (manifold constraints)", failures);
}

// ---------------------------------------------------------------------
// 2. exp/log round trips, origin specializations vs the general maps,
//    and unit-curvature agreement with independent closed forms.
// ---------------------------------------------------------------------

#[test]
fn criterion_2_round_trips() {
    const N: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC02);

    let mut worst_exp_log = 0.0_f64; // y ↦ log ↦ exp ↦ y
    let mut worst_log_exp = 0.0_f64; // v ↦ exp ↦ log ↦ v
    for i in 0..N {
        let c = CURVATURES[i % CURVATURES.len()];
        let dim = rng.gen_range(2..=6);
        let x = common::random_manifold_point(&mut rng, dim, c);
        let y = common::random_manifold_point(&mut rng, dim, c);
        let y2 = exp_map(&x, &log_map(&x, &y, c), c);
        worst_exp_log = worst_exp_log.max(rel_err(&y2, &y));
        let v = common::random_tangent_at(&mut rng, &x, c, 5.0);
        let v2 = log_map(&x, &exp_map(&x, &v, c), c);
        worst_log_exp = worst_log_exp.max(rel_err(&v2, &v));
    }

    let mut worst_origin = 0.0_f64;
    for i in 0..3_000 {
        let c = CURVATURES[i % CURVATURES.len()];
        let dim = rng.gen_range(2..=6);
        let o = origin(dim, c);
        let y = common::random_manifold_point(&mut rng, dim, c);
        let general_log = log_map(&o, &y, c);
        worst_origin = worst_origin.max(rel_err(&log_map_origin(&y, c), &general_log));
        worst_origin =
            worst_origin.max(rel_err(&log_origin_spatial(&y, c), &general_log[1..]));

        let mut v = vec![0.0];
        v.extend((0..dim).map(|_| rng.gen_range(-2.0..2.0)));
        let general_exp = exp_map(&o, &v, c);
        worst_origin = worst_origin.max(rel_err(&exp_map_origin(&v, c), &general_exp));
        worst_origin =
            worst_origin.max(rel_err(&exp_origin_spatial(&v[1..], c), &general_exp));
        worst_origin =
            worst_origin.max(rel_err(&encode_euclidean(&v[1..], c), &general_exp));
    }

    let mut worst_unit = 0.0_f64;
    for _ in 0..3_000 {
        let dim = rng.gen_range(2..=6);
        let x = common::random_manifold_point(&mut rng, dim, 1.0);
        let y = common::random_manifold_point(&mut rng, dim, 1.0);
        let v = common::random_tangent_at(&mut rng, &x, 1.0, 5.0);

        worst_unit = worst_unit.max(rel_err(&exp_map(&x, &v, 1.0), &common::unit_exp(&x, &v)));
        worst_unit = worst_unit.max(rel_err(&log_map(&x, &y, 1.0), &common::unit_log(&x, &y)));
        let d = lorentz_distance(&x, &y, 1.0);
        let d_ref = common::unit_distance(&x, &y);
        worst_unit = worst_unit.max((d - d_ref).abs() / d_ref.abs().max(1.0));

        let spatial: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut ambient = vec![0.0];
        ambient.extend_from_slice(&spatial);
        worst_unit = worst_unit.max(rel_err(
            &project_to_manifold(&ambient, 1.0),
            &common::unit_project(&spatial),
        ));
        let unit_origin = {
            let mut o = vec![0.0; dim + 1];
            o[0] = 1.0;
            o
        };
        worst_unit = worst_unit.max(rel_err(
            &encode_euclidean(&spatial, 1.0),
            &common::unit_exp(&unit_origin, &ambient),
        ));
    }

    let mut failures = Vec::new();
    check(
        &mut failures,
        worst_exp_log <= 1e-6,
        format!("worst exp∘log relative error {worst_exp_log:.3e} exceeds 1e-6"),
    );
    check(
        &mut failures,
        worst_log_exp <= 1e-6,
        format!("worst log∘exp relative error {worst_log_exp:.3e} exceeds 1e-6"),
    );
    check(
        &mut failures,
        worst_origin <= 1e-8,
        format!("origin specializations deviate by {worst_origin:.3e} (> 1e-8)"),
    );
    check(
        &mut failures,
        worst_unit <= 1e-10,
        format!("unit-curvature closed forms deviate by {worst_unit:.3e} (> 1e-10)"),
    );
    conclude("2 (round trips)", failures);
}

// ---------------------------------------------------------------------
// 3. The gradcheck command verifies the full loss gradient against
//    central differences for all aggregators and depths 0..=2.
// ---------------------------------------------------------------------

#[test]
fn criterion_3_gradient_suite() {
    let start = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let out = common::run_cli(dir.path(), &["gradcheck"]);
    let elapsed = start.elapsed();
    let stdout = common::stdout_of(&out);
    let ok_rows = stdout
        .lines()
        .filter(|l| l.trim_end().ends_with(" ok"))
        .count();

    let mut failures = Vec::new();
    check(
        &mut failures,
        out.status.code() == Some(0),
        format!(
            "gradcheck exited with {:?}; stderr: {}",
            out.status.code(),
            common::stderr_of(&out)
        ),
    );
    check(
        &mut failures,
        ok_rows == 9,
        format!("expected 9 passing rows (3 aggregators × 3 depths), saw {ok_rows}:\n{stdout}"),
    );
    check(
        &mut failures,
        elapsed.as_secs_f64() < 60.0,
        format!("gradient check took {elapsed:.2?} (budget 60 s)"),
    );
    conclude("3 (gradient suite)", failures);
}

// ---------------------------------------------------------------------
// 4. Flat-mode forward passes match a straight-line reimplementation;
//    ranking metrics match brute-force oracles.
// ---------------------------------------------------------------------

#[test]
fn criterion_4_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC04);
    let mut failures = Vec::new();

    let mut worst_forward = 0.0_f64;
    for case in 0..100u64 {
        let data = scale_free_ukg(&SyntheticSpec::tiny(1_000 + case)).expect("synthetic");
        let (ukg, _) = build_ukg(&data.triples, &data.interactions, None).expect("graph");
        let depth = rng.gen_range(0..=2);
        let shape = ModelShape {
            n_nodes: ukg.n_nodes(),
            n_relations: ukg.n_relations(),
            dim: rng.gen_range(2..=5),
            depth,
            aggregator: Aggregator::ALL[rng.gen_range(0..Aggregator::ALL.len())],
            activation: [Activation::Relu, Activation::Tanh, Activation::Identity]
                [rng.gen_range(0..3)],
        };
        let params = ModelParams::init(shape, 77 + case);
        let switches = AblationSwitches {
            use_interactive_signals: rng.gen(),
            use_kg_extraction: rng.gen(),
            use_hyperbolic: false,
            use_attention: rng.gen(),
        };
        let user = rng.gen_range(0..ukg.n_users());
        let item = ukg.items()[rng.gen_range(0..ukg.items().len())];
        let sample_size = rng.gen_range(1..=3);
        let sampled = sample_khop(&ukg, user, item, depth, sample_size, &mut rng);

        let got = forward(&PlainParams(&params), &sampled, &switches).expect("forward");
        let want = common::flat_forward_oracle(&params, &sampled, &switches);
        worst_forward = worst_forward.max((got - want).abs() / want.abs().max(1.0));
    }
    check(
        &mut failures,
        worst_forward <= 1e-10,
        format!("flat forward deviates from the oracle by {worst_forward:.3e} (> 1e-10)"),
    );

    let mut worst_metric = 0.0_f64;
    for _ in 0..1_000 {
        let n = rng.gen_range(2..=50u32);
        let mut universe: Vec<u32> = (0..n).collect();
        universe.shuffle(&mut rng);
        let ranked = &universe[..rng.gen_range(1..=n as usize)];
        let n_relevant = rng.gen_range(1..=n as usize);
        let relevant: BTreeSet<u32> = universe
            .choose_multiple(&mut rng, n_relevant)
            .copied()
            .collect();
        let k = rng.gen_range(1..=n as usize + 5);
        worst_metric = worst_metric.max(
            (recall_at_k(ranked, &relevant, k) - common::recall_oracle(ranked, &relevant, k))
                .abs(),
        );
        worst_metric = worst_metric.max(
            (ndcg_at_k(ranked, &relevant, k) - common::ndcg_oracle(ranked, &relevant, k)).abs(),
        );
    }
    check(
        &mut failures,
        worst_metric <= 1e-12,
        format!("ranking metrics deviate from the oracle by {worst_metric:.3e} (> 1e-12)"),
    );
    conclude("4 (oracle equivalence)", failures);
}

// ---------------------------------------------------------------------
// 5. The model overfits a desk-scale synthetic graph: training-split
//    Recall@10 ≥ 0.9 within 200 epochs, and the 10-epoch block-mean loss
//    never increases.
// ---------------------------------------------------------------------

#[test]
fn criterion_5_overfit() {
    let start = Instant::now();
    let data = scale_free_ukg(&SyntheticSpec::desk(7)).expect("synthetic");
    let config = TrainConfig {
        epochs_max: 200,
        patience: 200,
        seed: 7,
        ..TrainConfig::desk()
    };
    let switches = AblationSwitches::full();
    let out = fit(&data.triples, &data.interactions, &config, &switches).expect("fit");
    let rows = evaluate_topk(
        &out.params,
        &out.ukg,
        &out.split,
        EvalTarget::Train,
        &[10],
        config.sample_size,
        &switches,
        config.seed,
    )
    .expect("train-split evaluation");
    let recall = rows[0].recall;
    let elapsed = start.elapsed();

    let mut failures = Vec::new();
    check(
        &mut failures,
        out.history.len() == 200,
        format!("expected 200 training epochs, got {}", out.history.len()),
    );
    check(
        &mut failures,
        recall >= 0.9,
        format!("training-split Recall@10 is {recall:.4} (< 0.9)"),
    );
    // Means over disjoint 10-epoch windows must not increase (tiny slack
    // for float accumulation).
    let losses: Vec<f64> = out.history.iter().map(|r| r.loss).collect();
    let block_means: Vec<f64> = losses
        .chunks(10)
        .map(|b| b.iter().sum::<f64>() / b.len() as f64)
        .collect();
    for w in block_means.windows(2) {
        check(
            &mut failures,
            w[1] <= w[0] + 1e-9,
            format!("10-epoch mean loss rose from {:.6} to {:.6}", w[0], w[1]),
        );
    }
    check(
        &mut failures,
        elapsed.as_secs_f64() < 300.0,
        format!("overfit run took {elapsed:.2?} (budget 5 min)"),
    );
    conclude("5 (overfit)", failures);
}

// ---------------------------------------------------------------------
// 6. All four feature ablations train and evaluate end to end through
//    the binary, and removing the interaction signal strictly hurts
//    training-split recall. Every variant gets the same fixed budget and
//    keeps its final-epoch parameters, so the comparison measures the
//    model difference rather than early-stopping selection noise.
// ---------------------------------------------------------------------

fn csv_recall(path: &std::path::Path, target: &str, k: usize) -> f64 {
    let text = std::fs::read_to_string(path).expect("metrics.csv");
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[0] == target && cols[1] == k.to_string() {
            return cols[2].parse().expect("recall column");
        }
    }
    panic!("no row for target {target}, k {k} in {}", path.display());
}

#[test]
fn criterion_6_ablation_mechanics() {
    let dir = tempfile::tempdir().expect("tempdir");
    let bundle = common::ingest_desk_bundle(dir.path(), 7);
    let mut failures = Vec::new();

    let mut recalls: Vec<(String, f64)> = Vec::new();
    for ablate in [None, Some("is"), Some("ke"), Some("hg"), Some("lka")] {
        let name = ablate.unwrap_or("full");
        let run = dir.path().join(format!("run-{name}"));
        let mut args = vec![
            "train",
            "--bundle",
            bundle.to_str().unwrap(),
            "--out",
            run.to_str().unwrap(),
            "--dataset-preset",
            "desk",
            "--seed",
            "2",
            "--epochs",
            "30",
            "--patience",
            "30",
            "--keep",
            "final",
        ];
        if let Some(tag) = ablate {
            args.extend(["--ablate", tag]);
        }
        let train = common::run_cli(dir.path(), &args);
        check(
            &mut failures,
            train.status.code() == Some(0),
            format!(
                "variant {name}: train exited with {:?}; stderr: {}",
                train.status.code(),
                common::stderr_of(&train)
            ),
        );

        let ckpt = run.join("checkpoint.json");
        let eval_dir = run.join("eval-train");
        let eval = common::run_cli(
            dir.path(),
            &[
                "eval",
                "--checkpoint",
                ckpt.to_str().unwrap(),
                "--bundle",
                bundle.to_str().unwrap(),
                "--out",
                eval_dir.to_str().unwrap(),
                "--k",
                "10",
                "--target",
                "train",
            ],
        );
        check(
            &mut failures,
            eval.status.code() == Some(0),
            format!(
                "variant {name}: eval exited with {:?}; stderr: {}",
                eval.status.code(),
                common::stderr_of(&eval)
            ),
        );
        let csv = eval_dir.join("metrics.csv");
        check(
            &mut failures,
            csv.is_file() && eval_dir.join("metrics.jsonl").is_file(),
            format!("variant {name}: metrics files missing under {}", eval_dir.display()),
        );
        if failures.is_empty() {
            recalls.push((name.to_string(), csv_recall(&csv, "train", 10)));
        }
    }

    if failures.is_empty() {
        let get = |n: &str| recalls.iter().find(|(m, _)| m == n).expect("variant ran").1;
        let full = get("full");
        let without_is = get("is");
        check(
            &mut failures,
            without_is < full,
            format!(
                "removing the interaction signal should strictly reduce training recall, \
                 got full {full:.4} vs without-is {without_is:.4}"
            ),
        );
    }
    conclude("6 (ablation mechanics)", failures);
}

// ---------------------------------------------------------------------
// 7. Benchmark presets, split proportions, and the default K grid match
//    the published protocol.
// ---------------------------------------------------------------------

#[test]
fn criterion_7_protocol_fidelity() {
    let mut failures = Vec::new();

    let expect = [
        ("book", TrainConfig::book(), 64, 1, 128, 8, 1e-3, 5e-7, Aggregator::Concat),
        ("movie", TrainConfig::movie(), 32, 2, 4096, 4, 2e-3, 1e-7, Aggregator::Concat),
        (
            "restaurant",
            TrainConfig::restaurant(),
            32,
            1,
            4096,
            8,
            2e-3,
            1e-7,
            Aggregator::Sum,
        ),
    ];
    for (name, cfg, dim, depth, batch, sample, eta, lambda, agg) in expect {
        let ok = cfg.dim == dim
            && cfg.depth == depth
            && cfg.batch_size == batch
            && cfg.sample_size == sample
            && cfg.eta.to_bits() == f64::to_bits(eta)
            && cfg.lambda.to_bits() == f64::to_bits(lambda)
            && cfg.aggregator == agg;
        check(
            &mut failures,
            ok,
            format!("preset {name} drifted from the benchmark table: {cfg:?}"),
        );
    }

    for (n, seed) in [(7usize, 1u64), (10, 2), (33, 3), (100, 4), (1003, 5)] {
        let pairs: Vec<(u32, u32)> = (0..n as u32).map(|k| (k % 13, k / 13)).collect();
        let im = InteractionMatrix::from_pairs(pairs.clone()).expect("pairs");
        let split = split_dataset(&im, (0.6, 0.2, 0.2), seed).expect("split");
        let sizes = [split.train.len(), split.eval.len(), split.test.len()];
        let shares = [0.6, 0.2, 0.2];
        for (part, (&size, share)) in sizes.iter().zip(shares).enumerate() {
            check(
                &mut failures,
                (size as f64 - share * n as f64).abs() <= 1.0 + 1e-9,
                format!("n={n}: part {part} has {size} pairs, expected ~{}", share * n as f64),
            );
        }
        let mut all: Vec<(u32, u32)> = split
            .train
            .iter()
            .chain(&split.eval)
            .chain(&split.test)
            .copied()
            .collect();
        all.sort_unstable();
        let mut want = pairs;
        want.sort_unstable();
        check(
            &mut failures,
            all == want,
            format!("n={n}: split parts do not partition the interaction set"),
        );
    }

    check(
        &mut failures,
        DEFAULT_K_GRID == [1, 5, 10, 20, 50, 100],
        format!("default K grid drifted: {DEFAULT_K_GRID:?}"),
    );
    conclude("7 (protocol fidelity)", failures);
}

// ---------------------------------------------------------------------
// 8. Same seed + --threads 1 ⇒ byte-identical training history and
//    evaluation metric files across independent processes.
// ---------------------------------------------------------------------

#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().expect("tempdir");
    let bundle = common::ingest_desk_bundle(dir.path(), 3);
    let mut failures = Vec::new();

    let mut artifacts: Vec<[Vec<u8>; 4]> = Vec::new();
    for run in ["a", "b"] {
        let train_dir = dir.path().join(format!("train-{run}"));
        let train = common::run_cli(
            dir.path(),
            &[
                "train",
                "--bundle",
                bundle.to_str().unwrap(),
                "--out",
                train_dir.to_str().unwrap(),
                "--dataset-preset",
                "desk",
                "--seed",
                "3",
                "--epochs",
                "12",
                "--patience",
                "12",
                "--threads",
                "1",
            ],
        );
        check(
            &mut failures,
            train.status.code() == Some(0),
            format!(
                "run {run}: train exited with {:?}; stderr: {}",
                train.status.code(),
                common::stderr_of(&train)
            ),
        );
        let eval_dir = dir.path().join(format!("eval-{run}"));
        let eval = common::run_cli(
            dir.path(),
            &[
                "eval",
                "--checkpoint",
                train_dir.join("checkpoint.json").to_str().unwrap(),
                "--bundle",
                bundle.to_str().unwrap(),
                "--out",
                eval_dir.to_str().unwrap(),
                "--target",
                "test",
                "--threads",
                "1",
            ],
        );
        check(
            &mut failures,
            eval.status.code() == Some(0),
            format!(
                "run {run}: eval exited with {:?}; stderr: {}",
                eval.status.code(),
                common::stderr_of(&eval)
            ),
        );
        if failures.is_empty() {
            artifacts.push([
                std::fs::read(train_dir.join("history.jsonl")).expect("history"),
                std::fs::read(train_dir.join("checkpoint.json")).expect("checkpoint"),
                std::fs::read(eval_dir.join("metrics.jsonl")).expect("metrics.jsonl"),
                std::fs::read(eval_dir.join("metrics.csv")).expect("metrics.csv"),
            ]);
        }
    }

    if failures.is_empty() {
        let names = ["history.jsonl", "checkpoint.json", "metrics.jsonl", "metrics.csv"];
        for (i, name) in names.iter().enumerate() {
            check(
                &mut failures,
                artifacts[0][i] == artifacts[1][i],
                format!("{name} differs between identically seeded runs"),
            );
        }
        check(
            &mut failures,
            !artifacts[0][0].is_empty(),
            "history.jsonl is empty".to_string(),
        );
    }
    conclude("8 (determinism)", failures);
}
