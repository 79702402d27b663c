//! Acceptance suite. Each test prints one line naming its criterion and the
//! outcome (run with `--nocapture` to see them); criteria that need the
//! non-redistributable benchmark files report SKIPPED when the files are
//! absent and run in full once they are placed under `data/` (see
//! `mlinucb fetch-instructions`).

mod common;

use std::time::Instant;

use common::{dataset_if_present, dense_logdet, dense_quad_form, dense_solve, skip_line};
use mlinucb::{
    bound_trace, pca2_variance, run_experiment, sweep, synth_linear, Algorithm, BanditDataset,
    ClusterConfig, ClusterModel, ExperimentConfig, LinUcbPolicy, MlinUcb, PolicyConfig, RoundLog,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn synth_cfg(algorithm: Algorithm, missing_rate: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        dataset: "synthetic".into(),
        algorithm,
        missing_rate,
        seed,
        clusters: 5,
        ..ExperimentConfig::default()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Criterion 1: with no rewards masked, MLINUCB and LinUCB are the same
/// algorithm: identical action sequences, summaries, and arm states.
#[test]
fn criterion_1_reduction_equivalence() {
    let start = Instant::now();
    let (ds, _) = synth_linear(2000, 10, 3, 0.0, 77).unwrap();

    let (lin_summary, lin_logs) = run_experiment(&synth_cfg(Algorithm::LinUcb, 0.0, 4), &ds).unwrap();
    let (ml_summary, ml_logs) = run_experiment(&synth_cfg(Algorithm::MlinUcb, 0.0, 4), &ds).unwrap();

    let lin_actions: Vec<usize> = lin_logs.iter().map(|l| l.chosen_arm).collect();
    let ml_actions: Vec<usize> = ml_logs.iter().map(|l| l.chosen_arm).collect();
    assert_eq!(lin_actions, ml_actions, "action sequences must be identical");
    assert_eq!(lin_logs, ml_logs, "full round logs must be identical");
    assert_eq!(
        lin_summary.total_average_accuracy,
        ml_summary.total_average_accuracy
    );
    assert_eq!(lin_summary.cumulative_regret, ml_summary.cumulative_regret);
    assert_eq!(
        lin_summary.missing_fraction_realized,
        ml_summary.missing_fraction_realized
    );

    // arm states stay bit-identical when the imputation branch is never taken
    let pcfg = PolicyConfig::new(3, 10, 0.25).unwrap();
    let mut lin = LinUcbPolicy::new(pcfg).unwrap();
    let mut ml = MlinUcb::new(pcfg, ClusterConfig::new(5, 1, 99)).unwrap();
    for t in 0..ds.rows() {
        let best = ds.label(t);
        lin.round(ds.context(t), |c| (f64::from(c == best), true))
            .unwrap();
        ml.round(ds.context(t), |c| (f64::from(c == best), true))
            .unwrap();
    }
    assert_eq!(lin.arms(), ml.policy().arms(), "arm states must match exactly");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "criterion 1 must finish in < 5 s, took {elapsed:.2} s");
    println!("acceptance criterion 1 (reduction equivalence): PASS ({elapsed:.2} s)");
}

/// Criterion 2: solve / quad-form / log-det agree with a dense Gaussian
/// elimination oracle over 1000 randomized update sequences.
#[test]
fn criterion_2_linear_algebra_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..1000 {
        let d = rng.random_range(1..=8);
        let n_updates = rng.random_range(0..=50);

        let mut state = mlinucb::SpdState::identity(d).unwrap();
        // independent dense accumulation of A = I + sum x x^T
        let mut dense = vec![0.0; d * d];
        for i in 0..d {
            dense[i * d + i] = 1.0;
        }
        for _ in 0..n_updates {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            state.rank1_update(&x).unwrap();
            for i in 0..d {
                for j in 0..d {
                    dense[i * d + j] += x[i] * x[j];
                }
            }
        }

        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let solved = state.solve(&v).unwrap();
        let oracle = dense_solve(&dense, d, &v);
        let err: f64 = solved
            .iter()
            .zip(oracle.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let oracle_norm: f64 = oracle.iter().map(|u| u * u).sum::<f64>().sqrt();
        assert!(
            err <= 1e-8 * (1.0 + oracle_norm),
            "trial {trial}: solve deviates by {err}"
        );

        // solve residual contract: ||A z - v|| <= 1e-8 (1 + ||v||)
        let mut residual = 0.0f64;
        for i in 0..d {
            let row_dot: f64 = (0..d).map(|j| dense[i * d + j] * solved[j]).sum();
            residual += (row_dot - v[i]) * (row_dot - v[i]);
        }
        let v_norm: f64 = v.iter().map(|u| u * u).sum::<f64>().sqrt();
        assert!(
            residual.sqrt() <= 1e-8 * (1.0 + v_norm),
            "trial {trial}: solve residual {}",
            residual.sqrt()
        );

        let quad = state.quad_form(&v).unwrap();
        let quad_oracle = dense_quad_form(&dense, d, &v);
        assert!(
            (quad - quad_oracle).abs() <= 1e-8 * (1.0 + quad_oracle.abs()),
            "trial {trial}: quad form deviates"
        );

        let ld = state.logdet();
        let ld_oracle = dense_logdet(&dense, d);
        assert!(
            (ld - ld_oracle).abs() <= 1e-8 * ld_oracle.abs().max(1.0),
            "trial {trial}: logdet {ld} vs oracle {ld_oracle}"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "criterion 2 must finish in < 10 s, took {elapsed:.2} s");
    println!("acceptance criterion 2 (linear-algebra oracle): PASS ({elapsed:.2} s)");
}

/// Criterion 3: the imputed value equals the inverse-distance weighted
/// average computed by hand, with the m=1 reduction and the zero-distance
/// guard exact.
#[test]
fn criterion_3_imputation_arithmetic() {
    // model with centroids placed exactly at the given 1-D means
    let build = |means: &[f64], m: usize, rewards: &[(usize, &[f64])]| -> ClusterModel {
        let mut model =
            ClusterModel::new(ClusterConfig::new(means.len(), m, 5), 2).unwrap();
        let points: Vec<Vec<f64>> = means.iter().map(|&v| vec![v]).collect();
        model.initialize(&points).unwrap();
        for &(cluster, rs) in rewards {
            for &r in rs {
                // observing a centroid's own mean leaves it unmoved; the
                // slot routes the reward to that centroid regardless of the
                // index order k-means++ seeding produced
                let slot = model.observe(&[means[cluster]]).unwrap();
                model.record_reward(&slot, 0, r).unwrap();
            }
        }
        model
    };

    // m = 1 reduction: plain average of the cluster the context belongs to
    let model = build(&[0.0, 100.0], 1, &[(0, &[1.0, 1.0, 1.0, 0.0]), (1, &[0.0])]);
    let (g, _) = model.impute(&[3.0], 0);
    assert_eq!(g, 0.75, "m=1 is exactly the nearest cluster average");

    // two clusters, d = (1, 3), averages (1.0, 0.0):
    // (1/1 + 0/3) / (1/1 + 1/3) = 0.75
    let model = build(&[0.0, 4.0], 2, &[(0, &[1.0, 1.0]), (1, &[0.0, 0.0, 0.0])]);
    let (g, _) = model.impute(&[1.0], 0);
    assert!((g - 0.75).abs() <= 1e-12);

    // zero-distance guard: the query sits on a centroid with average 0.4
    let model = build(&[0.0, 4.0], 2, &[(0, &[1.0, 1.0, 0.0, 0.0, 0.0]), (1, &[1.0])]);
    let (g, _) = model.impute(&[0.0], 0);
    assert_eq!(g, 0.4, "zero distance short-circuits to the cluster average");

    // three clusters, hand-evaluated weighted average
    let model = build(
        &[0.0, 3.0, 5.0],
        3,
        &[(0, &[1.0, 1.0, 1.0, 1.0, 0.0]), (1, &[0.5, 0.5]), (2, &[0.2, 0.2, 0.2, 0.2, 0.2])],
    );
    let (g, _) = model.impute(&[1.0], 0);
    let expected = (0.8 / 1.0 + 0.5 / 2.0 + 0.2 / 4.0) / (1.0 / 1.0 + 1.0 / 2.0 + 1.0 / 4.0);
    assert!((g - expected).abs() <= 1e-12, "got {g}, hand value {expected}");

    // enumerated grid: always within [0, 1] and equal to the direct formula
    for avgs in [[0.0, 1.0], [0.25, 0.75], [1.0, 0.0], [0.5, 0.5]] {
        for d1 in [1.0, 2.0, 7.5] {
            let model = build(
                &[0.0, 10.0],
                2,
                &[
                    (0, &[avgs[0]; 4][..]),
                    (1, &[avgs[1]; 2][..]),
                ],
            );
            let x = [d1];
            let (g, _) = model.impute(&x, 0);
            let d2 = 10.0 - d1;
            let expected = (avgs[0] / d1 + avgs[1] / d2) / (1.0 / d1 + 1.0 / d2);
            assert!((g - expected).abs() <= 1e-12);
            assert!((0.0..=1.0).contains(&g));
        }
    }
    println!("acceptance criterion 3 (imputation arithmetic): PASS");
}

fn assert_bound_trace_invariants(logs: &[RoundLog], label: &str) {
    let mut prev_delta = 0.0;
    for (i, log) in logs.iter().enumerate() {
        assert!(
            log.logdet_s >= -1e-9,
            "{label}: logdet_S must stay >= 0, got {} at t={}",
            log.logdet_s,
            log.t
        );
        assert!(
            log.logdet_a >= log.logdet_s - 1e-9,
            "{label}: logdet_A >= logdet_S violated at t={}",
            log.t
        );
        let delta = log.logdet_a - log.logdet_s;
        if i > 0 && delta > prev_delta + 1e-9 {
            assert!(
                log.revealed,
                "{label}: delta grew on a masked round at t={}",
                log.t
            );
        }
        prev_delta = delta;
    }
}

/// Criterion 4: log-det invariants of the bound trace hold on every run,
/// delta grows only on revealed rounds, and an all-missing run is flat zero.
#[test]
fn criterion_4_bound_trace_invariants() {
    let (ds, _) = synth_linear(2000, 10, 3, 0.0, 13).unwrap();
    for missing in [0.1, 0.5, 0.75] {
        let cfg = synth_cfg(Algorithm::MlinUcb, missing, 8);
        let (_, logs) = run_experiment(&cfg, &ds).unwrap();
        assert_bound_trace_invariants(&logs, &format!("missing={missing}"));
        // the increase path is really exercised: revealed rounds widen delta
        let last = logs.last().unwrap();
        assert!(
            last.logdet_a - last.logdet_s > 0.0,
            "missing={missing}: delta stayed 0 despite revealed rounds"
        );

        let trace = bound_trace(&logs, &cfg, ds.dim());
        assert_eq!(trace.len(), logs.len());
        for point in &trace {
            assert!(point.delta_logdet >= -1e-9);
            assert!(point.bound >= 0.0);
        }
    }

    // all rewards missing: A_k and S_k receive identical update sequences
    let cfg = synth_cfg(Algorithm::MlinUcb, 1.0, 8);
    let (_, logs) = run_experiment(&cfg, &ds).unwrap();
    for log in &logs {
        assert_eq!(
            log.logdet_a, log.logdet_s,
            "all-missing run must have delta identically 0"
        );
    }
    println!("acceptance criterion 4 (bound-trace invariants): PASS");
}

fn five_seed_pair(
    ds: &BanditDataset,
    dataset: &str,
    missing_rate: f64,
    clusters: usize,
) -> (f64, f64) {
    let lin = ExperimentConfig {
        dataset: dataset.into(),
        algorithm: Algorithm::LinUcb,
        missing_rate,
        ..ExperimentConfig::default()
    };
    let ml = ExperimentConfig {
        algorithm: Algorithm::MlinUcb,
        clusters,
        neighbors: 1,
        ..lin.clone()
    };
    let results = sweep(ds, &[lin, ml], &[0, 1, 2, 3, 4], 0);
    for cell in &results {
        assert!(cell.error.is_none(), "cell failed: {:?}", cell.error);
    }
    (mean(&results[0].accuracies), mean(&results[1].accuracies))
}

/// Criterion 5: Internet Ads, 50% missing: MLINUCB (N=15, m=1) beats LinUCB
/// by at least +0.03 mean accuracy over 5 seeds.
#[test]
fn criterion_5_internet_ads_directionality() {
    let Some(ds) = dataset_if_present("internet_ads") else {
        skip_line("criterion 5 (internet ads directionality)", "internet_ads");
        return;
    };
    let start = Instant::now();
    let (lin, ml) = five_seed_pair(&ds, "internet_ads", 0.5, 15);
    let gap = ml - lin;
    println!(
        "acceptance criterion 5 (internet ads directionality): linucb={lin:.4} mlinucb={ml:.4} gap={gap:+.4} ({:.0} s)",
        start.elapsed().as_secs_f64()
    );
    assert!(
        gap >= 0.03,
        "published gap is +0.079; require >= +0.03, got {gap:+.4}"
    );
    println!("acceptance criterion 5 (internet ads directionality): PASS");
}

/// Criterion 6: Warfarin, 50% missing: MLINUCB (N=5) within -0.005 of LinUCB
/// or better, and LinUCB's absolute accuracy within +/-0.05 of 0.615.
#[test]
fn criterion_6_warfarin_directionality() {
    let Some(ds) = dataset_if_present("warfarin") else {
        skip_line("criterion 6 (warfarin directionality)", "warfarin");
        return;
    };
    let start = Instant::now();
    let (lin, ml) = five_seed_pair(&ds, "warfarin", 0.5, 5);
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "acceptance criterion 6 (warfarin directionality): linucb={lin:.4} mlinucb={ml:.4} ({elapsed:.0} s)"
    );
    assert!(ml >= lin - 0.005, "mlinucb {ml:.4} vs linucb {lin:.4}");
    assert!(
        (lin - 0.615).abs() <= 0.05,
        "linucb accuracy {lin:.4} outside 0.615 +/- 0.05"
    );
    assert!(elapsed < 120.0, "criterion 6 must finish in < 2 min, took {elapsed:.0} s");
    println!("acceptance criterion 6 (warfarin directionality): PASS");
}

/// Criterion 7: CNAE-9, 75% missing: MLINUCB (N=10) at or above LinUCB and
/// both absolute accuracies within +/-0.06 of the published 0.483 / 0.521.
#[test]
fn criterion_7_cnae9_75_panel() {
    let Some(ds) = dataset_if_present("cnae9") else {
        skip_line("criterion 7 (cnae-9 75% panel)", "cnae9");
        return;
    };
    let start = Instant::now();
    let (lin, ml) = five_seed_pair(&ds, "cnae9", 0.75, 10);
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "acceptance criterion 7 (cnae-9 75% panel): linucb={lin:.4} mlinucb={ml:.4} ({elapsed:.0} s)"
    );
    assert!(ml - lin >= 0.0, "mlinucb {ml:.4} below linucb {lin:.4}");
    assert!((lin - 0.483).abs() <= 0.06, "linucb {lin:.4} outside 0.483 +/- 0.06");
    assert!((ml - 0.521).abs() <= 0.06, "mlinucb {ml:.4} outside 0.521 +/- 0.06");
    assert!(elapsed < 180.0, "criterion 7 must finish in < 3 min, took {elapsed:.0} s");
    println!("acceptance criterion 7 (cnae-9 75% panel): PASS");
}

/// Criterion 8: PCA variance diagnostics: exact on synthetic rank-2 data;
/// 0.982 +/- 0.02 on Warfarin and 0.139 +/- 0.02 on CNAE-9 when present.
#[test]
fn criterion_8_pca_diagnostics() {
    // synthetic data lying exactly in a 2D plane of d=5
    let u = [2.0, 0.0, 1.0, -1.0, 0.5];
    let v = [0.0, 1.0, -0.5, 0.25, 1.5];
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut contexts = Vec::new();
    let mut labels = Vec::new();
    for i in 0..50 {
        let a: f64 = rng.random_range(-2.0..2.0);
        let b: f64 = rng.random_range(-2.0..2.0);
        for j in 0..5 {
            contexts.push(a * u[j] + b * v[j] + 1.0);
        }
        labels.push(i % 2);
    }
    let planar = BanditDataset::new("planar", contexts, labels, 2, 5).unwrap();
    let pca = pca2_variance(&planar).unwrap();
    assert!(
        (pca.explained_fraction - 1.0).abs() <= 1e-10,
        "rank-2 data must give exactly 1.0, got {}",
        pca.explained_fraction
    );
    // deterministic across calls
    let again = pca2_variance(&planar).unwrap();
    assert_eq!(pca.explained_fraction, again.explained_fraction);
    println!("acceptance criterion 8 (pca, synthetic rank-2): PASS");

    match dataset_if_present("warfarin") {
        Some(ds) => {
            let frac = pca2_variance(&ds).unwrap().explained_fraction;
            println!("acceptance criterion 8 (pca, warfarin): fraction={frac:.4}");
            assert!((frac - 0.982).abs() <= 0.02, "warfarin 2D variance {frac:.4}");
            println!("acceptance criterion 8 (pca, warfarin): PASS");
        }
        None => skip_line("criterion 8 (pca, warfarin)", "warfarin"),
    }
    match dataset_if_present("cnae9") {
        Some(ds) => {
            let frac = pca2_variance(&ds).unwrap().explained_fraction;
            println!("acceptance criterion 8 (pca, cnae-9): fraction={frac:.4}");
            assert!((frac - 0.139).abs() <= 0.02, "cnae-9 2D variance {frac:.4}");
            println!("acceptance criterion 8 (pca, cnae-9): PASS");
        }
        None => skip_line("criterion 8 (pca, cnae-9)", "cnae9"),
    }
}

fn assert_random_baseline(ds: &BanditDataset, dataset: &str, subsample: Option<usize>) {
    let cfg = ExperimentConfig {
        dataset: dataset.into(),
        algorithm: Algorithm::Random,
        subsample,
        ..ExperimentConfig::default()
    };
    let (summary, _) = run_experiment(&cfg, ds).unwrap();
    let k = ds.num_arms() as f64;
    let p = 1.0 / k;
    let sigma = (p * (1.0 - p) / summary.rounds as f64).sqrt();
    assert!(
        (summary.total_average_accuracy - p).abs() <= 3.0 * sigma,
        "{dataset}: random accuracy {:.4} outside {p:.4} +/- {:.4}",
        summary.total_average_accuracy,
        3.0 * sigma
    );
    println!(
        "acceptance criterion 9 (random baseline, {dataset}): PASS (acc={:.4}, 1/K={p:.4})",
        summary.total_average_accuracy
    );
}

/// Criterion 9: the random policy sits within 3 binomial standard deviations
/// of 1/K on every dataset.
#[test]
fn criterion_9_random_baseline() {
    let (synth, _) = synth_linear(5000, 10, 3, 0.0, 21).unwrap();
    assert_random_baseline(&synth, "synthetic", None);

    for name in ["cnae9", "internet_ads", "warfarin"] {
        match dataset_if_present(name) {
            Some(ds) => assert_random_baseline(&ds, name, None),
            None => skip_line("criterion 9 (random baseline)", name),
        }
    }
    match dataset_if_present("covertype") {
        Some(ds) => assert_random_baseline(&ds, "covertype", Some(20_000)),
        None => skip_line("criterion 9 (random baseline)", "covertype"),
    }
}

/// Criterion 10: Covertype at the published 500k scale is out of desk reach;
/// the seeded 20,000-row subsample must satisfy the property criteria
/// (reduction, bound trace, random baseline) in under 10 minutes. No
/// accuracy-level claim is made against the published Covertype numbers.
#[test]
fn criterion_10_covertype_desk_scale() {
    let Some(ds) = dataset_if_present("covertype") else {
        skip_line("criterion 10 (covertype desk scale)", "covertype");
        return;
    };
    let start = Instant::now();
    let sub = Some(20_000);

    // reduction equivalence on the subsample
    let mut lin = ExperimentConfig {
        dataset: "covertype".into(),
        algorithm: Algorithm::LinUcb,
        subsample: sub,
        seed: 2,
        ..ExperimentConfig::default()
    };
    lin.missing_rate = 0.0;
    let ml = ExperimentConfig {
        algorithm: Algorithm::MlinUcb,
        clusters: 10,
        ..lin.clone()
    };
    let (_, lin_logs) = run_experiment(&lin, &ds).unwrap();
    let (_, ml_logs) = run_experiment(&ml, &ds).unwrap();
    assert_eq!(lin_logs, ml_logs, "reduction equivalence on covertype subsample");

    // bound-trace invariants at 50% missing
    let mut masked = ml.clone();
    masked.missing_rate = 0.5;
    let (_, logs) = run_experiment(&masked, &ds).unwrap();
    assert_bound_trace_invariants(&logs, "covertype");

    // random baseline
    assert_random_baseline(&ds, "covertype", sub);

    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < 600.0,
        "criterion 10 must finish in < 10 min, took {elapsed:.0} s"
    );
    println!("acceptance criterion 10 (covertype desk scale): PASS ({elapsed:.0} s)");
}
