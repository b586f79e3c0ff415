//! Acceptance gate for the workspace: nine end-to-end checks covering the
//! divergence fix, the loading identities, tree exactness, the CDMA
//! experiments, least squares, and CLI determinism. Each test prints one
//! `criterion N (...): PASS` line when its checks hold.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gabpfix_core::dense::{rect_to_dmatrix, solve_dense, symmetric_eigenvalues, to_dmatrix};
use gabpfix_core::spectral::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use gabpfix_core::{
    build_augmented, contraction_factor, double_loop_solve, is_walk_summable,
    normalize_unit_diagonal, regularized_lsq_solve, run_gabp, single_loop_solve,
    spectral_radius_abs, GabpSettings, GabpStatus, LoadingSpec, OuterSettings, RectMatrix,
    SolveStatus, SparseSymMatrix,
};
use gabpfix_cli::cdma::{gen_cdma, CdmaConfig, CdmaInstance, Spreading};
use gabpfix_cli::experiments::{experiment_fixed, experiment_sweep, FixMode, SweepConfig};

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Connected random model: a random attachment spine plus extra edges, with
/// either a diagonally dominant or a free positive diagonal.
fn random_model(rng: &mut ChaCha8Rng, max_n: usize, dominant: bool) -> SparseSymMatrix {
    let n = rng.gen_range(4..=max_n);
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    let weight = |rng: &mut ChaCha8Rng| {
        let w: f64 = rng.gen_range(0.2..1.0);
        if rng.gen::<bool>() {
            w
        } else {
            -w
        }
    };
    for child in 1..n {
        let parent = rng.gen_range(0..child);
        seen.insert((parent, child));
        edges.push((parent, child, weight(rng)));
    }
    for _ in 0..rng.gen_range(0..n) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let (lo, hi) = (a.min(b), a.max(b));
        if lo != hi && seen.insert((lo, hi)) {
            edges.push((lo, hi, weight(rng)));
        }
    }
    let mut row_abs = vec![0.0f64; n];
    for &(a, b, w) in &edges {
        row_abs[a] += w.abs();
        row_abs[b] += w.abs();
    }
    let mut entries = Vec::new();
    for i in 0..n {
        let diag = if dominant {
            row_abs[i] + rng.gen_range(0.1..1.0)
        } else {
            rng.gen_range(0.5..3.0)
        };
        entries.push((i, i, diag));
    }
    entries.extend(edges);
    SparseSymMatrix::from_entries(n, entries).unwrap()
}

/// Random tree with a diagonally dominant (hence positive definite) diagonal.
fn random_tree(rng: &mut ChaCha8Rng, max_n: usize) -> SparseSymMatrix {
    let n = rng.gen_range(2..=max_n);
    let mut edges = Vec::new();
    for child in 1..n {
        let parent = rng.gen_range(0..child);
        let w: f64 = rng.gen_range(0.2..1.0);
        edges.push((parent, child, if rng.gen::<bool>() { w } else { -w }));
    }
    let mut row_abs = vec![0.0f64; n];
    for &(a, b, w) in &edges {
        row_abs[a] += w.abs();
        row_abs[b] += w.abs();
    }
    let mut entries: Vec<(usize, usize, f64)> = (0..n)
        .map(|i| (i, i, row_abs[i] + rng.gen_range(0.1..1.0)))
        .collect();
    entries.extend(edges);
    SparseSymMatrix::from_entries(n, entries).unwrap()
}

fn random_rhs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

/// Graph diameter by double breadth-first search (exact on trees).
fn tree_diameter(j: &SparseSymMatrix) -> usize {
    let bfs = |start: usize| -> (usize, usize) {
        let n = j.n();
        let mut dist = vec![usize::MAX; n];
        dist[start] = 0;
        let mut queue = std::collections::VecDeque::from([start]);
        let (mut far, mut far_d) = (start, 0);
        while let Some(u) = queue.pop_front() {
            for nb in j.neighbors(u) {
                if dist[nb.col] == usize::MAX {
                    dist[nb.col] = dist[u] + 1;
                    if dist[nb.col] > far_d {
                        far_d = dist[nb.col];
                        far = nb.col;
                    }
                    queue.push_back(nb.col);
                }
            }
        }
        (far, far_d)
    };
    let (u, _) = bfs(0);
    bfs(u).1
}

/// The 3-cycle with unit diagonal and all off-diagonals 0.6: positive
/// definite (eigenvalues 2.2, 0.4, 0.4) but rho(|R|) = 1.2.
fn frustrated_cycle() -> (SparseSymMatrix, Vec<f64>) {
    let j = SparseSymMatrix::from_entries(
        3,
        [
            (0, 0, 1.0),
            (1, 1, 1.0),
            (2, 2, 1.0),
            (0, 1, 0.6),
            (0, 2, 0.6),
            (1, 2, 0.6),
        ],
    )
    .unwrap();
    (j, vec![1.0, 0.0, -1.0])
}

#[test]
fn criterion_1_frustrated_cycle_fix() {
    let started = Instant::now();
    let (j, h) = frustrated_cycle();

    let plain = run_gabp(
        &j,
        &h,
        &GabpSettings {
            max_iterations: 200,
            divergence_bound: 1e2,
            ..GabpSettings::default()
        },
    );
    assert_eq!(plain.status, GabpStatus::Diverged, "plain GaBP must diverge");
    assert!(plain.iterations <= 200);

    let report = double_loop_solve(
        &j,
        &h,
        &LoadingSpec::uniform(0.25),
        &OuterSettings::for_tolerance(4e-9),
    )
    .unwrap();
    assert_eq!(report.status, SolveStatus::Converged);
    let residual = j.residual_inf(&report.solution, &h);
    assert!(residual <= 1e-8, "residual {residual} above 1e-8");
    let dense = solve_dense(&j, &h).unwrap();
    let diff = max_abs_diff(&report.solution, &dense);
    assert!(diff <= 1e-8, "dense mismatch {diff} above 1e-8");
    assert!(report.rho_loaded < 1.0);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    println!("criterion 1 (frustrated-cycle fix): PASS");
}

#[test]
fn criterion_2_uniform_loading_scales_the_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1eaf);
    for case in 0..50 {
        let j = random_model(&mut rng, 50, false);
        let gamma: f64 = rng.gen_range(0.01..4.0);
        let zeros = vec![0.0; j.n()];
        let base = normalize_unit_diagonal(&j, &zeros).unwrap();
        let rho = spectral_radius_abs(&base.r, 1e-12, 200_000).unwrap();

        let add: Vec<f64> = j.diag().iter().map(|d| gamma * d).collect();
        let loaded = j.with_diag_added(&add).unwrap();
        let scaled = normalize_unit_diagonal(&loaded, &zeros).unwrap();
        let rho_loaded = spectral_radius_abs(&scaled.r, 1e-12, 200_000).unwrap();

        let err = (rho_loaded - rho / (1.0 + gamma)).abs();
        assert!(
            err <= 1e-8,
            "case {case}: |rho' - rho/(1+gamma)| = {err} (rho {rho}, gamma {gamma})"
        );
    }
    println!("criterion 2 (uniform loading divides the radius): PASS");
}

#[test]
fn criterion_3_loaded_iteration_contraction_and_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0a7);
    for case in 0..50 {
        let j = random_model(&mut rng, 30, true);
        let n = j.n();
        let mut gamma: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen::<f64>() < 0.3 {
                    0.0
                } else {
                    rng.gen_range(0.1..2.0)
                }
            })
            .collect();
        if gamma.iter().all(|g| *g == 0.0) {
            gamma[0] = 1.0;
        }

        let factor = contraction_factor(&j, &gamma).unwrap();
        assert!(factor < 1.0, "case {case}: contraction factor {factor} >= 1");

        let jd = to_dmatrix(&j);
        let sqrt_g = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            gamma.iter().map(|g| g.sqrt()),
        ));
        let loaded = &jd + DMatrix::from_diagonal(&DVector::from_column_slice(&gamma));
        let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
        let iter_sym = sym(&sqrt_g * loaded.try_inverse().unwrap() * &sqrt_g);
        let target_sym = sym(&sqrt_g * jd.try_inverse().unwrap() * &sqrt_g);
        let mu = symmetric_eigenvalues(&iter_sym);
        let lam = symmetric_eigenvalues(&target_sym);
        for (m, l) in mu.iter().zip(&lam) {
            let mapped = m / (1.0 - m);
            assert!(
                (mapped - l).abs() <= 1e-6,
                "case {case}: eigenvalue map {mapped} vs {l}"
            );
        }
    }
    println!("criterion 3 (loaded map contracts with the predicted spectrum): PASS");
}

#[test]
fn criterion_4_tree_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ee5);
    for case in 0..25 {
        let j = random_tree(&mut rng, 30);
        let h = random_rhs(&mut rng, j.n());
        let diameter = tree_diameter(&j);
        let result = run_gabp(
            &j,
            &h,
            &GabpSettings {
                max_iterations: (2 * diameter).max(2),
                message_tol: 1e-10,
                ..GabpSettings::default()
            },
        );
        assert_eq!(
            result.status,
            GabpStatus::Converged,
            "case {case}: no convergence within 2 * diameter = {} sweeps",
            2 * diameter
        );

        let inverse = to_dmatrix(&j).try_inverse().unwrap();
        let dense_means = solve_dense(&j, &h).unwrap();
        let mean_err = max_abs_diff(&result.means, &dense_means);
        assert!(mean_err <= 1e-8, "case {case}: mean error {mean_err}");
        for i in 0..j.n() {
            let err = (result.variances[i] - inverse[(i, i)]).abs();
            assert!(err <= 1e-8, "case {case}: variance error {err} at {i}");
        }
    }
    println!("criterion 4 (GaBP exact on trees): PASS");
}

/// Seeds at n=256, k=64, sigma2=1 whose noiseless correlation matrix is not
/// walk-summable and where plain GaBP actually diverges.
fn qualifying_cdma_seeds() -> Vec<(u64, CdmaInstance)> {
    (0..20)
        .filter_map(|seed| {
            let inst = gen_cdma(&CdmaConfig {
                n: 256,
                k: 64,
                sigma2: 1.0,
                seed,
                spreading: Spreading::Binary,
            })
            .unwrap();
            let (ws, _rho) = is_walk_summable(&inst.c, DEFAULT_TOL).unwrap();
            if ws {
                return None;
            }
            let plain = run_gabp(
                &inst.a,
                &inst.y,
                &GabpSettings {
                    max_iterations: 2000,
                    ..GabpSettings::default()
                },
            );
            (plain.status == GabpStatus::Diverged).then_some((seed, inst))
        })
        .collect()
}

#[test]
fn criterion_5_cdma_divergence_and_fix() {
    let started = Instant::now();
    let qualifying = qualifying_cdma_seeds();
    assert!(
        qualifying.len() >= 15,
        "only {}/20 seeds qualify, need at least 75%",
        qualifying.len()
    );

    for (seed, inst) in &qualifying {
        let run = experiment_fixed(
            &inst.a,
            &inst.y,
            &LoadingSpec::diag_dominant(),
            &OuterSettings::for_tolerance(1e-6),
            FixMode::Double,
        )
        .unwrap();
        assert_eq!(
            run.report.status,
            SolveStatus::Converged,
            "seed {seed}: loaded double loop did not converge"
        );
        assert!(
            run.dense_max_diff <= 1e-4,
            "seed {seed}: dense mismatch {}",
            run.dense_max_diff
        );
        assert!(run.report.rho_loaded < 1.0, "seed {seed}: loaded model not walk-summable");
        let mut inner = run.report.inner_iterations_per_step.clone();
        inner.sort_unstable();
        let median = inner[inner.len() / 2];
        assert!(
            median <= 10,
            "seed {seed}: median inner sweeps per outer step {median} > 10"
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 60 s");
    println!(
        "criterion 5 (CDMA divergence and loaded fix, {}/20 qualifying seeds): PASS",
        qualifying.len()
    );
}

#[test]
fn criterion_6_loading_tradeoff_sweep() {
    let inst = gen_cdma(&CdmaConfig {
        n: 256,
        k: 128,
        sigma2: 1.0,
        seed: 3,
        spreading: Spreading::Binary,
    })
    .unwrap();
    let config = SweepConfig {
        gamma_grid: SweepConfig::default_grid(),
        inner_tol: 1e-6,
        outer_tol: 1e-3,
        max_inner: 10_000,
        max_outer: 2_000,
    };
    let rows = experiment_sweep(&inst.a, &inst.y, &config).unwrap();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        assert_eq!(
            row.status,
            SolveStatus::Converged,
            "grid point {} did not converge",
            row.gamma_normalized
        );
    }

    for pair in rows.windows(2) {
        assert!(
            pair[1].outer_iters >= pair[0].outer_iters,
            "outer iterations decreased between {} and {}",
            pair[0].gamma_normalized,
            pair[1].gamma_normalized
        );
    }

    // Walk-summability threshold in units of the dominance level.
    let zeros = vec![0.0; inst.a.n()];
    let model = normalize_unit_diagonal(&inst.a, &zeros).unwrap();
    let rho = spectral_radius_abs(&model.r, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let gamma_dd = (0..inst.a.n())
        .map(|i| model.r.neighbors(i).iter().map(|nb| nb.val.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        - 1.0;
    let threshold = (rho - 1.0) / gamma_dd;
    for pair in rows.windows(2) {
        if pair[0].gamma_normalized > threshold {
            assert!(
                pair[1].avg_inner_iters <= pair[0].avg_inner_iters + 1e-9,
                "inner sweeps per outer step increased between {} and {}",
                pair[0].gamma_normalized,
                pair[1].gamma_normalized
            );
        }
    }

    let argmin = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_iters.cmp(&b.1.total_iters))
        .map(|(i, _)| i)
        .unwrap();
    assert!(
        argmin > 0 && argmin + 1 < rows.len(),
        "total-iteration minimum sits at the grid edge (index {argmin})"
    );
    println!("criterion 6 (loading tradeoff sweep trends): PASS");
}

#[test]
fn criterion_7_single_loop_equivalence() {
    let (j, h) = frustrated_cycle();
    let cycle = single_loop_solve(
        &j,
        &h,
        &LoadingSpec::diag_dominant_with_margin(0.3),
        &OuterSettings::for_tolerance(1e-8),
    )
    .unwrap();
    assert_eq!(cycle.status, SolveStatus::Converged);
    let dense = solve_dense(&j, &h).unwrap();
    assert!(max_abs_diff(&cycle.solution, &dense) <= 1e-5);

    let qualifying = qualifying_cdma_seeds();
    assert!(!qualifying.is_empty());
    let mut agreeing = 0usize;
    for (seed, inst) in &qualifying {
        let loading = LoadingSpec::diag_dominant();
        let settings = OuterSettings::for_tolerance(1e-6);
        let double = double_loop_solve(&inst.a, &inst.y, &loading, &settings).unwrap();
        assert_eq!(double.status, SolveStatus::Converged, "seed {seed}");
        let single = single_loop_solve(&inst.a, &inst.y, &loading, &settings).unwrap();
        if single.status == SolveStatus::Converged
            && max_abs_diff(&single.solution, &double.solution) <= 1e-5
        {
            agreeing += 1;
        }
    }
    assert!(
        agreeing * 10 >= qualifying.len() * 9,
        "single loop agrees on only {agreeing}/{} seeds, need 90%",
        qualifying.len()
    );
    println!(
        "criterion 7 (single loop matches double loop, {agreeing}/{} seeds): PASS",
        qualifying.len()
    );
}

/// Random rectangular system with all singular values bounded away from zero
/// (smallest eigenvalue of the Gram matrix at least 0.05).
fn full_rank_rect(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (RectMatrix, Vec<f64>) {
    loop {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push((r, c, rng.gen_range(-1.0..1.0)));
            }
        }
        let jt = RectMatrix::from_entries(rows, cols, entries).unwrap();
        let dense = rect_to_dmatrix(&jt);
        let gram = dense.transpose() * &dense;
        if symmetric_eigenvalues(&gram)[0] >= 0.05 {
            let ht = random_rhs(rng, rows);
            return (jt, ht);
        }
    }
}

fn dense_ridge(jt: &RectMatrix, ht: &[f64], gamma: f64) -> Vec<f64> {
    let dense = rect_to_dmatrix(jt);
    let gram = dense.transpose() * &dense + DMatrix::identity(jt.cols(), jt.cols()) * gamma;
    let rhs = dense.transpose() * DVector::from_column_slice(ht);
    gram.lu().solve(&rhs).unwrap().as_slice().to_vec()
}

#[test]
fn criterion_8_least_squares_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x15c2);

    for case in 0..25 {
        let cols = rng.gen_range(2..=10);
        let (rows, gamma) = if case % 2 == 0 {
            (cols, if case % 4 == 0 { 0.0 } else { 0.3 })
        } else {
            (rng.gen_range(cols + 1..=20), if case % 4 == 1 { 0.1 } else { 1.0 })
        };
        let (jt, ht) = full_rank_rect(&mut rng, rows, cols);
        let aug = build_augmented(&jt, &ht, gamma);
        let full = solve_dense(&aug.matrix, &aug.rhs).unwrap();
        let ridge = dense_ridge(&jt, &ht, gamma);
        let err = max_abs_diff(&full[..cols], &ridge);
        assert!(
            err <= 1e-8,
            "case {case} ({rows}x{cols}, gamma {gamma}): augmented vs ridge error {err}"
        );
    }

    for case in 0..5 {
        let cols = rng.gen_range(2..=6);
        let rows = if case % 2 == 0 {
            cols
        } else {
            rng.gen_range(cols + 1..=12)
        };
        let (jt, ht) = full_rank_rect(&mut rng, rows, cols);
        for gamma in [0.0, 0.1, 1.0, 10.0] {
            let report = regularized_lsq_solve(
                &jt,
                &ht,
                gamma,
                &LoadingSpec::diag_dominant(),
                &OuterSettings::for_tolerance(1e-9),
            )
            .unwrap();
            assert_eq!(report.status, SolveStatus::Converged, "case {case}, gamma {gamma}");
            let ridge = dense_ridge(&jt, &ht, gamma);
            let err = max_abs_diff(&report.solution, &ridge);
            assert!(
                err <= 1e-6,
                "case {case}, gamma {gamma}: solver vs dense ridge error {err}"
            );
        }
    }
    println!("criterion 8 (least-squares equivalences): PASS");
}

fn run_binary(args: &[&str], threads: Option<&str>) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gabpfix"));
    if let Some(t) = threads {
        cmd.env("GABPFIX_THREADS", t);
    }
    cmd.args(args).output().expect("binary runs")
}

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

#[test]
fn criterion_9_deterministic_cli_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();

    let diverge = |trace: &str| {
        let out = run_binary(
            &[
                "cdma", "diverge", "--n", "256", "--k", "64", "--sigma2", "1", "--seed", "7",
                "--trace", trace,
            ],
            None,
        );
        assert_eq!(out.status.code(), Some(2));
        std::fs::read(trace).unwrap()
    };
    assert_eq!(diverge(&path("d1.csv")), diverge(&path("d2.csv")));

    let solve = |trace: &str| {
        let out = run_binary(
            &[
                "solve",
                "--matrix",
                data_file("cycle3.mtx").to_str().unwrap(),
                "--rhs",
                data_file("cycle3_h.txt").to_str().unwrap(),
                "--mode",
                "double",
                "--gamma-mode",
                "uniform",
                "--gamma",
                "0.25",
                "--trace",
                trace,
            ],
            None,
        );
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(trace).unwrap()
    };
    assert_eq!(solve(&path("s1.csv")), solve(&path("s2.csv")));

    let sweep = |trace: &str, threads: &str| {
        let out = run_binary(
            &[
                "cdma", "sweep", "--n", "64", "--k", "16", "--seed", "5", "--grid-points", "4",
                "--trace", trace,
            ],
            Some(threads),
        );
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(trace).unwrap()
    };
    let sequential = sweep(&path("w1.csv"), "0");
    assert_eq!(sequential, sweep(&path("w2.csv"), "0"));
    assert_eq!(sequential, sweep(&path("w3.csv"), "3"));

    println!("criterion 9 (byte-identical traces across reruns): PASS");
}
