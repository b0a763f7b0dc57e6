use comimp::bench::{
    draw_instance, evaluate_instance, gen_regression_sim, repeat_rng, run_merge_study, run_regression_study,
    tolerance, MergeProtocol, SimulationConfig,
};
use comimp::data::{DataMatrix, Dataset, FeatureSet, LabelVector, SplitDataset};
use comimp::models::{fit_ols, mse};
use comimp::{comimp_merge, pca_comimp_merge, sequential_merge, Error, ImputerConfig, RankRule};
use nalgebra::{DMatrix, DVector};

fn ds(features: &[&str], rows: &[&[f64]], labels: &[f64]) -> Dataset {
    let rows: Vec<Vec<Option<f64>>> = rows.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
    Dataset::new(
        DataMatrix::from_rows(FeatureSet::new(features.iter().copied()).unwrap(), &rows).unwrap(),
        LabelVector::numeric("y", labels.to_vec()).unwrap(),
    )
    .unwrap()
}

/// SSE of `y ~ 1 + X` from the normal equations, solved by Cholesky.
fn normal_equations_sse(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let (n, p) = x.shape();
    let mut a = DMatrix::from_element(n, p + 1, 1.0);
    a.view_mut((0, 1), (n, p)).copy_from(x);
    let beta = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * y));
    (y - a * beta).norm_squared()
}

#[test]
fn worked_example_with_mean_imputation() {
    let d1 = ds(
        &["height", "weight"],
        &[&[120.0, 80.0], &[150.0, 70.0], &[140.0, 80.0], &[135.0, 85.0]],
        &[80.0, 90.0, 85.0, 95.0],
    );
    let d2 = ds(
        &["weight", "calo/meal"],
        &[&[90.0, 100.0], &[85.0, 150.0], &[92.0, 170.0]],
        &[100.0, 95.0, 82.0],
    );
    let m = comimp_merge(&[d1, d2], &ImputerConfig::Mean).unwrap();
    let x = m.data.x.complete_values().unwrap();
    let expected = DMatrix::from_row_slice(
        7,
        3,
        &[
            120.0, 80.0, 140.0, 150.0, 70.0, 140.0, 140.0, 80.0, 140.0, 135.0, 85.0, 140.0, 136.25, 90.0, 100.0,
            136.25, 85.0, 150.0, 136.25, 92.0, 170.0,
        ],
    );
    assert_eq!(x, &expected);
    assert_eq!(m.report.cells_created, 7);
    assert_eq!(m.report.shared_features.names(), ["weight"]);
}

#[test]
fn theorem_instances_match_normal_equations() {
    let mut rng = repeat_rng(11, 0);
    for t in 0..200 {
        let n = 5 + t % 20;
        let m = 5 + (t * 7) % 25;
        let inst = draw_instance(&mut rng, n, m);
        let got = evaluate_instance(&inst).unwrap();
        let u = DMatrix::from_column_slice(n, 1, inst.u1.as_slice());
        let v = DMatrix::from_columns(&[inst.v1.clone(), inst.v2.clone()]);
        let d1 = normal_equations_sse(&u, &inst.y);
        let d2 = normal_equations_sse(&v, &inst.z);
        let merged = normal_equations_sse(&inst.merged_design(), &inst.merged_labels());
        for (a, b) in [(got.d1, d1), (got.d2, d2), (got.merged, merged)] {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b), "trial {t}: {a} vs {b}");
        }
        assert!(got.gap() <= tolerance(got.merged), "trial {t}: {got:?}");
    }
}

#[test]
fn merged_design_places_zeros_for_the_missing_feature() {
    let mut rng = repeat_rng(2, 5);
    let inst = draw_instance(&mut rng, 6, 7);
    let x = inst.merged_design();
    assert_eq!(x.shape(), (13, 2));
    assert!((0..6).all(|r| x[(r, 1)] == 0.0 && x[(r, 0)] == inst.u1[r]));
    assert!((0..7).all(|r| x[(6 + r, 0)] == inst.v1[r] && x[(6 + r, 1)] == inst.v2[r]));
    assert!(inst.u1.sum().abs() < 1e-12 && inst.v1.sum().abs() < 1e-12);
}

#[test]
fn noiseless_simulation_is_fit_exactly_with_all_features() {
    let cfg = SimulationConfig {
        noise_var: 0.0,
        d2_feature_noise: [0.0, 0.0],
        seed: 4,
        ..SimulationConfig::default()
    };
    let data = gen_regression_sim(&cfg).unwrap();
    let full = fit_ols(&data.d1_full.train.x, &data.d1_full.train.y).unwrap();
    assert!(mse(&full, &data.d1_full.test.x, &data.d1_full.test.y).unwrap() < 1e-20);
    for (b, want) in full.coefficients.iter().zip(cfg.beta) {
        assert!((b - want).abs() < 1e-9);
    }
    // an omitted correlated feature still costs accuracy
    let partial = fit_ols(&data.d1.train.x, &data.d1.train.y).unwrap();
    assert!(mse(&partial, &data.d1.test.x, &data.d1.test.y).unwrap() > 0.1);
}

#[test]
fn regression_study_reports_positive_errors() {
    let cfg = SimulationConfig {
        seed: 9,
        ..SimulationConfig::default()
    };
    let r = run_regression_study(&cfg, 8, &ImputerConfig::Mean, Some(2)).unwrap();
    assert_eq!(r.rows.len(), 8);
    for row in &r.rows {
        assert_eq!(row.len(), 5);
        assert!(row.iter().all(|v| v.is_finite() && *v > 0.0));
    }
    let again = run_regression_study(&cfg, 8, &ImputerConfig::Mean, None).unwrap();
    assert_eq!(again.summary, r.summary);
}

#[test]
fn simulated_features_follow_the_configured_distribution() {
    let cfg = SimulationConfig {
        n1: 1_000_000,
        n2: 10,
        seed: 21,
        ..SimulationConfig::default()
    };
    let data = gen_regression_sim(&cfg).unwrap();
    let train = data.d1_full.train.x.complete_values().unwrap().clone();
    let test = data.d1_full.test.x.complete_values().unwrap().clone();
    let n = (train.nrows() + test.nrows()) as f64;
    let mut mean = [0.0; 3];
    for x in [&train, &test] {
        for j in 0..3 {
            mean[j] += x.column(j).sum() / n;
        }
    }
    let mut cov = [[0.0; 3]; 3];
    for x in [&train, &test] {
        for r in 0..x.nrows() {
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += (x[(r, i)] - mean[i]) * (x[(r, j)] - mean[j]) / (n - 1.0);
                }
            }
        }
    }
    for i in 0..3 {
        assert!((mean[i] - cfg.mu[i]).abs() < 0.01, "mean {i}: {}", mean[i]);
        for j in 0..3 {
            assert!((cov[i][j] - cfg.sigma[i][j]).abs() < 0.01, "cov {i}{j}: {}", cov[i][j]);
        }
    }
}

fn toy_source() -> Dataset {
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|i| {
            let t = i as f64;
            vec![t.sin(), (0.3 * t).cos(), 0.05 * t, (1.7 * t).sin()]
        })
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let labels: Vec<f64> = (0..60).map(|i| f64::from(i % 2)).collect();
    let d = ds(&["a", "b", "c", "d"], &refs, &labels);
    Dataset::new(d.x, LabelVector::categorical("class", labels.iter().map(|v| v.to_string()).collect())).unwrap()
}

#[test]
fn degenerate_merge_protocols_are_rejected() {
    let source = toy_source();
    let base = MergeProtocol {
        component_fractions: vec![0.5, 0.5],
        deletions: vec![vec![0], vec![3]],
        repeats: 2,
        imputer: ImputerConfig::Mean,
        ..MergeProtocol::seed()
    };
    assert!(run_merge_study(&source, &base, None).is_ok());

    let cases = [
        MergeProtocol {
            deletions: vec![vec![0, 1, 2, 3], vec![3]],
            ..base.clone()
        },
        MergeProtocol {
            component_fractions: vec![0.6, 0.6],
            ..base.clone()
        },
        MergeProtocol {
            component_fractions: vec![1.0],
            deletions: vec![vec![0]],
            ..base.clone()
        },
        MergeProtocol {
            deletions: vec![vec![9], vec![3]],
            ..base.clone()
        },
        MergeProtocol {
            repeats: 0,
            ..base.clone()
        },
        MergeProtocol {
            mcar_rate: 1.0,
            ..base.clone()
        },
    ];
    for (i, p) in cases.iter().enumerate() {
        assert!(
            matches!(run_merge_study(&source, p, None), Err(Error::InvalidConfig(_))),
            "case {i} accepted"
        );
    }
}

#[test]
fn merge_study_without_deletions_has_no_structural_holes() {
    let source = toy_source();
    let p = MergeProtocol {
        component_fractions: vec![0.5, 0.5],
        deletions: vec![vec![], vec![]],
        repeats: 3,
        imputer: ImputerConfig::Mean,
        ..MergeProtocol::seed()
    };
    let r = run_merge_study(&source, &p, None).unwrap();
    assert_eq!(r.rows.len(), 3);
    assert!(r.rows.iter().flatten().all(|a| (0.0..=1.0).contains(a)));
}

fn split(features: &[&str], n: usize, shift: f64) -> SplitDataset {
    let make = |rows: std::ops::Range<usize>| {
        let data: Vec<Vec<f64>> = rows
            .clone()
            .map(|i| {
                let t = i as f64 + shift;
                (0..features.len()).map(|j| (t * (0.3 + 0.4 * j as f64)).sin() + 0.01 * t).collect()
            })
            .collect();
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let labels: Vec<f64> = rows.map(|i| i as f64).collect();
        ds(features, &refs, &labels)
    };
    SplitDataset::new(make(0..n), make(n..n + n / 2)).unwrap()
}

#[test]
fn pca_merge_projects_exclusive_blocks() {
    let d1 = split(&["s", "a1", "a2", "a3"], 20, 0.0);
    let d2 = split(&["s", "b1", "b2"], 16, 5.0);
    let out = pca_comimp_merge(&d1, &d2, RankRule::Fixed(2), &ImputerConfig::Mean).unwrap();
    assert_eq!(out.train.data.features().names(), ["s", "q1_pc1", "q1_pc2", "q2_pc1", "q2_pc2"]);
    assert_eq!(out.train.data.n_rows(), 36);
    assert_eq!(out.test.data.n_rows(), 18);
    // q2 scores are structurally missing for D1 rows, so they were imputed
    assert_eq!(out.train.report.cells_created, 20 * 2 + 16 * 2);

    let m = out.models[0].as_ref().unwrap();
    let block = d1.train.x.select_features(&m.features).unwrap();
    let x = block.complete_values().unwrap();
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] - m.mean[c]);
    let scores = centered * &m.components;
    let merged = out.train.data.x.complete_values().unwrap();
    for r in 0..20 {
        for c in 0..2 {
            assert!((merged[(r, 1 + c)] - scores[(r, c)]).abs() < 1e-10);
        }
    }
}

#[test]
fn sequential_merge_names_stages_apart() {
    let parts = [
        split(&["s", "a"], 12, 0.0),
        split(&["s", "b"], 10, 2.0),
        split(&["s", "c"], 8, 4.0),
    ];
    let out = sequential_merge(&parts, RankRule::Fixed(1), &ImputerConfig::Mean).unwrap();
    assert_eq!(out.stages.len(), 2);
    let names = out.train.data.features().names();
    assert!(names.contains(&"s".to_string()));
    assert!(names.iter().any(|n| n.starts_with("s2_q2")), "{names:?}");
    assert_eq!(out.train.data.n_rows(), 30);
    assert_eq!(out.train_row_ranges, vec![(0, 12), (12, 22), (22, 30)]);
    assert!(out.train.data.x.is_complete());
    // stage 1: 12 rows lack q2_pc1, 10 lack q1_pc1; stage 2: 22 rows lack s2_q2_pc1, 8 lack s2_q1_pc1
    assert_eq!(out.imputed_per_stage(), vec![(22, 11), (30, 15)]);
}
