mod oracles;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use lanlan_core::ingest::{PackageFeatureTable, FEATURE_NAMES};
use lanlan_core::stats::special::t_cdf;
use lanlan_core::stats::{
    associate, bonferroni_flags, combinations, diagnostics, full_model_r2, mann_whitney, ols_fit,
    paired_t_and_wilcoxon, retained_r2, subset_search, AssociationConfig, Design,
};
use lanlan_core::{Exec, Label};

#[test]
fn t_cdf_matches_reference() {
    for &df in &[1.0, 2.0, 3.5, 5.0, 10.0, 16.0, 30.0, 100.0, 1000.0] {
        let reference = StudentsT::new(0.0, 1.0, df).unwrap();
        for k in -40..=40 {
            let t = k as f64 * 0.25;
            let ours = t_cdf(t, df);
            assert!((ours - reference.cdf(t)).abs() < 1e-10, "t={t} df={df}: {ours} vs {}", reference.cdf(t));
        }
    }
}

#[test]
fn textbook_fixture() {
    let fx = &oracles::OLS_FIXTURE;
    let mut d = Design::with_intercept(20);
    for (k, col) in fx.x.iter().enumerate() {
        d.push(format!("x{}", k + 1), col.to_vec());
    }
    let r = ols_fit(&d, &fx.y).unwrap();
    for k in 0..4 {
        assert!((r.coefficients[k] - fx.coef[k]).abs() < 1e-6);
        assert!((r.std_errors[k] - fx.se[k]).abs() < 1e-6);
        assert!((r.t_values[k].unwrap() - fx.t[k]).abs() < 1e-6);
        assert!((r.p_values[k].unwrap() - fx.p[k]).abs() < 1e-6);
    }
    assert!((r.r_squared - fx.r2).abs() < 1e-10);
    assert_eq!(r.df, 16);
}

#[test]
fn residuals_orthogonal_to_design() {
    let mut rng = oracles::rng(17);
    for _ in 0..100 {
        let n = rng.random_range(8..60);
        let p = rng.random_range(1..6.min(n - 2));
        let mut d = Design::with_intercept(n);
        for k in 0..p {
            let scale = 10f64.powi(rng.random_range(-2..3));
            d.push(format!("c{k}"), (0..n).map(|_| scale * oracles::normal(&mut rng)).collect());
        }
        let y: Vec<f64> = (0..n).map(|_| 5.0 + oracles::normal(&mut rng)).collect();
        let r = ols_fit(&d, &y).unwrap();
        for col in &d.columns {
            let dot: f64 = col.iter().zip(&r.residuals).map(|(a, b)| a * b).sum();
            let scale = col.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(dot.abs() <= 1e-8 * scale);
        }
        assert_eq!(diagnostics(&r).qq.len(), n);
    }
}

#[test]
fn reference_p_values_give_reference_significant_sets() {
    let pr: Vec<f64> = oracles::REFERENCE_FEATURE_P.iter().map(|r| r.1).collect();
    let sr: Vec<f64> = oracles::REFERENCE_FEATURE_P.iter().map(|r| r.2).collect();
    let names = |flags: Vec<bool>| -> Vec<&str> {
        oracles::REFERENCE_FEATURE_P.iter().zip(flags).filter(|(_, f)| *f).map(|(r, _)| r.0).collect()
    };
    assert_eq!(names(bonferroni_flags(&pr, 0.05)), oracles::REFERENCE_PROBLEM_SIGNIFICANT);
    let mut expected_sr = oracles::REFERENCE_PROBLEM_SIGNIFICANT.to_vec();
    expected_sr.push("R.Comments");
    let mut got = names(bonferroni_flags(&sr, 0.05));
    got.sort_unstable();
    expected_sr.sort_unstable();
    assert_eq!(got, expected_sr);
    assert!(!bonferroni_flags(&sr, 0.05)[20], "Count.Cyclomatic.Complexity stays unflagged");
    let table_names: Vec<&str> = oracles::REFERENCE_FEATURE_P.iter().map(|r| r.0).collect();
    assert_eq!(table_names, FEATURE_NAMES);
}

/// Random table whose problem-report response depends on `planted`.
pub fn planted_table(n: usize, planted: &[usize], seed: u64) -> PackageFeatureTable {
    let mut rng = oracles::rng(seed);
    let features: Vec<Vec<f64>> = (0..29).map(|_| (0..n).map(|_| oracles::normal(&mut rng)).collect()).collect();
    let covariates: Vec<Vec<f64>> =
        (0..3).map(|k| (0..n).map(|_| (10.0 * (k + 1) as f64 + 3.0 * oracles::normal(&mut rng)).abs()).collect()).collect();
    let response = |rng: &mut rand_chacha::ChaCha8Rng, planted: &[usize]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let signal: f64 = planted.iter().map(|&f| features[f][i]).sum::<f64>();
                let log_count = 1.5 + 0.25 * signal + 0.05 * oracles::normal(rng);
                (10f64.powf(log_count) - 1.0).max(0.0)
            })
            .collect()
    };
    let pr = response(&mut rng, planted);
    let sr = response(&mut rng, &[0]);
    PackageFeatureTable {
        packages: (0..n).map(|i| format!("pkg{i}")).collect(),
        features,
        covariates,
        responses: vec![pr, sr],
    }
}

#[test]
fn subset_search_finds_planted_features() {
    let planted = [2, 7, 11, 19, 25];
    let table = planted_table(120, &planted, 4);
    let cfg = AssociationConfig::default();
    let search = subset_search(&table, Label::ProblemReport, 5, &cfg, Exec::Parallel).unwrap();
    assert_eq!(search.evaluated, 118_755);
    assert_eq!(combinations(29, 5).len(), 118_755);
    let top = &search.ranked[0];
    let hits = top.features.iter().filter(|f| planted.contains(f)).count();
    assert!(hits >= 4, "{:?}", top.features);

    let full = full_model_r2(&table, Label::ProblemReport, &cfg).unwrap();
    let y: Vec<f64> = table.responses[0].iter().map(|v| (v + 1.0).log10()).collect();
    let sub_cols: Vec<Vec<f64>> =
        top.features.iter().map(|&f| table.features[f].clone()).chain(table.covariates.iter().cloned()).collect();
    let all_cols: Vec<Vec<f64>> = table.features.iter().cloned().chain(table.covariates.iter().cloned()).collect();
    let expected = oracles::gram_schmidt_r2(&sub_cols, &y) / oracles::gram_schmidt_r2(&all_cols, &y);
    assert!((retained_r2(top.r_squared, full).unwrap() - expected).abs() < 1e-10);

    // nested models never lose R²
    let four = lanlan_core::stats::fit_feature_set(&table, Label::ProblemReport, &top.features[..4], &cfg).unwrap();
    assert!(four.r_squared <= top.r_squared + 1e-12);
}

#[test]
fn association_flags_planted_feature_and_collinearity() {
    let mut table = planted_table(80, &[3], 9);
    table.features[5] = table.covariates[1].clone();
    let rows = associate(&table, Label::ProblemReport, &AssociationConfig::default()).unwrap();
    assert_eq!(rows.len(), 29);
    assert!(rows[3].p_value.unwrap() < 1e-6);
    assert!(rows[3].significant);
    assert!(rows[5].rank_deficient.is_some());
    assert!(!rows[5].significant);
}

#[test]
fn mann_whitney_matches_enumeration() {
    let mut rng = oracles::rng(5);
    for na in 1..=8 {
        for nb in 1..=8 {
            for _ in 0..3 {
                let a: Vec<f64> = (0..na).map(|_| rng.random_range(0..6) as f64).collect();
                let b: Vec<f64> = (0..nb).map(|_| rng.random_range(0..6) as f64).collect();
                let r = mann_whitney(&a, &b).unwrap();
                assert_eq!(r.u_a, oracles::mw_u(&a, &b));
                assert_eq!(r.u_a + r.u_b, (na * nb) as f64);
                let p = oracles::mw_enumerate(&a, &b);
                assert!((r.p_value - p).abs() < 1e-12, "{a:?} {b:?}: {} vs {p}", r.p_value);
            }
        }
    }
}

#[test]
fn signed_rank_matches_enumeration() {
    let mut rng = oracles::rng(6);
    for n in 2..=10 {
        for _ in 0..10 {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
            let r = paired_t_and_wilcoxon(&a, &b).unwrap();
            let (v, p) = oracles::signed_rank_enumerate(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
            assert_eq!(r.wilcoxon_v, v);
            assert!((r.wilcoxon_p - p).abs() < 1e-12);
        }
    }
}
