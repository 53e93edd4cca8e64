mod common;

use common::{logistic_grid_oracle, pair_auc, rng};
use issrc::gene_selection::{
    auc_score, bw_score, dca_curve, dca_from_risks, dif_score, fit_risk_model, select_genes, SelectionConfig,
};
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn logistic_fit_matches_grid_search_on_overlapping_fixture() {
    let x = [0.0, 1.0, 2.0, 3.0];
    let y = [false, true, false, true];
    let m = fit_risk_model(&x, &y, 0).unwrap();
    let (b0, b1, _) = logistic_grid_oracle(&x, &y);
    assert!(!m.capped);
    assert!((m.intercept - b0).abs() < 1e-3, "{} vs {b0}", m.intercept);
    assert!((m.slope - b1).abs() < 1e-3, "{} vs {b1}", m.slope);
}

#[test]
fn logistic_fit_matches_grid_search_on_random_overlapping_data() {
    let mut r = rng(31);
    for _ in 0..5 {
        let x: Vec<f64> = (0..24).map(|_| r.random_range(-2.0..2.0)).collect();
        let y: Vec<bool> = x.iter().map(|&v| r.random::<f64>() < 1.0 / (1.0 + (-1.5 * v).exp())).collect();
        if y.iter().all(|&b| b) || y.iter().all(|&b| !b) {
            continue;
        }
        let m = fit_risk_model(&x, &y, 0).unwrap();
        if m.capped {
            continue;
        }
        let (b0, b1, _) = logistic_grid_oracle(&x, &y);
        assert!((m.intercept - b0).abs() < 1e-3 && (m.slope - b1).abs() < 1e-3);
    }
}

#[test]
fn separable_fit_is_capped_and_monotone() {
    let x = [0.0, 1.0, 2.0, 3.0];
    let y = [false, false, true, true];
    let m = fit_risk_model(&x, &y, 0).unwrap();
    assert!(m.capped);
    assert!(m.slope > 0.0);
    let risks: Vec<f64> = x.iter().map(|&v| m.risk(v)).collect();
    assert!(risks.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn auc_matches_pair_counting() {
    let mut r = rng(32);
    for n in [4, 10, 33, 50] {
        let x: Vec<f64> = (0..n).map(|_| (r.random_range(0..8)) as f64).collect();
        let mut y: Vec<bool> = (0..n).map(|_| r.random()).collect();
        y[0] = true;
        y[1] = false;
        let a = auc_score(&x, &y).unwrap();
        assert!((a.raw - pair_auc(&x, &y)).abs() < 1e-12);
        assert!((a.folded - a.raw.max(1.0 - a.raw)).abs() < 1e-15);
    }
}

#[test]
fn perfect_gene_reaches_prevalence() {
    let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let y: Vec<bool> = (0..10).map(|i| i >= 6).collect();
    let m = fit_risk_model(&x, &y, 0).unwrap();
    let curve = dca_curve(&m, &x, &y, 0.005).unwrap();
    assert_eq!(curve.p1, *curve.thresholds.last().unwrap());
    let dif = dif_score(&curve);
    assert!((dif - 0.4).abs() <= 0.005, "{dif}");
}

#[test]
fn constant_risk_has_zero_dif_and_collapsed_curve() {
    let y: Vec<bool> = (0..20).map(|i| i % 5 < 2).collect();
    let p = 0.4;
    let curve = dca_from_risks(&[p; 20], &y, 0.005).unwrap();
    for (i, &t) in curve.thresholds.iter().enumerate() {
        if t <= p {
            assert!((curve.nb_model[i] - curve.nb_treat_all[i]).abs() < 1e-12);
        } else {
            assert_eq!(curve.nb_model[i], 0.0);
        }
    }
    assert!(dif_score(&curve) <= 1e-12);

    let x = [3.0; 20];
    let m = fit_risk_model(&x, &y, 0).unwrap();
    assert_eq!(m.slope, 0.0);
    assert!(dif_score(&dca_curve(&m, &x, &y, 0.005).unwrap()) <= 1e-12);
}

#[test]
fn dif_invariant_under_positive_affine_maps() {
    let mut r = rng(33);
    for _ in 0..10 {
        let n = 30;
        let y: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let x: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 } + r.random_range(-1.0..1.0)).collect();
        let base = dif_score(&dca_curve(&fit_risk_model(&x, &y, 0).unwrap(), &x, &y, 0.005).unwrap());
        let t: Vec<f64> = x.iter().map(|v| 2.5 * v - 7.0).collect();
        let other = dif_score(&dca_curve(&fit_risk_model(&t, &y, 0).unwrap(), &t, &y, 0.005).unwrap());
        assert!((base - other).abs() < 1e-9, "{base} vs {other}");
    }
}

#[test]
fn dif_bounded_by_prevalence_on_random_genes() {
    let mut r = rng(34);
    for _ in 0..100 {
        let n = r.random_range(6..40);
        let mut y: Vec<bool> = (0..n).map(|_| r.random()).collect();
        y[0] = true;
        y[1] = false;
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let curve = dca_curve(&fit_risk_model(&x, &y, 0).unwrap(), &x, &y, 0.005).unwrap();
        let dif = dif_score(&curve);
        assert!(dif >= 0.0 && dif <= curve.prevalence + 1e-15);
        assert!(curve.prevalence <= curve.p1 && curve.p1 < 1.0);
    }
}

#[test]
fn selection_matches_brute_force_ranking() {
    let mut r = rng(35);
    let d = 5;
    let n = 16;
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i % 2 == 0)).collect();
    let values = DMatrix::from_fn(d, n, |g, s| labels[s] as f64 * g as f64 * 0.3 + r.random_range(-1.0..1.0));
    let ids: Vec<String> = (0..d).map(|g| format!("g{g}")).collect();
    let cfg = SelectionConfig {
        pre_count: 3,
        final_count: 2,
        grid_step: 0.005,
    };
    let sel = select_genes(&values, &ids, &labels, 2, 1, &cfg).unwrap();

    let positive: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
    let rows: Vec<Vec<f64>> = (0..d).map(|g| values.row(g).iter().copied().collect()).collect();
    let bw: Vec<f64> = rows.iter().map(|x| bw_score(x, &labels).unwrap()).collect();
    let mut by_bw: Vec<usize> = (0..d).collect();
    by_bw.sort_by(|&a, &b| bw[b].total_cmp(&bw[a]).then(a.cmp(&b)));
    let top: Vec<usize> = by_bw[..3].to_vec();
    let dif = |g: usize| {
        let m = fit_risk_model(&rows[g], &positive, g).unwrap();
        dif_score(&dca_curve(&m, &rows[g], &positive, 0.005).unwrap())
    };
    let mut ranked = top.clone();
    ranked.sort_by(|&a, &b| dif(b).total_cmp(&dif(a)).then(bw[b].total_cmp(&bw[a])).then(a.cmp(&b)));
    assert_eq!(sel.preselected, top);
    assert_eq!(sel.selected, ranked[..2].to_vec());
}

#[test]
fn no_filtering_returns_every_gene() {
    let mut r = rng(36);
    let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
    let values = DMatrix::from_fn(4, 12, |_, _| r.random_range(0.0..1.0));
    let ids: Vec<String> = (0..4).map(|g| g.to_string()).collect();
    let cfg = SelectionConfig {
        pre_count: 4,
        final_count: 4,
        grid_step: 0.01,
    };
    let sel = select_genes(&values, &ids, &labels, 2, 1, &cfg).unwrap();
    let mut s = sel.selected.clone();
    s.sort();
    assert_eq!(s, vec![0, 1, 2, 3]);
    let difs: Vec<f64> = sel.selected.iter().map(|&g| sel.scores[g].dif.unwrap()).collect();
    assert!(difs.windows(2).all(|w| w[0] >= w[1]));
}
