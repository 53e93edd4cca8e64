//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if a gating criterion fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{colon_like_dataset, gaussian_matrix, gaussian_vector, lasso_cd, pair_auc, rng, separable_dataset};
use issrc::classification::{ccr_classify, issr_represent, stability_check, CoefficientMatrix};
use issrc::config::parse_config;
use issrc::dataset::{stratified_kfold, ExpressionDataset};
use issrc::evaluation::{confusion_metrics, cross_validate, roc_auc, MethodConfig};
use issrc::feature_learning::{factorize_layer, LayerConfig};
use issrc::gene_selection::{dca_curve, dca_from_risks, dif_score, fit_risk_model, select_genes, SelectionConfig};
use issrc::linalg::singular_values;
use issrc::pipeline::{run_cross_validate, SweepOptions};
use issrc::solver::{
    admm_solve, bench_csv, convergence_report, gsadmm_solve, BenchInstance, SolverKind, SolverParams,
};
use nalgebra::DMatrix;
use rand::Rng;

const DATA_ENV: &str = "ISSRC_COLON_DATA";
const LABELS_ENV: &str = "ISSRC_COLON_LABELS";

enum Outcome {
    Pass(String),
    Fail(String),
    Skipped(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn out_dir() -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn lasso_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1001);
    let p = SolverParams::default().with_lambda(0.1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = gaussian_matrix(20, 8, &mut r);
        let h = gaussian_vector(20, &mut r);
        let oracle = lasso_cd(&d, &h, 0.1, 1e-13);
        let g = gsadmm_solve(&h, &d, &p).unwrap().alpha;
        let a = admm_solve(&h, &d, &p).unwrap().alpha;
        worst = worst.max((g - &oracle).amax()).max((a - &oracle).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-4 && secs < 60.0, format!("max deviation {worst:.2e}, {secs:.2}s"))
}

fn gsadmm_convergence() -> Outcome {
    let mut r = rng(1002);
    let instances: Vec<_> = (0..100).map(|_| BenchInstance::gaussian(20, 8, &mut r)).collect();
    let (mut worst_primal, mut worst_kkt, mut worst_oracle, mut max_iter): (f64, f64, f64, usize) = (0.0, 0.0, 0.0, 0);
    for rho in [0.5, 1.0, 1.5] {
        let p = SolverParams {
            rho,
            ..SolverParams::default().with_lambda(0.1)
        };
        for inst in &instances {
            let s = gsadmm_solve(&inst.target, &inst.dict, &p).unwrap();
            let last = s.state.residuals.last().unwrap();
            worst_primal = worst_primal.max(last.primal);
            worst_kkt = worst_kkt.max(last.kkt);
            max_iter = max_iter.max(s.state.iter);
            let oracle = lasso_cd(&inst.dict, &inst.target, 0.1, 1e-13);
            worst_oracle = worst_oracle.max((&s.alpha - oracle).amax());
        }
    }
    check(
        worst_primal <= 1e-8 && worst_kkt <= 1e-6 && max_iter <= 2000 && worst_oracle <= 1e-4,
        format!("primal {worst_primal:.2e}, kkt {worst_kkt:.2e}, max iterations {max_iter}, oracle gap {worst_oracle:.2e}"),
    )
}

fn gsadmm_vs_admm() -> Outcome {
    let mut r = rng(1003);
    let instances: Vec<_> = (0..50).map(|_| BenchInstance::gaussian(20, 8, &mut r)).collect();
    let p = SolverParams {
        max_iters: 200,
        // Effectively never stops early, so both solvers spend the budget.
        tol: f64::MIN_POSITIVE,
        ..SolverParams::default().with_lambda(0.1)
    };
    let rows = convergence_report(&instances, &[(SolverKind::GsAdmm, p), (SolverKind::Admm, p)]).unwrap();
    let path = out_dir().join("solver_comparison.csv");
    std::fs::write(&path, bench_csv(&rows)).unwrap();
    let wins = rows
        .chunks(2)
        .filter(|pair| pair[0].final_kkt <= pair[1].final_kkt)
        .count();
    let share = wins as f64 / instances.len() as f64;
    check(share >= 0.8, format!("GsADMM <= ADMM on {wins}/50 instances; csv {}", path.display()))
}

fn nmf_properties() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1004);
    let w0 = DMatrix::from_fn(20, 3, |_, _| r.random_range(0.0..1.0));
    let h0 = DMatrix::from_fn(3, 10, |_, _| r.random_range(0.0..1.0));
    let v = &w0 * &h0;
    let layer = factorize_layer(
        &v,
        &LayerConfig {
            rank: 3,
            lambda: 0.0,
            max_iters: 5000,
            tol: 0.0,
            initial_step: 1e-2,
            seed: 7,
        },
    )
    .unwrap();
    let nonneg = layer.w.iter().chain(layer.h.iter()).all(|&x| x >= 0.0);
    let monotone = layer.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let rel = (&v - &layer.w * &layer.h).norm() / v.norm();
    let secs = start.elapsed().as_secs_f64();
    check(
        nonneg && monotone && rel <= 0.05 && secs < 10.0,
        format!("nonnegative {nonneg}, monotone {monotone}, relative error {rel:.2e}, {secs:.2}s"),
    )
}

fn stability_bound() -> Outcome {
    let mut r = rng(1005);
    let d = gaussian_matrix(50, 10, &mut r);
    let t = gaussian_vector(50, &mut r);
    let sv = singular_values(&d);
    let eps = 0.01 * sv[9] / sv[0];
    let reps = stability_check(&d, &t, eps, 200, 1005).unwrap();
    let violations = reps.iter().filter(|x| !x.holds).count();
    let zero = stability_check(&d, &t, 0.0, 5, 1005).unwrap();
    let exact = zero.iter().all(|x| x.observed_ratio == 0.0);
    check(
        reps.len() == 200 && violations == 0 && exact,
        format!("{violations} violations in {} trials, zero-perturbation exact {exact}", reps.len()),
    )
}

fn ccr_invariant() -> Outcome {
    let mut r = rng(1006);
    let mut worst: f64 = 0.0;
    let mut columns = 0;
    let mut scale_ok = true;
    let p = SolverParams::default().with_lambda(0.05);
    for trial in 0..20 {
        let ds = separable_dataset(12, 6, 2000 + trial);
        let train_idx: Vec<usize> = (0..12).filter(|i| i % 3 != 0).collect();
        let test_idx: Vec<usize> = (0..12).filter(|i| i % 3 == 0).collect();
        let class_of: Vec<usize> = train_idx.iter().map(|&i| ds.labels()[i]).collect();
        let c = issr_represent(&ds.sample_columns(&train_idx), &ds.sample_columns(&test_idx), &class_of, 2, &p).unwrap();
        let rand_vals = DMatrix::from_fn(5, 9, |_, _| r.random_range(-1.0..1.0));
        let rc = CoefficientMatrix::new(rand_vals, vec![0, 0, 1, 1, 1, 2, 2, 2, 2], 3).unwrap();
        for coeffs in [&c, &rc] {
            let out = ccr_classify(coeffs, true, None).unwrap();
            let k = coeffs.class_sizes.len();
            for l in 0..coeffs.n_test() {
                if out.fallback.contains(&l) {
                    continue;
                }
                columns += 1;
                let s: f64 = (0..k).map(|j| coeffs.class_sizes[j] as f64 * out.ccr.values[(j, l)]).sum();
                worst = worst.max((s - 1.0).abs());
                let mut scaled = coeffs.values.clone();
                scaled.row_mut(l).scale_mut(r.random_range(1e-3..1e3));
                let sc = CoefficientMatrix::new(scaled, coeffs.class_of.clone(), k).unwrap();
                scale_ok &= ccr_classify(&sc, true, None).unwrap().predictions[l] == out.predictions[l];
            }
        }
    }
    check(worst <= 1e-10 && scale_ok, format!("{columns} columns, max |sum - 1| {worst:.2e}, scaling invariant {scale_ok}"))
}

fn all_difs(ds: &ExpressionDataset) -> (usize, bool) {
    let sel = select_genes(
        ds.values(),
        ds.gene_ids(),
        ds.labels(),
        ds.n_classes(),
        1,
        &SelectionConfig {
            pre_count: ds.n_genes(),
            final_count: 1,
            grid_step: 0.005,
        },
    )
    .unwrap();
    let prevalence = ds.class_counts()[1] as f64 / ds.n_samples() as f64;
    let ok = sel.scores.iter().all(|s| matches!(s.dif, Some(d) if (0.0..=prevalence + 1e-12).contains(&d)));
    (sel.scores.len(), ok)
}

fn dif_properties() -> Outcome {
    let mut genes = 0;
    let mut bounded = true;
    for ds in [separable_dataset(20, 10, 1007), colon_like_dataset(60, 22, 40, 10, 1.0, 1007)] {
        let (n, ok) = all_difs(&ds);
        genes += n;
        bounded &= ok;
    }
    let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let y: Vec<bool> = (0..20).map(|i| i >= 13).collect();
    let perfect = dif_score(&dca_curve(&fit_risk_model(&x, &y, 0).unwrap(), &x, &y, 0.005).unwrap());
    let perfect_ok = (perfect - 7.0 / 20.0).abs() <= 0.005;
    let constant = dif_score(&dca_from_risks(&[0.35; 20], &y, 0.005).unwrap());
    check(
        bounded && perfect_ok && constant <= 1e-12,
        format!("{genes} genes bounded {bounded}, perfect gene {perfect:.4} vs 0.35, constant gene {constant:.1e}"),
    )
}

fn metric_identities() -> Outcome {
    let mut r = rng(1008);
    let mut exact = true;
    let mut worst_auc: f64 = 0.0;
    for _ in 0..500 {
        let n = r.random_range(2..=100);
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let m = confusion_metrics(&pred, &truth, 1).unwrap();
        if let (Some(a), Some(b)) = (m.sensitivity, m.missed_diagnosis) {
            exact &= a + b == 1.0;
        }
        if let (Some(a), Some(b)) = (m.specificity, m.misdiagnosis) {
            exact &= a + b == 1.0;
        }
        let pos: Vec<bool> = truth.iter().map(|&t| t == 1).collect();
        if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) {
            continue;
        }
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..10) as f64).collect();
        worst_auc = worst_auc.max((roc_auc(&scores, &pos).unwrap().auc - pair_auc(&scores, &pos)).abs());
    }
    check(exact && worst_auc <= 1e-12, format!("identities exact {exact}, max AUC gap {worst_auc:.1e}"))
}

fn colon_reproduction() -> (Outcome, Option<Outcome>) {
    let start = Instant::now();
    let (data, labels) = match (std::env::var(DATA_ENV), std::env::var(LABELS_ENV)) {
        (Ok(d), Ok(l)) => (d, l),
        _ => {
            // Stand-in with the same shape: checks that the default run fits
            // the time budget. The accuracy floor needs the real data.
            let ds = colon_like_dataset(2000, 22, 40, 40, 1.5, 1009);
            let plan = stratified_kfold(ds.labels(), 10, 0).unwrap();
            let rep = cross_validate(&ds, &plan, &MethodConfig::default(), None).unwrap();
            let secs = start.elapsed().as_secs_f64();
            let acc = rep.mean.accuracy.map(|a| a.mean * 100.0).unwrap_or(f64::NAN);
            let timing = check(
                secs < 600.0,
                format!("synthetic 62x2000 default 10-fold run in {secs:.1}s, accuracy {acc:.2}%"),
            );
            return (
                Outcome::Skipped(format!("set {DATA_ENV} and {LABELS_ENV} to run on the Colon data")),
                Some(timing),
            );
        }
    };
    let out = out_dir().join("colon");
    let text = format!("data = {data}\nlabels = {labels}\noutput = {}\nreference_accuracy = 98.70\n", out.display());
    let cfg = parse_config(&text).unwrap();
    match run_cross_validate(&cfg, SweepOptions::default()) {
        Ok((_, m)) => {
            let acc = m.achieved_accuracy.unwrap_or(f64::NAN);
            let secs = start.elapsed().as_secs_f64();
            (
                check(
                    secs < 600.0 && acc >= 88.0,
                    format!("mean accuracy {acc:.2}%, gap {:.2} points, {secs:.1}s", m.accuracy_gap.unwrap_or(f64::NAN)),
                ),
                None,
            )
        }
        Err(e) => (Outcome::Fail(format!("run failed: {e}")), None),
    }
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let ds = separable_dataset(30, 12, 1010);
    ds.write_matrix(&tmp.path().join("x.tsv"), b'\t').unwrap();
    ds.write_labels(&tmp.path().join("y.tsv"), b'\t').unwrap();
    let run = |name: &str| {
        let text = format!(
            "data = {}\nlabels = {}\noutput = {}\nseed = 5\npre_count = 20\nfinal_count = 10\n",
            tmp.path().join("x.tsv").display(),
            tmp.path().join("y.tsv").display(),
            tmp.path().join(name).display()
        );
        run_cross_validate(&parse_config(&text).unwrap(), SweepOptions::default()).unwrap();
        std::fs::read(tmp.path().join(name).join("metrics.json")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    check(a == b, format!("metrics.json {} bytes, identical {}", a.len(), a == b))
}

fn main() {
    let criteria: Vec<(&str, bool, fn() -> Outcome)> = vec![
        ("1 lasso oracle equivalence", true, lasso_oracle_equivalence),
        ("2 GsADMM convergence", true, gsadmm_convergence),
        ("3 GsADMM vs ADMM at budget 200", false, gsadmm_vs_admm),
        ("4 NMF properties", true, nmf_properties),
        ("5 stability bound", true, stability_bound),
        ("6 CCR invariant", true, ccr_invariant),
        ("7 DIF properties", true, dif_properties),
        ("8 metric identities", true, metric_identities),
        ("10 end-to-end determinism", true, determinism),
    ];
    let mut gating_failures = 0;
    let total = Instant::now();
    for (name, gating, f) in criteria {
        let t = Instant::now();
        let outcome = f();
        gating_failures += report(name, gating, &outcome, t.elapsed());
    }
    let t = Instant::now();
    let (colon, timing) = colon_reproduction();
    gating_failures += report("9 Colon reproduction", true, &colon, t.elapsed());
    if let Some(timing) = timing {
        gating_failures += report("9 Colon-shaped timing", true, &timing, t.elapsed());
    }
    println!("acceptance finished in {:.1}s", total.elapsed().as_secs_f64());
    if gating_failures > 0 {
        std::process::exit(1);
    }
}

fn report(name: &str, gating: bool, outcome: &Outcome, took: Duration) -> usize {
    let note = if gating { "" } else { " [known gap, not gating]" };
    match outcome {
        Outcome::Pass(d) => {
            println!("PASS {name}: {d} ({:.2}s)", took.as_secs_f64());
            0
        }
        Outcome::Fail(d) => {
            println!("FAIL {name}: {d}{note} ({:.2}s)", took.as_secs_f64());
            usize::from(gating)
        }
        Outcome::Skipped(d) => {
            println!("SKIPPED {name}: {d}");
            0
        }
    }
}
