//! Stratified 10-fold cross-validation of three classifiers on the same
//! folds, with a label-access audit.

use issrc::classification::Method;
use issrc::dataset::{stratified_kfold, ExpressionDataset};
use issrc::evaluation::{cross_validate, LabelAccessLog, MethodConfig};
use issrc::seed;
use issrc::solver::LambdaPolicy;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> issrc::Result<()> {
    let (genes, neg, pos) = (300, 22, 40);
    let mut rng = seed::rng(9);
    let values = DMatrix::from_fn(genes, neg + pos, |g, s| {
        let shift = match (g < 20, s >= neg, g % 2) {
            (true, true, 0) => 1.5,
            (true, true, _) => -1.5,
            _ => 0.0,
        };
        (6.0 + shift + rng.sample::<f64, _>(StandardNormal)).exp()
    });
    let ds = ExpressionDataset::new(
        values,
        (0..genes).map(|g| format!("G{g}")).collect(),
        (0..neg + pos).map(|s| format!("S{s}")).collect(),
        (0..neg + pos).map(|s| usize::from(s >= neg)).collect(),
        vec!["normal".into(), "tumor".into()],
    )?;
    let plan = stratified_kfold(ds.labels(), 10, 1)?;

    let mut base = MethodConfig::default();
    base.selection.pre_count = 100;
    // The default layer penalties empty most of H_2 at unit-max scale, and
    // sparser inverse codes separate better on few test samples.
    if let Some(f) = base.issrc.features.as_mut() {
        f.lambdas = vec![0.02, 0.05];
    }
    base.issrc.solver.lambda = LambdaPolicy::Relative(0.3);

    for method in [Method::IntegratedIssrc, Method::Issrc, Method::Src] {
        let log = LabelAccessLog::new();
        let rep = cross_validate(&ds, &plan, &base.with_method(method), Some(&log))?;
        let acc = rep.mean.accuracy.expect("every fold has test samples");
        println!(
            "{:<17} mean accuracy {:.3} (sd {:.3}), pooled AUC {:.3}, label leaks {}",
            method.to_string(),
            acc.mean,
            acc.sd,
            rep.roc.as_ref().map_or(f64::NAN, |r| r.auc),
            log.leaks(&plan).len()
        );
    }
    Ok(())
}
