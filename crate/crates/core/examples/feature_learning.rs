//! Two-layer sparse NMF fitted on training and test samples together.

use issrc::feature_learning::{
    emit_factor_diagnostics, lpml_snmf_fit, mean_within_class_correlation, prepare_nonnegative, FeatureConfig,
    NmfScaling,
};
use issrc::seed;
use nalgebra::DMatrix;
use rand::Rng;

fn main() -> issrc::Result<()> {
    let mut rng = seed::rng(11);
    let (genes, n) = (10, 40);
    let class_of: Vec<usize> = (0..n).map(|s| s % 2).collect();
    let v = DMatrix::from_fn(genes, n, |g, s| {
        let up = if (g < 5) == (class_of[s] == 1) { 3.0 } else { 1.0 };
        up + rng.random_range(0.0..0.5)
    });
    let (train, test) = (v.columns(0, 30).into_owned(), v.columns(30, 10).into_owned());
    let (train, test) = prepare_nonnegative(&train, &test, NmfScaling::UnitMax);

    let cfg = FeatureConfig {
        lambdas: vec![0.02, 0.05],
        ..FeatureConfig::default()
    };
    let stack = lpml_snmf_fit(&train, &test, &cfg)?;
    for (l, layer) in stack.layers.iter().enumerate() {
        println!(
            "layer {}: W {}x{}, {} iterations, objective {:.4} -> {:.4}",
            l + 1,
            layer.w.nrows(),
            layer.w.ncols(),
            layer.iterations,
            layer.objective_trace[0],
            layer.objective_trace.last().unwrap()
        );
    }

    let mut joined = DMatrix::zeros(genes, n);
    joined.columns_mut(0, 30).copy_from(&train);
    joined.columns_mut(30, 10).copy_from(&test);
    let diag = emit_factor_diagnostics(&joined, &stack, &class_of)?;
    for (name, corr) in &diag.correlations {
        println!("{name}: mean within-class correlation {:.3}", mean_within_class_correlation(corr, &class_of));
    }
    Ok(())
}
