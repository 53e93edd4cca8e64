//! One train/test split classified three ways: integrated ISSRC, ISSRC on
//! the raw selected genes, and SRC.

use issrc::classification::{integrated_isrc_classify, src_classify, IssrcConfig};
use issrc::evaluation::confusion_metrics;
use issrc::feature_learning::FeatureConfig;
use issrc::linalg::unit_columns;
use issrc::seed;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn sample(rng: &mut impl Rng, genes: usize, labels: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(genes, labels.len(), |g, s| {
        let sign = if g % 2 == 0 { 1.0 } else { -1.0 };
        6.0 + sign * 1.5 * labels[s] as f64 + 0.7 * rng.sample::<f64, _>(StandardNormal)
    })
}

fn main() -> issrc::Result<()> {
    let mut rng = seed::rng(21);
    let y_train: Vec<usize> = (0..30).map(|i| i % 2).collect();
    let y_test: Vec<usize> = (0..10).map(|i| i % 2).collect();
    let train = sample(&mut rng, 10, &y_train);
    let test = sample(&mut rng, 10, &y_test);

    let integrated = IssrcConfig {
        features: Some(FeatureConfig {
            lambdas: vec![0.02, 0.05],
            ..FeatureConfig::default()
        }),
        ..IssrcConfig::default()
    };
    let plain = IssrcConfig {
        features: None,
        ..IssrcConfig::default()
    };
    let reports = [
        integrated_isrc_classify(&train, &test, &y_train, 2, &integrated)?,
        integrated_isrc_classify(&train, &test, &y_train, 2, &plain)?,
        src_classify(&unit_columns(&train), &unit_columns(&test), &y_train, 2, &plain.solver)?,
    ];
    for rep in &reports {
        let m = confusion_metrics(&rep.predictions, &y_test, 1)?;
        println!("{:<17} accuracy {:.2}  predictions {:?}", rep.method.to_string(), m.accuracy, rep.predictions);
    }
    println!("CCR of the first test sample: {:.3?}", reports[0].class_scores.column(0).as_slice());
    Ok(())
}
