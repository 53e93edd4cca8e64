//! File-driven run: writes a synthetic matrix and label file, then runs
//! cross-validation through a configuration file the way the binary does.

use std::fs;

use issrc::config::parse_config;
use issrc::dataset::ExpressionDataset;
use issrc::pipeline::{run_cross_validate, SweepOptions};
use issrc::seed;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("issrc-example");
    fs::create_dir_all(&dir)?;

    let mut rng = seed::rng(2);
    let n = 40;
    let ds = ExpressionDataset::new(
        DMatrix::from_fn(200, n, |g, s| {
            let shift = if g < 12 && s % 2 == 1 { if g % 2 == 0 { 1.2 } else { -1.2 } } else { 0.0 };
            7.0 + shift + rng.sample::<f64, _>(StandardNormal)
        }),
        (0..200).map(|g| format!("probe_{g}")).collect(),
        (0..n).map(|s| format!("patient_{s}")).collect(),
        (0..n).map(|s| s % 2).collect(),
        vec!["benign".into(), "malignant".into()],
    )?;
    ds.write_matrix(&dir.join("expression.tsv"), b'\t')?;
    ds.write_labels(&dir.join("labels.tsv"), b'\t')?;

    let cfg = parse_config(&format!(
        "data = {}\nlabels = {}\noutput = {}\nfolds = 5\nseed = 42\npre_count = 50\nlambdas = 0.02,0.05\n",
        dir.join("expression.tsv").display(),
        dir.join("labels.tsv").display(),
        dir.join("run").display(),
    ))?;
    let (report, manifest) = run_cross_validate(&cfg, SweepOptions::default())?;

    println!("pooled accuracy {:.3}", report.pooled_accuracy);
    println!("config hash {}", manifest.config_hash);
    for s in &manifest.stages {
        println!("stage {:<18} {:.3}s", s.stage, s.seconds);
    }
    println!("outputs in {}: {}", dir.join("run").display(), manifest.outputs.join(", "));
    Ok(())
}
