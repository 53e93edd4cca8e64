//! Decision curve of a single gene's logistic risk model.

use issrc::gene_selection::{dca_curve, dif_score, fit_risk_model};

fn main() -> issrc::Result<()> {
    let expr = [2.1, 2.4, 2.2, 3.9, 2.8, 4.4, 3.1, 4.8, 5.0, 3.6, 4.1, 2.6];
    let tumor = [false, false, false, true, false, true, false, true, true, false, true, true];

    let model = fit_risk_model(&expr, &tumor, 0)?;
    println!("risk = 1 / (1 + exp(-({:.3} + {:.3}·x)))", model.intercept, model.slope);

    let curve = dca_curve(&model, &expr, &tumor, 0.05)?;
    println!("prevalence {:.3}, valid thresholds up to {:.3}", curve.prevalence, curve.p1);
    println!("{:>6} {:>10} {:>10}", "p_t", "model", "treat-all");
    for (i, t) in curve.thresholds.iter().enumerate() {
        println!("{t:>6.2} {:>10.4} {:>10.4}", curve.nb_model[i], curve.nb_treat_all[i]);
    }
    println!("DIF = {:.4}", dif_score(&curve));
    Ok(())
}
