//! Monte-Carlo check of the least-squares perturbation bound behind the
//! classifier's stability argument.

use issrc::classification::stability_check;
use issrc::linalg::singular_values;
use issrc::seed;
use issrc::solver::BenchInstance;

fn main() -> issrc::Result<()> {
    let mut rng = seed::rng(17);
    let inst = BenchInstance::gaussian(50, 10, &mut rng);
    let sv = singular_values(&inst.dict);
    let inv_cond = sv[sv.len() - 1] / sv[0];

    for frac in [0.001, 0.01, 0.1] {
        let eps = frac * inv_cond;
        let reps = stability_check(&inst.dict, &inst.target, eps, 200, 17)?;
        let worst = reps.iter().map(|r| r.observed_ratio / r.bound).fold(0.0, f64::max);
        let violations = reps.iter().filter(|r| !r.holds).count();
        println!(
            "eps {eps:.2e}: kappa {:.2}, bound {:.3e}, worst observed/bound {worst:.3}, violations {violations}",
            reps[0].kappa, reps[0].bound
        );
    }
    Ok(())
}
