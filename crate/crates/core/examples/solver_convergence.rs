//! GsADMM against classic ADMM on random lasso instances, including the
//! effect of the relaxation factor.

use issrc::seed;
use issrc::solver::{convergence_report, BenchInstance, SolverKind, SolverParams};

fn main() -> issrc::Result<()> {
    let mut rng = seed::rng(5);
    let instances: Vec<_> = (0..20).map(|_| BenchInstance::gaussian(20, 8, &mut rng)).collect();

    let base = SolverParams::default().with_lambda(0.1);
    let mut runs = vec![(SolverKind::Admm, base)];
    for rho in [0.5, 1.0, 1.5] {
        runs.push((SolverKind::GsAdmm, SolverParams { rho, ..base }));
    }
    let rows = convergence_report(&instances, &runs)?;

    println!("{:<8} {:>5} {:>10} {:>12} {:>10}", "solver", "rho", "mean iter", "max KKT", "mean ms");
    for (kind, p) in &runs {
        let sel: Vec<_> = rows.iter().filter(|r| r.solver == *kind && r.rho == p.rho).collect();
        let n = sel.len() as f64;
        println!(
            "{:<8} {:>5.1} {:>10.1} {:>12.2e} {:>10.3}",
            kind.to_string(),
            p.rho,
            sel.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
            sel.iter().map(|r| r.final_kkt).fold(0.0, f64::max),
            sel.iter().map(|r| r.wall_ms).sum::<f64>() / n,
        );
    }
    Ok(())
}
