//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use issrc::dataset::ExpressionDataset;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Cyclic coordinate descent for `min ‖h − Dα‖² + λ‖α‖₁`, run until the
/// largest coordinate change in a sweep is below `tol`.
pub fn lasso_cd(dict: &DMatrix<f64>, h: &DVector<f64>, lambda: f64, tol: f64) -> DVector<f64> {
    let k = dict.ncols();
    let col_sq: Vec<f64> = (0..k).map(|j| dict.column(j).norm_squared()).collect();
    let mut alpha = DVector::<f64>::zeros(k);
    let mut resid = h.clone();
    for _ in 0..1_000_000 {
        let mut max_change: f64 = 0.0;
        for j in 0..k {
            if col_sq[j] == 0.0 {
                continue;
            }
            let old = alpha[j];
            // ρ_j = d_jᵀ(r + d_j·α_j)
            let rho = dict.column(j).dot(&resid) + col_sq[j] * old;
            let z = 2.0 * rho;
            let new = if z > lambda {
                (z - lambda) / (2.0 * col_sq[j])
            } else if z < -lambda {
                (z + lambda) / (2.0 * col_sq[j])
            } else {
                0.0
            };
            if new != old {
                resid.axpy(old - new, &dict.column(j), 1.0);
                alpha[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        if max_change < tol {
            break;
        }
    }
    alpha
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let mut rot = DMatrix::<f64>::identity(n, n);
                rot[(p, p)] = c;
                rot[(q, q)] = c;
                rot[(p, q)] = s;
                rot[(q, p)] = -s;
                m = rot.transpose() * &m * &rot;
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Maximum of the logistic log-likelihood over a coarse-to-fine grid of
/// `(intercept, slope)` pairs.
pub fn logistic_grid_oracle(x: &[f64], y: &[bool]) -> (f64, f64, f64) {
    let ll = |b0: f64, b1: f64| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                let t = b0 + b1 * xi;
                let p = 1.0 / (1.0 + (-t).exp());
                if yi {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            })
            .sum()
    };
    let (mut c0, mut c1, mut width) = (0.0, 0.0, 20.0);
    let mut best = (c0, c1, ll(c0, c1));
    for _ in 0..40 {
        let steps = 40;
        for i in 0..=steps {
            for j in 0..=steps {
                let b0 = c0 - width + 2.0 * width * i as f64 / steps as f64;
                let b1 = c1 - width + 2.0 * width * j as f64 / steps as f64;
                let v = ll(b0, b1);
                if v > best.2 {
                    best = (b0, b1, v);
                }
            }
        }
        c0 = best.0;
        c1 = best.1;
        width /= 4.0;
    }
    best
}

/// Brute-force AUC: concordant positive/negative pairs, ties counted ½.
pub fn pair_auc(scores: &[f64], truths: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if truths[i] && !truths[j] {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Two Gaussian clusters in `genes` dimensions, `per_class` samples each,
/// centers 6 apart along every informative gene.
pub fn separable_dataset(genes: usize, per_class: usize, seed: u64) -> ExpressionDataset {
    let mut r = rng(seed);
    let n = 2 * per_class;
    let values = DMatrix::from_fn(genes, n, |g, s| {
        let class = s / per_class;
        let centre = if g % 2 == 0 { 6.0 * class as f64 } else { -6.0 * class as f64 };
        5.0 + centre + 0.5 * r.sample::<f64, _>(StandardNormal)
    });
    let labels = (0..n).map(|s| s / per_class).collect();
    ExpressionDataset::new(
        values,
        (0..genes).map(|g| format!("g{g}")).collect(),
        (0..n).map(|s| format!("s{s}")).collect(),
        labels,
        vec!["normal".into(), "tumor".into()],
    )
    .unwrap()
}

/// Colon-shaped synthetic data: `genes × (neg + pos)` log-normal background
/// with `informative` genes shifted in the positive class, alternately up
/// and down on the log scale.
pub fn colon_like_dataset(genes: usize, neg: usize, pos: usize, informative: usize, shift: f64, seed: u64) -> ExpressionDataset {
    let mut r = rng(seed);
    let n = neg + pos;
    let values = DMatrix::from_fn(genes, n, |g, s| {
        let base = 6.0 + (g % 7) as f64 * 0.3 + r.sample::<f64, _>(StandardNormal);
        let up = match (g < informative && s >= neg, g % 2) {
            (true, 0) => shift,
            (true, _) => -shift,
            _ => 0.0,
        };
        (base + up).exp()
    });
    let labels = (0..n).map(|s| usize::from(s >= neg)).collect();
    ExpressionDataset::new(
        values,
        (0..genes).map(|g| format!("G{g}")).collect(),
        (0..n).map(|s| format!("S{s}")).collect(),
        labels,
        vec!["normal".into(), "tumor".into()],
    )
    .unwrap()
}
