//! Inverse-space sparse representation, category contribution rates, the
//! SRC baseline and the least-squares stability check.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feature_learning::{lpml_snmf_fit, prepare_nonnegative, FactorStack, FeatureConfig, NmfScaling};
use crate::linalg::{least_squares, singular_values, spectral_norm, unit_columns};
use crate::seed;
use crate::solver::{gsadmm_solve, SolverParams};

/// Relative tolerance under which two CCR values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Inverse-space coefficients: column `i` codes training sample `i` over the
/// test samples, so the matrix is `tests × trains`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientMatrix {
    pub values: DMatrix<f64>,
    pub class_of: Vec<usize>,
    pub class_sizes: Vec<usize>,
    /// Training columns whose solve hit `max_iters`.
    pub unconverged: Vec<usize>,
    /// All-zero training columns (their coefficients are zero).
    pub zero_columns: Vec<usize>,
}

impl CoefficientMatrix {
    pub fn new(values: DMatrix<f64>, class_of: Vec<usize>, n_classes: usize) -> Result<Self> {
        if values.ncols() != class_of.len() {
            return Err(Error::Dimension(format!(
                "{} coefficient columns but {} labels",
                values.ncols(),
                class_of.len()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        if let Some(&bad) = class_of.iter().find(|&&c| c >= n_classes) {
            return Err(Error::InvalidArgument(format!("class {bad} out of range")));
        }
        let mut class_sizes = vec![0; n_classes];
        for &c in &class_of {
            class_sizes[c] += 1;
        }
        Ok(Self {
            values,
            class_of,
            class_sizes,
            unconverged: Vec::new(),
            zero_columns: Vec::new(),
        })
    }

    pub fn n_test(&self) -> usize {
        self.values.nrows()
    }

    /// `test,train,class,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("test,train,class,value\n");
        for l in 0..self.values.nrows() {
            for i in 0..self.values.ncols() {
                out.push_str(&format!("{l},{i},{},{}\n", self.class_of[i], self.values[(l, i)]));
            }
        }
        out
    }
}

/// Solves one lasso per training column over the test-feature dictionary.
///
/// `train` and `test` share their row dimension (features). Columns are
/// solved in parallel and assembled in order.
pub fn issr_represent(
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
    class_of: &[usize],
    n_classes: usize,
    params: &SolverParams,
) -> Result<CoefficientMatrix> {
    if train.nrows() != test.nrows() {
        return Err(Error::Dimension(format!(
            "train features have {} rows, test features {}",
            train.nrows(),
            test.nrows()
        )));
    }
    if test.ncols() == 0 || train.ncols() == 0 {
        return Err(Error::Dimension("need at least one train and one test sample".into()));
    }
    params.validate()?;
    let k = test.ncols();
    let solved = (0..train.ncols())
        .into_par_iter()
        .map(|i| {
            let target: DVector<f64> = train.column(i).into_owned();
            if target.iter().all(|&x| x == 0.0) {
                return Ok((DVector::zeros(k), true, true));
            }
            let sol = gsadmm_solve(&target, test, params)?;
            Ok((sol.alpha, sol.state.converged, false))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = DMatrix::zeros(k, train.ncols());
    let mut unconverged = Vec::new();
    let mut zero_columns = Vec::new();
    for (i, (alpha, converged, zero)) in solved.into_iter().enumerate() {
        values.set_column(i, &alpha);
        if !converged {
            unconverged.push(i);
        }
        if zero {
            zero_columns.push(i);
        }
    }
    let mut m = CoefficientMatrix::new(values, class_of.to_vec(), n_classes)?;
    m.unconverged = unconverged;
    m.zero_columns = zero_columns;
    Ok(m)
}

/// Category contribution rates, `classes × tests`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcrMatrix {
    pub values: DMatrix<f64>,
    pub class_size_norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcrOutcome {
    pub ccr: CcrMatrix,
    pub predictions: Vec<usize>,
    /// Test samples whose maximal CCR was shared by several classes.
    pub ties: Vec<usize>,
    /// Test samples with an all-zero coefficient row.
    pub fallback: Vec<usize>,
}

/// Scores and classifies every test sample.
///
/// `C[j,l] = w_j · Σ_{i∈j}|α_{i,l}| / Σ_i |α_{i,l}|` with `w_j = 1/s_j` when
/// `class_size_norm` holds and 1 otherwise. Degenerate test samples (zero
/// denominator) get an all-zero CCR column and take the class of the nearest
/// training feature when `features = Some((train, test))`, class 0 otherwise.
pub fn ccr_classify(
    coeffs: &CoefficientMatrix,
    class_size_norm: bool,
    features: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> Result<CcrOutcome> {
    let c = coeffs.class_sizes.len();
    if let Some(j) = coeffs.class_sizes.iter().position(|&s| s == 0) {
        return Err(Error::Degenerate(format!("class {j} has no training samples")));
    }
    if let Some((tr, te)) = features {
        if tr.ncols() != coeffs.class_of.len() || te.ncols() != coeffs.n_test() || tr.nrows() != te.nrows() {
            return Err(Error::Dimension("fallback features do not match coefficients".into()));
        }
    }
    let k = coeffs.n_test();
    let mut values = DMatrix::zeros(c, k);
    let mut predictions = Vec::with_capacity(k);
    let mut ties = Vec::new();
    let mut fallback = Vec::new();
    for l in 0..k {
        let mut mass = vec![0.0; c];
        for (i, &cls) in coeffs.class_of.iter().enumerate() {
            mass[cls] += coeffs.values[(l, i)].abs();
        }
        let total: f64 = mass.iter().sum();
        if total == 0.0 {
            fallback.push(l);
            let pred = features.map_or(0, |(tr, te)| nearest_class(tr, &te.column(l).into_owned(), &coeffs.class_of));
            predictions.push(pred);
            continue;
        }
        for j in 0..c {
            let w = if class_size_norm {
                1.0 / coeffs.class_sizes[j] as f64
            } else {
                1.0
            };
            values[(j, l)] = w * mass[j] / total;
        }
        let col: Vec<f64> = values.column(l).iter().copied().collect();
        let (pred, tied) = argmax_with_ties(&col);
        if tied {
            ties.push(l);
        }
        predictions.push(pred);
    }
    Ok(CcrOutcome {
        ccr: CcrMatrix {
            values,
            class_size_norm,
        },
        predictions,
        ties,
        fallback,
    })
}

/// Smallest index attaining the maximum, and whether another index lies
/// within [`TIE_TOLERANCE`] (relative) of it.
fn argmax_with_ties(v: &[f64]) -> (usize, bool) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = max - TIE_TOLERANCE * max.abs();
    let mut hits = v.iter().enumerate().filter(|(_, &x)| x >= cut).map(|(i, _)| i);
    let first = hits.next().unwrap_or(0);
    (first, hits.next().is_some())
}

fn nearest_class(train: &DMatrix<f64>, x: &DVector<f64>, class_of: &[usize]) -> usize {
    (0..train.ncols())
        .map(|i| ((train.column(i) - x).norm_squared(), i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map_or(0, |(_, i)| class_of[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Gene selection, sparse NMF features, then ISSR + CCR.
    #[default]
    IntegratedIssrc,
    /// Gene selection, then ISSR + CCR on the selected expression values.
    Issrc,
    /// Gene selection, then classic sparse representation classification.
    Src,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "integrated-issrc" => Ok(Method::IntegratedIssrc),
            "issrc" => Ok(Method::Issrc),
            "src" => Ok(Method::Src),
            other => Err(Error::Parse(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::IntegratedIssrc => "integrated-issrc",
            Method::Issrc => "issrc",
            Method::Src => "src",
        })
    }
}

/// Settings of the classification stage proper (after gene selection).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IssrcConfig {
    /// `None` skips feature learning and codes the input values directly.
    pub features: Option<FeatureConfig>,
    pub scaling: NmfScaling,
    pub solver: SolverParams,
    pub class_size_norm: bool,
    /// Scale every sample to unit ℓ2 norm before coding.
    pub unit_norm: bool,
}

impl Default for IssrcConfig {
    fn default() -> Self {
        Self {
            features: Some(FeatureConfig::default()),
            scaling: NmfScaling::UnitMax,
            solver: SolverParams::default(),
            class_size_norm: true,
            unit_norm: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub method: Method,
    pub predictions: Vec<usize>,
    /// `classes × tests`; larger means more likely. CCR for ISSRC, normalized
    /// inverse class residuals for SRC.
    pub class_scores: DMatrix<f64>,
    pub ties: Vec<usize>,
    pub fallback: Vec<usize>,
    pub unconverged_solves: usize,
    pub zero_train_columns: Vec<usize>,
    #[serde(skip)]
    pub coefficients: Option<CoefficientMatrix>,
    #[serde(skip)]
    pub factors: Option<FactorStack>,
}

impl ClassificationReport {
    /// Score of `class` for every test sample, for ROC and DCA.
    pub fn scores_for(&self, class: usize) -> Vec<f64> {
        self.class_scores.row(class).iter().copied().collect()
    }
}

fn check_split(train: &DMatrix<f64>, test: &DMatrix<f64>, labels: &[usize], n_classes: usize) -> Result<()> {
    if train.nrows() != test.nrows() {
        return Err(Error::Dimension(format!(
            "train has {} features, test has {}",
            train.nrows(),
            test.nrows()
        )));
    }
    if labels.len() != train.ncols() {
        return Err(Error::Dimension(format!(
            "{} labels for {} training samples",
            labels.len(),
            train.ncols()
        )));
    }
    if test.ncols() == 0 {
        return Err(Error::Dimension("empty test set".into()));
    }
    for j in 0..n_classes {
        if !labels.contains(&j) {
            return Err(Error::Degenerate(format!("class {j} absent from training labels")));
        }
    }
    Ok(())
}

/// Classifies `test` (features × samples) from labeled `train`.
///
/// With `cfg.features` set, both blocks are made nonnegative and passed
/// through the sparse NMF stack first; the deepest layer's train and test
/// blocks then play the roles of `train` and `test`.
pub fn integrated_isrc_classify(
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    cfg: &IssrcConfig,
) -> Result<ClassificationReport> {
    check_split(train, test, labels, n_classes)?;
    let (method, tr, te, factors) = match &cfg.features {
        Some(fc) => {
            let (a, b) = prepare_nonnegative(train, test, cfg.scaling);
            let stack = lpml_snmf_fit(&a, &b, fc)?;
            let last = stack.layers.len() - 1;
            (Method::IntegratedIssrc, stack.train_block(last), stack.test_block(last), Some(stack))
        }
        None => (Method::Issrc, train.clone(), test.clone(), None),
    };
    let (tr, te) = if cfg.unit_norm { (unit_columns(&tr), unit_columns(&te)) } else { (tr, te) };
    let coeffs = issr_represent(&tr, &te, labels, n_classes, &cfg.solver)?;
    let out = ccr_classify(&coeffs, cfg.class_size_norm, Some((&tr, &te)))?;
    Ok(ClassificationReport {
        method,
        predictions: out.predictions,
        class_scores: out.ccr.values,
        ties: out.ties,
        fallback: out.fallback,
        unconverged_solves: coeffs.unconverged.len(),
        zero_train_columns: coeffs.zero_columns.clone(),
        coefficients: Some(coeffs),
        factors,
    })
}

/// Sparse representation classification: each test sample is coded over the
/// training dictionary and assigned to the class with the smallest
/// class-restricted reconstruction residual `‖y − X·δ_j(α)‖₂`.
pub fn src_classify(
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    params: &SolverParams,
) -> Result<ClassificationReport> {
    check_split(train, test, labels, n_classes)?;
    params.validate()?;
    let per_test = (0..test.ncols())
        .into_par_iter()
        .map(|l| {
            let y: DVector<f64> = test.column(l).into_owned();
            if y.iter().all(|&x| x == 0.0) {
                return Ok((vec![0.0; n_classes], true, true));
            }
            let sol = gsadmm_solve(&y, train, params)?;
            let residuals = (0..n_classes)
                .map(|j| {
                    let delta = DVector::from_fn(labels.len(), |i, _| {
                        if labels[i] == j {
                            sol.alpha[i]
                        } else {
                            0.0
                        }
                    });
                    (&y - train * delta).norm()
                })
                .collect::<Vec<_>>();
            Ok((residuals, sol.state.converged, false))
        })
        .collect::<Result<Vec<_>>>()?;

    let k = test.ncols();
    let mut class_scores = DMatrix::zeros(n_classes, k);
    let mut predictions = Vec::with_capacity(k);
    let mut ties = Vec::new();
    let mut fallback = Vec::new();
    let mut unconverged = 0;
    for (l, (res, converged, zero)) in per_test.into_iter().enumerate() {
        if !converged {
            unconverged += 1;
        }
        if zero {
            fallback.push(l);
            predictions.push(nearest_class(train, &test.column(l).into_owned(), labels));
            continue;
        }
        let scores = residual_scores(&res);
        class_scores.set_column(l, &DVector::from_vec(scores.clone()));
        let (pred, tied) = argmax_with_ties(&scores);
        if tied {
            ties.push(l);
        }
        predictions.push(pred);
    }
    Ok(ClassificationReport {
        method: Method::Src,
        predictions,
        class_scores,
        ties,
        fallback,
        unconverged_solves: unconverged,
        zero_train_columns: Vec::new(),
        coefficients: None,
        factors: None,
    })
}

/// Normalized inverse residuals: `(1/r_j) / Σ(1/r)`. Exact reconstructions
/// share the whole mass. For two classes this is `r_other / (r_0 + r_1)`.
fn residual_scores(res: &[f64]) -> Vec<f64> {
    let zeros = res.iter().filter(|&&r| r == 0.0).count();
    if zeros > 0 {
        return res
            .iter()
            .map(|&r| if r == 0.0 { 1.0 / zeros as f64 } else { 0.0 })
            .collect();
    }
    let inv: Vec<f64> = res.iter().map(|r| 1.0 / r).collect();
    let s: f64 = inv.iter().sum();
    inv.iter().map(|v| v / s).collect()
}

/// One Monte-Carlo trial of the least-squares perturbation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub trial: usize,
    pub epsilon: f64,
    /// `‖α̂ − α‖₂ / ‖α‖₂` for the perturbed least-squares solution α̂.
    pub observed_ratio: f64,
    /// `ε·(2κ₂/cos θ + tan θ·κ₂²)`
    pub bound: f64,
    pub kappa: f64,
    /// Angle between the target and its projection on the dictionary range.
    pub theta: f64,
    /// `observed_ratio ≤ bound·(1 + STABILITY_SLACK)`
    pub holds: bool,
}

/// Multiplicative slack absorbing the second-order term of the bound.
pub const STABILITY_SLACK: f64 = 0.1;

/// Checks the first-order least-squares perturbation bound.
///
/// Each trial draws Gaussian perturbations scaled so that
/// `‖ΔD‖₂ = ε‖D‖₂` and `‖Δt‖₂ = ε‖t‖₂`, then compares the relative change of
/// the least-squares coefficients with the bound.
pub fn stability_check(
    dict: &DMatrix<f64>,
    target: &DVector<f64>,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<StabilityReport>> {
    let (r, k) = dict.shape();
    if target.len() != r {
        return Err(Error::Dimension(format!("target length {} != {r}", target.len())));
    }
    if r < k || k == 0 {
        return Err(Error::Dimension(format!("need rows >= columns >= 1, got {r}x{k}")));
    }
    let sv = singular_values(dict);
    let (smax, smin) = (sv[0], sv[k - 1]);
    if !(smin > smax * f64::EPSILON * r as f64) {
        return Err(Error::Degenerate("dictionary is rank deficient".into()));
    }
    let kappa = smax / smin;
    if !(epsilon >= 0.0) || epsilon >= 1.0 / kappa {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} must lie in [0, 1/kappa = {})",
            1.0 / kappa
        )));
    }
    let alpha = least_squares(dict, target).ok_or_else(|| Error::Degenerate("least squares failed".into()))?;
    let t_norm = target.norm();
    let rho_ls = (target - dict * &alpha).norm();
    let sin_t = if t_norm > 0.0 { (rho_ls / t_norm).min(1.0) } else { 1.0 };
    if sin_t >= 1.0 || alpha.norm() == 0.0 {
        return Err(Error::Degenerate("target is orthogonal to the dictionary range".into()));
    }
    let theta = sin_t.asin();
    let cos_t = theta.cos();
    let bound = epsilon * (2.0 * kappa / cos_t + theta.tan() * kappa * kappa);
    let d_norm = spectral_norm(dict);

    let mut rng = seed::rng(seed::derive(seed, "stability", 0));
    let mut out = Vec::with_capacity(trials);
    for trial in 0..trials {
        let e: DMatrix<f64> = DMatrix::from_fn(r, k, |_, _| rng.sample(StandardNormal));
        let f: DVector<f64> = DVector::from_fn(r, |_, _| rng.sample(StandardNormal));
        let de = e.clone() * (epsilon * d_norm / spectral_norm(&e));
        let df = f.clone() * (epsilon * t_norm / f.norm());
        let pert = least_squares(&(dict + de), &(target + df))
            .ok_or_else(|| Error::Degenerate("perturbed least squares failed".into()))?;
        let observed_ratio = (&pert - &alpha).norm() / alpha.norm();
        out.push(StabilityReport {
            trial,
            epsilon,
            observed_ratio,
            bound,
            kappa,
            theta,
            holds: observed_ratio <= bound * (1.0 + STABILITY_SLACK),
        });
    }
    Ok(out)
}

/// `trial,epsilon,observed_ratio,bound,kappa,theta,holds`
pub fn stability_csv(reports: &[StabilityReport]) -> String {
    let mut out = String::from("trial,epsilon,observed_ratio,bound,kappa,theta,holds\n");
    for s in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.trial, s.epsilon, s.observed_ratio, s.bound, s.kappa, s.theta, s.holds
        ));
    }
    out
}
