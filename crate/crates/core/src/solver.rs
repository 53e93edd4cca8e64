//! l1-regularized inverse-representation solves.
//!
//! Both solvers handle
//!
//! ```text
//! min_α,b  ‖h − D·α‖²₂ + λ‖b‖₁   s.t. α − b = 0
//! ```
//!
//! with the augmented Lagrangian `L_σ(α, b; η) = f(α) + λ‖b‖₁ + ⟨η, α − b⟩
//! + (σ/2)‖α − b‖²`. [`gsadmm_solve`] is the generalized semi-proximal
//! scheme: a single majorized (linearized) α step, the multiplier step, the
//! soft-threshold b step, then relaxation of all three iterates by
//! `ρ ∈ (0,2)`. [`admm_solve`] is the classic two-block method with an
//! exact α step.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, sym_max_eigenvalue};

/// Multiplier on the data-fit gradient.
///
/// `Two` is the exact gradient `2·Dᵀ(Dα − h)` of the squared norm; `One`
/// reproduces the literal majorized step `DᵀDα̃ − Dᵀh`, which corresponds to
/// the objective `½‖h − Dα‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientFactor {
    #[default]
    Two,
    One,
}

impl GradientFactor {
    pub fn value(self) -> f64 {
        match self {
            GradientFactor::Two => 2.0,
            GradientFactor::One => 1.0,
        }
    }
}

impl FromStr for GradientFactor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "two" | "2" => Ok(GradientFactor::Two),
            "one" | "1" => Ok(GradientFactor::One),
            other => Err(Error::Parse(format!("unknown gradient factor `{other}`"))),
        }
    }
}

impl fmt::Display for GradientFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradientFactor::Two => "two",
            GradientFactor::One => "one",
        })
    }
}

/// How the l1 weight is chosen for a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    Fixed(f64),
    /// `fraction · ‖Dᵀh‖∞`, recomputed per solve.
    Relative(f64),
}

impl LambdaPolicy {
    pub fn resolve(self, dict: &DMatrix<f64>, target: &DVector<f64>) -> f64 {
        match self {
            LambdaPolicy::Fixed(l) => l,
            LambdaPolicy::Relative(f) => f * inf_norm(&(dict.transpose() * target)),
        }
    }
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Relative(0.01)
    }
}

impl FromStr for LambdaPolicy {
    type Err = Error;

    /// `auto` (= `rel:0.01`), `rel:<fraction>`, or a plain number.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "auto" {
            return Ok(LambdaPolicy::default());
        }
        let parse = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("invalid lambda `{s}`")))
        };
        match s.strip_prefix("rel:") {
            Some(f) => Ok(LambdaPolicy::Relative(parse(f)?)),
            None => Ok(LambdaPolicy::Fixed(parse(s)?)),
        }
    }
}

impl fmt::Display for LambdaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaPolicy::Fixed(l) => write!(f, "{l}"),
            LambdaPolicy::Relative(r) => write!(f, "rel:{r}"),
        }
    }
}

/// Majorization constant θ_K of the linearized α step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaPolicy {
    /// `(1 + 1e-3)·λ_max(g·DᵀD + σI)`, the tightest valid majorizer.
    #[default]
    Spectral,
    /// `(1 + 1e-3)·‖DᵀD + σI‖²_F`.
    FrobeniusSquared,
    Fixed(f64),
}

impl FromStr for ThetaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "spectral" => Ok(ThetaPolicy::Spectral),
            "frobenius-squared" | "frobenius_squared" => Ok(ThetaPolicy::FrobeniusSquared),
            other => other
                .parse::<f64>()
                .map(ThetaPolicy::Fixed)
                .map_err(|_| Error::Parse(format!("unknown theta policy `{other}`"))),
        }
    }
}

impl fmt::Display for ThetaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaPolicy::Spectral => f.write_str("spectral"),
            ThetaPolicy::FrobeniusSquared => f.write_str("frobenius-squared"),
            ThetaPolicy::Fixed(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverParams {
    pub lambda: LambdaPolicy,
    pub sigma: f64,
    pub rho: f64,
    pub theta: ThetaPolicy,
    pub max_iters: usize,
    pub tol: f64,
    pub gradient_factor: GradientFactor,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            lambda: LambdaPolicy::default(),
            sigma: 1.0,
            rho: 1.0,
            theta: ThetaPolicy::default(),
            max_iters: 2000,
            tol: 1e-8,
            gradient_factor: GradientFactor::Two,
        }
    }
}

impl SolverParams {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = LambdaPolicy::Fixed(lambda);
        self
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match self.lambda {
            LambdaPolicy::Fixed(l) if !(l >= 0.0 && l.is_finite()) => {
                v.push(format!("lambda must be finite and >= 0, got {l}"))
            }
            LambdaPolicy::Relative(r) if !(r >= 0.0 && r.is_finite()) => {
                v.push(format!("relative lambda must be finite and >= 0, got {r}"))
            }
            _ => {}
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            v.push(format!("sigma must be > 0, got {}", self.sigma));
        }
        if !(self.rho > 0.0 && self.rho < 2.0) {
            v.push(format!("rho must lie in (0,2), got {}", self.rho));
        }
        if let ThetaPolicy::Fixed(t) = self.theta {
            if !(t > 0.0 && t.is_finite()) {
                v.push(format!("theta must be > 0, got {t}"));
            }
        }
        if self.max_iters == 0 {
            v.push("solver max_iters must be positive".into());
        }
        if !(self.tol > 0.0) {
            v.push(format!("solver tol must be > 0, got {}", self.tol));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(v.join("; ")))
        }
    }
}

/// θ_K for a dictionary under `policy`.
pub fn theta_k(dict: &DMatrix<f64>, sigma: f64, g: GradientFactor, policy: ThetaPolicy) -> f64 {
    let gram = dict.transpose() * dict;
    let k = gram.nrows();
    match policy {
        ThetaPolicy::Spectral => {
            let hess = gram * g.value() + DMatrix::identity(k, k) * sigma;
            (1.0 + 1e-3) * sym_max_eigenvalue(&hess)
        }
        ThetaPolicy::FrobeniusSquared => {
            let kmat = gram + DMatrix::identity(k, k) * sigma;
            (1.0 + 1e-3) * kmat.norm_squared()
        }
        ThetaPolicy::Fixed(t) => t,
    }
}

/// Elementwise soft threshold `S_ε`.
pub fn soft_threshold(x: &DVector<f64>, eps: f64) -> DVector<f64> {
    x.map(|v| soft_threshold_scalar(v, eps))
}

pub fn soft_threshold_scalar(x: f64, eps: f64) -> f64 {
    if x > eps {
        x - eps
    } else if x < -eps {
        x + eps
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualRecord {
    /// ‖α − b‖₂
    pub primal: f64,
    pub kkt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseSolveState {
    pub alpha: DVector<f64>,
    pub b: DVector<f64>,
    pub eta: DVector<f64>,
    pub alpha_tilde: DVector<f64>,
    pub b_tilde: DVector<f64>,
    pub eta_tilde: DVector<f64>,
    pub iter: usize,
    pub residuals: Vec<ResidualRecord>,
    pub lambda: f64,
    /// θ_K used (GsADMM only; 0 for ADMM).
    pub theta_k: f64,
    /// False when `max_iters` ran out before the tolerance was met.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// The sparse iterate `b` at exit.
    pub alpha: DVector<f64>,
    pub state: SparseSolveState,
}

/// Distance of `(α, b, η)` from the KKT system of the splitting.
///
/// `eta` is the multiplier as carried by the iterations, i.e. the sign that
/// appears in `L_σ` above. At a solution `η = −∇f(α)` and `η ∈ λ·∂‖b‖₁`.
/// Returns the max of the stationarity residual `‖η + g·Dᵀ(Dα − h)‖∞`, the
/// per-coordinate distance of `η` from `λ·∂|b_i|`, and `‖α − b‖∞`.
pub fn kkt_residual(
    alpha: &DVector<f64>,
    b: &DVector<f64>,
    eta: &DVector<f64>,
    target: &DVector<f64>,
    dict: &DMatrix<f64>,
    lambda: f64,
    g: GradientFactor,
) -> f64 {
    let grad = dict.transpose() * (dict * alpha - target) * g.value();
    let stationarity = inf_norm(&(eta + grad));
    let subgrad = b
        .iter()
        .zip(eta.iter())
        .map(|(&bi, &ei)| {
            if bi == 0.0 {
                (ei.abs() - lambda).max(0.0)
            } else {
                (ei - lambda * bi.signum()).abs()
            }
        })
        .fold(0.0, f64::max);
    let feasibility = inf_norm(&(alpha - b));
    stationarity.max(subgrad).max(feasibility)
}

fn check_problem(target: &DVector<f64>, dict: &DMatrix<f64>, params: &SolverParams) -> Result<()> {
    params.validate()?;
    if dict.nrows() != target.len() {
        return Err(Error::Dimension(format!(
            "dictionary has {} rows, target has {}",
            dict.nrows(),
            target.len()
        )));
    }
    if dict.ncols() == 0 {
        return Err(Error::Dimension("empty dictionary".into()));
    }
    if dict.iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("all-zero dictionary".into()));
    }
    if dict.iter().chain(target.iter()).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite solver input".into()));
    }
    Ok(())
}

fn non_finite(iter: usize) -> Error {
    Error::Solver(format!(
        "non-finite iterate at iteration {iter}; theta_K is too small for this dictionary"
    ))
}

/// Generalized semi-proximal ADMM with relaxation.
///
/// Iteration `k`, starting from `(α̃, b̃, η̃) = 0`:
///
/// ```text
/// Z  = g·Dᵀ(Dα̃ − h) + σ(α̃ − b̃) + η̃
/// α  = α̃ − Z/θ_K
/// η  = η̃ + σ(α − b̃)
/// b  = S_{λ/σ}(α + η/σ)
/// w̃ ← w̃ + ρ(w − w̃)          for w = (α, b, η)
/// ```
///
/// Stops when `max(‖α − b‖₂, ‖α_k − α_{k−1}‖₂) < tol`.
pub fn gsadmm_solve(
    target: &DVector<f64>,
    dict: &DMatrix<f64>,
    params: &SolverParams,
) -> Result<Solution> {
    check_problem(target, dict, params)?;
    let k = dict.ncols();
    let g = params.gradient_factor;
    let gv = g.value();
    let lambda = params.lambda.resolve(dict, target);
    let theta = theta_k(dict, params.sigma, g, params.theta);
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Solver(format!("invalid theta_K {theta}")));
    }
    let gram = dict.transpose() * dict;
    let corr = dict.transpose() * target;
    let (sigma, rho) = (params.sigma, params.rho);

    let mut at = DVector::zeros(k);
    let mut bt = DVector::zeros(k);
    let mut et = DVector::zeros(k);
    let mut prev_alpha = DVector::zeros(k);
    let (mut alpha, mut b, mut eta) = (at.clone(), bt.clone(), et.clone());
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iter = 0;
    while iter < params.max_iters {
        iter += 1;
        let z = (&gram * &at - &corr) * gv + (&at - &bt) * sigma + &et;
        alpha = &at - z / theta;
        eta = &et + (&alpha - &bt) * sigma;
        b = soft_threshold(&(&alpha + &eta / sigma), lambda / sigma);
        if alpha.iter().chain(eta.iter()).any(|x| !x.is_finite()) {
            return Err(non_finite(iter));
        }
        at += (&alpha - &at) * rho;
        bt += (&b - &bt) * rho;
        et += (&eta - &et) * rho;

        let primal = (&alpha - &b).norm();
        let kkt = kkt_residual(&alpha, &b, &eta, target, dict, lambda, g);
        residuals.push(ResidualRecord { primal, kkt });
        let change = (&alpha - &prev_alpha).norm();
        prev_alpha.copy_from(&alpha);
        if primal.max(change) < params.tol {
            converged = true;
            break;
        }
    }
    Ok(Solution {
        alpha: b.clone(),
        state: SparseSolveState {
            alpha,
            b,
            eta,
            alpha_tilde: at,
            b_tilde: bt,
            eta_tilde: et,
            iter,
            residuals,
            lambda,
            theta_k: theta,
            converged,
        },
    })
}

/// Classic scaled-free two-block ADMM with an exact α step
/// `(g·DᵀD + σI)α = g·Dᵀh + σb − η`.
pub fn admm_solve(
    target: &DVector<f64>,
    dict: &DMatrix<f64>,
    params: &SolverParams,
) -> Result<Solution> {
    check_problem(target, dict, params)?;
    let k = dict.ncols();
    let g = params.gradient_factor;
    let gv = g.value();
    let lambda = params.lambda.resolve(dict, target);
    let sigma = params.sigma;
    let system = dict.transpose() * dict * gv + DMatrix::identity(k, k) * sigma;
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::Solver("singular ADMM system; sigma must be > 0".into()))?;
    let rhs0 = dict.transpose() * target * gv;

    let mut alpha = DVector::zeros(k);
    let mut b = DVector::zeros(k);
    let mut eta = DVector::zeros(k);
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iter = 0;
    while iter < params.max_iters {
        iter += 1;
        let prev_alpha = alpha.clone();
        alpha = chol.solve(&(&rhs0 + &b * sigma - &eta));
        b = soft_threshold(&(&alpha + &eta / sigma), lambda / sigma);
        eta += (&alpha - &b) * sigma;
        if alpha.iter().chain(eta.iter()).any(|x| !x.is_finite()) {
            return Err(non_finite(iter));
        }
        let primal = (&alpha - &b).norm();
        let kkt = kkt_residual(&alpha, &b, &eta, target, dict, lambda, g);
        residuals.push(ResidualRecord { primal, kkt });
        if primal.max((&alpha - &prev_alpha).norm()) < params.tol {
            converged = true;
            break;
        }
    }
    Ok(Solution {
        alpha: b.clone(),
        state: SparseSolveState {
            alpha_tilde: alpha.clone(),
            b_tilde: b.clone(),
            eta_tilde: eta.clone(),
            alpha,
            b,
            eta,
            iter,
            residuals,
            lambda,
            theta_k: 0.0,
            converged,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    GsAdmm,
    Admm,
}

impl SolverKind {
    pub fn solve(
        self,
        target: &DVector<f64>,
        dict: &DMatrix<f64>,
        params: &SolverParams,
    ) -> Result<Solution> {
        match self {
            SolverKind::GsAdmm => gsadmm_solve(target, dict, params),
            SolverKind::Admm => admm_solve(target, dict, params),
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gsadmm" => Ok(SolverKind::GsAdmm),
            "admm" => Ok(SolverKind::Admm),
            other => Err(Error::Parse(format!("unknown solver `{other}`"))),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::GsAdmm => "gsadmm",
            SolverKind::Admm => "admm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchInstance {
    pub target: DVector<f64>,
    pub dict: DMatrix<f64>,
}

impl BenchInstance {
    /// Standard normal dictionary (`rows × cols`) and target.
    pub fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let dict = DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
        let target = DVector::from_fn(rows, |_, _| rng.sample(StandardNormal));
        Self { target, dict }
    }
}

/// One (instance, solver configuration) run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance: usize,
    pub solver: SolverKind,
    pub rho: f64,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
    pub initial_kkt: f64,
    pub final_primal: f64,
    pub final_kkt: f64,
    pub wall_ms: f64,
    #[serde(skip)]
    pub residuals: Vec<ResidualRecord>,
}

/// Runs every configuration on every instance.
pub fn convergence_report(
    instances: &[BenchInstance],
    runs: &[(SolverKind, SolverParams)],
) -> Result<Vec<BenchRow>> {
    if instances.is_empty() {
        return Err(Error::InvalidArgument("no benchmark instances".into()));
    }
    let mut rows = Vec::with_capacity(instances.len() * runs.len());
    for (i, inst) in instances.iter().enumerate() {
        for (kind, params) in runs {
            let start = Instant::now();
            let sol = kind.solve(&inst.target, &inst.dict, params)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let res = &sol.state.residuals;
            let last = res.last().copied().unwrap_or(ResidualRecord {
                primal: 0.0,
                kkt: 0.0,
            });
            rows.push(BenchRow {
                instance: i,
                solver: *kind,
                rho: params.rho,
                sigma: params.sigma,
                iterations: sol.state.iter,
                converged: sol.state.converged,
                initial_kkt: res.first().map_or(0.0, |r| r.kkt),
                final_primal: last.primal,
                final_kkt: last.kkt,
                wall_ms,
                residuals: res.clone(),
            });
        }
    }
    Ok(rows)
}

/// `instance,solver,rho,sigma,iterations,converged,initial_kkt,final_primal,final_kkt,wall_ms`
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "instance,solver,rho,sigma,iterations,converged,initial_kkt,final_primal,final_kkt,wall_ms\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.instance,
            r.solver,
            r.rho,
            r.sigma,
            r.iterations,
            r.converged,
            r.initial_kkt,
            r.final_primal,
            r.final_kkt,
            r.wall_ms
        ));
    }
    out
}

/// Per-iteration residuals: `instance,solver,rho,iteration,primal,kkt`.
pub fn trace_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("instance,solver,rho,iteration,primal,kkt\n");
    for r in rows {
        for (it, res) in r.residuals.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.instance,
                r.solver,
                r.rho,
                it + 1,
                res.primal,
                res.kkt
            ));
        }
    }
    out
}
