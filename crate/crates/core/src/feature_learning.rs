//! Layer-wise pre-trained multi-layer sparse NMF.
//!
//! Each layer solves
//!
//! ```text
//! min ½‖V − W·H‖²_F + λ·Σ|H|   s.t. W ≥ 0, H ≥ 0
//! ```
//!
//! by alternating a multiplicative H update with a projected gradient W step.
//! Layer `l` factorizes the coefficient matrix of layer `l − 1`; layer 1
//! factorizes the column concatenation `[train, test]` of the (unlabeled)
//! samples, so every layer's H keeps the train block first and the test
//! block after it.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::column_correlation;
use crate::seed;

/// Floor applied to the denominator of the multiplicative H update.
pub const DIVISION_FLOOR: f64 = 1e-12;
/// Maximum number of step halvings in one W update.
pub const MAX_HALVINGS: usize = 20;

/// `½‖v − w·h‖²_F + λ·Σ|h|`.
pub fn snmf_objective(v: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>, lambda: f64) -> f64 {
    0.5 * (v - w * h).norm_squared() + lambda * h.iter().map(|x| x.abs()).sum::<f64>()
}

fn check_shapes(v: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<()> {
    if w.nrows() != v.nrows() || h.ncols() != v.ncols() || w.ncols() != h.nrows() {
        return Err(Error::Dimension(format!(
            "v is {:?}, w is {:?}, h is {:?}",
            v.shape(),
            w.shape(),
            h.shape()
        )));
    }
    Ok(())
}

/// Multiplicative sparse update `h ⊙ (wᵀv) ⊘ (wᵀw·h + λ)`, projected onto
/// the nonnegative orthant.
pub fn snmf_update_h(
    v: &DMatrix<f64>,
    w: &DMatrix<f64>,
    h: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    check_shapes(v, w, h)?;
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda {lambda} < 0")));
    }
    let wt = w.transpose();
    let num = &wt * v;
    let den = (&wt * w) * h;
    Ok(DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| {
        let x = h[(i, j)] * num[(i, j)] / (den[(i, j)] + lambda).max(DIVISION_FLOOR);
        x.max(0.0)
    }))
}

#[derive(Debug, Clone)]
pub struct WStep {
    pub w: DMatrix<f64>,
    /// Step length that was accepted.
    pub step: f64,
    pub halvings: usize,
}

/// Projected gradient step `max(0, w − μ·(w·h − v)·hᵀ)`, halving `μ` until
/// the reconstruction error does not increase.
pub fn snmf_update_w(
    v: &DMatrix<f64>,
    w: &DMatrix<f64>,
    h: &DMatrix<f64>,
    step: f64,
) -> Result<WStep> {
    check_shapes(v, w, h)?;
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step {step} must be positive")));
    }
    let base = 0.5 * (v - w * h).norm_squared();
    let grad = (w * h - v) * h.transpose();
    let mut mu = step;
    for halvings in 0..=MAX_HALVINGS {
        let cand = (w - &grad * mu).map(|x| x.max(0.0));
        if 0.5 * (v - &cand * h).norm_squared() <= base {
            return Ok(WStep {
                w: cand,
                step: mu,
                halvings,
            });
        }
        mu /= 2.0;
    }
    Err(Error::Solver(format!(
        "W step backtracking exhausted after {MAX_HALVINGS} halvings from step {step}; \
         the data scale is too large for this step"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerConfig {
    pub rank: usize,
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub initial_step: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnmfLayer {
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub lambda: f64,
    /// Last accepted W step length.
    pub step: f64,
    /// Objective at initialization followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Factorizes one nonnegative matrix from a seeded uniform (0,1] start.
pub fn factorize_layer(v: &DMatrix<f64>, cfg: &LayerConfig) -> Result<SnmfLayer> {
    let (rows, cols) = v.shape();
    if cfg.rank == 0 || cfg.rank >= rows.min(cols) {
        return Err(Error::InvalidArgument(format!(
            "rank {} must lie in [1, {}) for a {rows}x{cols} input",
            cfg.rank,
            rows.min(cols)
        )));
    }
    if v.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidArgument("NMF input must be finite and nonnegative".into()));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("all-zero NMF input".into()));
    }
    if cfg.lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda {} < 0", cfg.lambda)));
    }

    let mut rng = seed::rng(cfg.seed);
    let mut w = DMatrix::from_fn(rows, cfg.rank, |_, _| 1.0 - rng.random::<f64>());
    let mut h = DMatrix::from_fn(cfg.rank, cols, |_, _| 1.0 - rng.random::<f64>());

    let mut obj = snmf_objective(v, &w, &h, cfg.lambda);
    let mut trace = vec![obj];
    let mut step = cfg.initial_step;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let h_new = snmf_update_h(v, &w, &h, cfg.lambda)?;
        let h_obj = snmf_objective(v, &w, &h_new, cfg.lambda);
        // The multiplicative rule is monotone in exact arithmetic; a rounding
        // increase is rejected so the trace never goes up.
        if h_obj <= obj {
            h = h_new;
        }
        // ‖H‖_F² bounds the Lipschitz constant ‖HHᵀ‖₂ of the W gradient, so
        // large-scale inputs start from a step that already descends.
        let lipschitz = h.norm_squared();
        let start = if lipschitz > 0.0 { cfg.initial_step.min(1.0 / lipschitz) } else { cfg.initial_step };
        let ws = snmf_update_w(v, &w, &h, start)?;
        w = ws.w;
        step = ws.step;
        let new_obj = snmf_objective(v, &w, &h, cfg.lambda);
        let rel = (obj - new_obj) / obj.max(f64::MIN_POSITIVE);
        obj = new_obj;
        trace.push(obj);
        if rel < cfg.tol || obj == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(SnmfLayer {
        w,
        h,
        lambda: cfg.lambda,
        step,
        objective_trace: trace,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureConfig {
    pub ranks: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub max_iters: usize,
    pub tol: f64,
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            ranks: vec![8, 6],
            lambdas: vec![0.2, 0.5],
            max_iters: 500,
            tol: 1e-6,
            initial_step: 1e-2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorStack {
    pub layers: Vec<SnmfLayer>,
    pub ranks: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub seed: u64,
    /// Number of leading (training) columns in every H.
    pub train_cols: usize,
}

impl FactorStack {
    /// H of the deepest layer.
    pub fn output(&self) -> &DMatrix<f64> {
        &self.layers.last().expect("stack has at least one layer").h
    }

    pub fn train_block(&self, layer: usize) -> DMatrix<f64> {
        let h = &self.layers[layer].h;
        h.columns(0, self.train_cols).into_owned()
    }

    pub fn test_block(&self, layer: usize) -> DMatrix<f64> {
        let h = &self.layers[layer].h;
        h.columns(self.train_cols, h.ncols() - self.train_cols).into_owned()
    }
}

/// Fits the layer-wise stack on `[train, test]` (genes × samples each).
///
/// Layer `l` uses seed `derive(cfg.seed, "snmf_layer", l)`.
pub fn lpml_snmf_fit(
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
    cfg: &FeatureConfig,
) -> Result<FactorStack> {
    if train.nrows() != test.nrows() && test.ncols() > 0 {
        return Err(Error::Dimension(format!(
            "train has {} rows, test has {}",
            train.nrows(),
            test.nrows()
        )));
    }
    if cfg.ranks.is_empty() || cfg.ranks.len() != cfg.lambdas.len() {
        return Err(Error::InvalidArgument(
            "ranks and lambdas must be nonempty and of equal length".into(),
        ));
    }
    let (s, k) = (train.ncols(), test.ncols());
    let mut v = DMatrix::zeros(train.nrows(), s + k);
    v.columns_mut(0, s).copy_from(train);
    if k > 0 {
        v.columns_mut(s, k).copy_from(test);
    }

    let mut layers: Vec<SnmfLayer> = Vec::with_capacity(cfg.ranks.len());
    for (l, (&rank, &lambda)) in cfg.ranks.iter().zip(&cfg.lambdas).enumerate() {
        let input = layers.last().map_or(&v, |prev| &prev.h);
        let layer = factorize_layer(
            input,
            &LayerConfig {
                rank,
                lambda,
                max_iters: cfg.max_iters,
                tol: cfg.tol,
                initial_step: cfg.initial_step,
                seed: seed::derive(cfg.seed, "snmf_layer", l as u64),
            },
        )?;
        layers.push(layer);
    }
    Ok(FactorStack {
        layers,
        ranks: cfg.ranks.clone(),
        lambdas: cfg.lambdas.clone(),
        seed: cfg.seed,
        train_cols: s,
    })
}

/// Box-plot summary of one feature within one class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuartileRow {
    pub layer: usize,
    pub feature: usize,
    pub class: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorDiagnostics {
    /// Sample–sample correlations of V, H_1, …, H_L, named `V`, `H1`, ….
    pub correlations: Vec<(String, Vec<Vec<Option<f64>>>)>,
    pub quartiles: Vec<QuartileRow>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Correlation matrices and per-class feature quartiles for heatmaps and box
/// plots. `class_of` gives a class per column of `v`; it is only used to
/// group columns for the quartile table.
pub fn emit_factor_diagnostics(
    v: &DMatrix<f64>,
    stack: &FactorStack,
    class_of: &[usize],
) -> Result<FactorDiagnostics> {
    if class_of.len() != v.ncols() {
        return Err(Error::Dimension(format!(
            "{} class labels for {} columns",
            class_of.len(),
            v.ncols()
        )));
    }
    let mut correlations = vec![("V".to_owned(), column_correlation(v))];
    for (l, layer) in stack.layers.iter().enumerate() {
        correlations.push((format!("H{}", l + 1), column_correlation(&layer.h)));
    }
    let n_classes = class_of.iter().copied().max().map_or(0, |m| m + 1);
    let mut quartiles = Vec::new();
    for (l, layer) in stack.layers.iter().enumerate() {
        for f in 0..layer.h.nrows() {
            for c in 0..n_classes {
                let mut vals: Vec<f64> = (0..layer.h.ncols())
                    .filter(|&j| class_of[j] == c)
                    .map(|j| layer.h[(f, j)])
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                vals.sort_by(f64::total_cmp);
                quartiles.push(QuartileRow {
                    layer: l + 1,
                    feature: f,
                    class: c,
                    min: vals[0],
                    q1: quantile(&vals, 0.25),
                    median: quantile(&vals, 0.5),
                    q3: quantile(&vals, 0.75),
                    max: vals[vals.len() - 1],
                });
            }
        }
    }
    Ok(FactorDiagnostics {
        correlations,
        quartiles,
    })
}

/// Mean correlation over pairs of distinct columns sharing a class;
/// undefined entries are skipped.
pub fn mean_within_class_correlation(corr: &[Vec<Option<f64>>], class_of: &[usize]) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..corr.len() {
        for j in (i + 1)..corr.len() {
            if class_of[i] == class_of[j] {
                if let Some(c) = corr[i][j] {
                    sum += c;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

impl FactorDiagnostics {
    pub fn correlation_csv(matrix: &[Vec<Option<f64>>]) -> String {
        let mut out = String::new();
        for row in matrix {
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.map_or_else(|| "NA".to_owned(), |x| x.to_string()))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// `layer,feature,class,min,q1,median,q3,max`
    pub fn quartiles_csv(&self) -> String {
        let mut out = String::from("layer,feature,class,min,q1,median,q3,max\n");
        for q in &self.quartiles {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                q.layer, q.feature, q.class, q.min, q.q1, q.median, q.q3, q.max
            ));
        }
        out
    }
}

/// Long-format factor table for one layer:
/// `matrix,row,col,block,value` where `block` is `train`/`test` for H and
/// empty for W.
pub fn factors_csv(stack: &FactorStack, layer: usize) -> String {
    let l = &stack.layers[layer];
    let mut out = String::from("matrix,row,col,block,value\n");
    for i in 0..l.w.nrows() {
        for j in 0..l.w.ncols() {
            out.push_str(&format!("W,{i},{j},,{}\n", l.w[(i, j)]));
        }
    }
    for i in 0..l.h.nrows() {
        for j in 0..l.h.ncols() {
            let block = if j < stack.train_cols { "train" } else { "test" };
            out.push_str(&format!("H,{i},{j},{block},{}\n", l.h[(i, j)]));
        }
    }
    out
}

/// `layer,iteration,objective`
pub fn objective_trace_csv(stack: &FactorStack) -> String {
    let mut out = String::from("layer,iteration,objective\n");
    for (l, layer) in stack.layers.iter().enumerate() {
        for (it, obj) in layer.objective_trace.iter().enumerate() {
            out.push_str(&format!("{},{it},{obj}\n", l + 1));
        }
    }
    out
}

/// Per-gene transform that makes the NMF input nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NmfScaling {
    /// Shift negative genes to zero, then divide each gene by its maximum.
    #[default]
    UnitMax,
    /// Map each gene's range onto [0, 1].
    MinMax,
    /// Shift negative genes to zero only.
    None,
}

impl std::str::FromStr for NmfScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "unit-max" => Ok(NmfScaling::UnitMax),
            "min-max" => Ok(NmfScaling::MinMax),
            "none" => Ok(NmfScaling::None),
            other => Err(Error::Parse(format!("unknown nmf scaling `{other}`"))),
        }
    }
}

impl std::fmt::Display for NmfScaling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NmfScaling::UnitMax => "unit-max",
            NmfScaling::MinMax => "min-max",
            NmfScaling::None => "none",
        })
    }
}

/// Makes `[train, test]` a valid NMF input without looking at labels.
///
/// The per-gene transform is computed over both blocks together and applied
/// to each. Constant genes map to zero under [`NmfScaling::MinMax`].
pub fn prepare_nonnegative(
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
    scaling: NmfScaling,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (mut a, mut b) = (train.clone(), test.clone());
    for g in 0..train.nrows() {
        let all: Vec<f64> = train.row(g).iter().chain(test.row(g).iter()).copied().collect();
        let min = all.iter().copied().fold(f64::INFINITY, f64::min);
        let shift = match scaling {
            NmfScaling::MinMax => -min,
            _ if min < 0.0 => -min,
            _ => 0.0,
        };
        let max = all.iter().copied().fold(f64::NEG_INFINITY, f64::max) + shift;
        let scale = match scaling {
            NmfScaling::UnitMax | NmfScaling::MinMax if max > 0.0 => max,
            _ => 1.0,
        };
        a.row_mut(g).iter_mut().for_each(|v| *v = (*v + shift) / scale);
        b.row_mut(g).iter_mut().for_each(|v| *v = (*v + shift) / scale);
    }
    (a, b)
}
