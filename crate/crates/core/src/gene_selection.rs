//! Gene scoring and selection.
//!
//! Genes are pre-selected by the BW ratio and the survivors are ranked by
//! DIF: the largest net benefit a gene's decision curve reaches on the
//! threshold interval `[p, p1]`, where `p` is the prevalence and `p1` the
//! last threshold at which the gene's curve falls below the treat-none line.
//! Each gene's "risk of illness" comes from a univariate logistic model.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Coefficient cap (in standardized units) for separable data.
pub const LOGISTIC_CAP: f64 = 30.0;
const LOGISTIC_MAX_ITERS: usize = 50;
const LOGISTIC_GRAD_TOL: f64 = 1e-8;

fn check_len(expr: &[f64], n: usize) -> Result<()> {
    if expr.is_empty() {
        return Err(Error::InvalidArgument("empty expression vector".into()));
    }
    if expr.len() != n {
        return Err(Error::Dimension(format!(
            "{} expression values for {n} labels",
            expr.len()
        )));
    }
    Ok(())
}

fn split_binary(expr: &[f64], positive: &[bool]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(expr, positive.len())?;
    let (pos, neg): (Vec<_>, Vec<_>) = expr.iter().zip(positive).partition(|(_, &p)| p);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Degenerate("single-class labels".into()));
    }
    Ok((
        pos.into_iter().map(|(&x, _)| x).collect(),
        neg.into_iter().map(|(&x, _)| x).collect(),
    ))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Between-groups over within-groups sum of squares.
///
/// Returns `+∞` when the within-group sum is zero but the between-group sum
/// is not, and `0` when both vanish.
pub fn bw_score(expr: &[f64], labels: &[usize]) -> Result<f64> {
    check_len(expr, labels.len())?;
    let c = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut sums = vec![0.0; c];
    let mut counts = vec![0usize; c];
    for (&x, &l) in expr.iter().zip(labels) {
        sums[l] += x;
        counts[l] += 1;
    }
    if counts.iter().filter(|&&k| k > 0).count() < 2 {
        return Err(Error::Degenerate("BW needs at least two classes".into()));
    }
    let grand = mean(expr);
    let class_mean: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &k)| if k > 0 { s / k as f64 } else { 0.0 })
        .collect();
    let (mut between, mut within) = (0.0, 0.0);
    for (&x, &l) in expr.iter().zip(labels) {
        between += (class_mean[l] - grand).powi(2);
        within += (x - class_mean[l]).powi(2);
    }
    Ok(if within > 0.0 {
        between / within
    } else if between > 0.0 {
        f64::INFINITY
    } else {
        0.0
    })
}

/// Signal-to-noise ratio `|μ₊ − μ₋| / (σ₊ + σ₋)` with sample deviations.
pub fn snr_score(expr: &[f64], positive: &[bool]) -> Result<f64> {
    let (pos, neg) = split_binary(expr, positive)?;
    let diff = (mean(&pos) - mean(&neg)).abs();
    let spread = sample_sd(&pos) + sample_sd(&neg);
    Ok(if spread > 0.0 {
        diff / spread
    } else if diff > 0.0 {
        f64::INFINITY
    } else {
        0.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Auc {
    /// Probability that a positive outranks a negative, ties counting ½.
    pub raw: f64,
    /// `max(raw, 1 − raw)`, used for ranking.
    pub folded: f64,
}

/// Mann–Whitney AUC with tie correction.
pub fn auc_score(expr: &[f64], positive: &[bool]) -> Result<Auc> {
    let (pos, neg) = split_binary(expr, positive)?;
    let raw = mann_whitney_auc(&pos, &neg);
    Ok(Auc {
        raw,
        folded: raw.max(1.0 - raw),
    })
}

/// Rank-sum AUC, `O(n log n)`.
pub(crate) fn mann_whitney_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&x| (x, true))
        .chain(neg.iter().map(|&x| (x, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // Average 1-based rank of the tie block.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * all[i..=j].iter().filter(|e| e.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    (rank_sum - np * (np + 1.0) / 2.0) / (np * nn)
}

/// Univariate logistic model mapping an expression value to a risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskModel {
    pub intercept: f64,
    pub slope: f64,
    pub gene_index: usize,
    /// The standardized coefficients hit [`LOGISTIC_CAP`] (separable data).
    pub capped: bool,
}

impl RiskModel {
    pub fn risk(&self, x: f64) -> f64 {
        sigmoid(self.intercept + self.slope * x)
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn log_likelihood(z: &[f64], y: &[f64], b0: f64, b1: f64) -> f64 {
    z.iter()
        .zip(y)
        .map(|(&zi, &yi)| {
            let t = b0 + b1 * zi;
            // log σ(t) = −softplus(−t), log(1 − σ(t)) = −softplus(t)
            yi * -softplus(-t) + (1.0 - yi) * -softplus(t)
        })
        .sum()
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Fits `risk = σ(a + b·x)` by Newton/IRLS on the standardized predictor.
///
/// At most 50 iterations with gradient-norm tolerance 1e-8. When the data
/// are separable the standardized coefficients are scaled back onto the
/// magnitude-30 cap and the model is flagged `capped`.
pub fn fit_risk_model(expr: &[f64], positive: &[bool], gene_index: usize) -> Result<RiskModel> {
    split_binary(expr, positive)?;
    let n = expr.len() as f64;
    let y: Vec<f64> = positive.iter().map(|&p| f64::from(u8::from(p))).collect();
    let prevalence = y.iter().sum::<f64>() / n;
    let m = mean(expr);
    let sd = (expr.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return Ok(RiskModel {
            intercept: (prevalence / (1.0 - prevalence)).ln(),
            slope: 0.0,
            gene_index,
            capped: false,
        });
    }
    let z: Vec<f64> = expr.iter().map(|x| (x - m) / sd).collect();

    let (mut b0, mut b1) = ((prevalence / (1.0 - prevalence)).ln(), 0.0);
    let mut capped = false;
    let mut ll = log_likelihood(&z, &y, b0, b1);
    for _ in 0..LOGISTIC_MAX_ITERS {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&zi, &yi) in z.iter().zip(&y) {
            let p = sigmoid(b0 + b1 * zi);
            let w = p * (1.0 - p);
            g0 += yi - p;
            g1 += (yi - p) * zi;
            h00 += w;
            h01 += w * zi;
            h11 += w * zi * zi;
        }
        if g0.hypot(g1) < LOGISTIC_GRAD_TOL {
            break;
        }
        let det = h00 * h11 - h01 * h01;
        let (d0, d1) = if det > 1e-300 && det.is_finite() {
            ((h11 * g0 - h01 * g1) / det, (h00 * g1 - h01 * g0) / det)
        } else {
            // Vanishing curvature: the likelihood keeps rising along the
            // gradient, which only happens for separated classes.
            (g0 * 1e3, g1 * 1e3)
        };
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (c0, c1) = (b0 + step * d0, b1 + step * d1);
            let cl = log_likelihood(&z, &y, c0, c1);
            if cl >= ll {
                b0 = c0;
                b1 = c1;
                ll = cl;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        let big = b0.abs().max(b1.abs());
        if big > LOGISTIC_CAP {
            let s = LOGISTIC_CAP / big;
            b0 *= s;
            b1 *= s;
            capped = true;
            break;
        }
        if !accepted {
            break;
        }
    }
    Ok(RiskModel {
        intercept: b0 - b1 * m / sd,
        slope: b1 / sd,
        gene_index,
        capped,
    })
}

/// Net benefit `TP/n − (FP/n)·p_t/(1 − p_t)`.
pub fn net_benefit(tp: usize, fp: usize, n: usize, p_t: f64) -> Result<f64> {
    if !(p_t > 0.0 && p_t < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {p_t} outside (0,1)")));
    }
    if n == 0 || tp + fp > n {
        return Err(Error::InvalidArgument(format!(
            "invalid counts tp={tp}, fp={fp}, n={n}"
        )));
    }
    let n = n as f64;
    Ok(tp as f64 / n - (fp as f64 / n) * (p_t / (1.0 - p_t)))
}

/// Decision curve of one risk model (or one classifier's scores).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcaCurve {
    pub thresholds: Vec<f64>,
    pub nb_model: Vec<f64>,
    pub nb_treat_all: Vec<f64>,
    pub nb_treat_none: Vec<f64>,
    pub prevalence: f64,
    pub p1: f64,
}

/// Uniform threshold grid `step, 2·step, …` strictly inside (0,1).
///
/// When `1/step` is an integer `m` the points are computed as `i/m`, so grid
/// points coincide exactly with rationals such as a prevalence of 2/5.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 0.1) {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} outside (0, 0.1]"
        )));
    }
    let m = (1.0 / step).round();
    if ((m * step) - 1.0).abs() < 1e-9 {
        let m = m as usize;
        Ok((1..m).map(|i| i as f64 / m as f64).collect())
    } else {
        Ok((1..)
            .map(|i| i as f64 * step)
            .take_while(|t| *t <= 1.0 - step + 1e-12)
            .collect())
    }
}

/// Decision curve of a gene under `model`.
pub fn dca_curve(
    model: &RiskModel,
    expr: &[f64],
    positive: &[bool],
    grid_step: f64,
) -> Result<DcaCurve> {
    check_len(expr, positive.len())?;
    let risks: Vec<f64> = expr.iter().map(|&x| model.risk(x)).collect();
    dca_from_risks(&risks, positive, grid_step)
}

/// Decision curve for arbitrary risk scores in [0,1].
pub fn dca_from_risks(risks: &[f64], positive: &[bool], grid_step: f64) -> Result<DcaCurve> {
    check_len(risks, positive.len())?;
    let n = positive.len();
    let p_count = positive.iter().filter(|&&p| p).count();
    if p_count == 0 || p_count == n {
        return Err(Error::Degenerate("decision curve needs both classes".into()));
    }
    let thresholds = threshold_grid(grid_step)?;
    let prevalence = p_count as f64 / n as f64;
    let mut nb_model = Vec::with_capacity(thresholds.len());
    let mut nb_treat_all = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        let (mut tp, mut fp) = (0, 0);
        for (&r, &p) in risks.iter().zip(positive) {
            if r >= t {
                if p {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        nb_model.push(net_benefit(tp, fp, n, t)?);
        nb_treat_all.push(net_benefit(p_count, n - p_count, n, t)?);
    }

    // Largest grid threshold ≥ p where the model curve crosses from ≥ 0 to
    // < 0; the grid maximum when there is no such crossing.
    let last = thresholds.len() - 1;
    let p1 = (0..last)
        .rev()
        .find(|&i| thresholds[i] >= prevalence && nb_model[i] >= 0.0 && nb_model[i + 1] < 0.0)
        .map_or(thresholds[last], |i| thresholds[i]);

    Ok(DcaCurve {
        nb_treat_none: vec![0.0; thresholds.len()],
        thresholds,
        nb_model,
        nb_treat_all,
        prevalence,
        p1,
    })
}

/// Maximum model net benefit over thresholds in `[p, p1]`, clamped at 0.
pub fn dif_score(curve: &DcaCurve) -> f64 {
    curve
        .thresholds
        .iter()
        .zip(&curve.nb_model)
        .filter(|(&t, _)| t >= curve.prevalence && t <= curve.p1)
        .map(|(_, &nb)| nb)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneScore {
    pub gene_index: usize,
    pub gene_id: String,
    pub bw: f64,
    /// Binary tasks only.
    pub snr: Option<f64>,
    /// Raw (unfolded) AUC, binary tasks only.
    pub auc: Option<f64>,
    /// Present for BW-preselected genes.
    pub dif: Option<f64>,
    #[serde(skip)]
    pub dca: Option<DcaCurve>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionConfig {
    pub pre_count: usize,
    pub final_count: usize,
    pub grid_step: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            pre_count: 200,
            final_count: 10,
            grid_step: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneSelection {
    /// One record per gene, in gene order.
    pub scores: Vec<GeneScore>,
    /// BW top `pre_count`, BW-descending.
    pub preselected: Vec<usize>,
    /// DIF top `final_count`, DIF-descending (ties: BW, then gene index).
    pub selected: Vec<usize>,
}

impl GeneSelection {
    /// Score table CSV: `gene_id,bw,snr,auc,dif` (empty cells for absent scores).
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("gene_id,bw,snr,auc,dif\n");
        for s in &self.scores {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.gene_id,
                s.bw,
                fmt(s.snr),
                fmt(s.auc),
                fmt(s.dif)
            ));
        }
        out
    }
}

impl DcaCurve {
    /// `p_t,nb_model,nb_treat_all,nb_treat_none`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p_t,nb_model,nb_treat_all,nb_treat_none\n");
        for i in 0..self.thresholds.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.thresholds[i], self.nb_model[i], self.nb_treat_all[i], self.nb_treat_none[i]
            ));
        }
        out
    }
}

/// DIF of one gene; one-vs-rest maximum over classes when `n_classes > 2`.
fn gene_dif(
    expr: &[f64],
    labels: &[usize],
    n_classes: usize,
    positive_class: usize,
    gene_index: usize,
    grid_step: f64,
) -> Result<(f64, DcaCurve)> {
    let targets: Vec<usize> = if n_classes == 2 {
        vec![positive_class]
    } else {
        (0..n_classes).collect()
    };
    let mut best: Option<(f64, DcaCurve)> = None;
    for c in targets {
        let positive: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        if positive.iter().all(|&p| p) || !positive.iter().any(|&p| p) {
            continue;
        }
        let model = fit_risk_model(expr, &positive, gene_index)?;
        let curve = dca_curve(&model, expr, &positive, grid_step)?;
        let dif = dif_score(&curve);
        if best.as_ref().is_none_or(|(b, _)| dif > *b) {
            best = Some((dif, curve));
        }
    }
    best.ok_or_else(|| Error::Degenerate("DIF needs at least two classes".into()))
}

fn cmp_desc(a: f64, b: f64) -> std::cmp::Ordering {
    b.total_cmp(&a)
}

/// Scores every gene of `values` (genes × training samples) and selects the
/// information genes.
pub fn select_genes(
    values: &DMatrix<f64>,
    gene_ids: &[String],
    labels: &[usize],
    n_classes: usize,
    positive_class: usize,
    cfg: &SelectionConfig,
) -> Result<GeneSelection> {
    let d = values.nrows();
    if cfg.final_count == 0 {
        return Err(Error::InvalidArgument("final_count must be positive".into()));
    }
    if cfg.pre_count > d || cfg.final_count > cfg.pre_count {
        return Err(Error::InvalidArgument(format!(
            "need final_count ({}) <= pre_count ({}) <= genes ({d})",
            cfg.final_count, cfg.pre_count
        )));
    }
    if gene_ids.len() != d || labels.len() != values.ncols() {
        return Err(Error::Dimension("gene ids or labels do not match matrix".into()));
    }
    if n_classes < 2 || positive_class >= n_classes {
        return Err(Error::InvalidArgument(format!(
            "positive class {positive_class} invalid for {n_classes} classes"
        )));
    }
    let binary = n_classes == 2;
    let positive: Vec<bool> = labels.iter().map(|&l| l == positive_class).collect();
    let rows: Vec<Vec<f64>> = (0..d).map(|g| values.row(g).iter().copied().collect()).collect();

    let mut scores = rows
        .par_iter()
        .enumerate()
        .map(|(g, expr)| {
            let bw = bw_score(expr, labels)?;
            let (snr, auc) = if binary {
                (
                    Some(snr_score(expr, &positive)?),
                    Some(auc_score(expr, &positive)?.raw),
                )
            } else {
                (None, None)
            };
            Ok(GeneScore {
                gene_index: g,
                gene_id: gene_ids[g].clone(),
                bw,
                snr,
                auc,
                dif: None,
                dca: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut by_bw: Vec<usize> = (0..d).collect();
    by_bw.sort_by(|&a, &b| cmp_desc(scores[a].bw, scores[b].bw).then(a.cmp(&b)));
    let preselected: Vec<usize> = by_bw[..cfg.pre_count].to_vec();

    let difs = preselected
        .par_iter()
        .map(|&g| gene_dif(&rows[g], labels, n_classes, positive_class, g, cfg.grid_step))
        .collect::<Result<Vec<_>>>()?;
    for (&g, (dif, curve)) in preselected.iter().zip(difs) {
        scores[g].dif = Some(dif);
        scores[g].dca = Some(curve);
    }

    let mut ranked = preselected.clone();
    ranked.sort_by(|&a, &b| {
        cmp_desc(scores[a].dif.unwrap_or(0.0), scores[b].dif.unwrap_or(0.0))
            .then(cmp_desc(scores[a].bw, scores[b].bw))
            .then(a.cmp(&b))
    });
    ranked.truncate(cfg.final_count);

    Ok(GeneSelection {
        scores,
        preselected,
        selected: ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: usize = 0;
    const B: usize = 1;

    #[test]
    fn bw_examples() {
        assert_eq!(bw_score(&[0.0, 1.0, 2.0, 3.0], &[A, A, B, B]).unwrap(), 4.0);
        assert_eq!(bw_score(&[0.0, 0.0, 1.0, 1.0], &[A, A, B, B]).unwrap(), f64::INFINITY);
        assert_eq!(bw_score(&[5.0; 4], &[A, B, A, B]).unwrap(), 0.0);
        assert!(bw_score(&[1.0, 2.0], &[A, A]).is_err());
        assert!(bw_score(&[], &[]).is_err());
    }

    #[test]
    fn snr_examples() {
        let pos = [false, false, true, true];
        let s = snr_score(&[0.0, 1.0, 2.0, 3.0], &pos).unwrap();
        assert!((s - 2.0 / (2.0 * 0.5f64.sqrt())).abs() < 1e-12);
        assert_eq!(snr_score(&[0.0, 0.0, 2.0, 2.0], &pos).unwrap(), f64::INFINITY);
        assert_eq!(snr_score(&[1.0, 3.0, 1.0, 3.0], &[false, false, true, true]).unwrap(), 0.0);
        assert!(snr_score(&[1.0, 2.0], &[true, true]).is_err());
    }

    #[test]
    fn auc_examples() {
        let a = auc_score(&[1.0, 2.0, 3.0, 4.0], &[false, false, true, true]).unwrap();
        assert_eq!(a.raw, 1.0);
        let a = auc_score(&[4.0, 3.0, 2.0, 1.0], &[false, false, true, true]).unwrap();
        assert_eq!((a.raw, a.folded), (0.0, 1.0));
        let a = auc_score(&[1.0, 2.0, 2.0, 3.0], &[false, false, true, true]).unwrap();
        assert_eq!(a.raw, 0.875);
    }

    #[test]
    fn net_benefit_examples() {
        assert!((net_benefit(5, 2, 10, 0.5).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(net_benefit(4, 0, 10, 0.7).unwrap(), 0.4);
        assert_eq!(net_benefit(0, 0, 10, 0.3).unwrap(), 0.0);
        assert!(net_benefit(1, 1, 10, 1.0).is_err());
        assert!(net_benefit(1, 1, 10, 0.0).is_err());
    }

    #[test]
    fn symmetric_data_gives_flat_risk() {
        let expr = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let pos = [false, false, false, true, true, true];
        let m = fit_risk_model(&expr, &pos, 0).unwrap();
        assert!(m.slope.abs() < 1e-9);
        assert!((m.risk(2.0) - 0.5).abs() < 1e-9);
        assert!(!m.capped);
    }

    #[test]
    fn separable_data_is_capped_and_monotone() {
        let expr = [0.0, 1.0, 2.0, 3.0];
        let pos = [false, false, true, true];
        let m = fit_risk_model(&expr, &pos, 0).unwrap();
        assert!(m.capped);
        assert!(m.slope > 0.0);
        assert!(m.risk(0.0) < m.risk(1.0) && m.risk(1.0) < m.risk(2.0));
    }

    #[test]
    fn grid_is_exact_for_integral_steps() {
        let g = threshold_grid(0.005).unwrap();
        assert_eq!(g.len(), 199);
        assert_eq!(g[79], 0.4);
        assert_eq!(*g.last().unwrap(), 0.995);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(threshold_grid(0.2).is_err());
        assert!(threshold_grid(0.0).is_err());
        let odd = threshold_grid(0.03).unwrap();
        assert!(odd.iter().all(|&t| t > 0.0 && t < 1.0));
    }

    #[test]
    fn constant_risk_collapses_to_treat_all_then_none() {
        let pos = [true, true, false, false, false];
        let risks = [0.4; 5];
        let c = dca_from_risks(&risks, &pos, 0.005).unwrap();
        for i in 0..c.thresholds.len() {
            if c.thresholds[i] <= 0.4 {
                assert_eq!(c.nb_model[i], c.nb_treat_all[i]);
            } else {
                assert_eq!(c.nb_model[i], 0.0);
            }
        }
        assert!(c.nb_treat_none.iter().all(|&v| v == 0.0));
        assert!(dif_score(&c).abs() < 1e-12);
    }

    #[test]
    fn perfect_gene_reaches_prevalence() {
        let expr = [0.0, 0.1, 0.2, 5.0, 5.1];
        let pos = [false, false, false, true, true];
        let m = RiskModel {
            intercept: -50.0,
            slope: 20.0,
            gene_index: 0,
            capped: true,
        };
        let c = dca_curve(&m, &expr, &pos, 0.005).unwrap();
        assert_eq!(c.prevalence, 0.4);
        assert_eq!(c.p1, 0.995);
        assert_eq!(dif_score(&c), 0.4);
    }

    #[test]
    fn selection_defaults_pick_ten() {
        let d = 30;
        let n = 12;
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let values = DMatrix::from_fn(d, n, |g, s| {
            ((g * 7 + s * 13) % 11) as f64 + if labels[s] == 1 { g as f64 * 0.3 } else { 0.0 }
        });
        let ids: Vec<String> = (0..d).map(|g| format!("g{g}")).collect();
        let cfg = SelectionConfig {
            pre_count: 20,
            ..Default::default()
        };
        let sel = select_genes(&values, &ids, &labels, 2, 1, &cfg).unwrap();
        assert_eq!(sel.selected.len(), 10);
        let difs: Vec<f64> = sel.selected.iter().map(|&g| sel.scores[g].dif.unwrap()).collect();
        assert!(difs.windows(2).all(|w| w[0] >= w[1]));
        assert!(select_genes(&values, &ids, &labels, 2, 1, &SelectionConfig { final_count: 0, ..cfg }).is_err());
    }
}
