//! Metrics, curves and the cross-validation harness.

use std::sync::Mutex;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::classification::{integrated_isrc_classify, src_classify, ClassificationReport, IssrcConfig, Method};
use crate::dataset::{ExpressionDataset, FoldPlan, Partition};
use crate::error::{Error, Result};
use crate::gene_selection::{dca_from_risks, select_genes, DcaCurve, GeneSelection, SelectionConfig};
use crate::seed;
use crate::linalg::unit_columns;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }

    fn add(&mut self, o: &Confusion) {
        self.tp += o.tp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
        self.fp += o.fp;
    }
}

/// One-vs-rest metrics for a positive class. `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricBundle {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub missed_diagnosis: Option<f64>,
    pub misdiagnosis: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl MetricBundle {
    pub fn from_confusion(c: Confusion) -> Self {
        let sensitivity = ratio(c.tp, c.tp + c.fn_);
        let specificity = ratio(c.tn, c.tn + c.fp);
        Self {
            accuracy: ratio(c.tp + c.tn, c.total()).unwrap_or(0.0),
            sensitivity,
            specificity,
            missed_diagnosis: sensitivity.map(|s| 1.0 - s),
            misdiagnosis: specificity.map(|s| 1.0 - s),
            ppv: ratio(c.tp, c.tp + c.fp),
            npv: ratio(c.tn, c.tn + c.fn_),
            confusion: c,
        }
    }
}

pub fn confusion_metrics(predictions: &[usize], truths: &[usize], positive_class: usize) -> Result<MetricBundle> {
    if predictions.len() != truths.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("no predictions".into()));
    }
    let mut c = Confusion::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        match (t == positive_class, p == positive_class) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
        }
    }
    Ok(MetricBundle::from_confusion(c))
}

/// Fraction of exact label matches (multiclass accuracy).
pub fn accuracy(predictions: &[usize], truths: &[usize]) -> f64 {
    let hits = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    hits as f64 / truths.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0,0)` to `(1,1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    /// `fpr,tpr`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (x, y) in &self.points {
            out.push_str(&format!("{x},{y}\n"));
        }
        out
    }
}

/// ROC by sweeping a threshold down through the distinct scores; AUC by the
/// trapezoid rule, which counts tied positive/negative pairs as one half.
pub fn roc_auc(scores: &[f64], truths: &[bool]) -> Result<RocCurve> {
    if scores.len() != truths.len() {
        return Err(Error::Dimension("scores and truths differ in length".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score".into()));
    }
    let p = truths.iter().filter(|&&t| t).count();
    let n = truths.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::Degenerate("ROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if truths[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        auc += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    Ok(RocCurve {
        points,
        auc: auc / (p * n) as f64,
    })
}

/// Error-reduction rate `(er1 − er2)/er1 × 100`; `None` when `er1 = 0`.
pub fn err_score(er1: f64, er2: f64) -> Result<Option<f64>> {
    if !(0.0..=1.0).contains(&er1) || !(0.0..=1.0).contains(&er2) {
        return Err(Error::InvalidArgument(format!("error rates must lie in [0,1], got {er1}, {er2}")));
    }
    if er1 == 0.0 {
        return Ok(None);
    }
    Ok(Some((er1 - er2) / er1 * 100.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pca {
    /// Samples × components.
    pub coordinates: DMatrix<f64>,
    /// Variables × components, unit columns.
    pub loadings: DMatrix<f64>,
    /// Sample variance (n − 1 denominator) along each component.
    pub variances: Vec<f64>,
}

/// PCA of `data` (samples as rows) via the SVD of the centered matrix.
///
/// Each component's sign is fixed so that its largest-magnitude loading is
/// positive (first such index on exact ties).
pub fn pca_embed(data: &DMatrix<f64>, components: usize) -> Result<Pca> {
    let (n, p) = data.shape();
    if n < 2 {
        return Err(Error::InvalidArgument("PCA needs at least two samples".into()));
    }
    if components == 0 || components > n.min(p) {
        return Err(Error::InvalidArgument(format!(
            "components must lie in [1, {}], got {components}",
            n.min(p)
        )));
    }
    let mut centered = data.clone();
    for j in 0..p {
        let mean = data.column(j).mean();
        centered.column_mut(j).add_scalar_mut(-mean);
    }
    if centered.iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("constant matrix".into()));
    }
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut loadings = DMatrix::zeros(p, components);
    let mut variances = Vec::with_capacity(components);
    for (c, &idx) in order.iter().take(components).enumerate() {
        let mut v = v_t.row(idx).transpose();
        let lead = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        loadings.set_column(c, &v);
        let s = svd.singular_values[idx];
        variances.push(s * s / (n - 1) as f64);
    }
    Ok(Pca {
        coordinates: centered * &loadings,
        loadings,
        variances,
    })
}

/// Which part of a split run read a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    GeneSelection,
    Classification,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelAccess {
    pub fold: usize,
    pub phase: Phase,
    pub indices: Vec<usize>,
}

/// Records every label read made by [`run_split`].
#[derive(Debug, Default)]
pub struct LabelAccessLog {
    entries: Mutex<Vec<LabelAccess>>,
}

impl LabelAccessLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&self, fold: usize, phase: Phase, indices: &[usize]) {
        self.entries.lock().expect("label log poisoned").push(LabelAccess {
            fold,
            phase,
            indices: indices.to_vec(),
        });
    }

    /// All accesses, ordered by fold then phase.
    pub fn entries(&self) -> Vec<LabelAccess> {
        let mut e = self.entries.lock().expect("label log poisoned").clone();
        e.sort_by(|a, b| (a.fold, a.phase).cmp(&(b.fold, b.phase)));
        e
    }

    /// Accesses before the evaluation phase that touched a test sample of
    /// their fold.
    pub fn leaks(&self, plan: &FoldPlan) -> Vec<(usize, Phase, usize)> {
        let mut out = Vec::new();
        for e in self.entries() {
            if e.phase == Phase::Evaluation {
                continue;
            }
            let test = &plan.folds[e.fold].test;
            for &i in &e.indices {
                if test.binary_search(&i).is_ok() {
                    out.push((e.fold, e.phase, i));
                }
            }
        }
        out
    }
}

fn read_labels(ds: &ExpressionDataset, idx: &[usize], fold: usize, phase: Phase, log: Option<&LabelAccessLog>) -> Vec<usize> {
    if let Some(log) = log {
        log.record(fold, phase, idx);
    }
    idx.iter().map(|&i| ds.labels()[i]).collect()
}

/// Everything that defines one classification method end to end.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodConfig {
    pub method: Method,
    pub selection: SelectionConfig,
    pub skip_selection: bool,
    pub skip_features: bool,
    pub issrc: IssrcConfig,
    pub positive_class: usize,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            method: Method::IntegratedIssrc,
            selection: SelectionConfig::default(),
            skip_selection: false,
            skip_features: false,
            issrc: IssrcConfig::default(),
            positive_class: 1,
        }
    }
}

impl MethodConfig {
    /// Classification settings with feature learning removed where the
    /// method or the skip flag says so.
    pub fn effective_issrc(&self) -> IssrcConfig {
        let mut c = self.issrc.clone();
        if self.method != Method::IntegratedIssrc || self.skip_features {
            c.features = None;
        }
        c
    }

    pub fn with_method(&self, method: Method) -> Self {
        Self { method, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitOutcome {
    pub fold: usize,
    /// Sample positions of the test side, ascending.
    pub test: Vec<usize>,
    pub truths: Vec<usize>,
    pub predictions: Vec<usize>,
    /// Positive-class share of the class scores, per test sample.
    pub positive_scores: Vec<f64>,
    pub metrics: MetricBundle,
    pub accuracy: f64,
    pub selected_genes: Vec<String>,
    pub ties: usize,
    pub fallback: usize,
    pub unconverged_solves: usize,
    #[serde(skip)]
    pub selection: Option<GeneSelection>,
    #[serde(skip)]
    pub report: ClassificationReport,
}

/// Positive-class share `C_pos / Σ_j C_j` of each test column; 0.5 for
/// all-zero columns.
pub fn positive_shares(class_scores: &DMatrix<f64>, positive_class: usize) -> Vec<f64> {
    (0..class_scores.ncols())
        .map(|l| {
            let total = class_scores.column(l).sum();
            if total > 0.0 {
                class_scores[(positive_class, l)] / total
            } else {
                0.5
            }
        })
        .collect()
}

/// Gene selection on the training side, then classification of the test side.
///
/// Labels are only read through the audit hook: training labels for gene
/// selection and classification, test labels for scoring.
pub fn run_split(
    ds: &ExpressionDataset,
    part: &Partition,
    cfg: &MethodConfig,
    fold: usize,
    log: Option<&LabelAccessLog>,
) -> Result<SplitOutcome> {
    if cfg.positive_class >= ds.n_classes() {
        return Err(Error::InvalidArgument(format!(
            "positive class {} out of range for {} classes",
            cfg.positive_class,
            ds.n_classes()
        )));
    }
    let train_x = ds.sample_columns(&part.train);
    let test_x = ds.sample_columns(&part.test);
    let (selection, genes) = if cfg.skip_selection {
        (None, (0..ds.n_genes()).collect::<Vec<_>>())
    } else {
        let y = read_labels(ds, &part.train, fold, Phase::GeneSelection, log);
        let sel = select_genes(&train_x, ds.gene_ids(), &y, ds.n_classes(), cfg.positive_class, &cfg.selection)?;
        let genes = sel.selected.clone();
        (Some(sel), genes)
    };
    let rows = |m: &DMatrix<f64>| m.select_rows(genes.iter());
    let (tr, te) = (rows(&train_x), rows(&test_x));
    let y = read_labels(ds, &part.train, fold, Phase::Classification, log);
    let report = match cfg.method {
        Method::Src if cfg.issrc.unit_norm => {
            src_classify(&unit_columns(&tr), &unit_columns(&te), &y, ds.n_classes(), &cfg.issrc.solver)?
        }
        Method::Src => src_classify(&tr, &te, &y, ds.n_classes(), &cfg.issrc.solver)?,
        Method::Issrc | Method::IntegratedIssrc => {
            integrated_isrc_classify(&tr, &te, &y, ds.n_classes(), &cfg.effective_issrc())?
        }
    };
    let truths = read_labels(ds, &part.test, fold, Phase::Evaluation, log);
    let metrics = confusion_metrics(&report.predictions, &truths, cfg.positive_class)?;
    Ok(SplitOutcome {
        fold,
        test: part.test.clone(),
        accuracy: accuracy(&report.predictions, &truths),
        positive_scores: positive_shares(&report.class_scores, cfg.positive_class),
        predictions: report.predictions.clone(),
        truths,
        metrics,
        selected_genes: genes.iter().map(|&g| ds.gene_ids()[g].clone()).collect(),
        ties: report.ties.len(),
        fallback: report.fallback.len(),
        unconverged_solves: report.unconverged_solves,
        selection,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    /// Number of folds where the metric was defined.
    pub n: usize,
}

impl Summary {
    fn of(values: impl Iterator<Item = Option<f64>>) -> Option<Self> {
        let v: Vec<f64> = values.flatten().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, sd, n: v.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldMeans {
    pub accuracy: Option<Summary>,
    pub sensitivity: Option<Summary>,
    pub specificity: Option<Summary>,
    pub ppv: Option<Summary>,
    pub npv: Option<Summary>,
}

/// A pooled per-sample prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledPrediction {
    pub sample: usize,
    pub fold: usize,
    pub truth: usize,
    pub predicted: usize,
    pub positive_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub method: Method,
    pub k_folds: usize,
    pub seed: u64,
    pub positive_class: usize,
    pub folds: Vec<SplitOutcome>,
    /// Folds skipped because a class was absent from their training side.
    pub flagged_folds: Vec<usize>,
    pub mean: FoldMeans,
    /// Accuracy over all pooled test predictions.
    pub pooled_accuracy: f64,
    pub pooled: MetricBundle,
    pub predictions: Vec<PooledPrediction>,
    /// Binary tasks only.
    pub roc: Option<RocCurve>,
    #[serde(skip)]
    pub dca: Option<DcaCurve>,
}

/// Pools fold outcomes. The result does not depend on the input order.
pub fn aggregate(
    mut folds: Vec<SplitOutcome>,
    method: Method,
    k_folds: usize,
    seed: u64,
    positive_class: usize,
    flagged_folds: Vec<usize>,
    dca_grid_step: f64,
) -> Result<CvReport> {
    folds.sort_by_key(|f| f.fold);
    let mut predictions: Vec<PooledPrediction> = folds
        .iter()
        .flat_map(|f| {
            (0..f.test.len()).map(move |j| PooledPrediction {
                sample: f.test[j],
                fold: f.fold,
                truth: f.truths[j],
                predicted: f.predictions[j],
                positive_score: f.positive_scores[j],
            })
        })
        .collect();
    predictions.sort_by_key(|p| p.sample);
    if predictions.is_empty() {
        return Err(Error::Degenerate("no fold produced predictions".into()));
    }
    let mut pooled_conf = Confusion::default();
    for f in &folds {
        pooled_conf.add(&f.metrics.confusion);
    }
    let preds: Vec<usize> = predictions.iter().map(|p| p.predicted).collect();
    let truths: Vec<usize> = predictions.iter().map(|p| p.truth).collect();
    let positive: Vec<bool> = truths.iter().map(|&t| t == positive_class).collect();
    let scores: Vec<f64> = predictions.iter().map(|p| p.positive_score).collect();
    let both = positive.iter().any(|&b| b) && positive.iter().any(|&b| !b);
    let roc = if both { Some(roc_auc(&scores, &positive)?) } else { None };
    let dca = if both {
        Some(dca_from_risks(&scores, &positive, dca_grid_step)?)
    } else {
        None
    };
    let mean = FoldMeans {
        accuracy: Summary::of(folds.iter().map(|f| Some(f.accuracy))),
        sensitivity: Summary::of(folds.iter().map(|f| f.metrics.sensitivity)),
        specificity: Summary::of(folds.iter().map(|f| f.metrics.specificity)),
        ppv: Summary::of(folds.iter().map(|f| f.metrics.ppv)),
        npv: Summary::of(folds.iter().map(|f| f.metrics.npv)),
    };
    Ok(CvReport {
        method,
        k_folds,
        seed,
        positive_class,
        pooled_accuracy: accuracy(&preds, &truths),
        pooled: MetricBundle::from_confusion(pooled_conf),
        folds,
        flagged_folds,
        mean,
        predictions,
        roc,
        dca,
    })
}

/// Runs every fold of `plan` (in parallel) and pools the outcomes.
pub fn cross_validate(
    ds: &ExpressionDataset,
    plan: &FoldPlan,
    cfg: &MethodConfig,
    log: Option<&LabelAccessLog>,
) -> Result<CvReport> {
    let mut flagged = Vec::new();
    let mut runnable = Vec::new();
    for (f, part) in plan.folds.iter().enumerate() {
        let mut present = vec![false; ds.n_classes()];
        for &i in &part.train {
            present[ds.labels()[i]] = true;
        }
        if present.iter().all(|&p| p) {
            runnable.push(f);
        } else {
            flagged.push(f);
        }
    }
    let folds = runnable
        .par_iter()
        .map(|&f| run_split(ds, &plan.folds[f], cfg, f, log))
        .collect::<Result<Vec<_>>>()?;
    aggregate(
        folds,
        cfg.method,
        plan.k_folds,
        plan.seed,
        cfg.positive_class,
        flagged,
        cfg.selection.grid_step,
    )
}

/// Test-side positive counts for a test set of 20: ratios 9, 4, …, 1/9, 0.
pub const IMBALANCE_POSITIVES: [usize; 10] = [18, 16, 14, 12, 10, 8, 6, 4, 2, 0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImbalanceRow {
    pub method: String,
    pub positives: usize,
    pub negatives: usize,
    /// positives / negatives; `None` when there are no negatives.
    pub ratio: Option<f64>,
    pub accuracy: f64,
    pub error_rate: f64,
    /// Against the best error rate of the same method over the sweep.
    pub err: Option<f64>,
}

/// Fixed-size test sets with a varying positive:negative mix; the remaining
/// samples train. Each method's ERR column uses that method's own lowest
/// error rate as ER₂.
pub fn imbalance_sweep(
    ds: &ExpressionDataset,
    methods: &[(String, MethodConfig)],
    test_size: usize,
    positive_counts: &[usize],
    seed: u64,
) -> Result<Vec<ImbalanceRow>> {
    if ds.n_classes() != 2 {
        return Err(Error::InvalidArgument("imbalance sweep needs a binary dataset".into()));
    }
    let mut rows = Vec::new();
    for (name, cfg) in methods {
        let pos_all: Vec<usize> = (0..ds.n_samples()).filter(|&i| ds.labels()[i] == cfg.positive_class).collect();
        let neg_all: Vec<usize> = (0..ds.n_samples()).filter(|&i| ds.labels()[i] != cfg.positive_class).collect();
        let mut method_rows = Vec::new();
        for (r, &p) in positive_counts.iter().enumerate() {
            if p > test_size {
                return Err(Error::InvalidArgument(format!("{p} positives exceed test size {test_size}")));
            }
            let q = test_size - p;
            if p >= pos_all.len() || q >= neg_all.len() {
                return Err(Error::InvalidArgument(format!(
                    "cannot draw {p} positives and {q} negatives while keeping both classes in training"
                )));
            }
            let mut rng = seed::rng(seed::derive(seed, "imbalance", r as u64));
            let (mut pos, mut neg) = (pos_all.clone(), neg_all.clone());
            pos.shuffle(&mut rng);
            neg.shuffle(&mut rng);
            let test: Vec<usize> = pos[..p].iter().chain(&neg[..q]).copied().collect();
            let train: Vec<usize> = pos[p..].iter().chain(&neg[q..]).copied().collect();
            let out = run_split(ds, &Partition::new(train, test)?, cfg, r, None)?;
            method_rows.push(ImbalanceRow {
                method: name.clone(),
                positives: p,
                negatives: q,
                ratio: (q > 0).then(|| p as f64 / q as f64),
                accuracy: out.accuracy,
                error_rate: 1.0 - out.accuracy,
                err: None,
            });
        }
        let best = method_rows.iter().map(|r| r.error_rate).fold(f64::INFINITY, f64::min);
        for row in &mut method_rows {
            row.err = err_score(row.error_rate, best)?;
        }
        rows.extend(method_rows);
    }
    Ok(rows)
}

/// `method,positives,negatives,ratio,accuracy,error_rate,err`
pub fn imbalance_csv(rows: &[ImbalanceRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into());
    let mut out = String::from("method,positives,negatives,ratio,accuracy,error_rate,err\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.method,
            r.positives,
            r.negatives,
            opt(r.ratio),
            r.accuracy,
            r.error_rate,
            opt(r.err)
        ));
    }
    out
}

/// Training fractions 0.9, 0.8, …, 0.1.
pub fn default_fractions() -> Vec<f64> {
    (1..=9).rev().map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionRow {
    pub method: String,
    pub train_fraction: f64,
    pub repeat: usize,
    pub n_train: usize,
    pub accuracy: f64,
}

/// Stratified random splits keeping `fraction` of each class (at least one
/// sample per side) for training.
pub fn training_fraction_sweep(
    ds: &ExpressionDataset,
    methods: &[(String, MethodConfig)],
    fractions: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<FractionRow>> {
    let mut rows = Vec::new();
    for (fi, &frac) in fractions.iter().enumerate() {
        if !(frac > 0.0 && frac < 1.0) {
            return Err(Error::InvalidArgument(format!("training fraction {frac} outside (0,1)")));
        }
        for rep in 0..repeats {
            let mut rng = seed::rng(seed::derive(seed, "train_fraction", (fi * repeats + rep) as u64));
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for c in 0..ds.n_classes() {
                let mut idx: Vec<usize> = (0..ds.n_samples()).filter(|&i| ds.labels()[i] == c).collect();
                if idx.len() < 2 {
                    return Err(Error::Degenerate(format!("class {c} has fewer than two samples")));
                }
                idx.shuffle(&mut rng);
                let m = ((idx.len() as f64 * frac).round() as usize).clamp(1, idx.len() - 1);
                train.extend_from_slice(&idx[..m]);
                test.extend_from_slice(&idx[m..]);
            }
            let part = Partition::new(train, test)?;
            for (name, cfg) in methods {
                let out = run_split(ds, &part, cfg, fi, None)?;
                rows.push(FractionRow {
                    method: name.clone(),
                    train_fraction: frac,
                    repeat: rep,
                    n_train: part.train.len(),
                    accuracy: out.accuracy,
                });
            }
        }
    }
    Ok(rows)
}

/// `method,train_fraction,repeat,n_train,accuracy`
pub fn fraction_csv(rows: &[FractionRow]) -> String {
    let mut out = String::from("method,train_fraction,repeat,n_train,accuracy\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method, r.train_fraction, r.repeat, r.n_train, r.accuracy
        ));
    }
    out
}
