//! Subcommand runners and report bundles.
//!
//! Every runner writes into `cfg.output` and finishes with `manifest.json`
//! (configuration hash, seed, version, per-stage wall times). Files other than
//! the manifest and the solver benchmark contain no timings, so identical
//! configurations reproduce them byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::classification::{stability_check, stability_csv, ClassificationReport, StabilityReport};
use crate::config::PipelineConfig;
use crate::dataset::{load_matrix, standardize, stratified_kfold, ExpressionDataset, IngestLog};
use crate::error::{Error, Result};
use crate::evaluation::{
    cross_validate, default_fractions, fraction_csv, imbalance_csv, imbalance_sweep, pca_embed, run_split,
    training_fraction_sweep, CvReport, LabelAccessLog, MetricBundle, RocCurve, IMBALANCE_POSITIVES,
};
use crate::feature_learning::{
    emit_factor_diagnostics, factors_csv, lpml_snmf_fit, objective_trace_csv, prepare_nonnegative, FactorDiagnostics,
};
use crate::gene_selection::{select_genes, GeneSelection};
use crate::linalg::singular_values;
use crate::seed;
use crate::solver::{bench_csv, convergence_report, trace_csv, BenchInstance, BenchRow, SolverKind};
use crate::classification::Method;
use crate::VERSION;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub config: String,
    pub seed: u64,
    pub stages: Vec<StageTime>,
    pub total_seconds: f64,
    /// Mean fold accuracy in %, when the command classifies.
    pub achieved_accuracy: Option<f64>,
    pub reference_accuracy: Option<f64>,
    /// `reference − achieved`, in percentage points.
    pub accuracy_gap: Option<f64>,
    pub outputs: Vec<String>,
}

/// Collects outputs and stage timings for one run.
pub struct RunContext {
    dir: PathBuf,
    command: String,
    start: Instant,
    stages: Vec<StageTime>,
    outputs: Vec<String>,
}

impl RunContext {
    pub fn new(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_owned(),
            start: Instant::now(),
            stages: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Runs `f` and records its wall time under `name`.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f()?;
        self.stages.push(StageTime {
            stage: name.to_owned(),
            seconds: t.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(name.to_owned());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    /// Writes `manifest.json` and returns it.
    pub fn finish(mut self, cfg: &PipelineConfig, achieved_accuracy: Option<f64>) -> Result<Manifest> {
        self.outputs.push("manifest.json".into());
        let manifest = Manifest {
            tool: "issrc".into(),
            version: VERSION.into(),
            command: self.command.clone(),
            config_hash: cfg.hash(),
            config: cfg.to_config_string(),
            seed: cfg.seed,
            stages: self.stages.clone(),
            total_seconds: self.start.elapsed().as_secs_f64(),
            achieved_accuracy,
            reference_accuracy: cfg.reference_accuracy,
            accuracy_gap: achieved_accuracy.zip(cfg.reference_accuracy).map(|(a, r)| r - a),
            outputs: self.outputs.clone(),
        };
        let path = self.dir.join("manifest.json");
        let mut s = serde_json::to_string_pretty(&manifest)?;
        s.push('\n');
        fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

/// Machine-readable failure record, written as `error.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub messages: Vec<String>,
}

impl ErrorRecord {
    pub fn from_error(e: &Error) -> Self {
        let kind = match e {
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
            Error::Dimension(_) => "dimension",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Degenerate(_) => "degenerate",
            Error::Solver(_) => "solver",
            Error::Config(_) => "config",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        };
        let messages = match e {
            Error::Config(list) => list.clone(),
            other => vec![other.to_string()],
        };
        Self {
            kind: kind.into(),
            messages,
        }
    }
}

/// Best-effort write of `error.json` into `dir`.
pub fn write_error_record(dir: &Path, e: &Error) {
    if fs::create_dir_all(dir).is_ok() {
        if let Ok(s) = serde_json::to_string_pretty(&ErrorRecord::from_error(e)) {
            let _ = fs::write(dir.join("error.json"), s + "\n");
        }
    }
}

pub fn load_dataset(cfg: &PipelineConfig) -> Result<(ExpressionDataset, IngestLog)> {
    let (Some(data), Some(labels)) = (&cfg.data, &cfg.labels) else {
        return Err(Error::Config(vec!["data and labels paths are required".into()]));
    };
    let (ds, log) = load_matrix(data, labels, &cfg.load_options())?;
    if cfg.positive_class >= ds.n_classes() {
        return Err(Error::Config(vec![format!(
            "positive_class {} out of range for {} classes",
            cfg.positive_class,
            ds.n_classes()
        )]));
    }
    Ok((if cfg.standardize { standardize(&ds) } else { ds }, log))
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn write_selection(ctx: &mut RunContext, sel: &GeneSelection) -> Result<()> {
    ctx.write("gene_scores.csv", &sel.to_csv())?;
    let mut list = String::from("rank,gene_id,dif,bw\n");
    for (r, &g) in sel.selected.iter().enumerate() {
        let s = &sel.scores[g];
        list.push_str(&format!("{},{},{},{}\n", r + 1, s.gene_id, s.dif.unwrap_or(f64::NAN), s.bw));
        if let Some(curve) = &s.dca {
            ctx.write(&format!("dca_{}.csv", safe_name(&s.gene_id)), &curve.to_csv())?;
        }
    }
    ctx.write("selected_genes.csv", &list)?;
    Ok(())
}

/// `select-genes`: scores every gene on all labeled samples.
pub fn run_select_genes(cfg: &PipelineConfig) -> Result<(GeneSelection, Manifest)> {
    let mut ctx = RunContext::new(&cfg.output, "select-genes")?;
    let (ds, ingest) = ctx.stage("load", || load_dataset(cfg))?;
    ctx.write_json("ingest.json", &ingest)?;
    let sel = ctx.stage("gene_selection", || {
        select_genes(ds.values(), ds.gene_ids(), ds.labels(), ds.n_classes(), cfg.positive_class, &cfg.selection())
    })?;
    write_selection(&mut ctx, &sel)?;
    let m = ctx.finish(cfg, None)?;
    Ok((sel, m))
}

/// `learn-features`: gene selection (unless skipped), then the sparse NMF
/// stack on every sample.
pub fn run_learn_features(cfg: &PipelineConfig) -> Result<(FactorDiagnostics, Manifest)> {
    let mut ctx = RunContext::new(&cfg.output, "learn-features")?;
    let (ds, _) = ctx.stage("load", || load_dataset(cfg))?;
    let genes: Vec<usize> = if cfg.skip_selection {
        (0..ds.n_genes()).collect()
    } else {
        let sel = ctx.stage("gene_selection", || {
            select_genes(ds.values(), ds.gene_ids(), ds.labels(), ds.n_classes(), cfg.positive_class, &cfg.selection())
        })?;
        write_selection(&mut ctx, &sel)?;
        sel.selected
    };
    let x = ds.values().select_rows(genes.iter());
    let empty = x.columns(0, 0).into_owned();
    let (v, _) = prepare_nonnegative(&x, &empty, cfg.nmf_scaling);
    let stack = ctx.stage("feature_learning", || lpml_snmf_fit(&v, &empty, &cfg.features()))?;
    for l in 0..stack.layers.len() {
        ctx.write(&format!("factors_L{}.csv", l + 1), &factors_csv(&stack, l))?;
    }
    ctx.write("objective_trace.csv", &objective_trace_csv(&stack))?;
    let diag = emit_factor_diagnostics(&v, &stack, ds.labels())?;
    for (name, m) in &diag.correlations {
        ctx.write(&format!("correlation_{name}.csv"), &FactorDiagnostics::correlation_csv(m))?;
    }
    ctx.write("quartiles.csv", &diag.quartiles_csv())?;
    let m = ctx.finish(cfg, None)?;
    Ok((diag, m))
}

fn predictions_csv(ds: &ExpressionDataset, test: &[usize], rep: &ClassificationReport, truths: Option<&[usize]>) -> String {
    let mut out = String::from("sample_id,predicted,true");
    for c in ds.class_names() {
        out.push_str(&format!(",score_{c}"));
    }
    out.push('\n');
    for (j, &i) in test.iter().enumerate() {
        let truth = truths.map_or(String::new(), |t| ds.class_names()[t[j]].clone());
        out.push_str(&format!(
            "{},{},{}",
            ds.sample_ids()[i],
            ds.class_names()[rep.predictions[j]],
            truth
        ));
        for c in 0..ds.n_classes() {
            out.push_str(&format!(",{}", rep.class_scores[(c, j)]));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldoutMetrics {
    pub method: Method,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub selected_genes: Vec<String>,
    pub accuracy: f64,
    pub metrics: MetricBundle,
    pub ties: usize,
    pub fallback: usize,
    pub unconverged_solves: usize,
    pub roc: Option<RocCurve>,
}

/// `classify`: holds out the first fold of the stratified plan, trains on
/// the rest and scores the held-out samples.
pub fn run_classify(cfg: &PipelineConfig) -> Result<(HoldoutMetrics, Manifest)> {
    let mut ctx = RunContext::new(&cfg.output, "classify")?;
    let (ds, _) = ctx.stage("load", || load_dataset(cfg))?;
    let plan = stratified_kfold(ds.labels(), cfg.folds, cfg.seed)?;
    let part = &plan.folds[0];
    let mcfg = cfg.method_config();
    let out = ctx.stage("classification", || run_split(&ds, part, &mcfg, 0, None))?;
    if let Some(sel) = &out.selection {
        write_selection(&mut ctx, sel)?;
    }
    ctx.write("predictions.csv", &predictions_csv(&ds, &part.test, &out.report, Some(&out.truths)))?;
    if let Some(c) = &out.report.coefficients {
        ctx.write("coefficients.csv", &c.to_csv())?;
    }
    if let Some(stack) = &out.report.factors {
        for l in 0..stack.layers.len() {
            ctx.write(&format!("factors_L{}.csv", l + 1), &factors_csv(stack, l))?;
        }
        ctx.write("objective_trace.csv", &objective_trace_csv(stack))?;
    }
    let positive: Vec<bool> = out.truths.iter().map(|&t| t == cfg.positive_class).collect();
    let both = positive.iter().any(|&p| p) && positive.iter().any(|&p| !p);
    let roc = if both {
        let r = crate::evaluation::roc_auc(&out.positive_scores, &positive)?;
        ctx.write("roc.csv", &r.to_csv())?;
        let dca = crate::gene_selection::dca_from_risks(&out.positive_scores, &positive, cfg.grid_step)?;
        ctx.write("dca_classifier.csv", &dca.to_csv())?;
        Some(r)
    } else {
        None
    };
    let metrics = HoldoutMetrics {
        method: cfg.method,
        train: part.train.iter().map(|&i| ds.sample_ids()[i].clone()).collect(),
        test: part.test.iter().map(|&i| ds.sample_ids()[i].clone()).collect(),
        selected_genes: out.selected_genes.clone(),
        accuracy: out.accuracy,
        metrics: out.metrics,
        ties: out.ties,
        fallback: out.fallback,
        unconverged_solves: out.unconverged_solves,
        roc,
    };
    ctx.write_json("metrics.json", &metrics)?;
    let acc = metrics.accuracy * 100.0;
    let m = ctx.finish(cfg, Some(acc))?;
    Ok((metrics, m))
}

/// Which sweeps `cross-validate` runs in addition to the CV itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepOptions {
    pub imbalance: bool,
    pub train_fraction: bool,
}

/// `cross-validate`: stratified k-fold CV with the configured method.
pub fn run_cross_validate(cfg: &PipelineConfig, sweeps: SweepOptions) -> Result<(CvReport, Manifest)> {
    let mut ctx = RunContext::new(&cfg.output, "cross-validate")?;
    let (ds, _) = ctx.stage("load", || load_dataset(cfg))?;
    let plan = stratified_kfold(ds.labels(), cfg.folds, cfg.seed)?;
    let mcfg = cfg.method_config();
    let log = LabelAccessLog::new();
    let report = ctx.stage("cross_validation", || cross_validate(&ds, &plan, &mcfg, Some(&log)))?;
    let leaks = log.leaks(&plan);
    if !leaks.is_empty() {
        return Err(Error::InvalidArgument(format!("test labels read before evaluation: {leaks:?}")));
    }
    ctx.write_json("metrics.json", &report)?;

    let mut pred = String::from("sample_id,fold,true,predicted,positive_score\n");
    for p in &report.predictions {
        pred.push_str(&format!(
            "{},{},{},{},{}\n",
            ds.sample_ids()[p.sample],
            p.fold,
            ds.class_names()[p.truth],
            ds.class_names()[p.predicted],
            p.positive_score
        ));
    }
    ctx.write("predictions.csv", &pred)?;
    if let Some(roc) = &report.roc {
        ctx.write("roc.csv", &roc.to_csv())?;
    }
    if let Some(dca) = &report.dca {
        ctx.write("dca_classifier.csv", &dca.to_csv())?;
    }

    let samples = ds.values().transpose();
    let comps = 3.min(samples.nrows()).min(samples.ncols());
    if let Ok(pca) = pca_embed(&samples, comps) {
        let mut s = String::from("sample_id,class");
        for c in 0..comps {
            s.push_str(&format!(",pc{}", c + 1));
        }
        s.push('\n');
        for i in 0..ds.n_samples() {
            s.push_str(&format!("{},{}", ds.sample_ids()[i], ds.class_names()[ds.labels()[i]]));
            for c in 0..comps {
                s.push_str(&format!(",{}", pca.coordinates[(i, c)]));
            }
            s.push('\n');
        }
        ctx.write("pca3.csv", &s)?;
    }

    if sweeps.imbalance {
        let methods = vec![
            ("integrated-issrc".to_string(), mcfg.with_method(Method::IntegratedIssrc)),
            ("issrc".to_string(), mcfg.with_method(Method::Issrc)),
        ];
        let rows = ctx.stage("imbalance_sweep", || {
            imbalance_sweep(&ds, &methods, 20, &IMBALANCE_POSITIVES, seed::derive(cfg.seed, "sweep", 0))
        })?;
        ctx.write("err.csv", &imbalance_csv(&rows))?;
    }
    if sweeps.train_fraction {
        let methods = vec![
            ("integrated-issrc".to_string(), mcfg.with_method(Method::IntegratedIssrc)),
            ("src".to_string(), mcfg.with_method(Method::Src)),
        ];
        let rows = ctx.stage("train_fraction_sweep", || {
            training_fraction_sweep(&ds, &methods, &default_fractions(), 1, seed::derive(cfg.seed, "sweep", 1))
        })?;
        ctx.write("train_fraction.csv", &fraction_csv(&rows))?;
    }

    let acc = report.mean.accuracy.map(|s| s.mean * 100.0);
    let m = ctx.finish(cfg, acc)?;
    Ok((report, m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    /// `None` runs both solvers.
    pub solver: Option<SolverKind>,
    pub instances: usize,
    pub rows: usize,
    pub cols: usize,
    /// Iteration budget; 0 keeps the configured solver max.
    pub budget: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            solver: None,
            instances: 50,
            rows: 20,
            cols: 8,
            budget: 200,
        }
    }
}

/// `bench-solver`: random Gaussian instances through GsADMM and/or ADMM.
pub fn run_bench_solver(cfg: &PipelineConfig, opts: &BenchOptions) -> Result<(Vec<BenchRow>, Manifest)> {
    let mut ctx = RunContext::new(&cfg.output, "bench-solver")?;
    let mut rng = seed::rng(seed::derive(cfg.seed, "bench", 0));
    let instances: Vec<BenchInstance> = (0..opts.instances)
        .map(|_| BenchInstance::gaussian(opts.rows, opts.cols, &mut rng))
        .collect();
    let mut params = cfg.solver_params();
    if opts.budget > 0 {
        params.max_iters = opts.budget;
    }
    let kinds = match opts.solver {
        Some(k) => vec![k],
        None => vec![SolverKind::GsAdmm, SolverKind::Admm],
    };
    let runs: Vec<_> = kinds.into_iter().map(|k| (k, params)).collect();
    let rows = ctx.stage("bench", || convergence_report(&instances, &runs))?;
    ctx.write("solver_bench.csv", &bench_csv(&rows))?;
    ctx.write("solver_trace.csv", &trace_csv(&rows))?;
    let m = ctx.finish(cfg, None)?;
    Ok((rows, m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOptions {
    pub rows: usize,
    pub cols: usize,
    pub trials: usize,
    /// ε as a fraction of `φ_min/φ_max` of the drawn dictionary.
    pub epsilon_fraction: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            rows: 50,
            cols: 10,
            trials: 200,
            epsilon_fraction: 0.01,
        }
    }
}

/// `stability-test`: Monte-Carlo check of the least-squares perturbation
/// bound on a random Gaussian dictionary and target.
pub fn run_stability(cfg: &PipelineConfig, opts: &StabilityOptions) -> Result<(Vec<StabilityReport>, Manifest)> {
    let mut ctx = RunContext::new(&cfg.output, "stability-test")?;
    let mut rng = seed::rng(seed::derive(cfg.seed, "stability_instance", 0));
    let inst = BenchInstance::gaussian(opts.rows, opts.cols, &mut rng);
    let sv = singular_values(&inst.dict);
    let eps = opts.epsilon_fraction * sv[sv.len() - 1] / sv[0];
    let target: DVector<f64> = inst.target;
    let reps = ctx.stage("stability", || stability_check(&inst.dict, &target, eps, opts.trials, cfg.seed))?;
    ctx.write("stability.csv", &stability_csv(&reps))?;
    let m = ctx.finish(cfg, None)?;
    Ok((reps, m))
}
