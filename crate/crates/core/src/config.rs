//! Flat `key = value` pipeline configuration.
//!
//! Lines are `key = value`; `#` starts a comment; lists are comma separated.
//! Unknown keys are errors, and every problem in a file is reported at once.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::classification::{IssrcConfig, Method};
use crate::dataset::{LoadOptions, MissingPolicy, Orientation};
use crate::error::{Error, Result};
use crate::evaluation::MethodConfig;
use crate::feature_learning::{FeatureConfig, NmfScaling};
use crate::gene_selection::SelectionConfig;
use crate::solver::{GradientFactor, LambdaPolicy, SolverParams, ThetaPolicy};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "ISSRC_SEED";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub data: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub orientation: Orientation,
    /// `None` auto-detects tab or comma.
    pub delimiter: Option<char>,
    pub missing: MissingPolicy,
    pub standardize: bool,
    /// Class index (0-based, sorted class names) treated as positive.
    pub positive_class: usize,
    pub pre_count: usize,
    pub final_count: usize,
    pub grid_step: f64,
    pub ranks: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub max_iters: usize,
    pub tol: f64,
    pub nmf_step: f64,
    pub nmf_scaling: NmfScaling,
    pub sigma: f64,
    pub rho: f64,
    pub lambda: LambdaPolicy,
    pub solver_tol: f64,
    pub solver_max_iters: usize,
    pub gradient_factor: GradientFactor,
    pub theta_policy: ThetaPolicy,
    pub folds: usize,
    pub seed: u64,
    pub method: Method,
    pub skip_selection: bool,
    pub skip_features: bool,
    pub ccr_class_size_norm: bool,
    pub unit_norm: bool,
    pub output: PathBuf,
    /// 0 lets the thread pool pick.
    pub threads: usize,
    /// Accuracy (in %) the run is compared against in the manifest.
    pub reference_accuracy: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let f = FeatureConfig::default();
        let s = SolverParams::default();
        let sel = SelectionConfig::default();
        Self {
            data: None,
            labels: None,
            orientation: Orientation::GenesAsRows,
            delimiter: None,
            missing: MissingPolicy::Reject,
            standardize: false,
            positive_class: 1,
            pre_count: sel.pre_count,
            final_count: sel.final_count,
            grid_step: sel.grid_step,
            ranks: f.ranks,
            lambdas: f.lambdas,
            max_iters: f.max_iters,
            tol: f.tol,
            nmf_step: f.initial_step,
            nmf_scaling: NmfScaling::UnitMax,
            sigma: s.sigma,
            rho: s.rho,
            lambda: s.lambda,
            solver_tol: s.tol,
            solver_max_iters: s.max_iters,
            gradient_factor: s.gradient_factor,
            theta_policy: s.theta,
            folds: 10,
            seed: 0,
            method: Method::IntegratedIssrc,
            skip_selection: false,
            skip_features: false,
            ccr_class_size_norm: true,
            unit_norm: true,
            output: PathBuf::from("issrc-out"),
            threads: 0,
            reference_accuracy: None,
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            lambda: self.lambda,
            sigma: self.sigma,
            rho: self.rho,
            theta: self.theta_policy,
            max_iters: self.solver_max_iters,
            tol: self.solver_tol,
            gradient_factor: self.gradient_factor,
        }
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            pre_count: self.pre_count,
            final_count: self.final_count,
            grid_step: self.grid_step,
        }
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            ranks: self.ranks.clone(),
            lambdas: self.lambdas.clone(),
            max_iters: self.max_iters,
            tol: self.tol,
            initial_step: self.nmf_step,
            seed: crate::seed::derive(self.seed, "features", 0),
        }
    }

    pub fn method_config(&self) -> MethodConfig {
        MethodConfig {
            method: self.method,
            selection: self.selection(),
            skip_selection: self.skip_selection,
            skip_features: self.skip_features,
            issrc: IssrcConfig {
                features: Some(self.features()),
                scaling: self.nmf_scaling,
                solver: self.solver_params(),
                class_size_norm: self.ccr_class_size_norm,
                unit_norm: self.unit_norm,
            },
            positive_class: self.positive_class,
        }
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            orientation: self.orientation,
            delimiter: self.delimiter.map(|c| c as u8),
            missing: self.missing,
            classes: None,
        }
    }

    /// Every domain violation, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.final_count == 0 {
            v.push("final_count must be positive".into());
        }
        if self.final_count > self.pre_count {
            v.push(format!(
                "final_count ({}) must not exceed pre_count ({})",
                self.final_count, self.pre_count
            ));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 0.1) {
            v.push(format!("grid_step must lie in (0,0.1], got {}", self.grid_step));
        }
        if self.ranks.is_empty() {
            v.push("ranks must not be empty".into());
        }
        if self.ranks.len() != self.lambdas.len() {
            v.push(format!(
                "ranks ({}) and lambdas ({}) must have equal length",
                self.ranks.len(),
                self.lambdas.len()
            ));
        }
        if self.ranks.contains(&0) {
            v.push("ranks must be positive".into());
        }
        if self.ranks.windows(2).any(|w| w[1] >= w[0]) {
            v.push("ranks must be strictly decreasing".into());
        }
        if let Some(&r) = self.ranks.first() {
            if !self.skip_features && self.method == Method::IntegratedIssrc && !self.skip_selection && r >= self.final_count {
                v.push(format!("first rank ({r}) must be below final_count ({})", self.final_count));
            }
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            v.push("lambdas must be finite and >= 0".into());
        }
        if self.max_iters == 0 {
            v.push("max_iters must be positive".into());
        }
        if !(self.tol >= 0.0) {
            v.push(format!("tol must be >= 0, got {}", self.tol));
        }
        if !(self.nmf_step > 0.0 && self.nmf_step.is_finite()) {
            v.push(format!("nmf_step must be > 0, got {}", self.nmf_step));
        }
        v.extend(self.solver_params().violations());
        if self.folds < 2 {
            v.push(format!("folds must be at least 2, got {}", self.folds));
        }
        if let Some(r) = self.reference_accuracy {
            if !(0.0..=100.0).contains(&r) {
                v.push(format!("reference_accuracy must lie in [0,100], got {r}"));
            }
        }
        v
    }

    /// Renders the configuration in the format [`parse_config`] reads.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        if let Some(d) = path(&self.data) {
            let _ = writeln!(s, "data = {d}");
        }
        if let Some(l) = path(&self.labels) {
            let _ = writeln!(s, "labels = {l}");
        }
        let _ = writeln!(s, "orientation = {}", self.orientation);
        let delim = match self.delimiter {
            None => "auto".to_string(),
            Some('\t') => "tab".to_string(),
            Some(c) => c.to_string(),
        };
        let _ = writeln!(s, "delimiter = {delim}");
        let _ = writeln!(s, "missing = {}", self.missing);
        let _ = writeln!(s, "standardize = {}", self.standardize);
        let _ = writeln!(s, "positive_class = {}", self.positive_class);
        let _ = writeln!(s, "pre_count = {}", self.pre_count);
        let _ = writeln!(s, "final_count = {}", self.final_count);
        let _ = writeln!(s, "grid_step = {}", self.grid_step);
        let _ = writeln!(s, "ranks = {}", join(&self.ranks));
        let _ = writeln!(s, "lambdas = {}", join(&self.lambdas));
        let _ = writeln!(s, "max_iters = {}", self.max_iters);
        let _ = writeln!(s, "tol = {}", self.tol);
        let _ = writeln!(s, "nmf_step = {}", self.nmf_step);
        let _ = writeln!(s, "nmf_scaling = {}", self.nmf_scaling);
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "rho = {}", self.rho);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "solver_tol = {}", self.solver_tol);
        let _ = writeln!(s, "solver_max_iters = {}", self.solver_max_iters);
        let _ = writeln!(s, "gradient_factor = {}", self.gradient_factor);
        let _ = writeln!(s, "theta_policy = {}", self.theta_policy);
        let _ = writeln!(s, "folds = {}", self.folds);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "method = {}", self.method);
        let _ = writeln!(s, "skip_selection = {}", self.skip_selection);
        let _ = writeln!(s, "skip_features = {}", self.skip_features);
        let _ = writeln!(s, "ccr_class_size_norm = {}", self.ccr_class_size_norm);
        let _ = writeln!(s, "unit_norm = {}", self.unit_norm);
        let _ = writeln!(s, "output = {}", self.output.display());
        let _ = writeln!(s, "threads = {}", self.threads);
        if let Some(r) = self.reference_accuracy {
            let _ = writeln!(s, "reference_accuracy = {r}");
        }
        s
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_config_string().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got `{v}`")),
    }
}

fn parse_num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("expected a number, got `{v}`"))
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',')
        .map(|x| x.trim())
        .filter(|x| !x.is_empty())
        .map(parse_num)
        .collect()
}

fn parse_enum<T: FromStr<Err = Error>>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|e| e.to_string())
}

/// Applies one `key = value` pair. Unknown keys are errors.
pub fn apply_key(cfg: &mut PipelineConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    let v = value.trim();
    match key.trim() {
        "data" => cfg.data = Some(PathBuf::from(v)),
        "labels" => cfg.labels = Some(PathBuf::from(v)),
        "orientation" => cfg.orientation = parse_enum(v)?,
        "delimiter" => {
            cfg.delimiter = match v {
                "auto" => None,
                "tab" | "\\t" => Some('\t'),
                "comma" | "," => Some(','),
                other => return Err(format!("delimiter must be auto, tab or comma, got `{other}`")),
            }
        }
        "missing" => cfg.missing = parse_enum(v)?,
        "standardize" => cfg.standardize = parse_bool(v)?,
        "positive_class" => cfg.positive_class = parse_num(v)?,
        "pre_count" => cfg.pre_count = parse_num(v)?,
        "final_count" => cfg.final_count = parse_num(v)?,
        "grid_step" => cfg.grid_step = parse_num(v)?,
        "ranks" => cfg.ranks = parse_list(v)?,
        "lambdas" => cfg.lambdas = parse_list(v)?,
        "max_iters" => cfg.max_iters = parse_num(v)?,
        "tol" => cfg.tol = parse_num(v)?,
        "nmf_step" => cfg.nmf_step = parse_num(v)?,
        "nmf_scaling" => cfg.nmf_scaling = parse_enum(v)?,
        "sigma" => cfg.sigma = parse_num(v)?,
        "rho" => cfg.rho = parse_num(v)?,
        "lambda" => cfg.lambda = parse_enum(v)?,
        "solver_tol" => cfg.solver_tol = parse_num(v)?,
        "solver_max_iters" => cfg.solver_max_iters = parse_num(v)?,
        "gradient_factor" => cfg.gradient_factor = parse_enum(v)?,
        "theta_policy" => cfg.theta_policy = parse_enum(v)?,
        "folds" => cfg.folds = parse_num(v)?,
        "seed" => cfg.seed = parse_num(v)?,
        "method" => cfg.method = parse_enum(v)?,
        "skip_selection" => cfg.skip_selection = parse_bool(v)?,
        "skip_features" => cfg.skip_features = parse_bool(v)?,
        "ccr_class_size_norm" => cfg.ccr_class_size_norm = parse_bool(v)?,
        "unit_norm" => cfg.unit_norm = parse_bool(v)?,
        "output" => cfg.output = PathBuf::from(v),
        "threads" => cfg.threads = parse_num(v)?,
        "reference_accuracy" => cfg.reference_accuracy = Some(parse_num(v)?),
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
}

/// Parses configuration text over the defaults. Syntax, type and domain
/// errors are collected into a single [`Error::Config`].
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    let mut errors = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected `key = value`", n + 1));
            continue;
        };
        if let Err(e) = apply_key(&mut cfg, key, value) {
            errors.push(format!("line {}: {} ({e})", n + 1, key.trim()));
        }
    }
    errors.extend(cfg.violations());
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

/// Reads, parses and validates a configuration file, then applies the
/// [`SEED_ENV`] override.
pub fn validate_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    apply_seed_env(&mut cfg)?;
    Ok(cfg)
}

/// Replaces the seed with `ISSRC_SEED` when it is set.
pub fn apply_seed_env(cfg: &mut PipelineConfig) -> Result<()> {
    if let Ok(s) = std::env::var(SEED_ENV) {
        cfg.seed = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(vec![format!("{SEED_ENV} must be an unsigned integer, got `{s}`")]))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_default() {
        assert_eq!(parse_config("").unwrap(), PipelineConfig::default());
        assert_eq!(parse_config("# nothing\n\n").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn rho_out_of_range() {
        let err = parse_config("rho = 2.5").unwrap_err();
        assert!(err.to_string().contains("rho must lie in (0,2)"), "{err}");
    }

    #[test]
    fn all_errors_reported_together() {
        let Error::Config(list) = parse_config("rho = 2.5\nbogus = 1\nfolds = x\nsigma = -1").unwrap_err() else {
            panic!("expected config error");
        };
        assert_eq!(list.len(), 4, "{list:?}");
    }

    #[test]
    fn ranks_round_trip() {
        let cfg = parse_config("ranks = 8,6\nlambdas = 0.2, 0.5").unwrap();
        assert_eq!(cfg.ranks, vec![8, 6]);
        let again = parse_config(&cfg.to_config_string()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn full_render_round_trips() {
        let mut cfg = PipelineConfig {
            data: Some("d.tsv".into()),
            labels: Some("l.tsv".into()),
            delimiter: Some('\t'),
            lambda: LambdaPolicy::Fixed(0.05),
            theta_policy: ThetaPolicy::FrobeniusSquared,
            reference_accuracy: Some(98.7),
            ..Default::default()
        };
        cfg.method = Method::Src;
        assert_eq!(parse_config(&cfg.to_config_string()).unwrap(), cfg);
    }
}
