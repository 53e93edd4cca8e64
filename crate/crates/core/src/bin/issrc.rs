use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use issrc::config::{apply_key, apply_seed_env, parse_config, PipelineConfig};
use issrc::pipeline::{self, BenchOptions, StabilityOptions, SweepOptions};
use issrc::solver::SolverKind;
use issrc::{Error, Result};

#[derive(Parser)]
#[command(name = "issrc", version, about = "Inverse-space sparse representation classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each one overrides the config key of
/// the same name.
#[derive(Args, Clone)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    labels: Option<String>,
    /// genes-as-rows | samples-as-rows
    #[arg(long)]
    orientation: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    output: Option<String>,
    /// integrated-issrc | issrc | src
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    skip_selection: bool,
    #[arg(long)]
    skip_features: bool,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    /// auto | rel:<fraction> | <value>
    #[arg(long)]
    lambda: Option<String>,
    /// Extra `key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Score genes (BW, SNR, AUC, DIF) and pick the information genes.
    SelectGenes(Common),
    /// Fit the two-layer sparse NMF on the selected genes.
    LearnFeatures(Common),
    /// Train on all but one stratified fold and classify that fold.
    Classify(Common),
    /// Stratified k-fold cross-validation.
    CrossValidate {
        #[command(flatten)]
        common: Common,
        /// Also run the test-imbalance sweep (err.csv).
        #[arg(long)]
        imbalance_sweep: bool,
        /// Also run the training-fraction sweep (train_fraction.csv).
        #[arg(long)]
        fraction_sweep: bool,
    },
    /// Compare GsADMM and ADMM on random Gaussian instances.
    BenchSolver {
        #[command(flatten)]
        common: Common,
        /// gsadmm | admm; both when omitted.
        #[arg(long)]
        solver: Option<SolverKind>,
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 20)]
        rows: usize,
        #[arg(long, default_value_t = 8)]
        cols: usize,
        /// Iteration budget per solve; 0 uses solver_max_iters.
        #[arg(long, default_value_t = 200)]
        budget: usize,
    },
    /// Monte-Carlo check of the least-squares perturbation bound.
    StabilityTest {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        rows: usize,
        #[arg(long, default_value_t = 10)]
        cols: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Perturbation size as a fraction of the inverse condition number.
        #[arg(long, default_value_t = 0.01)]
        epsilon_fraction: f64,
    },
}

fn build_config(c: &Common) -> Result<PipelineConfig> {
    let text = match &c.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut overrides: Vec<(String, String)> = [
        ("data", &c.data),
        ("labels", &c.labels),
        ("orientation", &c.orientation),
        ("seed", &c.seed),
        ("folds", &c.folds),
        ("threads", &c.threads),
        ("output", &c.output),
        ("method", &c.method),
        ("rho", &c.rho),
        ("sigma", &c.sigma),
        ("lambda", &c.lambda),
    ]
    .into_iter()
    .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
    .collect();
    if c.skip_selection {
        overrides.push(("skip_selection".into(), "true".into()));
    }
    if c.skip_features {
        overrides.push(("skip_features".into(), "true".into()));
    }
    for kv in &c.set {
        match kv.split_once('=') {
            Some((k, v)) => overrides.push((k.trim().into(), v.trim().into())),
            None => return Err(Error::Config(vec![format!("--set expects KEY=VALUE, got `{kv}`")])),
        }
    }
    // Overrides are appended as config lines so that one pass reports every
    // problem together.
    let mut full = text;
    full.push('\n');
    let mut errors = Vec::new();
    for (k, v) in &overrides {
        let mut probe = PipelineConfig::default();
        match apply_key(&mut probe, k, v) {
            Ok(()) => full.push_str(&format!("{k} = {v}\n")),
            Err(e) => errors.push(format!("--{k}: {e}")),
        }
    }
    let mut cfg = match parse_config(&full) {
        Ok(cfg) if errors.is_empty() => cfg,
        Ok(_) => return Err(Error::Config(errors)),
        Err(Error::Config(mut list)) => {
            errors.append(&mut list);
            return Err(Error::Config(errors));
        }
        Err(e) => return Err(e),
    };
    apply_seed_env(&mut cfg)?;
    Ok(cfg)
}

fn run(cli: Cli) -> std::result::Result<(), (PathBuf, Error)> {
    let common = match &cli.command {
        Command::SelectGenes(c) | Command::LearnFeatures(c) | Command::Classify(c) => c,
        Command::CrossValidate { common, .. }
        | Command::BenchSolver { common, .. }
        | Command::StabilityTest { common, .. } => common,
    };
    let fallback_dir = common
        .output
        .clone()
        .map(PathBuf::from)
        .unwrap_or_else(|| PipelineConfig::default().output);
    let cfg = build_config(common).map_err(|e| (fallback_dir, e))?;
    let dir = cfg.output.clone();
    let fail = |e: Error| (dir.clone(), e);
    if cfg.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    match cli.command {
        Command::SelectGenes(_) => {
            let (sel, _) = pipeline::run_select_genes(&cfg).map_err(fail)?;
            println!("selected {} genes into {}", sel.selected.len(), dir.display());
        }
        Command::LearnFeatures(_) => {
            pipeline::run_learn_features(&cfg).map_err(fail)?;
            println!("factors written to {}", dir.display());
        }
        Command::Classify(_) => {
            let (m, _) = pipeline::run_classify(&cfg).map_err(fail)?;
            println!("hold-out accuracy {:.2}% ({} test samples)", m.accuracy * 100.0, m.test.len());
        }
        Command::CrossValidate {
            imbalance_sweep,
            fraction_sweep,
            ..
        } => {
            let sweeps = SweepOptions {
                imbalance: imbalance_sweep,
                train_fraction: fraction_sweep,
            };
            let (rep, _) = pipeline::run_cross_validate(&cfg, sweeps).map_err(fail)?;
            if let Some(a) = rep.mean.accuracy {
                println!("{}-fold mean accuracy {:.2}% (sd {:.2})", rep.k_folds, a.mean * 100.0, a.sd * 100.0);
            }
            println!("pooled accuracy {:.2}%", rep.pooled_accuracy * 100.0);
        }
        Command::BenchSolver {
            solver,
            instances,
            rows,
            cols,
            budget,
            ..
        } => {
            let opts = BenchOptions {
                solver,
                instances,
                rows,
                cols,
                budget,
            };
            let (res, _) = pipeline::run_bench_solver(&cfg, &opts).map_err(fail)?;
            println!("{} runs written to {}", res.len(), dir.join("solver_bench.csv").display());
        }
        Command::StabilityTest {
            rows,
            cols,
            trials,
            epsilon_fraction,
            ..
        } => {
            let opts = StabilityOptions {
                rows,
                cols,
                trials,
                epsilon_fraction,
            };
            let (reps, _) = pipeline::run_stability(&cfg, &opts).map_err(fail)?;
            let violations = reps.iter().filter(|r| !r.holds).count();
            println!("{violations} bound violations in {} trials", reps.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((dir, e)) => {
            pipeline::write_error_record(&dir, &e);
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
