use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tripledd::{
    bootstrap_se, compositional_change_diagnostic, generate_panel, generate_rc, load_panel_csv, load_rc_csv, robustness_grid,
    true_att, write_panel_csv, write_rc_csv, Design, DgpConfig, NuisanceConfig, OutcomeFamily, PanelColumns,
    PanelEstimator, PropensityFamily, RcColumns, RcEstimator, Scenario, Specification,
};

/// Doubly robust triple-difference estimation of the ATT.
///
/// Results are printed to stdout as a single JSON document; diagnostics go
/// to stderr. Exit status is 0 on success, 2 for invalid input and 3 when
/// estimation fails.
#[derive(Parser)]
#[command(name = "tripledd", version)]
struct Cli {
    /// Cap on worker threads for bootstrap and grid work.
    #[arg(long, global = true, env = "TRIPLEDD_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the ATT from a two-period panel CSV.
    EstimatePanel(PanelArgs),
    /// Estimate the ATT from a repeated cross-section CSV.
    EstimateRc(RcArgs),
    /// Draw a dataset from a data-generating process and write it as CSV.
    Simulate(SimulateArgs),
    /// Run the 2x2 nuisance-misspecification grid of a Monte Carlo scenario.
    Grid(GridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PropensityArg {
    Logit,
    Saturated,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutcomeArg {
    Ols,
    Saturated,
}

#[derive(Args)]
struct NuisanceArgs {
    #[arg(long, value_enum, default_value = "logit")]
    propensity: PropensityArg,
    #[arg(long, value_enum, default_value = "ols")]
    outcome: OutcomeArg,
    /// Cross-fitting folds; 1 fits nuisances on the full sample.
    #[arg(long, default_value_t = 1)]
    crossfit: usize,
    /// Bootstrap replicates; replaces the influence-function standard error.
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Clip propensities at the trim floor instead of failing on near-zero values.
    #[arg(long)]
    clip: bool,
    #[arg(long, default_value_t = 1e-3)]
    trim_floor: f64,
    /// Normalize inverse-probability weights within each comparison arm.
    #[arg(long)]
    hajek: bool,
    #[arg(long, default_value_t = 1e-8)]
    ridge: f64,
    /// Seed for fold assignment and bootstrap resampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated covariate columns; defaults to every unbound column.
    #[arg(long)]
    covariates: Option<String>,
}

impl NuisanceArgs {
    fn config(&self) -> NuisanceConfig {
        NuisanceConfig {
            propensity_family: match self.propensity {
                PropensityArg::Logit => PropensityFamily::LogitLinear,
                PropensityArg::Saturated => PropensityFamily::Saturated,
            },
            outcome_family: match self.outcome {
                OutcomeArg::Ols => OutcomeFamily::Ols,
                OutcomeArg::Saturated => OutcomeFamily::Saturated,
            },
            ridge: self.ridge,
            folds: self.crossfit,
            trim_floor: self.trim_floor,
            clip: self.clip,
            hajek: self.hajek,
            seed: self.seed,
            ..NuisanceConfig::default()
        }
    }

    fn covariates(&self) -> Option<Vec<String>> {
        self.covariates
            .as_ref()
            .map(|c| c.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }
}

#[derive(Args)]
struct PanelArgs {
    #[arg(long)]
    data: PathBuf,
    /// Column bindings `g=..,d=..,y0=..,y1=..`.
    #[arg(long, default_value = "g=g,d=d,y0=y0,y1=y1")]
    cols: PanelColumns,
    /// or, ipw or dr.
    #[arg(long, default_value = "dr")]
    estimator: PanelEstimator,
    #[command(flatten)]
    nuisance: NuisanceArgs,
}

#[derive(Args)]
struct RcArgs {
    #[arg(long)]
    data: PathBuf,
    /// Column bindings `g=..,d=..,t=..,y=..`.
    #[arg(long, default_value = "g=g,d=d,t=t,y=y")]
    cols: RcColumns,
    /// or, ipw, dr or dr-ncc.
    #[arg(long, default_value = "dr")]
    estimator: RcEstimator,
    /// Print the compositional-change report instead of an estimate.
    #[arg(long)]
    diagnose_ncc: bool,
    #[command(flatten)]
    nuisance: NuisanceArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Key-value DGP file; the reference panel design when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GridArgs {
    /// Key-value scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Directory receiving grid.json and grid.csv.
    #[arg(long)]
    out: PathBuf,
}

fn estimate_panel(a: PanelArgs) -> tripledd::Result<String> {
    let mut cols = a.cols;
    cols.covariates = a.nuisance.covariates();
    let data = load_panel_csv(&a.data, &cols)?;
    let config = a.nuisance.config();
    let est = a.estimator;
    let run = |d: &tripledd::PanelDataset| est.fit_estimate(d, &config, Specification::default());
    let result = match a.nuisance.bootstrap {
        Some(b) => bootstrap_se(run, &data, b, a.nuisance.seed)?,
        None => run(&data)?,
    };
    Ok(result.to_json())
}

fn estimate_rc(a: RcArgs) -> tripledd::Result<String> {
    let mut cols = a.cols;
    cols.covariates = a.nuisance.covariates();
    let data = load_rc_csv(&a.data, &cols)?;
    if a.diagnose_ncc {
        return Ok(compositional_change_diagnostic(&data)?.to_json());
    }
    let config = a.nuisance.config();
    let est = a.estimator;
    let run = |d: &tripledd::RcDataset| est.fit_estimate(d, &config, Specification::default());
    let result = match a.nuisance.bootstrap {
        Some(b) => bootstrap_se(run, &data, b, a.nuisance.seed)?,
        None => run(&data)?,
    };
    Ok(result.to_json())
}

fn simulate(a: SimulateArgs) -> tripledd::Result<String> {
    let cfg = match &a.config {
        Some(p) => DgpConfig::from_file(p)?,
        None => DgpConfig::default(),
    };
    cfg.validate()?;
    let (att, se) = true_att(&cfg)?;
    match cfg.design {
        Design::Panel => write_panel_csv(&generate_panel(&cfg, a.seed)?.0, &a.out)?,
        Design::Rc => write_rc_csv(&generate_rc(&cfg, a.seed)?.0, &a.out)?,
    }
    let doc = json!({
        "true_att": att,
        "true_att_se": se,
        "design": cfg.design.to_string(),
        "n": cfg.n,
        "seed": a.seed,
        "out": a.out,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

fn grid(a: GridArgs) -> tripledd::Result<String> {
    let scenario = Scenario::from_file(&a.scenario)?;
    let report = robustness_grid(&scenario)?;
    std::fs::create_dir_all(&a.out)?;
    let json_path = a.out.join("grid.json");
    let csv_path = a.out.join("grid.csv");
    std::fs::write(&json_path, report.to_json())?;
    std::fs::write(&csv_path, report.to_csv())?;
    let cells: Vec<_> = report
        .cells
        .iter()
        .map(|c| {
            let estimators: Vec<_> = c
                .estimators
                .iter()
                .map(|s| json!({"estimator": s.estimator, "bias": s.bias, "rmse": s.rmse, "coverage": s.coverage, "failures": s.failures}))
                .collect();
            json!({"specification": c.specification, "estimators": estimators})
        })
        .collect();
    let doc = json!({
        "json": json_path,
        "csv": csv_path,
        "true_att": report.cells.first().map(|c| c.true_att),
        "reps": scenario.reps,
        "cells": cells,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let out = match cli.command {
        Command::EstimatePanel(a) => estimate_panel(a),
        Command::EstimateRc(a) => estimate_rc(a),
        Command::Simulate(a) => simulate(a),
        Command::Grid(a) => grid(a),
    };
    match out {
        Ok(doc) => {
            println!("{doc}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
