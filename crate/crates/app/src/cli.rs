//! Batch commands and the `serve` entry point.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use combodose::benchmark::{benchmark, BenchmarkMode};
use combodose::calibrate::{calibrate_stage1, calibrate_stage2, CalibrationPlan, Stage2Options};
use combodose::case_study::{build_tape, observed, render, replay};
use combodose::scenario::{builtin, builtin_by_name, load_scenarios};
use combodose::{simulate, DesignConfig, Scenario, SimSettings, TrialConfig};

use crate::api;
use crate::session::Store;

pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "combodose", version, about = "Dose finding for two-drug combination trials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trials and print operating characteristics as CSV.
    Simulate(SimulateArgs),
    /// Stage-1 grid search or stage-2 threshold scan.
    Calibrate(CalibrateArgs),
    /// Complete-information benchmark selection rates.
    Benchmark(BenchmarkArgs),
    /// Replay the neratinib/temsirolimus study.
    Casestudy(CaseStudyArgs),
    /// Serve the trial conduct API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Trial settings as JSON (target, cohort_size, max_n, ...).
    #[arg(long)]
    pub trial: Option<PathBuf>,
    /// Scenario file replacing the built-in scenarios.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub design: String,
    /// Scenario names, comma separated, or "all".
    #[arg(long, default_value = "all")]
    pub scenario: String,
    #[arg(long, default_value_t = 2000)]
    pub nsim: usize,
    /// Design config JSON; calibrated defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write full results with histograms as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub design: String,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stage: u8,
    /// Simulations per grid cell; the plan's value when absent.
    #[arg(long)]
    pub nsim: Option<usize>,
    /// Calibration plan JSON; the shipped plan when absent.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Stage 2: design config whose threshold is scanned.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Stage 2: stop at the first threshold meeting the requirement.
    #[arg(long)]
    pub early_stop: bool,
    /// Stage 2: simulate only the guard scenario.
    #[arg(long)]
    pub guard_only: bool,
    /// Stage 2: binary search over the threshold grid.
    #[arg(long)]
    pub bisect: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub trial: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Isotonic,
    OrderingAverage,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, default_value = "all")]
    pub scenario: String,
    #[arg(long, default_value_t = 2000)]
    pub nsim: usize,
    #[arg(long, value_enum, default_value_t = Mode::Isotonic)]
    pub mode: Mode,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CaseStudyArgs {
    /// Design id, or "all".
    #[arg(long, default_value = "all")]
    pub design: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub trial: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Session directory; COMBODOSE_DATA_DIR or ./sessions when absent.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Run(_) => 1,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &PathBuf) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn trial_config(path: Option<&PathBuf>) -> CliResult<TrialConfig> {
    let cfg = match path {
        Some(p) => serde_json::from_str(&read(p)?).map_err(config_err)?,
        None => TrialConfig::default(),
    };
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn design_config(id: &str, path: Option<&PathBuf>) -> CliResult<DesignConfig> {
    let cfg = match path {
        Some(p) => DesignConfig::from_json(&read(p)?).map_err(config_err)?,
        None => DesignConfig::default_for(id).map_err(config_err)?,
    };
    if cfg.id() != DesignConfig::default_for(id).map_err(config_err)?.id() {
        return Err(config_err(format!("config is for '{}', not '{id}'", cfg.id())));
    }
    Ok(cfg)
}

fn select_scenarios(names: &str, file: Option<&PathBuf>) -> CliResult<Vec<Scenario>> {
    let pool = match file {
        Some(p) => load_scenarios(p).map_err(config_err)?,
        None => builtin(),
    };
    if names.eq_ignore_ascii_case("all") {
        return Ok(pool);
    }
    names.split(',')
        .map(|name| match file {
            Some(_) => pool
                .iter()
                .find(|s| s.name == name.trim())
                .cloned()
                .ok_or_else(|| config_err(format!("unknown scenario '{name}'"))),
            None => builtin_by_name(name).map_err(config_err),
        })
        .collect()
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| run_err(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(run_err),
    }
}

fn csv_bytes<F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>>(f: F) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    f(&mut w).map_err(run_err)?;
    w.into_inner().map_err(run_err)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn run_simulate(a: &SimulateArgs) -> CliResult<()> {
    let design = design_config(&a.design, a.config.as_ref())?;
    let cfg = trial_config(a.common.trial.as_ref())?;
    let scs = select_scenarios(&a.scenario, a.common.scenarios.as_ref())?;
    if a.nsim == 0 {
        return Err(config_err("nsim must be at least 1"));
    }
    let sim = SimSettings {
        nsim: a.nsim,
        master_seed: a.common.seed,
    };
    let ocs = scs
        .iter()
        .map(|sc| simulate(&design, sc, &cfg, sim).map_err(run_err))
        .collect::<CliResult<Vec<_>>>()?;
    let bytes = csv_bytes(|w| {
        for oc in &ocs {
            w.serialize(oc.row())?;
        }
        Ok(())
    })?;
    emit(a.common.out.as_ref(), &bytes)?;
    if let Some(p) = &a.json {
        let json = serde_json::to_vec_pretty(&ocs).map_err(run_err)?;
        emit(Some(p), &json)?;
    }
    Ok(())
}

fn run_calibrate(a: &CalibrateArgs) -> CliResult<()> {
    let plan = match &a.plan {
        Some(p) => CalibrationPlan::from_json(&read(p)?, &a.design).map_err(config_err)?,
        None => CalibrationPlan::shipped(&a.design).map_err(config_err)?,
    };
    plan.validate().map_err(config_err)?;
    let cfg = trial_config(a.trial.as_ref())?;
    let bytes = if a.stage == 1 {
        let nsim = a.nsim.unwrap_or(plan.stage1_nsim);
        let rows = calibrate_stage1(&plan, &cfg, nsim, a.seed).map_err(run_err)?;
        csv_bytes(|w| {
            let mut header = vec!["rank".to_string()];
            if let Some(r) = rows.first() {
                header.extend(r.values.iter().map(|(n, _)| n.clone()));
            }
            header.extend(plan.stage1_scenarios.iter().map(|s| format!("pcs_{s}")));
            header.extend(["geometric_mean".into(), "arithmetic_mean".into()]);
            w.write_record(&header)?;
            for r in &rows {
                let mut rec = vec![r.rank.to_string()];
                rec.extend(r.values.iter().map(|(_, v)| v.to_string()));
                rec.extend(r.pcs.iter().map(|p| p.to_string()));
                rec.push(r.geometric_mean.to_string());
                rec.push(r.arithmetic_mean.to_string());
                w.write_record(&rec)?;
            }
            Ok(())
        })?
    } else {
        let base = design_config(&a.design, a.config.as_ref())?;
        let nsim = a.nsim.unwrap_or(plan.stage2_nsim);
        let opts = Stage2Options {
            early_stop: a.early_stop,
            guard_only: a.guard_only,
            bisect: a.bisect,
        };
        let res = calibrate_stage2(&plan, &base, &cfg, nsim, a.seed, opts).map_err(run_err)?;
        match res.chosen {
            Some(e) => eprintln!("chosen epsilon {e}"),
            None => eprintln!("no epsilon meets the {} no-selection threshold", plan.threshold),
        }
        csv_bytes(|w| {
            w.write_record(["epsilon", "scenario", "pcs", "no_selection", "mean_patients_at_toxic", "chosen"])?;
            for p in &res.points {
                for (k, sc) in p.scenarios.iter().enumerate() {
                    w.write_record([
                        p.epsilon.to_string(),
                        sc.clone(),
                        opt(p.pcs[k]),
                        p.no_selection[k].to_string(),
                        p.mean_patients_at_toxic[k].to_string(),
                        (res.chosen == Some(p.epsilon)).to_string(),
                    ])?;
                }
            }
            Ok(())
        })?
    };
    emit(a.out.as_ref(), &bytes)
}

fn run_benchmark(a: &BenchmarkArgs) -> CliResult<()> {
    let cfg = trial_config(a.common.trial.as_ref())?;
    let scs = select_scenarios(&a.scenario, a.common.scenarios.as_ref())?;
    if a.nsim == 0 {
        return Err(config_err("nsim must be at least 1"));
    }
    let mode = match a.mode {
        Mode::Isotonic => BenchmarkMode::Isotonic,
        Mode::OrderingAverage => BenchmarkMode::OrderingAverage,
    };
    let sim = SimSettings {
        nsim: a.nsim,
        master_seed: a.common.seed,
    };
    let rows = scs
        .iter()
        .map(|sc| benchmark(sc, &cfg, mode, sim).map(|s| (sc.name.clone(), s)).map_err(run_err))
        .collect::<CliResult<Vec<_>>>()?;
    let bytes = csv_bytes(|w| {
        w.write_record(["scenario", "nsim", "seed", "pcs", "pas", "toxic_selection"])?;
        for (name, s) in &rows {
            w.write_record([
                name.clone(),
                s.nsim.to_string(),
                a.common.seed.to_string(),
                opt(s.pcs),
                s.pas.to_string(),
                s.toxic_selection.to_string(),
            ])?;
        }
        Ok(())
    })?;
    emit(a.common.out.as_ref(), &bytes)
}

fn run_casestudy(a: &CaseStudyArgs) -> CliResult<()> {
    let cfg = trial_config(a.trial.as_ref())?;
    let designs = if a.design.eq_ignore_ascii_case("all") {
        DesignConfig::defaults()
    } else {
        vec![DesignConfig::default_for(&a.design).map_err(config_err)?]
    };
    let tape = build_tape(&observed(), a.seed).map_err(run_err)?;
    let mut text = String::new();
    for (k, d) in designs.iter().enumerate() {
        if k > 0 {
            text.push('\n');
        }
        text.push_str(&render(&replay(d, &tape, &cfg).map_err(run_err)?));
    }
    emit(None, text.as_bytes())
}

fn run_serve(a: &ServeArgs) -> CliResult<()> {
    let dir = a
        .data_dir
        .clone()
        .or_else(|| std::env::var_os("COMBODOSE_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("sessions"));
    let store = Store::open(&dir).map_err(config_err)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(run_err)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", a.port))
            .await
            .map_err(run_err)?;
        eprintln!("listening on port {} with sessions in {}", a.port, dir.display());
        axum::serve(listener, api::router(Arc::new(store)))
            .await
            .map_err(run_err)
    })
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Benchmark(a) => run_benchmark(a),
        Command::Casestudy(a) => run_casestudy(a),
        Command::Serve(a) => run_serve(a),
    }
}
