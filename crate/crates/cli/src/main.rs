//! `pmgkit` command-line front end.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 data error,
//! 3 estimation failure (including a failed cell marked fatal).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pmgkit::indicators::ShockVariant;
use pmgkit::panel_data::{load_panel, CsvSchema, PanelDataset};
use pmgkit::report::{
    cell_spec, diagnostic_tables, estimate_cell, load_input, prepare_panel, present_canonical,
    run_replication, write_bundle, Format, RunConfig, Table,
};
use pmgkit::simulate::{
    monte_carlo, simulate_ecm_panel, DgpParams, MonteCarloOptions, MonteCarloReport, PanelProcess,
    PanelTest, Procedure,
};
use pmgkit::Error;

#[derive(Parser, Debug)]
#[command(
    name = "pmgkit",
    version,
    about = "Bank stability panels: indicators, diagnostics and PMG estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Run configuration file (key = value lines).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Long-format panel CSV.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Use a simulated bank panel instead of an input file.
    #[arg(long)]
    simulate: bool,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output format: text, csv or json (repeatable for `replicate`).
    #[arg(long, value_name = "FORMAT")]
    format: Vec<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Z-score variant: boyd (z1) or yeyati (z2).
    #[arg(long, value_name = "VARIANT")]
    zscore: Option<String>,
    /// Shock variants: returns, positive, negative or all.
    #[arg(long, value_name = "LIST")]
    shocks: Option<String>,
    /// Entity to leave out (repeatable).
    #[arg(long = "drop-entity", value_name = "NAME")]
    drop_entity: Vec<String>,
    /// Any configuration key, as KEY=VALUE (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and validate a panel CSV; report its shape and missing cells.
    Ingest(Common),
    /// Add Z-scores, oil-price shocks and log assets to a panel.
    Derive(Common),
    /// Cross-sectional dependence and panel unit-root tests.
    Diagnose(Common),
    /// Estimate one model of the grid.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Model number, 1 to 9.
        #[arg(long, default_value_t = 1)]
        model: usize,
    },
    /// Run the full shock-variant by model grid and write every table.
    Replicate(Common),
    /// Write a simulated panel as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Generic two-regressor ECM panel instead of a bank panel.
        #[arg(long)]
        ecm: bool,
        #[arg(long, default_value_t = 17)]
        groups: usize,
        #[arg(long, default_value_t = 40)]
        periods: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
    },
    /// Repeat an estimator or a test on simulated panels.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        /// pmg, mg, or a test: pesaran_cd, friedman, frees, llc, ips, fisher_adf, fisher_pp.
        #[arg(long, default_value = "pmg")]
        procedure: String,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 17)]
        groups: usize,
        #[arg(long, default_value_t = 40)]
        periods: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Series for test procedures: iid, rw, or ar:PHI.
        #[arg(long, default_value = "iid")]
        process: String,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Estimation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Estimation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Estimation(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidConfig(_) => Failure::Usage(msg),
            ref err if err.is_estimation_failure() => Failure::Estimation(msg),
            Error::NonConvergence { .. } | Error::LineSearch { .. } => Failure::Estimation(msg),
            _ => Failure::Data(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn build_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &c.input {
        cfg.input = Some(p.clone());
        cfg.simulate = false;
    }
    if c.simulate {
        cfg.simulate = true;
        cfg.input = None;
    }
    if let Some(s) = c.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(z) = &c.zscore {
        cfg.set("zscore", z)?;
    }
    if let Some(s) = &c.shocks {
        cfg.set("shocks", s)?;
    }
    for d in &c.drop_entity {
        cfg.set("drop_entity", d)?;
    }
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if !c.format.is_empty() {
        cfg.set("formats", &c.format.join(","))?;
    }
    if let Some(o) = &c.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn single_format(c: &Common, default: Format) -> Result<Format, Failure> {
    match c.format.as_slice() {
        [] => Ok(default),
        [f] => Ok(Format::parse(f)?),
        _ => Err(Failure::Usage(
            "this command takes a single --format".into(),
        )),
    }
}

/// Write to `out/name` when an output directory is set, else to stdout.
fn deliver(out: Option<&Path>, name: &str, bytes: &[u8]) -> Outcome {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, bytes)?;
            eprintln!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn panel_csv(data: &PanelDataset, cfg: &RunConfig) -> Result<Vec<u8>, Failure> {
    Ok(data
        .to_csv_string(&cfg.entity_column, &cfg.period_column)?
        .into_bytes())
}

fn ingest(c: &Common) -> Outcome {
    let cfg = build_config(c)?;
    let path = cfg
        .input
        .clone()
        .ok_or_else(|| Failure::Usage("ingest needs --input".into()))?;
    let bytes = fs::read(&path)?;
    let data = load_panel(
        bytes.as_slice(),
        &CsvSchema::new(cfg.entity_column.clone(), cfg.period_column.clone()),
    )?;
    let mut report = format!(
        "{}: {} entities, {} periods ({}..{})\n",
        path.display(),
        data.n_entities(),
        data.n_periods(),
        data.periods().first().copied().unwrap_or_default(),
        data.periods().last().copied().unwrap_or_default(),
    );
    for v in data.variables() {
        let missing = v.grid.iter().flatten().filter(|x| x.is_none()).count();
        report.push_str(&format!("  {:<16} missing {missing}\n", v.meta.name));
    }
    eprint!("{report}");
    if c.out.is_some() {
        deliver(cfg.out.as_deref(), "panel.csv", &panel_csv(&data, &cfg)?)?;
    }
    Ok(())
}

fn derive(c: &Common) -> Outcome {
    let cfg = build_config(c)?;
    let (data, report) = prepare_panel(load_input(&cfg)?.data, &cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let data = data.select(&present_canonical(&data))?;
    deliver(cfg.out.as_deref(), "derived.csv", &panel_csv(&data, &cfg)?)
}

fn diagnose(c: &Common) -> Outcome {
    let cfg = build_config(c)?;
    let format = single_format(c, Format::Text)?;
    let (data, _) = prepare_panel(load_input(&cfg)?.data, &cfg)?;
    let (cd, ur) = diagnostic_tables(&data, &cfg.unit_root)?;
    let ext = format.extension();
    match cfg.out.as_deref() {
        Some(dir) => {
            deliver(Some(dir), &format!("cross_section.{ext}"), &cd.emit(format))?;
            deliver(Some(dir), &format!("unit_root.{ext}"), &ur.emit(format))?;
        }
        None => {
            let mut out = cd.emit(format);
            if format == Format::Text {
                out.push(b'\n');
            }
            out.extend(ur.emit(format));
            deliver(None, "", &out)?;
        }
    }
    Ok(())
}

fn estimate(c: &Common, model: usize) -> Outcome {
    let cfg = build_config(c)?;
    let shock = match cfg.shocks.as_slice() {
        [s] => *s,
        _ if c.shocks.is_none() => ShockVariant::Returns,
        _ => {
            return Err(Failure::Usage(
                "estimate takes a single shock variant".into(),
            ))
        }
    };
    let format = single_format(c, Format::Text)?;
    cell_spec(&cfg, shock, model)?;
    let (data, _) = prepare_panel(load_input(&cfg)?.data, &cfg)?;
    let table = estimate_cell(&data, &cfg, shock, model)?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    let name = format!(
        "estimation_{}_model{model}.{}",
        shock.label(),
        format.extension()
    );
    deliver(cfg.out.as_deref(), &name, &table.emit(format))
}

fn replicate(c: &Common) -> Outcome {
    let cfg = build_config(c)?;
    let bundle = run_replication(&cfg)?;
    for w in &bundle.warnings {
        eprintln!("warning: {w}");
    }
    match cfg.out.as_deref() {
        Some(dir) => {
            let written = write_bundle(&bundle, dir, &cfg.formats)?;
            eprintln!("wrote {} files to {}", written.len(), dir.display());
        }
        None => {
            let format = cfg.formats.first().copied().unwrap_or(Format::Text);
            for grid in bundle.grids() {
                deliver(None, "", &grid.emit(format))?;
            }
        }
    }
    let fatal = bundle.fatal_failures(&cfg.fatal);
    if let Some(first) = fatal.first() {
        let reason = match &first.outcome {
            pmgkit::report::CellOutcome::Failed { error, .. } => error.clone(),
            pmgkit::report::CellOutcome::Estimated { .. } => String::new(),
        };
        return Err(Failure::Estimation(format!(
            "{} fatal cell(s) failed; first: {} model {}: {reason}",
            fatal.len(),
            first.shock.label(),
            first.model
        )));
    }
    Ok(())
}

fn ecm_params(groups: usize, periods: usize, noise: f64, seed: u64) -> DgpParams {
    DgpParams::new(groups, periods)
        .with_noise(noise)
        .with_seed(seed)
}

fn simulate(c: &Common, ecm: bool, groups: usize, periods: usize, noise: f64) -> Outcome {
    let mut cfg = build_config(c)?;
    let data = if ecm {
        let params = ecm_params(groups, periods, noise, cfg.sim.seed);
        cfg.entity_column = "group".into();
        cfg.period_column = "period".into();
        simulate_ecm_panel(&params)?
    } else {
        cfg.simulate = true;
        cfg.input = None;
        load_input(&cfg)?.data
    };
    deliver(
        cfg.out.as_deref(),
        "simulated.csv",
        &panel_csv(&data, &cfg)?,
    )
}

fn parse_process(s: &str) -> Result<PanelProcess, Failure> {
    let s = s.trim().to_ascii_lowercase();
    match s.as_str() {
        "iid" => Ok(PanelProcess::IidNormal),
        "rw" | "random_walk" => Ok(PanelProcess::RandomWalk),
        _ => s
            .strip_prefix("ar:")
            .and_then(|phi| phi.parse().ok())
            .map(|phi| PanelProcess::Ar { phi })
            .ok_or_else(|| Failure::Usage(format!("unknown process `{s}` (iid, rw, ar:PHI)"))),
    }
}

fn mc_text(r: &MonteCarloReport) -> String {
    let mut s = format!(
        "{}: {} replications ({} failed), master seed {}\n{}\n",
        r.procedure, r.reps, r.failures, r.master_seed, r.seed_policy
    );
    for p in &r.parameters {
        s.push_str(&format!(
            "  {:<8} truth {:>9.4}  mean {:>9.4}  bias {:>9.4}  rmse {:>8.4}  coverage {}\n",
            p.name,
            p.truth,
            p.mean,
            p.bias,
            p.rmse,
            p.coverage
                .map_or_else(|| "n/a".into(), |c| format!("{:.3}", c))
        ));
    }
    for rr in &r.rejection_rates {
        s.push_str(&format!("  rejection at {:.2}: {:.3}\n", rr.level, rr.rate));
    }
    if let Some(n) = r.rho_mean_negative_rate {
        s.push_str(&format!(
            "  share with negative mean adjustment speed: {n:.3}\n"
        ));
    }
    s
}

fn montecarlo(
    c: &Common,
    procedure: &str,
    reps: usize,
    groups: usize,
    periods: usize,
    noise: f64,
    process: &str,
) -> Outcome {
    let cfg = build_config(c)?;
    let format = single_format(c, Format::Text)?;
    let params = ecm_params(groups, periods, noise, 0);
    let proc_ = match procedure {
        "pmg" => Procedure::Pmg {
            params,
            options: cfg.estimator,
        },
        "mg" => Procedure::MeanGroup { params },
        other => Procedure::Test {
            test: PanelTest::parse(other)?,
            process: parse_process(process)?,
            n_groups: groups,
            n_periods: periods,
            unit_root: cfg.unit_root,
        },
    };
    let report = monte_carlo(&proc_, &MonteCarloOptions::new(reps, cfg.sim.seed))?;
    let bytes = match format {
        Format::Json => {
            let mut v =
                serde_json::to_vec_pretty(&report).map_err(|e| Failure::Data(e.to_string()))?;
            v.push(b'\n');
            v
        }
        Format::Text => mc_text(&report).into_bytes(),
        Format::Csv => {
            let mut s = String::from("parameter,truth,mean,bias,rmse,mc_std_error,coverage\n");
            for p in &report.parameters {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    p.name,
                    p.truth,
                    p.mean,
                    p.bias,
                    p.rmse,
                    p.mc_std_error.map_or(String::new(), |v| v.to_string()),
                    p.coverage.map_or(String::new(), |v| v.to_string())
                ));
            }
            for r in &report.rejection_rates {
                s.push_str(&format!("rejection_{},,{},,,,\n", r.level, r.rate));
            }
            s.into_bytes()
        }
    };
    deliver(
        cfg.out.as_deref(),
        &format!("montecarlo.{}", format.extension()),
        &bytes,
    )
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Ingest(c) => ingest(c),
        Command::Derive(c) => derive(c),
        Command::Diagnose(c) => diagnose(c),
        Command::Estimate { common, model } => estimate(common, *model),
        Command::Replicate(c) => replicate(c),
        Command::Simulate {
            common,
            ecm,
            groups,
            periods,
            noise,
        } => simulate(common, *ecm, *groups, *periods, *noise),
        Command::Montecarlo {
            common,
            procedure,
            reps,
            groups,
            periods,
            noise,
            process,
        } => montecarlo(common, procedure, *reps, *groups, *periods, *noise, process),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
