use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pcrlab::config::{keys_help, RunConfig};
use pcrlab::dgp::{read_sample_csv, write_sample_csv};
use pcrlab::format::fmt17;
use pcrlab::harness::{
    run_sweep, write_cells_csv, write_replications_csv, Cell, CellPopulation, DiagnosticSummary, SweepSummary,
};
use pcrlab::risk::{decomposition_csv_row, DECOMPOSITION_CSV_HEADER};
use pcrlab::{pcr_fit, rotation_and_infeasible, PcrError, Simulator};

#[derive(Parser)]
#[command(name = "pcrlab", version, about = "Principal component regression experiments", after_long_help = keys_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (or prefix for `sweep` and `diagnose`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured thread count.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one sample for the first grid cell and write it as CSV.
    Simulate(Common),
    /// Fit PCR to a sample CSV and write the JSON report.
    Fit {
        /// Sample CSV with header `y,x1,...,xp`.
        sample: PathBuf,
        /// Number of principal components.
        #[arg(short = 'k', long = "components", default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Excess-risk decomposition for one simulated sample of the first cell.
    Decompose(Common),
    /// Monte Carlo sweep over the configured grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Exit with status 1 if a configured band is violated.
        #[arg(long)]
        check: bool,
    },
    /// Concentration-event frequencies and norms per cell.
    Diagnose(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                PcrError::RankDeficient { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load(common: &Common) -> pcrlab::Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::load("", std::env::vars())?,
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(threads) = common.threads {
        config.threads = threads;
    }
    config.validate()?;
    Ok(config)
}

fn out_path(common: &Common, config: &RunConfig) -> Option<PathBuf> {
    common.out.clone().or_else(|| config.out.as_ref().map(PathBuf::from))
}

/// Writes to `path`, or stdout when absent. Content is produced before the file is created.
fn emit(path: Option<&Path>, bytes: &[u8]) -> pcrlab::Result<()> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            f.write_all(bytes)?;
            f.flush()?;
        }
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn json<T: Serialize>(value: &T) -> pcrlab::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn run(command: Command) -> pcrlab::Result<ExitCode> {
    match command {
        Command::Simulate(common) => {
            let config = load(&common)?;
            let (cell, spec) = config.first_cell()?;
            let sample = Simulator::new(&spec)?.sample(cell.t, config.seed)?;
            let mut bytes = Vec::new();
            write_sample_csv(&sample, &mut bytes)?;
            emit(out_path(&common, &config).as_deref(), &bytes)?;
            eprintln!("seed used: {}", config.seed);
            eprintln!("T = {}, p = {}, K = {}", cell.t, cell.p, cell.k);
        }
        Command::Fit { sample, k, out } => {
            let sample = read_sample_csv(BufReader::new(File::open(&sample)?))?;
            let max = sample.t().min(sample.p());
            if k == 0 || k > max {
                return Err(PcrError::ComponentCount { k, max });
            }
            let fit = pcr_fit(&sample, k)?;
            let report = fit.report(&sample);
            emit(out.as_deref(), &json(&report)?)?;
            eprintln!("empirical risk R_T(theta_hat) = {}", fmt17(report.empirical_risk));
        }
        Command::Decompose(common) => {
            let config = load(&common)?;
            let (cell, _) = config.first_cell()?;
            let population = CellPopulation::new(&config.template(), cell, config.seed)?;
            let sample = population.simulator.sample(cell.t, config.seed)?;
            let fit = pcr_fit(&sample, cell.k)?;
            let rot = rotation_and_infeasible(&fit, &population.pca, &sample)?;
            let decomp = pcrlab::decompose_excess_risk(&fit, &rot, &population.pca, &population.moments, &sample)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(DECOMPOSITION_CSV_HEADER)?;
            w.write_record(decomposition_csv_row(
                &decomp,
                cell.t,
                cell.p,
                cell.k,
                config.alpha,
                config.rho,
                config.seed,
            ))?;
            let bytes = w.into_inner().map_err(|e| PcrError::Io(e.into_error()))?;
            emit(out_path(&common, &config).as_deref(), &bytes)?;
            eprintln!("seed used: {}", config.seed);
            eprintln!("empirical risk R_T(theta_hat) = {}", fmt17(fit.empirical_risk(&sample)));
            match decomp.bound_holds() {
                Some(true) => eprintln!("bound holds with slack {}", fmt17(decomp.bound_slack)),
                Some(false) => eprintln!("bound VIOLATED with slack {}", fmt17(decomp.bound_slack)),
                None => eprintln!("degenerate replication: bound not assessed"),
            }
        }
        Command::Sweep { common, check } => {
            let config = load(&common)?;
            let sweep = config.sweep_config()?;
            let cells = run_sweep(&sweep)?;
            let mut summary = SweepSummary::new(&cells, config.seed, config.replications);
            let verdict = summary
                .check(&cells, config.slope_check(), config.bound_check())
                .clone();

            let mut cell_csv = Vec::new();
            write_cells_csv(&cells, &mut cell_csv)?;
            let mut rep_csv = Vec::new();
            write_replications_csv(&cells, config.alpha, config.rho, &mut rep_csv)?;
            let summary_json = json(&summary)?;
            match out_path(&common, &config) {
                Some(prefix) => {
                    emit(Some(&with_suffix(&prefix, ".csv")), &cell_csv)?;
                    emit(Some(&with_suffix(&prefix, "_replications.csv")), &rep_csv)?;
                    emit(Some(&with_suffix(&prefix, ".json")), &summary_json)?;
                }
                None => emit(None, &cell_csv)?,
            }
            eprintln!("seed used: {}", config.seed);
            for (response, fit) in &summary.slopes {
                if let Some(fit) = fit {
                    eprintln!("{}: slope {:.4}, R^2 {:.4}", response.name(), fit.slope, fit.r_squared);
                }
            }
            for message in &verdict.messages {
                eprintln!("{message}");
            }
            if check && !verdict.passed {
                eprintln!("check FAILED");
                return Ok(ExitCode::from(1));
            }
        }
        Command::Diagnose(common) => {
            let mut config = load(&common)?;
            config.diagnostics = true;
            let cells = run_sweep(&config.sweep_config()?)?;
            #[derive(Serialize)]
            struct Row<'a> {
                cell: Cell,
                failures: usize,
                diagnostics: &'a Option<DiagnosticSummary>,
            }
            let rows: Vec<Row> = cells
                .iter()
                .map(|c| Row {
                    cell: c.cell,
                    failures: c.failures,
                    diagnostics: &c.diagnostics,
                })
                .collect();
            emit(out_path(&common, &config).as_deref(), &json(&rows)?)?;
            eprintln!("seed used: {}", config.seed);
            for c in &cells {
                if let Some(d) = &c.diagnostics {
                    eprintln!(
                        "T={} p={} K={}: eigenvalue event {:.3}, score Gram event {:.3}, median ||HH'-I|| {:.3e}",
                        c.cell.t,
                        c.cell.p,
                        c.cell.k,
                        d.eigenvalue_event_freq,
                        d.score_gram_event_freq,
                        d.median_rotation_deviation
                    );
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
