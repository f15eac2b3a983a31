use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

use sca_cli::config::{Config, Mode};
use sca_cli::dataset::{Dataset, Format};
use sca_cli::error::{CliError, CliResult, EXIT_CONFIG, EXIT_OK, EXIT_SELFCHECK};
use sca_cli::estimate::{read_counts, run_estimator, EstimateParams};
use sca_cli::figure::{reproduce_figure, FigureId};
use sca_cli::{selfcheck, sweep};
use sca_core::VacuumRow;

/// Environment variable overriding the number of worker threads.
const WORKERS_ENV: &str = "SCA_WORKERS";

#[derive(Parser)]
#[command(name = "sca", version, about = "State comparison amplifier model: sweeps, estimators and figure datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct OutputArgs {
    /// TOML configuration; laboratory defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output file; overrides the config. Standard output when neither is set.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VacuumRowArg {
    /// Vacuum clicks per pulse 1 - exp(-eta l g^2 alpha^2 / 2).
    PortMarginal,
    /// Vacuum clicks per pulse 1 - exp(-2 eta l g^2 alpha^2).
    DoubledExponent,
}

#[derive(Subcommand)]
enum Command {
    /// Figures of merit over the configured (N, alpha^2) grid.
    Sweep {
        #[command(flatten)]
        out: OutputArgs,
        /// Overrides sweep.mode.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Estimate pulse numbers and fidelity from a two-state count table.
    #[command(group(ArgGroup::new("photons").required(true).args(["alpha_sq", "g2a2"])))]
    Estimate {
        /// Count table (TOML, or JSON by extension) with n_a_sig, n_b_sig,
        /// n_a_vac, n_b_vac.
        counts: PathBuf,
        /// Input photon number; the target is gain^2 times this.
        #[arg(long)]
        alpha_sq: Option<f64>,
        /// Target photon number g^2 alpha^2 given directly.
        #[arg(long)]
        g2a2: Option<f64>,
        /// Detection probability at the analysis ports; from the D_A model when omitted.
        #[arg(long)]
        eta_l: Option<f64>,
        #[arg(long, value_enum, default_value = "port-marginal")]
        vacuum_row: VacuumRowArg,
        /// Amplifier and detector parameters.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Model curves for one of the published plots.
    Figure {
        #[arg(value_enum)]
        id: FigureId,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Check the model against its acceptance thresholds.
    Selfcheck,
}

fn load_config(path: Option<&Path>) -> CliResult<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn configure_workers() -> CliResult<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&w| w > 0)
        .ok_or_else(|| CliError::config(format!("{WORKERS_ENV}: {raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::config(format!("{WORKERS_ENV}: {e}")))
}

fn emit(data: &Dataset, spec: serde_json::Value, path: Option<&Path>, format: Format) -> CliResult<()> {
    let write = |w: &mut dyn Write| match format {
        Format::Csv => data.write_csv(w),
        Format::Json => data.write_json(&spec, w),
    };
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush().map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })
        }
        None => write(&mut io::stdout().lock()),
    }
}

/// Apply command-line output overrides to the config.
fn resolve_output(cfg: &mut Config, out: &OutputArgs) {
    if let Some(p) = &out.output {
        cfg.output.path = Some(p.clone());
    }
    if let Some(f) = out.format {
        cfg.output.format = Some(f);
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(value).map_err(|e| CliError::Output(e.to_string()))
}

fn run(cli: Cli) -> CliResult<u8> {
    configure_workers()?;
    match cli.command {
        Command::Sweep { out, mode } => {
            let mut cfg = load_config(out.config.as_deref())?;
            if let Some(m) = mode {
                cfg.sweep.mode = m;
            }
            resolve_output(&mut cfg, &out);
            cfg.validate()?;
            let data = sweep::run_sweep(&cfg)?;
            emit(&data, to_json(&cfg)?, cfg.output.path.as_deref(), cfg.output.resolved_format())?;
        }
        Command::Figure { id, out } => {
            let mut cfg = load_config(out.config.as_deref())?;
            resolve_output(&mut cfg, &out);
            let data = reproduce_figure(id, &cfg)?;
            let name = id.to_possible_value().map(|v| v.get_name().to_string());
            let spec = serde_json::json!({ "figure": name, "config": to_json(&cfg)? });
            emit(&data, spec, cfg.output.path.as_deref(), cfg.output.resolved_format())?;
        }
        Command::Estimate {
            counts,
            alpha_sq,
            g2a2,
            eta_l,
            vacuum_row,
            config,
            json,
        } => {
            let cfg = load_config(config.as_deref())?;
            let gain_sq = cfg.amplifier.subtraction_transmittance / cfg.amplifier.comparison_reflectance;
            let g2a2 = match (g2a2, alpha_sq) {
                (Some(x), _) => x,
                (None, Some(a)) => gain_sq * a,
                (None, None) => unreachable!("clap requires one of --alpha-sq, --g2a2"),
            };
            let eta_l = match eta_l {
                Some(x) => x,
                None => cfg.detector_set()?.da.photon_detection_probability(),
            };
            let params = EstimateParams {
                g2a2,
                eta_l,
                vacuum_row: match vacuum_row {
                    VacuumRowArg::PortMarginal => VacuumRow::PortMarginal,
                    VacuumRowArg::DoubledExponent => VacuumRow::DoubledExponent,
                },
            };
            let report = run_estimator(&read_counts(&counts)?, &params)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Output(e.to_string()))?);
            } else {
                println!("{report}");
            }
        }
        Command::Selfcheck => {
            let failed = selfcheck::run_all(io::stdout().lock()).map_err(|e| CliError::Output(e.to_string()))?;
            if failed > 0 {
                return Ok(EXIT_SELFCHECK);
            }
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("sca: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
