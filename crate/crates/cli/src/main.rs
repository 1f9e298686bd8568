use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sbheom::hierarchy::CouplingConvention;
use sbheom::runner::validate::{validate, DephasingOptions, ValidateOptions};
use sbheom::runner::{
    emit_plots, preset, run_scenario, scan_settings, write_artifacts, write_failure, RunConfig,
    RunError, PRESETS,
};

/// Worker-count override for all parallel stages.
const THREADS_VAR: &str = "SBHEOM_THREADS";

#[derive(Parser)]
#[command(name = "sbheom", version, about = "Spin-boson HEOM with minimal-dissipation thermodynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write tables into the output directory.
    Run {
        #[command(flatten)]
        source: Source,
        /// Skip the convergence scan and use the configured settings.
        #[arg(long)]
        no_scan: bool,
    },
    /// Run the oracle and invariant suites.
    Validate {
        #[arg(long, value_enum, default_value_t = Convention::Standard)]
        coupling_convention: Convention,
        /// Only the closed-system and weak-coupling suites.
        #[arg(long)]
        quick: bool,
    },
    /// Run only the convergence scan and write `scan.json`.
    Scan {
        #[command(flatten)]
        source: Source,
    },
    /// Write gnuplot scripts for a completed run directory.
    Plots { dir: PathBuf },
    /// Print a preset configuration as TOML.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
    },
}

#[derive(Args)]
struct Source {
    /// TOML configuration file.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Overrides `output.directory`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Parallel right-hand side and tomography.
    #[arg(long)]
    parallel: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Standard,
    PaperLiteral,
}

impl Source {
    fn load(&self) -> Result<RunConfig, RunError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    sbheom::runner::ConfigError(format!("{}: {e}", path.display()))
                })?;
                RunConfig::from_toml(&text)?
            }
            (None, Some(name)) => preset(name).expect("validated by clap"),
            (None, None) => unreachable!("clap requires one source"),
        };
        if let Some(dir) = &self.output {
            cfg.output.directory = dir.clone();
        }
        cfg.heom.parallel |= self.parallel;
        Ok(cfg)
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| format!("{THREADS_VAR}={value} is not a worker count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn report(err: &RunError) -> ExitCode {
    eprintln!("error [{:?}]: {err}", err.stage());
    ExitCode::from(err.exit_code() as u8)
}

fn run(source: &Source, no_scan: bool) -> ExitCode {
    let mut cfg = match source.load() {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    if no_scan {
        cfg.scan = None;
    }
    let dir = cfg.output.directory.clone();
    match run_scenario(&cfg) {
        Ok(artifacts) => match write_artifacts(&dir, &artifacts) {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
                if let Some(s) = &artifacts.provenance.generator_truncated {
                    eprintln!(
                        "note: generator stops at t = {} (condition number {:.2e})",
                        s.time, s.condition
                    );
                }
                ExitCode::SUCCESS
            }
            Err(e) => report(&RunError::Output(e)),
        },
        Err(failure) => {
            if let Err(e) = write_failure(&dir, &cfg, &failure) {
                eprintln!("could not flush partial output: {e}");
            }
            report(&failure.error)
        }
    }
}

fn scan(source: &Source) -> ExitCode {
    let cfg = match source.load() {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    if cfg.scan.is_none() {
        return report(&RunError::Config(sbheom::runner::ConfigError(
            "configuration has no [scan] table".into(),
        )));
    }
    let report_result = cfg.validate().map_err(RunError::from).and_then(|_| scan_settings(&cfg));
    match report_result {
        Ok((settings, Some(rep))) => {
            let dir = &cfg.output.directory;
            let text = serde_json::to_string_pretty(&rep).expect("report serializes");
            if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("scan.json"), &text)) {
                return report(&RunError::Output(e));
            }
            for e in &rep.entries {
                println!(
                    "L_max {:>2}  n_pade {:>2}  dt {:<5}  ADOs {:>7}  diff {}",
                    e.setting.l_max,
                    e.setting.n_pade,
                    e.setting.dt,
                    e.n_ados,
                    e.diff_to_next.map_or("-".into(), |d| format!("{d:.3e}"))
                );
            }
            println!("selected L_max {} n_pade {}", settings.l_max, settings.n_pade);
            ExitCode::SUCCESS
        }
        Ok((_, None)) => unreachable!("scan table checked above"),
        Err(e) => report(&e),
    }
}

fn plots(dir: &Path) -> ExitCode {
    match emit_plots(dir) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::Run { source, no_scan } => run(&source, no_scan),
        Command::Scan { source } => scan(&source),
        Command::Plots { dir } => plots(&dir),
        Command::Preset { name } => {
            print!("{}", preset(&name).expect("validated by clap").to_toml());
            ExitCode::SUCCESS
        }
        Command::Validate {
            coupling_convention,
            quick,
        } => {
            let convention = match coupling_convention {
                Convention::Standard => CouplingConvention::Standard,
                Convention::PaperLiteral => CouplingConvention::PaperLiteral,
            };
            let opts = ValidateOptions {
                dephasing: DephasingOptions {
                    convention,
                    ..DephasingOptions::default()
                },
                quick,
            };
            let rep = validate(&opts);
            for c in &rep.checks {
                println!("{c}");
            }
            for (suite, secs) in &rep.seconds {
                println!("suite {suite}: {secs:.1} s");
            }
            if rep.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} check(s) failed", rep.failures().count());
                ExitCode::from(1)
            }
        }
    }
}
