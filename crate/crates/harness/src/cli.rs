//! `fim-mimo` command-line interface.
//!
//! Exit codes: 0 on success, 1 for configuration or I/O errors, 2 when a
//! numerical routine fails or a numerical check exceeds its tolerance.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fim_core::gradcheck::{run_gradcheck, InstanceLimits};

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::experiment::{demo, run, with_threads};
use crate::table::{config_hash, Format};

/// Tolerance of the `gradcheck` subcommand on the maximum relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "FIM_MIMO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fim-mimo", version, about = "Capacity optimization for MIMO links between flexible intelligent metasurfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a configuration file.
    Run,
    /// Compare analytic shape gradients with finite differences.
    Gradcheck,
    /// Evaluate all four schemes on one realization and print a summary.
    Demo,
    /// Check a configuration file without running it.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    /// Realizations per sweep point (instances for `gradcheck`); overrides the configuration.
    #[arg(long, global = true)]
    pub realizations: Option<usize>,
    /// Worker threads; falls back to FIM_MIMO_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl CommonArgs {
    fn load_config(&self, required: bool) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None if required => return Err(HarnessError::Config("--config <path> is required".into())),
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.experiment.seed = seed;
        }
        if let Some(n) = self.realizations {
            cfg.experiment.realizations = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn threads(&self) -> Result<Option<usize>, HarnessError> {
        if self.threads.is_some() {
            return Ok(self.threads);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .map(Some)
                .map_err(|_| HarnessError::Config(format!("{THREADS_ENV}: `{v}` is not a thread count"))),
            Err(_) => Ok(None),
        }
    }

    fn format(&self) -> Format {
        match self.format {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        }
    }

    fn emit(&self, text: &str, stdout: &mut dyn Write) -> Result<(), HarnessError> {
        match &self.out {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| HarnessError::Io(format!("cannot write {}: {e}", path.display()))),
            None => stdout.write_all(text.as_bytes()).map_err(HarnessError::from),
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn main_with_args<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(rendered.as_bytes()) } else { stderr.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, HarnessError> {
    let args = &cli.common;
    match cli.command {
        Command::Run => {
            let cfg = args.load_config(true)?;
            let output = with_threads(args.threads()?, || run(&cfg))??;
            args.emit(&output.render(args.format()), stdout)?;
            Ok(0)
        }
        Command::Validate => {
            let cfg = args.load_config(true)?;
            writeln!(stdout, "ok config_hash={}", config_hash(&cfg))?;
            Ok(0)
        }
        Command::Gradcheck => {
            let seed = args.seed.unwrap_or(7);
            let instances = args.realizations.unwrap_or(50);
            if instances == 0 {
                return Err(HarnessError::Config("realizations: must be at least 1".into()));
            }
            let report = run_gradcheck(seed, instances, &InstanceLimits::default())?;
            writeln!(stdout, "max_rel_err={:e}", report.max_rel_err)?;
            writeln!(stdout, "instances={} worst_instance={} tolerance={:e}", report.instances, report.worst_instance, GRADCHECK_TOLERANCE)?;
            if report.max_rel_err <= GRADCHECK_TOLERANCE {
                Ok(0)
            } else {
                writeln!(stdout, "FAILED: gradient error above tolerance")?;
                Ok(2)
            }
        }
        Command::Demo => {
            let cfg = args.load_config(false)?;
            let results = with_threads(args.threads()?, || demo(&cfg))??;
            writeln!(stdout, "seed {} realization 0", cfg.experiment.seed)?;
            for r in &results {
                writeln!(stdout, "{:<8} capacity {:>10.6} bps/Hz", r.scheme.name(), r.capacity)?;
            }
            let cap = |name: &str| results.iter().find(|r| r.scheme.name() == name).map(|r| r.capacity);
            let mut code = 0;
            for (fim, raa) in [("FIM-WPA", "RAA-WPA"), ("FIM-EPA", "RAA-EPA")] {
                if let (Some(f), Some(r)) = (cap(fim), cap(raa)) {
                    let ok = f >= r;
                    writeln!(stdout, "{fim} >= {raa}: {}", if ok { "ok" } else { "VIOLATED" })?;
                    if !ok {
                        code = 2;
                    }
                }
            }
            Ok(code)
        }
    }
}
