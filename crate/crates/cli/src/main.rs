use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use schmidt_cli::config::{ExperimentConfig, Preset};
use schmidt_cli::error::CliError;
use schmidt_cli::output::{write_all, write_json};
use schmidt_cli::runner::{compute, escalated, sweep_configs, sweep_row, SweepRow};
use schmidt_cli::validate::validate;

#[derive(Parser)]
#[command(name = "schmidt-energetics", version, about = "Local energetics of bipartite quantum systems in the Schmidt frame")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV and JSON artifacts.
    Run(Common),
    /// Run the invariant suite; exits 3 if any invariant fails.
    Validate(Common),
    /// Repeat a preset run over coupling values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Swept parameter; only the coupling `g` is supported.
        #[arg(long, default_value = "g")]
        parameter: String,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset system; replaces the config's system, or alone selects the default experiment.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory, overriding `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for ensemble branches and sweeps.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, short)]
    quiet: bool,
}

enum Failure {
    Cli(CliError),
    Validation,
    Flags(usize),
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        Failure::Cli(e)
    }
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let preset = self.preset.as_deref().map(Preset::parse).transpose()?;
        let mut config = match (&self.config, preset) {
            (Some(path), p) => {
                let mut c = ExperimentConfig::load(path)?;
                if let Some(p) = p {
                    c.system.preset = Some(p);
                    c.system.h1 = None;
                    c.system.h2 = None;
                    c.system.hint = None;
                }
                c
            }
            (None, Some(p)) => ExperimentConfig::from_preset(p),
            (None, None) => return Err(CliError::config("--config", "give --config or --preset")),
        };
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        config.check()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Run(c) | Command::Validate(c) => c,
        Command::Sweep { common, .. } => common,
    };
    let level = if common.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = common.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("worker pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Validate(c) => run_validate(c),
        Command::Sweep { common, parameter, values } => run_sweep(common, parameter, values),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Cli(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Validation) => ExitCode::from(3),
        Err(Failure::Flags(n)) => {
            eprintln!("error: {n} numerical flag(s) at or above the configured severity; see flags.json");
            ExitCode::from(4)
        }
    }
}

fn run(c: &Common) -> Result<(), Failure> {
    let config = c.resolve()?;
    let exp = compute(&config)?;
    let files = write_all(&exp, &config.out_dir)?;
    let escalated = escalated(&exp.flags(), config.fail_on_flags);
    if !c.quiet {
        println!("wrote {} files to {}", files.len(), config.out_dir.display());
        println!("U0 = {:e}, max additivity residual = {:.3e}", exp.energy().u0, exp.energy().max_additivity());
    }
    if escalated > 0 {
        return Err(Failure::Flags(escalated));
    }
    Ok(())
}

fn run_validate(c: &Common) -> Result<(), Failure> {
    let config = c.resolve()?;
    let exp = compute(&config)?;
    let report = validate(&exp)?;
    if !c.quiet {
        print!("{}", report.render());
    }
    if c.out.is_some() {
        std::fs::create_dir_all(&config.out_dir).map_err(|e| CliError::io(&config.out_dir, e))?;
        let path = config.out_dir.join("validation.json");
        write_json(&path, &serde_json::to_value(&report).expect("serializable"))?;
    }
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn run_sweep(c: &Common, parameter: &str, values: &[f64]) -> Result<(), Failure> {
    if parameter != "g" {
        return Err(CliError::config("--parameter", format!("cannot sweep `{parameter}`; only `g`")).into());
    }
    let base = c.resolve()?;
    let configs = sweep_configs(&base, values)?;
    let rows: Vec<(SweepRow, usize)> = configs
        .par_iter()
        .zip(values)
        .map(|(cfg, &g)| {
            let exp = compute(cfg)?;
            write_all(&exp, &cfg.out_dir)?;
            Ok((sweep_row(&exp, g), escalated(&exp.flags(), cfg.fail_on_flags)))
        })
        .collect::<Result<_, CliError>>()?;
    let mut text = String::from("# column g: coupling strength\n");
    text.push_str("# column max_deviation_1: max over interior steps of the operator norm of H~1 - H1\n");
    text.push_str("# column max_deviation_2: max over interior steps of the operator norm of H~2 - H2\n");
    text.push_str("# column max_additivity: max over interior steps of |<H~1> + <H~2> - U0(t0)|\n");
    text.push_str("g,max_deviation_1,max_deviation_2,max_additivity\n");
    for (r, _) in &rows {
        text.push_str(&format!("{:e},{:e},{:e},{:e}\n", r.g, r.max_deviation[0], r.max_deviation[1], r.max_additivity));
    }
    std::fs::create_dir_all(&base.out_dir).map_err(|e| CliError::io(&base.out_dir, e))?;
    let path = base.out_dir.join("sweep.csv");
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    if !c.quiet {
        for (r, _) in &rows {
            println!("g = {:<8} max |H~ - H| = {:.3e} / {:.3e}", r.g, r.max_deviation[0], r.max_deviation[1]);
        }
    }
    let escalated: usize = rows.iter().map(|r| r.1).sum();
    if escalated > 0 {
        return Err(Failure::Flags(escalated));
    }
    Ok(())
}
