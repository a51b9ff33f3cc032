use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use r2d_cli::commands::{
    cmd_check, cmd_example, cmd_simulate, cmd_synth, load, load_certificate, parse_override, CheckTarget, RunOverrides,
    SystemSource,
};
use r2d_cli::format::to_json;
use r2d_cli::CliError;

/// Asynchronous switching control of uncertain 2D delayed Roesser systems.
#[derive(Parser)]
#[command(name = "r2d", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// System description (JSON).
    #[arg(long, conflicts_with = "example", required_unless_present = "example")]
    system: Option<PathBuf>,
    /// Built-in fixture instead of a system file.
    #[arg(long)]
    example: Option<String>,
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Source {
    fn source(&self) -> SystemSource {
        match (&self.system, &self.example) {
            (Some(p), _) => SystemSource::File(p.clone()),
            (None, Some(e)) => SystemSource::Example(e.clone()),
            (None, None) => unreachable!("clap requires one of --system and --example"),
        }
    }
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Target matched/mismatched length ratio.
    #[arg(long, conflicts_with = "lambda_star")]
    ratio: Option<f64>,
    #[arg(long)]
    lambda_star: Option<f64>,
    #[arg(long)]
    n0: Option<f64>,
    #[arg(long)]
    tau_a: Option<f64>,
    /// Controller lag: one value for every switch, or a comma list.
    #[arg(long, value_delimiter = ',')]
    lag: Option<Vec<usize>>,
    #[arg(long)]
    horizon: Option<usize>,
}

impl Overrides {
    fn to_run(&self) -> RunOverrides {
        RunOverrides {
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
            ratio: self.ratio,
            lambda_star: self.lambda_star,
            n0: self.n0,
            tau_a: self.tau_a,
            lag: self.lag.clone(),
            horizon: self.horizon,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Design gains and write a certificate.
    Synth {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Substitute a solution set into the inequalities.
    Check {
        #[command(flatten)]
        source: Source,
        #[arg(long, conflicts_with = "printed", required_unless_present = "printed")]
        certificate: Option<PathBuf>,
        /// Use the published solution of the built-in example.
        #[arg(long)]
        printed: bool,
        /// Scalar override, `name=value`; repeatable.
        #[arg(long = "set")]
        set: Vec<String>,
        /// Also write `check.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate and export trajectories.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Closed loop with these gains; open loop otherwise.
        #[arg(long)]
        certificate: Option<PathBuf>,
        /// Start diagonal for the decay fit and bound.
        #[arg(long)]
        z: Option<usize>,
        /// Also write a gnuplot script.
        #[arg(long)]
        plot: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write a built-in fixture's system and run configuration.
    Example {
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { source, overrides, out } => {
            let (problem, run) = load(&source.source(), source.config.as_deref(), &overrides.to_run())?;
            let cert = cmd_synth(&problem, &run, &out)?;
            print!("{}", r2d_cli::commands::synth_report(&cert));
        }
        Command::Check {
            source,
            certificate,
            printed,
            set,
            out,
        } => {
            let (problem, _) = load(&source.source(), source.config.as_deref(), &RunOverrides::default())?;
            let target = match certificate {
                Some(p) if !printed => CheckTarget::Certificate(Box::new(load_certificate(&p)?)),
                _ => CheckTarget::Printed,
            };
            let overrides = set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
            let report = cmd_check(&problem, &target, &overrides)?;
            print!("{}", report.render());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                let path = dir.join("check.json");
                let text = to_json(&report).map_err(|e| CliError::Core(e.to_string()))?;
                std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            }
            if !report.passed {
                return Err(CliError::CheckFailed("at least one inequality is violated".into()));
            }
        }
        Command::Simulate {
            source,
            overrides,
            certificate,
            z,
            plot,
            out,
        } => {
            let (problem, run) = load(&source.source(), source.config.as_deref(), &overrides.to_run())?;
            let cert = certificate.as_deref().map(load_certificate).transpose()?;
            let summary = cmd_simulate(&problem, cert.as_ref(), &run, z, &out, plot)?;
            println!(
                "c = {}  final energy = {:.3e}  bound: {}",
                summary.c,
                summary.final_energy,
                summary.bound.as_ref().map(|b| b.label()).unwrap_or("n/a")
            );
        }
        Command::Example { name, out } => {
            for p in cmd_example(&name, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("R2D_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
