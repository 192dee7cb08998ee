use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sconclab_cli::config::{self, BoxSpec, CaseConfig, FunctionConfig, PointSpec, SystemConfig};
use sconclab_cli::{execute, registry, CliError, Status};

#[derive(Parser)]
#[command(
    name = "sconclab",
    version,
    about = "Semiconcave calculus and Lax-Oleinik experiments"
)]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "SCONCLAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and flag overrides.
    Run(RunArgs),
    /// List systems, functions or experiments.
    List {
        #[arg(value_parser = ["systems", "functions", "experiments"])]
        kind: String,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// verify-arnaud, strata, path, evolve, flow, dim, critical-time or inf-repr.
    experiment: String,
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Function name, e.g. neg-norm.
    #[arg(long)]
    phi: Option<String>,
    /// System name, e.g. free.
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Region as "lo,hi x lo,hi".
    #[arg(long = "box", allow_hyphen_values = true)]
    region: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Any config key, in TOML syntax: --set function.n_max=8.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn overrides(&self) -> CaseConfig {
        CaseConfig {
            output: self.out.clone(),
            seed: self.seed,
            dim: self.dim,
            t: self.t,
            h: self.h,
            tol: self.tol,
            region: self.region.clone().map(BoxSpec::Text),
            a: self.a.clone().map(PointSpec::Text),
            b: self.b.clone().map(PointSpec::Text),
            function: self.phi.clone().map(|n| FunctionConfig {
                name: Some(n),
                ..FunctionConfig::default()
            }),
            system: self.system.clone().map(|n| SystemConfig {
                name: Some(n),
                ..SystemConfig::default()
            }),
            ..CaseConfig::default()
        }
    }
}

fn run(args: &RunArgs) -> Result<Status, CliError> {
    let set = config::parse_set(&args.set)?;
    let plan = config::plan(
        &args.experiment,
        args.config.as_deref(),
        &args.overrides(),
        &set,
    )?;
    let report = execute(&plan)?;
    for case in &report.cases {
        for c in &case.checks {
            println!(
                "{:<12} {:<28} {:<12.6e} {:<16} {}",
                case.name,
                c.name,
                c.value,
                c.expected,
                if c.pass { "pass" } else { "FAIL" }
            );
        }
    }
    println!(
        "{}: {:?}, report at {}",
        report.experiment,
        report.status,
        plan.output.join("report.json").display()
    );
    Ok(report.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match &cli.command {
        Command::List { kind } => {
            print!(
                "{}",
                registry::listing(kind).expect("clap validates the kind")
            );
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(args) {
            Ok(status) => ExitCode::from(status.exit_code() as u8),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
