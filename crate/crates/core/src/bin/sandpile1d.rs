use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sandpile1d::experiments::{run, validate, validate_file, Command, Params, Scenario};

#[derive(Parser)]
#[command(name = "sandpile1d", version, about = "One-dimensional abelian sandpile experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file (TOML or JSON).
    Run {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file without running it.
    Validate { file: PathBuf },
    /// Stabilize a grain field in a finite volume.
    Stabilize(ParamArgs),
    /// Simulate the avalanche chain.
    Avalanche(ParamArgs),
    /// Run a coupled pair of chains and count order violations.
    Couple(ParamArgs),
    /// Compare the finite-volume pile with the exact law.
    Fvsp(ParamArgs),
    /// Exact finite-volume checks.
    Exact(ParamArgs),
    /// Taylor series for the semigroup.
    Series(ParamArgs),
    /// Absorption probability of the all-ones state.
    Theorem51(ParamArgs),
    /// Law of the hole after successive avalanche jumps.
    Prop51(ParamArgs),
    /// Discrete-time finite-volume pile.
    Discrete(ParamArgs),
}

#[derive(Args)]
struct ParamArgs {
    /// Scenario name, used as the output file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u32>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    check: Option<String>,
    #[arg(long)]
    f: Option<String>,
    /// File holding a configuration in text form.
    #[arg(long)]
    eta: Option<PathBuf>,
    /// File holding the lower configuration for `couple`.
    #[arg(long)]
    lower: Option<PathBuf>,
    /// Grain field `lo hi c...`.
    #[arg(long, allow_hyphen_values = true)]
    grains: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    set: Option<Vec<i64>>,
    #[arg(long)]
    coupling: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    depth_cap: Option<usize>,
    #[arg(long)]
    steps: Option<u64>,
}

fn read_config(path: Option<PathBuf>) -> Result<Option<String>> {
    path.map(|p| {
        fs::read_to_string(&p).with_context(|| format!("reading {}", p.display())).map(|s| s.trim().to_string())
    })
    .transpose()
}

impl ParamArgs {
    fn into_scenario(self, command: Command) -> Result<(Scenario, PathBuf)> {
        let params = Params {
            n: self.n,
            k: self.k,
            samples: self.samples,
            t: self.t,
            horizon: self.horizon,
            check: self.check,
            f: self.f,
            eta: read_config(self.eta)?,
            lower: read_config(self.lower)?,
            grains: self.grains,
            set: self.set,
            coupling: self.coupling,
            tol: self.tol,
            depth_cap: self.depth_cap,
            steps: self.steps,
        };
        let name = self.name.unwrap_or_else(|| command.name().to_string());
        Ok((Scenario::new(name, command, self.seed, params), self.out))
    }
}

fn execute(scenario: &Scenario, out: Option<PathBuf>) -> Result<ExitCode> {
    let report = validate(scenario);
    for w in &report.warnings {
        eprintln!("warning: {}: {}", w.field, w.message);
    }
    let output = run(scenario, out.as_deref())?;
    println!("{}", output.record_path.display());
    for p in &output.extra_paths {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Run { file, out } => {
            let scenario = Scenario::load(&file)?;
            return execute(&scenario, out);
        }
        Cmd::Validate { file } => {
            let report = validate_file(&file);
            println!("{}", serde_json::to_string_pretty(&report)?);
            return Ok(if report.ok { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Cmd::Stabilize(a) => (Command::Stabilize, a),
        Cmd::Avalanche(a) => (Command::Avalanche, a),
        Cmd::Couple(a) => (Command::Couple, a),
        Cmd::Fvsp(a) => (Command::Fvsp, a),
        Cmd::Exact(a) => (Command::Exact, a),
        Cmd::Series(a) => (Command::Series, a),
        Cmd::Theorem51(a) => (Command::Theorem51, a),
        Cmd::Prop51(a) => (Command::Prop51, a),
        Cmd::Discrete(a) => (Command::Discrete, a),
    };
    let (scenario, out) = args.into_scenario(command)?;
    execute(&scenario, Some(out))
}
