mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{parse_dims, parse_list, CouplingSpec, ModelSpec, RunConfig};

/// Solve and diagnose critical elliptic systems on symmetry-reduced models.
#[derive(Parser)]
#[command(name = "critsys", version)]
struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the JSON report and CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the default configuration and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Table of sharp constants and sphere volumes.
    Constants(Overrides),
    /// Residuals of the closed-form families.
    Verify(Overrides),
    /// Minimize the Sobolev quotient of a coupling.
    Minimize(Overrides),
    /// Newton solve of the system from a seed.
    Solve(Overrides),
    /// Build a blow-up family and run its diagnostics.
    Blowup(Overrides),
    /// Energies of the lifted solutions on a long circle.
    Multiplicity(Overrides),
}

#[derive(Args, Default)]
struct Overrides {
    /// Dimension; `constants` also accepts lists like `3..8` or `4,6`.
    #[arg(long)]
    n: Option<String>,
    /// Grid node count.
    #[arg(long = "N")]
    nodes: Option<usize>,
    /// Comma-separated family parameters for `blowup`.
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Ball radius of the concentration diagnostics.
    #[arg(long)]
    delta: Option<f64>,
    /// Solver or residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Family name for `verify` and `blowup`.
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated family parameters for `verify`.
    #[arg(long)]
    lambda: Option<String>,
    /// Model in compact form, e.g. `sphere:n=4,N=512`.
    #[arg(long)]
    model: Option<String>,
    /// Coupling in compact form, e.g. `yamabe-diag:p=2`.
    #[arg(long)]
    coupling: Option<String>,
}

/// Raised for bad input; maps to exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

fn reject(name: &str, present: bool, command: &str) -> Result<()> {
    if present {
        return Err(usage(format!("--{name} does not apply to `{command}`")));
    }
    Ok(())
}

fn single_n(s: &str) -> Result<usize> {
    s.parse().map_err(|_| usage(format!("--n expects one dimension here, got {s:?}")))
}

fn wrap<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| usage(format!("{e:#}")))
}

fn apply(cfg: &mut RunConfig, command: &Command) -> Result<()> {
    let (name, o) = match command {
        Command::Constants(o) => ("constants", o),
        Command::Verify(o) => ("verify", o),
        Command::Minimize(o) => ("minimize", o),
        Command::Solve(o) => ("solve", o),
        Command::Blowup(o) => ("blowup", o),
        Command::Multiplicity(o) => ("multiplicity", o),
    };
    let no_family = |o: &Overrides| -> Result<()> {
        reject("family", o.family.is_some(), name)?;
        reject("lambda", o.lambda.is_some(), name)?;
        reject("lambda-grid", o.lambda_grid.is_some(), name)?;
        reject("delta", o.delta.is_some(), name)
    };
    match command {
        Command::Constants(_) => {
            no_family(o)?;
            reject("N", o.nodes.is_some(), name)?;
            reject("tol", o.tol.is_some(), name)?;
            reject("model", o.model.is_some(), name)?;
            reject("coupling", o.coupling.is_some(), name)?;
            if let Some(s) = &o.n {
                cfg.constants.dims = wrap(parse_dims(s))?;
            }
        }
        Command::Verify(_) => {
            reject("lambda-grid", o.lambda_grid.is_some(), name)?;
            reject("delta", o.delta.is_some(), name)?;
            reject("model", o.model.is_some(), name)?;
            reject("coupling", o.coupling.is_some(), name)?;
            let v = &mut cfg.verify;
            if let Some(f) = &o.family {
                v.family = f.clone();
            }
            if let Some(s) = &o.lambda {
                v.lambdas = wrap(parse_list(s))?;
            }
            if let Some(s) = &o.n {
                v.n = single_n(s)?;
            }
            if let Some(nodes) = o.nodes {
                v.nodes = nodes;
            }
            if let Some(t) = o.tol {
                v.exact_tol = t;
            }
        }
        Command::Minimize(_) | Command::Solve(_) => {
            no_family(o)?;
            let (model, coupling) = match command {
                Command::Minimize(_) => (&mut cfg.minimize.model, &mut cfg.minimize.coupling),
                _ => (&mut cfg.solve.model, &mut cfg.solve.coupling),
            };
            if let Some(s) = &o.model {
                *model = wrap(s.parse::<ModelSpec>())?;
            }
            if let Some(s) = &o.coupling {
                *coupling = wrap(s.parse::<CouplingSpec>())?;
            }
            if let Some(s) = &o.n {
                model.n = single_n(s)?;
            }
            if let Some(nodes) = o.nodes {
                model.nodes = nodes;
            }
            if let Some(t) = o.tol {
                match command {
                    Command::Minimize(_) => cfg.minimize.options.tol = t,
                    _ => cfg.solve.options.tol = t,
                }
            }
        }
        Command::Blowup(_) => {
            reject("lambda", o.lambda.is_some(), name)?;
            reject("tol", o.tol.is_some(), name)?;
            reject("model", o.model.is_some(), name)?;
            reject("coupling", o.coupling.is_some(), name)?;
            let b = &mut cfg.blowup;
            if let Some(f) = &o.family {
                b.family = f.clone();
            }
            if let Some(s) = &o.n {
                b.n = single_n(s)?;
            }
            if let Some(nodes) = o.nodes {
                b.nodes = nodes;
            }
            if let Some(s) = &o.lambda_grid {
                b.lambda_grid = wrap(parse_list(s))?;
            }
            if let Some(d) = o.delta {
                b.diagnose.delta = d;
            }
        }
        Command::Multiplicity(_) => {
            no_family(o)?;
            reject("model", o.model.is_some(), name)?;
            let m = &mut cfg.multiplicity;
            if let Some(s) = &o.coupling {
                m.coupling = wrap(s.parse::<CouplingSpec>())?;
            }
            if let Some(s) = &o.n {
                m.n = single_n(s)?;
            }
            if let Some(nodes) = o.nodes {
                m.options.nodes = nodes;
            }
            if let Some(t) = o.tol {
                m.options.minimize.tol = t;
            }
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<critsys::Error>() {
            return match err {
                critsys::Error::Config(_) | critsys::Error::Domain(_) | critsys::Error::Shape(_) => 2,
                critsys::Error::Solver(_) | critsys::Error::Numeric(_) => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> Result<u8> {
    if cli.print_defaults {
        print!("{}", RunConfig::defaults_toml()?);
        return Ok(0);
    }
    let Some(command) = cli.command else {
        return Err(usage("no command given; see --help"));
    };
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => RunConfig::default(),
    };
    apply(&mut cfg, &command)?;
    let (name, echo, outcome) = match &command {
        Command::Constants(_) => ("constants", json!(cfg.constants), commands::constants(&cfg.constants)),
        Command::Verify(_) => ("verify", json!(cfg.verify), commands::verify(&cfg.verify)),
        Command::Minimize(_) => ("minimize", json!(cfg.minimize), commands::minimize(&cfg.minimize)),
        Command::Solve(_) => ("solve", json!(cfg.solve), commands::solve(&cfg.solve)),
        Command::Blowup(_) => ("blowup", json!(cfg.blowup), commands::blowup(&cfg.blowup)),
        Command::Multiplicity(_) => ("multiplicity", json!(cfg.multiplicity), commands::multiplicity(&cfg.multiplicity)),
    };
    match outcome {
        Ok(out) => {
            report::emit(cli.out.as_deref(), name, &echo, &out)?;
            Ok(if out.passed { 0 } else { 1 })
        }
        Err(e) => {
            let code = exit_code(&e);
            if code == 1 {
                report::emit_failure(cli.out.as_deref(), name, &echo, &format!("{e:#}"))?;
            }
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
