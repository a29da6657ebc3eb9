//! `clines`: run configurations of the coupled-cline toolkit and write
//! CSV/JSON/SVG artifacts.
//!
//! Exit codes: 0 success, 2 bad configuration or unwritable output, 3
//! parameter or state invariant violated, 4 numerical failure. Failures
//! print a one-line error JSON on stderr.

mod commands;
mod config;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, Layer, Preset, RunConfig};
use output::{resolve_dir, CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "clines",
    version,
    about = "Coupled underdominant clines: simulations, wave profiles, speeds, spectra"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the (p, q, D), gamete or reduced system.
    Simulate(Common),
    /// Standing-wave profile and its diagnostics.
    Standing(Common),
    /// Full-system front speed against the predicted coefficient over an r grid.
    Speed(Common),
    /// Spectrum of the linearised operator, kernel checks, relaxation.
    Stability(Common),
    /// Speed coefficient by every available route over an r grid.
    Compare(Common),
    /// Repeat a command over values of one key.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// fig1 (simulate), fig2 (standing) or fig3 (speed).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (default: $CLINES_OUT/<command>-<run id>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Any config key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(flatten)]
    params: Params,
}

#[derive(Args)]
struct SweepArgs {
    /// Command to repeat.
    #[arg(long)]
    command: Option<String>,
    /// Key to vary.
    #[arg(long)]
    vary: Option<String>,
    /// `start:stop:step` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
    #[command(flatten)]
    common: Common,
}

/// Shorthand flags for the common keys. Values stay raw text here and are
/// parsed against the command's key table, so a flag the command does not
/// know is rejected like an unknown config key.
#[derive(Args)]
struct Params {
    #[arg(long = "S", value_name = "S", allow_hyphen_values = true)]
    s_cost: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    r: Option<String>,
    #[arg(long = "s", value_name = "s", allow_hyphen_values = true)]
    s: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sigma2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    method: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    half_width: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    dx: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t_end: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    r_grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eps_amp: Option<String>,
}

impl Params {
    fn layer(&self) -> Layer {
        let pairs = [
            ("S", &self.s_cost),
            ("r", &self.r),
            ("s", &self.s),
            ("sigma2", &self.sigma2),
            ("eps", &self.eps),
            ("model", &self.model),
            ("method", &self.method),
            ("init", &self.init),
            ("offset", &self.offset),
            ("half_width", &self.half_width),
            ("x_max", &self.x_max),
            ("dx", &self.dx),
            ("dt", &self.dt),
            ("t_end", &self.t_end),
            ("r_grid", &self.r_grid),
            ("k", &self.k),
            ("eps_amp", &self.eps_amp),
        ];
        pairs
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

impl Common {
    fn layers(&self) -> CliResult<(Layer, Layer)> {
        let file = match &self.config {
            Some(p) => config::read_file(p)?,
            None => Vec::new(),
        };
        let mut flags = self.params.layer();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            flags.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok((file, flags))
    }

    fn threads(&self) -> usize {
        self.threads
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
            .max(1)
    }
}

fn dir_name(cfg: &RunConfig) -> String {
    match cfg.preset {
        Some(p) => format!("{}-{}-{}", cfg.command.name(), p.name(), cfg.run_id()),
        None => format!("{}-{}", cfg.command.name(), cfg.run_id()),
    }
}

fn execute(cmd: Command, common: &Common) -> CliResult<PathBuf> {
    let (file, flags) = common.layers()?;
    let preset = common.preset.as_deref().map(Preset::parse).transpose()?;
    let cfg = RunConfig::resolve(cmd, preset, &file, &flags)?;
    let dir = resolve_dir(common.out.as_deref(), &dir_name(&cfg));
    commands::run(&cfg, dir, common.threads())
}

fn execute_sweep(args: &SweepArgs) -> CliResult<(PathBuf, i32)> {
    let common = &args.common;
    if common.preset.is_some() {
        return Err(CliError::Config(
            "sweep takes no preset; sweep a config file instead".into(),
        ));
    }
    let (file, mut flags) = common.layers()?;
    for (k, v) in [
        ("command", &args.command),
        ("vary", &args.vary),
        ("values", &args.values),
    ] {
        if let Some(v) = v {
            flags.push((k.to_string(), v.clone()));
        }
    }
    let (sweep, base) = RunConfig::resolve_sweep(&file, &flags)?;
    let name = format!(
        "sweep-{}-{}-{}{}",
        base.command.name(),
        sweep.word("vary"),
        &sweep.run_id()[..6],
        &base.run_id()[..6]
    );
    let dir = resolve_dir(common.out.as_deref(), &name);
    commands::run_sweep(&sweep, &base, dir, common.threads())
}

fn fail(e: &CliError, command: Option<&str>, out: Option<&Path>) -> ExitCode {
    let body = e.to_json(command);
    eprintln!("{body}");
    if let Some(dir) = out {
        // best effort: the directory may be the thing that failed
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("error.json"), format!("{body:#}\n"));
        }
    }
    ExitCode::from(e.code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string();
            return fail(&CliError::Config(first), None, None);
        }
    };
    let (cmd, common) = match &cli.cmd {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Standing(c) => (Command::Standing, c),
        Cmd::Speed(c) => (Command::Speed, c),
        Cmd::Stability(c) => (Command::Stability, c),
        Cmd::Compare(c) => (Command::Compare, c),
        Cmd::Sweep(args) => {
            return match execute_sweep(args) {
                Ok((dir, 0)) => {
                    println!("{}", dir.display());
                    ExitCode::SUCCESS
                }
                Ok((dir, code)) => {
                    println!("{}", dir.display());
                    eprintln!(
                        "{}",
                        serde_json::json!({ "error": { "code": code, "kind": "sweep", "command": "sweep",
                            "message": "some runs failed; see sweep.csv" } })
                    );
                    ExitCode::from(code as u8)
                }
                Err(e) => fail(&e, Some("sweep"), args.common.out.as_deref()),
            };
        }
    };
    match execute(cmd, common) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, Some(cmd.name()), common.out.as_deref()),
    }
}
