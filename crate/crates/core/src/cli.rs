//! The `feedback-stop` command line.
//!
//! Model flags are named after the symbols they stand for (`--mu`,
//! `--sigma`, `--s0`, `--sstar`, `--u0`, `--k`, `--v0`, `--t`). Any of them,
//! and the simulation flags, may also come from a `--config` file of
//! `key = value` lines using the same names without dashes; flags given on
//! the command line win. `v0` defaults to `u0 / k`.
//!
//! Exit codes: 0 on success, 1 when a verification gate fails (the report is
//! still written), 2 on invalid input.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cdf::{CdfQuery, ShorthandContext};
use crate::error::{check, Error, Result};
use crate::simulate::{self, format_number, DEFAULT_STEPS_PER_YEAR};
use crate::verify::{self, Scenario, SimulationSettings};

/// Environment variable naming the default directory for reports.
pub const OUT_DIR_ENV: &str = "FEEDBACK_STOP_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    GateFailure = 1,
    InvalidInput = 2,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "feedback-stop",
    version,
    about = "Profit/loss distribution of a feedback trading rule with a stop-loss",
    args_override_self = true
)]
pub struct Cli {
    /// File of `key = value` defaults, overridden by command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print F(x, t), or F0(x, t) with --no-stop, and the branch used.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write the CDF on an evenly spaced grid as CSV.
    Curve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        x_max: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Add the no-stop CDF as a third column.
        #[arg(long)]
        both: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Print the probability that the stop has fired by time t.
    Stoptime {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Simulate paths and write `path_index,t_star,terminal_g` rows.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run the property checks and the empirical-vs-closed-form comparison.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, env = OUT_DIR_ENV, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Rebuild figure 1 (K = 1), 2 (K = 2) or 3 (K = 1/2).
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, env = OUT_DIR_ENV, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
struct ModelArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    s0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sstar: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    u0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Ignore the stop price and use the no-stop formulas.
    #[arg(long)]
    no_stop: bool,
}

#[derive(Debug, Clone, Default, Args)]
struct SimArgs {
    #[arg(long, allow_hyphen_values = true)]
    paths: Option<i64>,
    /// Grid steps per unit time.
    #[arg(long, allow_hyphen_values = true)]
    steps: Option<i64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Brownian-bridge stop detection (default true).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    bridge: Option<bool>,
    /// Worker threads; the output does not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

/// Fully resolved inputs of a command, echoed into every JSON report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub simulation: SimulationSettings,
    pub steps_per_year: usize,
}

type ConfigFile = BTreeMap<String, String>;

const CONFIG_KEYS: &[&str] = &[
    "mu", "sigma", "s0", "sstar", "u0", "k", "v0", "t", "no-stop", "paths", "steps", "seed",
    "bridge", "workers",
];

fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Domain(format!(
                "config line {}: expected key = value",
                n + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Domain(format!(
                "config line {}: unknown key `{key}`",
                n + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn from_config<T: std::str::FromStr>(cfg: &ConfigFile, key: &str) -> Result<Option<T>> {
    cfg.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| Error::Domain(format!("config value for `{key}` is not valid: {v}")))
        })
        .transpose()
}

fn pick<T: std::str::FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => from_config(cfg, key),
    }
}

fn resolve_scenario(args: &ModelArgs, cfg: &ConfigFile) -> Result<Scenario> {
    let default = Scenario::figure(1)?;
    let u0 = pick(args.u0, cfg, "u0")?.unwrap_or(default.u0);
    let k = pick(args.k, cfg, "k")?.unwrap_or(default.k);
    let no_stop = args.no_stop || from_config::<bool>(cfg, "no-stop")?.unwrap_or(false);
    let scenario = Scenario {
        mu: pick(args.mu, cfg, "mu")?.unwrap_or(default.mu),
        sigma: pick(args.sigma, cfg, "sigma")?.unwrap_or(default.sigma),
        s0: pick(args.s0, cfg, "s0")?.unwrap_or(default.s0),
        u0,
        k,
        v0: pick(args.v0, cfg, "v0")?.unwrap_or(u0 / k),
        s_star: if no_stop {
            None
        } else {
            Some(pick(args.sstar, cfg, "sstar")?.unwrap_or(default.s_star.unwrap_or(0.5)))
        },
        t: pick(args.t, cfg, "t")?.unwrap_or(default.t),
    };
    // surface parameter violations before any work starts
    check(
        scenario.t > 0.0 && scenario.t.is_finite(),
        "t",
        "t > 0",
        scenario.t,
    )?;
    scenario.trade()?;
    Ok(scenario)
}

fn resolve_sim(
    args: &SimArgs,
    cfg: &ConfigFile,
    t: f64,
) -> Result<(SimulationSettings, usize, Option<usize>)> {
    let default = SimulationSettings::default();
    let paths = pick(args.paths, cfg, "paths")?.unwrap_or(default.n_paths as i64);
    check(paths >= 1, "paths", "paths >= 1", paths as f64)?;
    let steps = pick(args.steps, cfg, "steps")?.unwrap_or(DEFAULT_STEPS_PER_YEAR as i64);
    check(steps >= 1, "steps", "steps >= 1", steps as f64)?;
    let grid = simulate::PathGrid::with_density(t, steps as usize)?;
    let sim = SimulationSettings {
        n_paths: paths as usize,
        n_steps: grid.n_steps(),
        master_seed: pick(args.seed, cfg, "seed")?.unwrap_or(default.master_seed),
        bridge: pick(args.bridge, cfg, "bridge")?.unwrap_or(default.bridge),
    };
    let workers = pick(args.workers, cfg, "workers")?;
    if let Some(w) = workers {
        check(w >= 1, "workers", "workers >= 1", w as f64)?;
    }
    Ok((sim, steps as usize, workers))
}

fn open_output<'a>(path: Option<&Path>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn out_dir(dir: Option<PathBuf>) -> Result<PathBuf> {
    let dir = dir.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[derive(Serialize)]
struct EvalReport {
    config: Scenario,
    x: f64,
    t: f64,
    p: f64,
    branch: &'static str,
}

#[derive(Serialize)]
struct StoptimeReport {
    config: Scenario,
    t: f64,
    p: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    config: RunConfig,
    sup_distance: f64,
    sup_distance_no_stop: Option<f64>,
    tolerance: f64,
    comparison_pass: bool,
    properties: verify::PropertyReport,
    pass: bool,
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<ExitStatus> {
    let cfg = match &cli.config {
        Some(path) => read_config(path)?,
        None => ConfigFile::new(),
    };
    match cli.command {
        Command::Eval { model, x, format } => {
            let s = resolve_scenario(&model, &cfg)?;
            let ctx = s.context()?;
            let v = ctx.cdf_with_stop(CdfQuery::new(x, s.t)?);
            match format {
                Format::Text => writeln!(stdout, "{} {}", format_number(v.p), v.branch.as_str())?,
                Format::Json => {
                    let report = EvalReport {
                        config: s,
                        x,
                        t: s.t,
                        p: v.p,
                        branch: v.branch.as_str(),
                    };
                    writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
                }
            }
        }
        Command::Curve {
            model,
            x_min,
            x_max,
            points,
            both,
            out,
        } => {
            let s = resolve_scenario(&model, &cfg)?;
            if !(x_min < x_max) {
                return Err(Error::Domain(format!(
                    "curve range needs x-min < x-max, got [{x_min}, {x_max}]"
                )));
            }
            check(points >= 2, "points", "points >= 2", points as f64)?;
            let ctx = s.context()?;
            let free = ShorthandContext::new(&s.market()?, &s.without_stop().trade()?);
            let mut w = open_output(out.as_deref(), stdout)?;
            writeln!(w, "{}", if both { "x,F,F0" } else { "x,F" })?;
            let step = (x_max - x_min) / (points - 1) as f64;
            for i in 0..points {
                let x = if i + 1 == points {
                    x_max
                } else {
                    x_min + step * i as f64
                };
                let q = CdfQuery::new(x, s.t)?;
                let f = ctx.cdf_with_stop(q).p;
                if both {
                    let f0 = free.cdf_no_stop(q).p;
                    writeln!(
                        w,
                        "{},{},{}",
                        format_number(x),
                        format_number(f),
                        format_number(f0)
                    )?;
                } else {
                    writeln!(w, "{},{}", format_number(x), format_number(f))?;
                }
            }
            w.flush()?;
        }
        Command::Stoptime { model, format } => {
            let s = resolve_scenario(&model, &cfg)?;
            let p = s.context()?.stopping_time_cdf(s.t)?;
            match format {
                Format::Text => writeln!(stdout, "{}", format_number(p))?,
                Format::Json => {
                    let report = StoptimeReport {
                        config: s,
                        t: s.t,
                        p,
                    };
                    writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
                }
            }
        }
        Command::Simulate { model, sim, out } => {
            let s = resolve_scenario(&model, &cfg)?;
            let (settings, _, workers) = resolve_sim(&sim, &cfg, s.t)?;
            let mut batch = settings.batch(s.t)?;
            if let Some(w) = workers {
                batch = batch.with_workers(w);
            }
            let mut w = open_output(out.as_deref(), stdout)?;
            simulate::write_batch_csv(&s.market()?, &s.trade()?, &batch, &mut w)?;
            w.flush()?;
        }
        Command::Verify {
            model,
            sim,
            out_dir: dir,
        } => {
            let s = resolve_scenario(&model, &cfg)?;
            let (settings, steps_per_year, workers) = resolve_sim(&sim, &cfg, s.t)?;
            let dir = out_dir(dir)?;
            let mut batch = settings.batch(s.t)?;
            if let Some(w) = workers {
                batch = batch.with_workers(w);
            }
            let market = s.market()?;
            let trade = s.trade()?;
            let properties = verify::property_suite(&market, &trade, &batch)?;
            let tolerance = verify::sup_distance_gate(settings.n_paths);
            let (sup, sup0) = if trade.s_star().is_some() {
                let fig = verify::reproduce_scenario(0, &s, &settings)?;
                (
                    fig.report.sup_distance,
                    Some(fig.report.sup_distance_no_stop),
                )
            } else {
                (verify::no_stop_distance(&s, &settings)?, None)
            };
            let comparison_pass = sup <= tolerance && sup0.is_none_or(|d| d <= tolerance);
            let report = VerifyReport {
                config: RunConfig {
                    scenario: s,
                    simulation: settings,
                    steps_per_year,
                },
                sup_distance: sup,
                sup_distance_no_stop: sup0,
                tolerance,
                comparison_pass,
                pass: comparison_pass && properties.passed(),
                properties,
            };
            let path = dir.join("verify.json");
            serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &report)?;
            for c in &report.properties.checks {
                writeln!(stdout, "{:<22} {:?}: {}", c.name, c.status, c.detail)?;
            }
            writeln!(stdout, "sup distance {sup:.5} (tolerance {tolerance:.5})")?;
            writeln!(stdout, "report: {}", path.display())?;
            if !report.pass {
                return Ok(ExitStatus::GateFailure);
            }
        }
        Command::Figure {
            which,
            sim,
            out_dir: dir,
        } => {
            let t = Scenario::figure(which)?.t;
            let (settings, _, _) = resolve_sim(&sim, &cfg, t)?;
            let dir = out_dir(dir)?;
            let fig = verify::reproduce_figure(which, &settings)?;
            let csv = dir.join(format!("figure{which}.csv"));
            let json = dir.join(format!("figure{which}.json"));
            let mut w = BufWriter::new(File::create(&csv)?);
            fig.write_csv(&mut w)?;
            w.flush()?;
            serde_json::to_writer_pretty(BufWriter::new(File::create(&json)?), &fig.report)?;
            writeln!(
                stdout,
                "figure {which}: sup distance {:.5} with stop, {:.5} without (tolerance {:.5})",
                fig.report.sup_distance, fig.report.sup_distance_no_stop, fig.report.tolerance
            )?;
            writeln!(
                stdout,
                "dataset: {}\nreport: {}",
                csv.display(),
                json.display()
            )?;
            if !fig.report.pass {
                return Ok(ExitStatus::GateFailure);
            }
        }
    }
    stdout.flush()?;
    Ok(ExitStatus::Success)
}

/// Parses `args` (program name first) and runs the command, writing
/// results to `stdout` and diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                ExitStatus::InvalidInput
            } else {
                let _ = write!(stdout, "{text}");
                ExitStatus::Success
            };
        }
    };
    match execute(cli, stdout) {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            ExitStatus::InvalidInput
        }
    }
}
