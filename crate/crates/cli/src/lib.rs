//! Command-line front end. [`run`] parses arguments, computes the requested
//! quantity, and writes JSON (or CSV with `--csv`) only after the whole
//! result is available.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use cqcap::decode::{self, Constraint, ConstraintMode};
use cqcap::gaussian::{self, ModeSpec, NoiseSpectrum};
use cqcap::info::{self, OptimizeOptions};
use cqcap::reliability::{self, fmt17, ExponentOptions};
use cqcap::{io, ChannelCq, Decoder, ExperimentConfig, ExponentCurve};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const MAX_DIM_ENV: &str = "HOLEVO_MAX_DIM";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Core(#[from] cqcap::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numeric_failure() => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogBase {
    Nats,
    Bits,
}

impl LogBase {
    /// Factor converting nats to this base.
    pub fn scale(self) -> f64 {
        match self {
            LogBase::Nats => 1.0,
            LogBase::Bits => 1.0 / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecoderArg {
    Pure,
    Mixed,
}

#[derive(Debug, Parser)]
#[command(name = "cqcap", version, about = "Capacities, error bounds and exponents of classical-quantum channels")]
pub struct Cli {
    /// Unit of every reported information quantity.
    #[arg(long, value_enum, default_value = "nats", global = true)]
    pub log_base: LogBase,
    /// Reduced Planck constant used by the Gaussian commands.
    #[arg(long, default_value_t = 1.0, global = true)]
    pub hbar: f64,
    /// Emit CSV instead of JSON.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Holevo quantity of an ensemble, and accessible information under a POVM.
    Chi {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long)]
        povm: Option<PathBuf>,
    },
    /// One-shot capacity of a channel, optionally under an average cost budget.
    Capacity {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, default_value_t = info::DEFAULT_OPT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = info::DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Cutoff rate and its minimizing prior.
    Cutoff {
        #[arg(long)]
        channel: PathBuf,
    },
    /// Closed forms for the binary pure-state channel with overlap epsilon.
    Binary {
        #[arg(long)]
        epsilon: f64,
    },
    /// Random-coding, expurgated and combined exponents on a rate grid.
    Exponents {
        #[arg(long)]
        channel: PathBuf,
        #[command(flatten)]
        rates: RateGrid,
        #[arg(long)]
        budget: Option<f64>,
        /// Fix the input distribution (comma-separated).
        #[arg(long, value_delimiter = ',')]
        prior: Option<Vec<f64>>,
    },
    /// Random-coding experiment with square-root-measurement decoding.
    Sim(SimArgs),
    /// Gaussian bosonic channels.
    Gauss {
        #[command(subcommand)]
        command: GaussCommand,
    },
}

#[derive(Debug, Args)]
pub struct RateGrid {
    /// Explicit rates (comma-separated, in the chosen log base).
    #[arg(long, value_delimiter = ',', conflicts_with = "points")]
    pub rates: Option<Vec<f64>>,
    /// Number of equally spaced rates in (0, C).
    #[arg(long, default_value_t = 50)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long = "M", default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "pure")]
    pub decoder: DecoderArg,
    /// Typicality window for the mixed-state decoder.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Channel file; defaults to the binary channel with overlap `--epsilon`.
    #[arg(long)]
    pub channel: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5, conflicts_with = "channel")]
    pub epsilon: f64,
    /// Letter distribution (comma-separated); uniform by default.
    #[arg(long, value_delimiter = ',')]
    pub prior: Option<Vec<f64>>,
    /// Average cost budget per letter.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Reject and redraw words whose total cost exceeds n times the budget.
    #[arg(long, requires = "budget")]
    pub conditioned: bool,
    /// Include every trial's error in the output.
    #[arg(long)]
    pub per_trial: bool,
}

#[derive(Debug, Subcommand)]
pub enum GaussCommand {
    /// Single mode with thermal noise: g(N + E) - g(N), nats per use.
    Mode {
        #[arg(long = "N")]
        n: f64,
        #[arg(long = "E")]
        e: f64,
    },
    /// Independent modes under a total energy budget (water-filling).
    Multi {
        /// JSON file: [{"omega": .., "n": ..}, ...].
        #[arg(long, conflicts_with_all = ["omega", "noise"])]
        modes: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        omega: Option<Vec<f64>>,
        #[arg(long = "N", value_delimiter = ',')]
        noise: Option<Vec<f64>>,
        #[arg(long = "E")]
        e: f64,
    },
    /// Band-limited waveform channel, nats per second.
    Wave {
        /// `flat:N0`, `planck:THETA`, or a CSV file of `omega,N` rows.
        #[arg(long)]
        spectrum: String,
        /// Band edges `low,high`.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        band: Vec<f64>,
        #[arg(long = "E")]
        e: f64,
    },
    /// Infinite-bandwidth limit under equilibrium noise power P, nats per second.
    Broadband {
        #[arg(long = "P")]
        p: f64,
        #[arg(long = "E")]
        e: f64,
    },
    /// Closed-form exponents of the pure-state Gaussian channel.
    Reliability {
        #[arg(long = "E")]
        e: f64,
        #[command(flatten)]
        rates: RateGrid,
    },
}

/// Result of a command before serialization.
enum Report {
    Record(Value),
    Curve { json: Value, curve: ExponentCurve },
}

/// Runs the CLI on `args` (including the program name), writing the result
/// to `out` (or the `--out` file) and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            let written = match &cli.out {
                Some(path) => fs::write(path, &text).map_err(|source| CliError::Io { path: path.clone(), source }),
                None => out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                }),
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(e) => report_error(err, &e),
            }
        }
        Err(e) => report_error(err, &e),
    }
}

fn report_error(err: &mut dyn Write, e: &CliError) -> i32 {
    let _ = writeln!(err, "error: {e}");
    e.exit_code()
}

/// Computes the output text of a parsed command.
pub fn execute(cli: &Cli) -> CliResult<String> {
    if !(cli.hbar > 0.0 && cli.hbar.is_finite()) {
        return Err(usage(format!("--hbar must be positive, got {}", cli.hbar)));
    }
    let scale = cli.log_base.scale();
    let report = match &cli.command {
        Command::Chi { ensemble, povm } => chi(ensemble, povm.as_deref(), scale)?,
        Command::Capacity { channel, budget, tol, max_iter } => {
            let ch = read_channel(channel)?;
            let r = info::optimize_chi_with(&ch, *budget, OptimizeOptions { opt_tol: *tol, max_iter: *max_iter })?;
            Report::Record(json!({
                "capacity": num(r.value * scale),
                "optimizer": nums(&r.optimizer, 1.0),
                "iterations": r.iterations,
                "gap": num(r.gap * scale),
            }))
        }
        Command::Cutoff { channel } => {
            let (value, pi) = info::cutoff_rate(&read_channel(channel)?)?;
            Report::Record(json!({ "cutoff_rate": num(value * scale), "optimizer": nums(&pi, 1.0) }))
        }
        Command::Binary { epsilon } => {
            let b = info::binary_channel(*epsilon)?;
            Report::Record(json!({
                "epsilon": num(b.epsilon),
                "C": num(b.c * scale),
                "C1": num(b.c1 * scale),
                "Ctilde": num(b.c_tilde * scale),
                "mu_prime_1": num(b.mu_prime_1 * scale),
                "mutilde_prime_1": num(b.mutilde_prime_1 * scale),
            }))
        }
        Command::Exponents { channel, rates, budget, prior } => {
            let ch = read_channel(channel)?;
            let cap = match prior {
                Some(pi) => info::holevo_chi(&ch.ensemble(pi)?),
                None => info::optimize_chi(&ch, *budget)?.value,
            };
            let grid = rate_grid(rates, cap, scale)?;
            let opts = ExponentOptions { pinned_prior: prior.clone(), ..Default::default() };
            let curve = reliability::exponents(&ch, &grid, *budget, &opts)?;
            let json = curve_json(&curve, scale, json!({ "capacity": num(cap * scale) }));
            Report::Curve { json, curve }
        }
        Command::Sim(args) => sim(args)?,
        Command::Gauss { command } => gauss(command, cli.hbar, scale)?,
    };
    Ok(match report {
        Report::Record(v) if cli.csv => record_csv(&v),
        Report::Curve { curve, .. } if cli.csv => curve.to_csv(scale),
        Report::Record(v) | Report::Curve { json: v, .. } => {
            let mut s = serde_json::to_string_pretty(&v).expect("JSON values serialize");
            s.push('\n');
            s
        }
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn read_channel(path: &Path) -> CliResult<ChannelCq> {
    io::read_channel(&read_text(path)?).map_err(|e| match e {
        cqcap::Error::Parse(m) => usage(format!("{}: {m}", path.display())),
        e => e.into(),
    })
}

fn chi(ensemble: &Path, povm: Option<&Path>, scale: f64) -> CliResult<Report> {
    let ens = io::read_ensemble(&read_text(ensemble)?)?;
    let mut rec = Map::new();
    rec.insert("chi".into(), num(info::holevo_chi(&ens) * scale));
    if let Some(p) = povm {
        let rule = io::read_povm(&read_text(p)?)?;
        rec.insert("accessible".into(), num(info::accessible_info(&ens, &rule)? * scale));
    }
    Ok(Report::Record(Value::Object(rec)))
}

fn max_dim() -> CliResult<usize> {
    match std::env::var(MAX_DIM_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|d| *d > 0)
            .ok_or_else(|| usage(format!("{MAX_DIM_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(cqcap::qstate::DEFAULT_MAX_DIM),
    }
}

fn sim(a: &SimArgs) -> CliResult<Report> {
    let ch = match &a.channel {
        Some(path) => read_channel(path)?,
        None => ChannelCq::binary(a.epsilon)?,
    };
    let k = ch.alphabet_size();
    let pi = a.prior.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]);
    let constraint = a.budget.map(|budget| Constraint {
        budget,
        mode: if a.conditioned { ConstraintMode::Conditioned } else { ConstraintMode::Plain },
    });
    let cfg = ExperimentConfig {
        n: a.n,
        m: a.m,
        trials: a.trials,
        seed: a.seed,
        decoder: match a.decoder {
            DecoderArg::Pure => Decoder::PureSrm,
            DecoderArg::Mixed => Decoder::MixedSrm,
        },
        delta: a.delta,
        constraint,
        max_dim: max_dim()?,
    };
    let report = decode::random_coding_experiment(&ch, &pi, &cfg)?;
    let mut v = serde_json::to_value(report.to_record()).expect("record serializes");
    let obj = v.as_object_mut().expect("record is an object");
    for key in ["mean_error", "stderr", "bound_s_opt", "bound_value"] {
        let x = obj[key].as_f64().unwrap_or(f64::NAN);
        obj.insert(key.into(), num(x));
    }
    if a.decoder == DecoderArg::Mixed {
        obj.insert("mixed_bound".into(), num(report.mixed_bound.total));
    }
    if a.per_trial {
        obj.insert("errors".into(), nums(&report.errors, 1.0));
    }
    Ok(Report::Record(v))
}

fn gauss(cmd: &GaussCommand, hbar: f64, scale: f64) -> CliResult<Report> {
    Ok(match cmd {
        GaussCommand::Mode { n, e } => Report::Record(json!({
            "capacity": num(gaussian::single_mode_capacity(*n, *e)? * scale),
            "unit": "per use",
        })),
        GaussCommand::Multi { modes, omega, noise, e } => {
            let modes = match (modes, omega, noise) {
                (Some(path), _, _) => serde_json::from_str::<Vec<ModeSpec>>(&read_text(path)?)
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?,
                (None, Some(w), Some(n)) if w.len() == n.len() => {
                    w.iter().zip(n).map(|(&omega, &n)| ModeSpec { omega, n }).collect()
                }
                (None, Some(_), Some(_)) => return Err(usage("--omega and --N must have the same length")),
                _ => return Err(usage("give either --modes FILE or both --omega and --N")),
            };
            let r = gaussian::multimode_capacity(&modes, *e, hbar)?;
            Report::Record(json!({
                "capacity": num(r.capacity * scale),
                "theta": num(r.theta),
                "allocations": nums(&r.allocations, 1.0),
                "budget_residual": num(r.budget_residual),
                "unit": "per use",
            }))
        }
        GaussCommand::Wave { spectrum, band, e } => {
            if band.len() != 2 {
                return Err(usage("--band takes two values: low,high"));
            }
            let noise = parse_spectrum(spectrum)?;
            let r = gaussian::waveform_capacity(&noise, (band[0], band[1]), *e, hbar)?;
            Report::Record(json!({
                "capacity": num(r.capacity * scale),
                "theta": num(r.theta),
                "budget_residual": num(r.budget_residual),
                "unit": "per second",
            }))
        }
        GaussCommand::Broadband { p, e } => {
            let b = gaussian::broadband(*p, *e, hbar)?;
            Report::Record(json!({
                "C": num(b.c * scale),
                "theta_p": num(b.theta_p),
                "s_p": num(b.s_p * scale),
                "unit": "per second",
            }))
        }
        GaussCommand::Reliability { e, rates } => {
            let cap = gaussian::g(*e)?;
            let grid = rate_grid(rates, cap, scale)?;
            let r = gaussian::gaussian_reliability(*e, &grid)?;
            let json = curve_json(
                &r.curve,
                scale,
                json!({
                    "capacity": num(r.capacity * scale),
                    "q": num(r.q),
                    "p1": num(r.p1),
                    "knot_ex": num(r.knot_ex * scale),
                    "knot_r": num(r.knot_r * scale),
                }),
            );
            Report::Curve { json, curve: r.curve }
        }
    })
}

/// `flat:N0`, `planck:THETA`, or a CSV file of `omega,N` rows (an optional
/// header row is skipped).
pub fn parse_spectrum(spec: &str) -> CliResult<NoiseSpectrum> {
    let value = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("bad number in spectrum '{spec}'")));
    if let Some(n0) = spec.strip_prefix("flat:") {
        return Ok(NoiseSpectrum::Flat(value(n0)?));
    }
    if let Some(theta) = spec.strip_prefix("planck:") {
        return Ok(NoiseSpectrum::Planck(value(theta)?));
    }
    let path = Path::new(spec);
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut table = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| usage(format!("{spec}: {e}")))?;
        if rec.len() != 2 {
            return Err(usage(format!("{spec}: row {} has {} columns, expected omega,N", row + 1, rec.len())));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(w), Ok(n)) => table.push((w, n)),
            _ if row == 0 => continue,
            _ => return Err(usage(format!("{spec}: row {} is not numeric", row + 1))),
        }
    }
    Ok(NoiseSpectrum::Tabulated(table))
}

/// Rates in nats: the explicit list (given in the output base) or `points`
/// equally spaced values in `(0, cap)`.
fn rate_grid(g: &RateGrid, cap: f64, scale: f64) -> CliResult<Vec<f64>> {
    match &g.rates {
        Some(r) if r.is_empty() => Err(usage("--rates is empty")),
        Some(r) => Ok(r.iter().map(|x| x / scale).collect()),
        None if g.points == 0 => Err(usage("--points must be positive")),
        None => Ok((1..=g.points).map(|k| cap * k as f64 / (g.points + 1) as f64).collect()),
    }
}

fn curve_json(c: &ExponentCurve, scale: f64, extra: Value) -> Value {
    let mut v = extra;
    let obj = v.as_object_mut().expect("extra fields form an object");
    obj.insert("R".into(), nums(&c.rates, scale));
    obj.insert("Er".into(), nums(&c.er, scale));
    obj.insert("Eex".into(), nums(&c.eex, scale));
    obj.insert("E".into(), nums(&c.e, scale));
    obj.insert("regime".into(), c.regime.iter().map(|r| Value::from(r.as_str())).collect());
    obj.insert("s_opt".into(), nums(&c.s_opt, 1.0));
    obj.insert("p_opt".into(), nums(&c.p_opt, 1.0));
    v
}

/// JSON number, with non-finite values as the strings `inf`, `-inf`, `nan`.
fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(fmt17(x)))
}

fn nums(xs: &[f64], scale: f64) -> Value {
    xs.iter().map(|x| num(x * scale)).collect()
}

/// One header row and one value row; arrays are joined with `;`.
fn record_csv(v: &Value) -> String {
    let obj = match v.as_object() {
        Some(o) => o,
        None => return format!("{v}\n"),
    };
    let cell = |v: &Value| -> String {
        match v {
            Value::Number(n) => n.as_f64().map(fmt17).unwrap_or_else(|| n.to_string()),
            Value::String(s) => s.clone(),
            Value::Array(a) => a.iter().map(|x| x.as_f64().map(fmt17).unwrap_or_else(|| x.to_string())).collect::<Vec<_>>().join(";"),
            other => other.to_string(),
        }
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(obj.keys()).expect("in-memory write");
    w.write_record(obj.values().map(cell)).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}
