//! `plghz`: plan, simulate and analyse the recursive GHZ protocol from the
//! command line.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | usage error (bad or missing flag) |
//! | 3 | unsupported regime (`alpha <= d` or `alpha > 2d + 1`) |
//! | 4 | lattice size not reachable by the recursion |
//! | 5 | state vector exceeds the memory cap |
//! | 6 | invalid input (coefficients, sites, plan parameters) |
//! | 7 | I/O failure while writing output |
//! | 8 | config file error |
//!
//! Failures also print one JSON record to stderr:
//! `{"error":"<kind>","code":<n>,"message":"..."}`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use powerlaw_ghz::analysis::{gate_bound_table, scaling_sweep, to_csv, to_json, SweepMode, SweepOptions};
use powerlaw_ghz::sampling::haar_state_seeded;
use powerlaw_ghz::scheduler::{plan, plan_continuous, regime_of, ScheduleOptions, SchedulePlan};
use powerlaw_ghz::simulator::{checked_dimension, DEFAULT_MEMORY_CAP};
use powerlaw_ghz::{
    encode, state_transfer, EncodeRequest, Error, FourierGate, LatticeSpec, ProtocolOptions, ProtocolTrace, StateVector,
};
use serde::Serialize;

pub mod config;

/// Environment variable that relative `--out` and `--dump` paths resolve against.
pub const OUTPUT_DIR_ENV: &str = "GHZ_OUTPUT_DIR";

/// Largest number of levels per site the CLI accepts.
pub const MAX_Q: usize = 64;

/// Upper limit for `--mem-cap`, in amplitudes (16 GiB of complex doubles).
pub const MAX_MEMORY_CAP: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    UnsupportedRegime,
    Unreachable,
    MemoryCap,
    InvalidInput,
    Io,
    Config,
}

impl ErrorKind {
    pub fn code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::UnsupportedRegime => 3,
            ErrorKind::Unreachable => 4,
            ErrorKind::MemoryCap => 5,
            ErrorKind::InvalidInput => 6,
            ErrorKind::Io => 7,
            ErrorKind::Config => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::UnsupportedRegime => "unsupported-regime",
            ErrorKind::Unreachable => "unreachable-size",
            ErrorKind::MemoryCap => "memory-cap",
            ErrorKind::InvalidInput => "invalid-input",
            ErrorKind::Io => "io",
            ErrorKind::Config => "config",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::InvalidInput, message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Io, message)
    }

    pub fn code(&self) -> i32 {
        self.kind.code()
    }

    /// One-line JSON error record.
    pub fn record(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            error: &'a str,
            code: i32,
            message: &'a str,
        }
        serde_json::to_string(&Record {
            error: self.kind.name(),
            code: self.code(),
            message: &self.message,
        })
        .unwrap_or_else(|_| format!("{{\"error\":\"{}\",\"code\":{}}}", self.kind.name(), self.code()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.name(), self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::UnsupportedRegime { .. } => ErrorKind::UnsupportedRegime,
            Error::Unreachable { .. } => ErrorKind::Unreachable,
            Error::MemoryCap { .. } => ErrorKind::MemoryCap,
            Error::Serialization(_) => ErrorKind::Io,
            _ => ErrorKind::InvalidInput,
        };
        CliError::new(kind, e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "plghz", version, about = "Recursive GHZ encoding on power-law interacting lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit the recursion tree for a cube of side r.
    Plan(PlanArgs),
    /// Encode one site's state into a GHZ-like state over the lattice.
    Simulate(SimulateArgs),
    /// Move one site's state to another site by encoding then decoding.
    Transfer(TransferArgs),
    /// Protocol time over an (alpha, r) grid next to the reference curves.
    Sweep(SweepArgs),
    /// Gate-count estimates for simulating n sites.
    Bounds(BoundsArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Plan(_) => "plan",
            Command::Simulate(_) => "simulate",
            Command::Transfer(_) => "transfer",
            Command::Sweep(_) => "sweep",
            Command::Bounds(_) => "bounds",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Plan(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::Transfer(a) => &a.sim.common,
            Command::Sweep(a) => &a.common,
            Command::Bounds(a) => &a.common,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Auto,
    IntegerExact,
    ContinuousAnalytic,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Step4 {
    Dft,
    Hadamard,
}

#[derive(Args, Debug)]
struct Common {
    /// key=value file; explicit flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output format [default: json]
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write output here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Schedule {
    /// Lattice dimension [default: 1]
    #[arg(long)]
    d: Option<u32>,
    /// Levels per site [default: 2]
    #[arg(long)]
    q: Option<usize>,
    /// Base cube side [default: 2]
    #[arg(long)]
    r0: Option<u64>,
    /// Envelope prefactor; defaults to the regime minimum
    #[arg(long)]
    k_alpha: Option<f64>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    schedule: Schedule,
    /// Interaction exponent
    #[arg(long)]
    alpha: Option<f64>,
    /// Cube side
    #[arg(long)]
    r: Option<f64>,
    /// Merge factors, bottom level first
    #[arg(long, value_delimiter = ',')]
    force_m: Option<Vec<u64>>,
    /// Planner [default: integer-exact]
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    schedule: Schedule,
    /// Interaction exponent
    #[arg(long)]
    alpha: Option<f64>,
    /// Cube side
    #[arg(long)]
    r: Option<u64>,
    /// Merge factors, bottom level first
    #[arg(long, value_delimiter = ',')]
    force_m: Option<Vec<u64>>,
    /// Input coefficients a_0,..,a_{q-1} or random:SEED [default: random:0]
    #[arg(long, allow_hyphen_values = true)]
    coeff: Option<String>,
    /// Information site (flat index) [default: 0]
    #[arg(long)]
    c: Option<usize>,
    /// Fourier gate used on the anchors [default: dft]
    #[arg(long, value_enum)]
    step4: Option<Step4>,
    /// Maximum number of amplitudes [default: 2^26]
    #[arg(long)]
    mem_cap: Option<usize>,
    /// Write the final amplitudes as CSV here
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Skip amplitudes at or below this magnitude in the dump [default: 1e-12]
    #[arg(long)]
    dump_threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct TransferArgs {
    #[command(flatten)]
    sim: SimulateArgs,
    /// Destination site [default: last site]
    #[arg(long)]
    c_prime: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    schedule: Schedule,
    /// Interaction exponents
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    r_values: Option<Vec<f64>>,
    /// Planner [default: auto]
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    /// Interaction exponent
    #[arg(long)]
    alpha: Option<f64>,
    /// Lattice dimension [default: 1]
    #[arg(long)]
    d: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<u64>>,
}

/// Run with the output directory taken from the environment.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    run_with(args, dir.as_deref(), out, err)
}

/// Run with an explicit output directory for relative paths.
pub fn run_with<I, T>(args: I, output_dir: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    match execute(argv, output_dir, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.record());
            e.code()
        }
    }
}

fn execute(mut argv: Vec<OsString>, output_dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            return match e.kind() {
                K::DisplayHelp | K::DisplayVersion => write_all(out, &e.render().to_string()),
                _ => Err(CliError::usage(e.render().to_string().trim_end())),
            };
        }
    };
    if let Some(path) = cli.command.common().config.clone() {
        let entries = config::load(&path)?;
        let (accepted, known) = flag_sets(cli.command.name());
        config::merge(&mut argv, &entries, &accepted, &known)?;
        cli = Cli::try_parse_from(&argv).map_err(|e| {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or_default().to_string();
            CliError::config(format!("{}: {first}", path.display()))
        })?;
    }
    let sink = Sink {
        format: cli.command.common().format.unwrap_or(Format::Json),
        path: cli.command.common().out.clone(),
        output_dir,
    };
    match &cli.command {
        Command::Plan(a) => cmd_plan(a, &sink, out),
        Command::Simulate(a) => cmd_simulate(a, &sink, out),
        Command::Transfer(a) => cmd_transfer(a, &sink, out),
        Command::Sweep(a) => cmd_sweep(a, &sink, out),
        Command::Bounds(a) => cmd_bounds(a, &sink, out),
    }
}

/// Long flags of `subcommand`, and of every subcommand.
fn flag_sets(subcommand: &str) -> (BTreeSet<String>, BTreeSet<String>) {
    let cmd = Cli::command();
    let mut accepted = BTreeSet::new();
    let mut known = BTreeSet::new();
    for sub in cmd.get_subcommands() {
        for arg in sub.get_arguments() {
            if let Some(long) = arg.get_long() {
                if matches!(long, "help" | "version" | "config") {
                    continue;
                }
                known.insert(long.to_string());
                if sub.get_name() == subcommand {
                    accepted.insert(long.to_string());
                }
            }
        }
    }
    (accepted, known)
}

struct Sink<'a> {
    format: Format,
    path: Option<PathBuf>,
    output_dir: Option<&'a Path>,
}

impl Sink<'_> {
    fn emit(&self, out: &mut dyn Write, body: &str) -> Result<(), CliError> {
        let mut body = body.to_string();
        if !body.ends_with('\n') {
            body.push('\n');
        }
        match &self.path {
            None => write_all(out, &body),
            Some(p) => write_file(&resolve(p, self.output_dir), &body),
        }
    }
}

fn resolve(path: &Path, dir: Option<&Path>) -> PathBuf {
    match dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn write_all(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(format!("cannot write output: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::usage(format!("missing required flag --{flag}")))
}

fn check_q(q: usize) -> Result<usize, CliError> {
    if !(2..=MAX_Q).contains(&q) {
        return Err(CliError::invalid(format!("--q must be between 2 and {MAX_Q}, got {q}")));
    }
    Ok(q)
}

fn schedule_options(s: &Schedule, forced_m: &Option<Vec<u64>>) -> Result<ScheduleOptions, CliError> {
    Ok(ScheduleOptions {
        k_alpha: s.k_alpha,
        forced_m: forced_m.clone(),
        q: check_q(s.q.unwrap_or(2))?,
        ..ScheduleOptions::default()
    })
}

/// One row per recursion level, root first.
#[derive(Serialize)]
struct PlanRow {
    level: usize,
    r: f64,
    r1: Option<f64>,
    m: Option<f64>,
    t1: f64,
    t2: f64,
    t_total: f64,
    bound: f64,
    within_bound: bool,
    forced: bool,
}

fn plan_rows(p: &SchedulePlan) -> Vec<PlanRow> {
    let chain = p.root.chain();
    let height = chain.len() - 1;
    chain
        .iter()
        .enumerate()
        .map(|(i, n)| PlanRow {
            level: height - i,
            r: n.r,
            r1: n.r1,
            m: n.m,
            t1: n.t1,
            t2: n.t2,
            t_total: n.t_total,
            bound: n.bound,
            within_bound: n.within_bound,
            forced: n.forced,
        })
        .collect()
}

fn cmd_plan(a: &PlanArgs, sink: &Sink, out: &mut dyn Write) -> Result<(), CliError> {
    let alpha = need(&a.alpha, "alpha")?;
    let d = a.schedule.d.unwrap_or(1);
    regime_of(alpha, d)?;
    let r = need(&a.r, "r")?;
    let r0 = a.schedule.r0.unwrap_or(2);
    let opts = schedule_options(&a.schedule, &a.force_m)?;
    let p = match a.mode.unwrap_or(ModeArg::IntegerExact) {
        ModeArg::IntegerExact => {
            if !(r >= 1.0 && r.fract() == 0.0 && r < u64::MAX as f64) {
                return Err(CliError::invalid(format!("integer-exact mode needs a positive integer --r, got {r}")));
            }
            plan(alpha, d, r as u64, r0, &opts)?
        }
        ModeArg::ContinuousAnalytic => {
            if opts.forced_m.is_some() {
                return Err(CliError::invalid("--force-m only applies to integer-exact plans"));
            }
            plan_continuous(alpha, d, r, r0, &opts)?
        }
        ModeArg::Auto => return Err(CliError::invalid("plan needs --mode integer-exact or continuous-analytic")),
    };
    let body = match sink.format {
        Format::Json => p.to_json()?,
        Format::Csv => to_csv(&plan_rows(&p))?,
    };
    sink.emit(out, &body)
}

fn parse_coefficients(spec: &str, q: usize) -> Result<Vec<Complex64>, CliError> {
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed: u64 = seed
            .trim()
            .parse()
            .map_err(|_| CliError::invalid(format!("random seed must be a 64-bit unsigned integer, got {seed:?}")))?;
        return Ok(haar_state_seeded(q, seed));
    }
    let coeffs = spec
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<Complex64>()
                .ok()
                .filter(|c| c.re.is_finite() && c.im.is_finite())
                .ok_or_else(|| CliError::invalid(format!("cannot parse coefficient {t:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if coeffs.len() != q {
        return Err(CliError::invalid(format!("--coeff needs {q} coefficients, got {}", coeffs.len())));
    }
    Ok(coeffs)
}

/// Everything a simulation run needs, validated.
struct Prepared {
    plan: SchedulePlan,
    lattice: LatticeSpec,
    n: usize,
    site: usize,
    coefficients: Vec<Complex64>,
    state: StateVector,
    opts: ProtocolOptions,
}

fn prepare(a: &SimulateArgs) -> Result<Prepared, CliError> {
    let alpha = need(&a.alpha, "alpha")?;
    let d = a.schedule.d.unwrap_or(1);
    regime_of(alpha, d)?;
    let r = need(&a.r, "r")?;
    let r0 = a.schedule.r0.unwrap_or(2);
    let opts = schedule_options(&a.schedule, &a.force_m)?;
    let q = opts.q;
    let cap = a.mem_cap.unwrap_or(DEFAULT_MEMORY_CAP);
    if cap == 0 || cap > MAX_MEMORY_CAP {
        return Err(CliError::invalid(format!("--mem-cap must be between 1 and {MAX_MEMORY_CAP}, got {cap}")));
    }
    let p = plan(alpha, d, r, r0, &opts)?;
    let lattice = match p.lattice {
        Some(l) => l,
        None => LatticeSpec::new(d, usize::try_from(r).unwrap_or(usize::MAX), q)?,
    };
    let n = lattice.site_count()?;
    checked_dimension(q, n, cap)?;
    let coefficients = parse_coefficients(a.coeff.as_deref().unwrap_or("random:0"), q)?;
    let site = a.c.unwrap_or(0);
    if site >= n {
        return Err(CliError::invalid(format!("--c = {site} is not a site of a lattice with {n} sites")));
    }
    let mut zero = vec![Complex64::new(0.0, 0.0); q];
    zero[0] = Complex64::new(1.0, 0.0);
    let mut sites = vec![zero; n];
    sites[site] = coefficients.clone();
    let state = StateVector::product(q, &sites, cap)?;
    let fourier = match a.step4.unwrap_or(Step4::Dft) {
        Step4::Dft => FourierGate::Dft,
        Step4::Hadamard => FourierGate::Hadamard,
    };
    let opts = ProtocolOptions {
        fourier,
        memory_cap: cap,
        ..ProtocolOptions::default()
    };
    Ok(Prepared {
        plan: p,
        lattice,
        n,
        site,
        coefficients,
        state,
        opts,
    })
}

fn emit_trace(
    a: &SimulateArgs,
    sink: &Sink,
    out: &mut dyn Write,
    trace: &ProtocolTrace,
    state: &StateVector,
) -> Result<(), CliError> {
    if let Some(path) = &a.dump {
        let threshold = a.dump_threshold.unwrap_or(1e-12);
        if !(threshold >= 0.0) {
            return Err(CliError::invalid(format!("--dump-threshold must be >= 0, got {threshold}")));
        }
        write_file(&resolve(path, sink.output_dir), &state.dump_csv(threshold)?)?;
    }
    let body = match sink.format {
        Format::Json => trace.to_json()?,
        Format::Csv => trace.to_csv()?,
    };
    sink.emit(out, &body)
}

fn cmd_simulate(a: &SimulateArgs, sink: &Sink, out: &mut dyn Write) -> Result<(), CliError> {
    let mut p = prepare(a)?;
    let req = EncodeRequest::new(p.lattice, p.lattice.full_region(), p.site).with_coefficients(p.coefficients.clone());
    let trace = encode(&mut p.state, &req, &p.plan, &p.opts)?;
    emit_trace(a, sink, out, &trace, &p.state)
}

fn cmd_transfer(a: &TransferArgs, sink: &Sink, out: &mut dyn Write) -> Result<(), CliError> {
    let mut p = prepare(&a.sim)?;
    let to = a.c_prime.unwrap_or(p.n - 1);
    if to >= p.n {
        return Err(CliError::invalid(format!("--c-prime = {to} is not a site of a lattice with {} sites", p.n)));
    }
    let region = p.lattice.full_region();
    let trace = state_transfer(&mut p.state, &p.lattice, &region, p.site, to, &p.plan, &p.opts)?;
    emit_trace(&a.sim, sink, out, &trace, &p.state)
}

fn cmd_sweep(a: &SweepArgs, sink: &Sink, out: &mut dyn Write) -> Result<(), CliError> {
    let alphas = need(&a.alphas, "alphas")?;
    let r_values = need(&a.r_values, "r-values")?;
    let d = a.schedule.d.unwrap_or(1);
    let mode = match a.mode.unwrap_or(ModeArg::Auto) {
        ModeArg::Auto => SweepMode::Auto,
        ModeArg::IntegerExact => SweepMode::IntegerExact,
        ModeArg::ContinuousAnalytic => SweepMode::ContinuousAnalytic,
    };
    let opts = SweepOptions {
        mode,
        r0: a.schedule.r0.unwrap_or(2),
        schedule: schedule_options(&a.schedule, &None)?,
    };
    let rows = scaling_sweep(&alphas, d, &r_values, &opts)?;
    let body = match sink.format {
        Format::Json => to_json(&rows)?,
        Format::Csv => to_csv(&rows)?,
    };
    sink.emit(out, &body)
}

fn cmd_bounds(a: &BoundsArgs, sink: &Sink, out: &mut dyn Write) -> Result<(), CliError> {
    let alpha = need(&a.alpha, "alpha")?;
    let d = a.d.unwrap_or(1);
    let n_values = need(&a.n_values, "n-values")?;
    let rows = gate_bound_table(alpha, d, &n_values)?;
    let body = match sink.format {
        Format::Json => to_json(&rows)?,
        Format::Csv => to_csv(&rows)?,
    };
    sink.emit(out, &body)
}
