//! Command-line front end: parameter loading, subcommand dispatch and
//! CSV/JSON output.
//!
//! Parameters are resolved in layers: reference defaults, then the preset,
//! then the `--params` file, then individual flags.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use omit_ring::config::{apply_key, dump_config, parse_config};
use omit_ring::oracle::{verify_against_linear, OracleOptions};
use omit_ring::params::derive_rates;
use omit_ring::presets::{Preset, PresetKind};
use omit_ring::spectra::{
    delay_scan, ef_scan, isolation, sweep_spectrum, sweep_with_delay, write_pairs_csv,
    write_spectrum_csv, write_triples_csv, OperatingPoint,
};
use omit_ring::steady_state::count_branches;
use omit_ring::{
    DeltaPConvention, IsolationNorm, JMode, PhysicalParams, SagnacSplit, SpectrumOptions, SweepGrid,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "OMIT_RING_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] omit_ring::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("verification failed at {failed} of {total} probe offsets")]
    Verification { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_validation() => EXIT_USAGE,
            CliError::Core(_) => EXIT_SOLVER,
            CliError::Usage(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Verification { .. } => EXIT_VERIFY,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "omit-ring",
    version,
    about = "Probe spectra of a spinning optomechanical ring with a two-level emitter"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean-field steady state as JSON.
    Steady(SteadyArgs),
    /// Transmission and reflection over a probe-detuning grid.
    Sweep(SweepArgs),
    /// |T_cw - T_ccw| over a probe-detuning grid.
    Isolation(IsolationArgs),
    /// Enhancement factor at delta_p = 0 versus spin magnitude.
    EfScan(ScanArgs),
    /// Group delay at delta_p = 0 versus spin magnitude.
    DelayScan(DelayScanArgs),
    /// Compare the sideband solver with time-domain integration.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// `key = value` parameter file.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Output file; stdout when omitted. Written atomically.
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// fig2, fig3a, fig3b, fig4, fig5a, fig5b or fig6.
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Print the effective parameter file and exit.
    #[arg(long)]
    pub print_config: bool,
    /// Override one parameter, e.g. `--set gamma_star=2e4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Signed spin rate (s^-1), positive is clockwise.
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub cooperativity: Option<f64>,
    /// How the Sagnac shift is shared by the two modes: opposite or common.
    #[arg(long, default_value = "opposite")]
    pub sagnac_split: SagnacSplit,
    /// max or raw.
    #[arg(long, default_value = "max")]
    pub isolation_norm: IsolationNorm,
    /// Origin of delta_p: mechanical (eta - omega_m) or pump (eta - Delta_c).
    #[arg(long, default_value = "mechanical")]
    pub delta_p_convention: DeltaPConvention,
    /// cooperativity or table.
    #[arg(long)]
    pub j_mode: Option<JMode>,
    /// Seed each spin rate of a scan from the previous steady state: on or off.
    #[arg(long, default_value = "on", value_parser = parse_switch, action = clap::ArgAction::Set)]
    pub continuation: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// First probe detuning (s^-1).
    #[arg(long, allow_negative_numbers = true)]
    pub from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub to: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SteadyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Add a group-delay column.
    #[arg(long)]
    pub delay: bool,
}

#[derive(Debug, Args)]
pub struct IsolationArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated spin magnitudes; default 0..120e3 in steps of 2e3.
    #[arg(long, value_delimiter = ',')]
    pub omegas: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct DelayScanArgs {
    #[command(flatten)]
    pub scan: ScanArgs,
    /// Finite-difference step (s^-1); default is the plotted window / 1e6.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Relative tolerance on da-, db- and dx.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Comma-separated probe detunings (s^-1).
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "-2e6,0,2e6"
    )]
    pub delta_p: Vec<f64>,
    /// Probe power multiplier for both paths.
    #[arg(long, default_value_t = 1e-3)]
    pub probe_scale: f64,
}

fn parse_switch(s: &str) -> std::result::Result<bool, String> {
    match s {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        other => Err(format!("expected on or off, got `{other}`")),
    }
}

/// Parameters and options after every layer has been applied.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub options: SpectrumOptions,
    pub preset: Option<Preset>,
    pub warnings: Vec<String>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = self.preset.map(Preset::params).unwrap_or_default();
        let (mut params, mut warnings) = match &self.params {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_config(&text, base).map_err(|e| match e {
                    omit_ring::Error::Config { line, message } => {
                        CliError::Usage(format!("{}:{line}: {message}", path.display()))
                    }
                    e => e.into(),
                })?
            }
            None => (base, Vec::new()),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            apply_key(&mut params, 0, k.trim(), v.trim())?;
        }
        if let Some(w) = self.omega {
            params.spin_rate = w;
        }
        if let Some(c) = self.cooperativity {
            params.cooperativity = c;
        }
        if let Some(j) = self.j_mode {
            params.j_mode = j;
        }
        params.validate()?;
        warnings.extend(params.warnings());
        let options = SpectrumOptions {
            split: self.sagnac_split,
            convention: self.delta_p_convention,
            isolation_norm: self.isolation_norm,
            continuation: self.continuation,
            ..SpectrumOptions::default()
        };
        Ok(RunConfig {
            params,
            options,
            preset: self.preset,
            warnings,
        })
    }
}

impl GridArgs {
    fn resolve(&self, preset: Option<Preset>) -> Result<SweepGrid> {
        let d = preset
            .map(Preset::grid)
            .unwrap_or_else(SweepGrid::default_window);
        Ok(SweepGrid::new(
            self.from.unwrap_or(d.start),
            self.to.unwrap_or(d.stop),
            self.points.unwrap_or(d.count),
        )?)
    }
}

fn default_scan(preset: Option<Preset>) -> Vec<f64> {
    match preset {
        Some(p) if !p.omega_scan().is_empty() => p.omega_scan(),
        _ => Preset::Fig5b.omega_scan(),
    }
}

/// Writes through a temporary file in the target directory so a failed run
/// never leaves a partial file behind.
fn emit(
    output: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    match output {
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match body(&mut lock).and_then(|_| lock.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                }),
            }
        }
        Some(path) => {
            let io_err = |source| CliError::Io {
                path: path.to_path_buf(),
                source,
            };
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
            {
                let mut w = std::io::BufWriter::new(tmp.as_file_mut());
                body(&mut w).map_err(io_err)?;
                w.flush().map_err(io_err)?;
            }
            tmp.persist(path).map_err(|e| io_err(e.error))?;
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SteadyReport {
    pub a_re: f64,
    pub a_im: f64,
    pub b_re: f64,
    pub b_im: f64,
    pub sigma_re: f64,
    pub sigma_im: f64,
    pub x: f64,
    pub iterations: usize,
    pub residual: f64,
    pub branch_count: usize,
}

fn write_json<T: Serialize + ?Sized>(w: &mut dyn Write, value: &T) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    w.write_all(b"\n")
}

fn steady(args: &SteadyArgs, cfg: &RunConfig) -> Result<()> {
    let op = OperatingPoint::new(&cfg.params, &cfg.options, None)?;
    let s = op.steady;
    let report = SteadyReport {
        a_re: s.a_mean.re,
        a_im: s.a_mean.im,
        b_re: s.b_mean.re,
        b_im: s.b_mean.im,
        sigma_re: s.sigma_mean.re,
        sigma_im: s.sigma_mean.im,
        x: s.x_mean,
        iterations: s.iterations,
        residual: s.residual,
        branch_count: count_branches(&op.rates)?,
    };
    if report.branch_count > 1 {
        log::warn!(
            "{} steady-state branches; reporting the one reached from the seed",
            report.branch_count
        );
    }
    emit(args.common.output.as_deref(), |w| write_json(w, &report))
}

fn sweep(args: &SweepArgs, cfg: &RunConfig) -> Result<()> {
    let grid = args.grid.resolve(cfg.preset)?;
    let points = if args.delay {
        sweep_with_delay(&cfg.params, &grid, &cfg.options)?
    } else {
        sweep_spectrum(&cfg.params, &grid, &cfg.options)?
    };
    emit(args.common.output.as_deref(), |w| {
        write_spectrum_csv(w, &points)
    })
}

fn isolation_cmd(args: &IsolationArgs, cfg: &RunConfig) -> Result<()> {
    let grid = args.grid.resolve(cfg.preset)?;
    let omega = cfg.params.spin_rate;
    if omega == 0.0 {
        return Err(CliError::Usage(
            "isolation needs a nonzero --omega (or --preset fig4)".into(),
        ));
    }
    let rows = isolation(&cfg.params, &grid, omega.abs(), &cfg.options)?;
    emit(args.common.output.as_deref(), |w| {
        write_pairs_csv(w, "delta_p,I", &rows)
    })
}

fn scan_omegas(args: &ScanArgs, cfg: &RunConfig) -> Vec<f64> {
    if args.omegas.is_empty() {
        default_scan(cfg.preset)
    } else {
        args.omegas.clone()
    }
}

fn ef_scan_cmd(args: &ScanArgs, cfg: &RunConfig) -> Result<()> {
    let rows = ef_scan(&cfg.params, &scan_omegas(args, cfg), &cfg.options)?;
    emit(args.common.output.as_deref(), |w| {
        write_triples_csv(w, "omega,ef_cw,ef_ccw", &rows)
    })
}

fn delay_scan_cmd(args: &DelayScanArgs, cfg: &RunConfig) -> Result<()> {
    let rows = delay_scan(
        &cfg.params,
        &scan_omegas(&args.scan, cfg),
        args.step,
        &cfg.options,
    )?;
    emit(args.scan.common.output.as_deref(), |w| {
        write_triples_csv(w, "omega,tau_cw,tau_ccw", &rows)
    })
}

fn oracle_check(args: &OracleArgs, cfg: &RunConfig) -> Result<()> {
    if args.tol.is_nan() || args.tol < 0.0 {
        return Err(CliError::Usage("--tol must be >= 0".into()));
    }
    if args.probe_scale.is_nan() || args.probe_scale <= 0.0 {
        return Err(CliError::Usage("--probe-scale must be > 0".into()));
    }
    let rates = derive_rates(&cfg.params, cfg.options.split)?;
    let offset = match cfg.options.convention {
        DeltaPConvention::MechanicalSideband => rates.omega_m,
        DeltaPConvention::PumpDetuning => rates.delta_c,
    };
    let etas: Vec<f64> = args.delta_p.iter().map(|d| d + offset).collect();
    let opts = OracleOptions {
        probe_scale: args.probe_scale,
        split: cfg.options.split,
        ..OracleOptions::default()
    };
    let rows = verify_against_linear(&cfg.params, &etas, args.tol, &opts)?;
    emit(args.common.output.as_deref(), |w| write_json(w, &rows))?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Verification {
            failed,
            total: rows.len(),
        });
    }
    Ok(())
}

fn common(cmd: &Command) -> &CommonArgs {
    match cmd {
        Command::Steady(a) => &a.common,
        Command::Sweep(a) => &a.common,
        Command::Isolation(a) => &a.common,
        Command::EfScan(a) => &a.common,
        Command::DelayScan(a) => &a.scan.common,
        Command::OracleCheck(a) => &a.common,
    }
}

fn check_preset(cmd: &Command, preset: Option<Preset>) -> Result<()> {
    let Some(p) = preset else { return Ok(()) };
    let ok = matches!(
        (cmd, p.kind()),
        (Command::Sweep(_), PresetKind::Spectrum)
            | (Command::Isolation(_), PresetKind::Isolation)
            | (Command::EfScan(_), PresetKind::EnhancementScan)
            | (Command::DelayScan(_), PresetKind::DelayScan)
            | (Command::Steady(_) | Command::OracleCheck(_), _)
    );
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "preset {p} does not apply to this subcommand"
        )))
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    // A pool that is already built (repeated calls in one process) is kept.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    configure_threads()?;
    let args = common(&cli.command);
    check_preset(&cli.command, args.preset)?;
    let cfg = args.resolve()?;
    for w in &cfg.warnings {
        log::warn!("{w}");
    }
    if args.print_config {
        let text = dump_config(&cfg.params);
        return emit(args.output.as_deref(), |w| w.write_all(text.as_bytes()));
    }
    match &cli.command {
        Command::Steady(a) => steady(a, &cfg),
        Command::Sweep(a) => sweep(a, &cfg),
        Command::Isolation(a) => isolation_cmd(a, &cfg),
        Command::EfScan(a) => ef_scan_cmd(a, &cfg),
        Command::DelayScan(a) => delay_scan_cmd(a, &cfg),
        Command::OracleCheck(a) => oracle_check(a, &cfg),
    }
}

/// Parses `argv` (including the program name) and runs one subcommand.
/// Returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        let validation = omit_ring::Error::Domain("bad".into());
        assert_eq!(CliError::from(validation).exit_code(), EXIT_USAGE);
        let solver = omit_ring::Error::NonConvergence {
            iterations: 3,
            residual: 1.0,
            lo: 0.0,
            hi: 1.0,
            damping: 0.5,
        };
        assert_eq!(CliError::from(solver.clone()).exit_code(), EXIT_SOLVER);
        let nested = omit_ring::Error::AtSpin {
            omega: 4e4,
            source: Box::new(solver),
        };
        assert_eq!(CliError::from(nested).exit_code(), EXIT_SOLVER);
        assert_eq!(
            CliError::Verification {
                failed: 1,
                total: 2
            }
            .exit_code(),
            EXIT_VERIFY
        );
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run(["omit-ring", "nope"]), EXIT_USAGE);
        assert_eq!(run(["omit-ring"]), EXIT_USAGE);
    }

    #[test]
    fn switch_values() {
        assert_eq!(parse_switch("on"), Ok(true));
        assert_eq!(parse_switch("off"), Ok(false));
        assert!(parse_switch("maybe").is_err());
    }
}
