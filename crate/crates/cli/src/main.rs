use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linklab::coupling::ChannelSeries;
use linklab::dsp::{debpsk_ber_theory, loop_variance_bounds, pull_in_time, LoopGains};
use linklab::lab::receiver::{run_link_traced, SampleTrace};
use linklab::lab::validate::{self, CriterionReport};
use linklab::lab::{
    constant_channel, simulate_channel, sweep_snr, write_sweep_csv, Acquisition, ExperimentConfig, RunOptions,
};
use linklab::math::db_to_linear;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_NO_LOCK: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "linklab",
    version,
    about = "Coherent LEO-to-ground optical downlink simulator"
)]
struct Cli {
    /// TOML experiment configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set link.esn0_db=6`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (overrides outputs.dir).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    #[arg(short, long, global = true)]
    seed: Option<u64>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate channel series with and without AO.
    Channel(ChannelArgs),
    /// Run the receiver once and write a metrics report.
    Link(LinkArgs),
    /// SNR sweep over seeds, written as CSV.
    Sweep(SweepArgs),
    /// Print loop design numbers and theory tables.
    Bounds(BoundsArgs),
    /// Run the acceptance criteria.
    Validate(ValidateArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Args, Debug)]
struct ChannelArgs {
    #[arg(long)]
    duration: Option<f64>,
    /// Grid size (power of two).
    #[arg(long)]
    grid_n: Option<usize>,
    /// Cn² scale factor; 0 gives a turbulence-free channel.
    #[arg(long)]
    turbulence_scale: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct StreamArgs {
    /// FSOC channel series to replay; constant amplitude when omitted.
    #[arg(long)]
    channel: Option<PathBuf>,
    #[arg(long)]
    delta_f: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    symbols_per_frame: Option<u64>,
    /// Replay ρ(t) only.
    #[arg(long)]
    amplitude_only: bool,
    /// Bypass the AGC.
    #[arg(long)]
    no_agc: bool,
}

#[derive(Args, Debug)]
struct LinkArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[arg(long)]
    esn0: Option<f64>,
    /// Write a strided per-sample trace CSV.
    #[arg(long)]
    dump: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    stream: StreamArgs,
    /// Comma-separated SNR points in dB.
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    seeds: Option<u32>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Criteria to run; all when omitted.
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<u8>>,
    /// Use this FSOC AO series for criteria 4 to 6 instead of simulating one.
    #[arg(long)]
    channel: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numeric(linklab::Error),
    NoLock,
}

impl From<linklab::Error> for CliError {
    fn from(e: linklab::Error) -> Self {
        match e {
            linklab::Error::Config(m) => CliError::Usage(m),
            other => CliError::Numeric(other),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Numeric(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numeric(e.into())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Numeric(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_NUMERIC)
        }
        Err(CliError::NoLock) => {
            eprintln!("receiver did not lock");
            ExitCode::from(EXIT_NO_LOCK)
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(o) = &cli.out {
        cfg.outputs.dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.link.seed = s;
    }
    Ok(cfg)
}

fn apply_stream(cfg: &mut ExperimentConfig, a: &StreamArgs) {
    if let Some(p) = &a.channel {
        cfg.link.channel_file = Some(p.clone());
    }
    if let Some(v) = a.delta_f {
        cfg.link.delta_f_hz = v;
    }
    if let Some(v) = a.duration {
        cfg.link.duration_s = v;
    }
    if let Some(v) = a.symbols_per_frame {
        cfg.link.symbols_per_frame = Some(v);
    }
    if a.amplitude_only {
        cfg.link.amplitude_only = true;
    }
    if a.no_agc {
        cfg.receiver.agc = false;
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Channel(a) => {
            if let Some(d) = a.duration {
                cfg.scenario.duration_s = d;
            }
            if let Some(n) = a.grid_n {
                cfg.scenario.optics.grid.n = n;
            }
            if let Some(s) = a.turbulence_scale {
                cfg.scenario.turbulence_scale = s;
            }
            cfg.validate()?;
            cmd_channel(&cfg)
        }
        Command::Link(a) => {
            apply_stream(&mut cfg, &a.stream);
            if let Some(e) = a.esn0 {
                cfg.link.esn0_db = e;
            }
            if a.dump {
                cfg.outputs.dump_samples = true;
            }
            cfg.validate()?;
            cmd_link(&cfg)
        }
        Command::Sweep(a) => {
            apply_stream(&mut cfg, &a.stream);
            if let Some(s) = a.snr {
                cfg.link.sweep_db = s;
            }
            if let Some(s) = a.seeds {
                cfg.link.seeds = s;
            }
            cfg.validate()?;
            cmd_sweep(&cfg)
        }
        Command::Bounds(a) => {
            if let Some(s) = a.snr {
                cfg.link.sweep_db = s;
            }
            cmd_bounds(&cfg, &mut io::stdout().lock())
        }
        Command::Validate(a) => cmd_validate(&cfg, &a),
        Command::Config => {
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
    }
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    log::info!("writing {}", path.display());
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_channel(cfg: &ExperimentConfig) -> CliResult<()> {
    let run = simulate_channel(&cfg.scenario, cfg.link.seed)?;
    let dir = &cfg.outputs.dir;
    for (tag, series) in [("ao", &run.with_ao), ("noao", &run.without_ao)] {
        series.write_fsoc(create(dir, &format!("channel_{tag}.fsoc"))?)?;
        series.write_csv(create(dir, &format!("channel_{tag}.csv"))?)?;
        series
            .stats()
            .write_csv(create(dir, &format!("channel_{tag}_summary.csv"))?)?;
    }
    let ao = run.with_ao.stats();
    let raw = run.without_ao.stats();
    println!(
        "frames {}  mean coupling: {:.2} dB with AO, {:.2} dB without",
        ao.n_frames, ao.mean_db, raw.mean_db
    );
    println!(
        "pupil scintillation {:.3}  Rytov {:.3}  r0 {}",
        run.scintillation_index,
        run.rytov_index,
        run.fried_parameter_m.map_or("n/a".to_string(), |r| format!("{r:.4} m"))
    );
    Ok(())
}

fn load_series(cfg: &ExperimentConfig) -> CliResult<ChannelSeries> {
    let series = match &cfg.link.channel_file {
        Some(p) => {
            let f = File::open(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            ChannelSeries::read_fsoc(BufReader::new(f))?
        }
        None => constant_channel(cfg.scenario.optics.frame_rate_hz, 1)?,
    };
    Ok(if cfg.link.amplitude_only {
        series.without_phase()
    } else {
        series
    })
}

fn cmd_link(cfg: &ExperimentConfig) -> CliResult<()> {
    let series = load_series(cfg)?;
    let params = cfg.link.params(cfg.link.esn0_db);
    let opts = RunOptions::new(cfg.link.n_samples(), cfg.link.seed);
    let stride = cfg.outputs.dump_stride.max(1);
    let mut trace = if cfg.outputs.dump_samples {
        let mut w = create(&cfg.outputs.dir, "trace.csv")?;
        writeln!(w, "index,re,im,nco_phase,f_est_hz,true_phase")?;
        Some(w)
    } else {
        None
    };
    let mut trace_err = None;
    let report = run_link_traced(&series, &params, &cfg.receiver, &opts, |t: &SampleTrace| {
        if let Some(w) = trace.as_mut() {
            if t.index.is_multiple_of(stride) && trace_err.is_none() {
                if let Err(e) = writeln!(
                    w,
                    "{},{:e},{:e},{:e},{:e},{:e}",
                    t.index, t.output.re, t.output.im, t.nco_phase, t.f_est_hz, t.true_phase
                ) {
                    trace_err = Some(e);
                }
            }
        }
    })?;
    if let Some(e) = trace_err {
        return Err(e.into());
    }
    if let Some(mut w) = trace {
        w.flush()?;
    }
    let json = report.to_json()?;
    let mut w = create(&cfg.outputs.dir, "report.json")?;
    w.write_all(json.as_bytes())?;
    w.flush()?;
    println!("{json}");
    if report.acquisition_time_s == Acquisition::NoLock {
        return Err(CliError::NoLock);
    }
    Ok(())
}

fn cmd_sweep(cfg: &ExperimentConfig) -> CliResult<()> {
    let series = load_series(cfg)?;
    let rows = sweep_snr(
        &series,
        &cfg.link.params(cfg.link.esn0_db),
        &cfg.receiver,
        &cfg.link.sweep_db,
        cfg.link.n_samples(),
        cfg.link.seed,
        cfg.link.seeds,
    )?;
    let mut w = create(&cfg.outputs.dir, "sweep.csv")?;
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    for r in &rows {
        if let Some(e) = &r.error {
            log::warn!("{} dB seed {}: {e}", r.snr_db, r.seed);
        }
    }
    Ok(())
}

fn cmd_bounds<W: Write>(cfg: &ExperimentConfig, w: &mut W) -> CliResult<()> {
    let rx = &cfg.receiver;
    let g = LoopGains::design(rx.xi, rx.blt, rx.kd, rx.k0)?;
    let t_s = 1.0 / cfg.link.symbol_rate_hz;
    let tp = pull_in_time(2.0 * std::f64::consts::PI * cfg.link.delta_f_hz, g.xi, g.omega_n(t_s));
    writeln!(w, "# K1 = {:.4e}  K2 = {:.4e}  wnT = {:.4e}", g.k1, g.k2, g.wnt)?;
    writeln!(w, "# pull-in time for {:.3e} Hz: {:.4e} s", cfg.link.delta_f_hz, tp)?;
    writeln!(w, "snr_db,crb,bpsk_as_written,bpsk_penalty,ber_theory")?;
    for &snr in &cfg.link.sweep_db {
        let x = db_to_linear(snr);
        let b = loop_variance_bounds(rx.blt, x);
        writeln!(
            w,
            "{snr},{:e},{:e},{:e},{:e}",
            b.crb,
            b.bpsk_as_written,
            b.bpsk_penalty,
            debpsk_ber_theory(x)
        )?;
    }
    Ok(())
}

fn cmd_validate(cfg: &ExperimentConfig, a: &ValidateArgs) -> CliResult<()> {
    let wanted = |id: u8| a.only.as_ref().is_none_or(|v| v.contains(&id));
    let needs_channel = (4..=7).any(wanted);
    let needs_scan = wanted(3) || wanted(4);
    let (channel, ao) = if needs_channel {
        match &a.channel {
            Some(p) if !wanted(7) => {
                let f = File::open(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                (None, Some(ChannelSeries::read_fsoc(BufReader::new(f))?))
            }
            _ => {
                let run = validate::acceptance_channel(cfg.link.seed)?;
                let ao = run.with_ao.clone();
                (Some(run), Some(ao))
            }
        }
    } else {
        (None, None)
    };
    let scan = if needs_scan {
        Some(validate::awgn_instability()?)
    } else {
        None
    };

    let mut reports: Vec<CriterionReport> = Vec::new();
    let mut emit = |r: CriterionReport| {
        print!("{r}");
        reports.push(r);
    };
    if wanted(1) {
        emit(validate::loop_design()?);
    }
    if wanted(2) {
        emit(validate::pull_in()?);
    }
    if let (true, Some(s)) = (wanted(3), &scan) {
        emit(validate::variance_vs_snr(s)?);
    }
    if let (Some(ao), Some(s)) = (&ao, &scan) {
        if wanted(4) {
            emit(validate::fading_acquisition(ao, s)?);
        }
    }
    if let Some(ao) = &ao {
        if wanted(5) {
            emit(validate::phase_noise_neutrality(ao)?);
        }
        if wanted(6) {
            emit(validate::ber(ao)?);
        }
    }
    if let (true, Some(run)) = (wanted(7), &channel) {
        emit(validate::channel_physics(run));
    }
    if wanted(8) {
        emit(validate::properties()?);
    }

    let mut w = create(&cfg.outputs.dir, "acceptance.json")?;
    serde_json::to_writer_pretty(&mut w, &reports)?;
    w.flush()?;
    println!();
    for r in &reports {
        println!("{}", r.line());
    }
    if reports.iter().all(|r| r.passed()) {
        Ok(())
    } else {
        Err(CliError::Numeric(linklab::Error::InvalidArgument(format!(
            "{} of {} criteria failed",
            reports.iter().filter(|r| !r.passed()).count(),
            reports.len()
        ))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_table_has_header_and_rows() {
        let mut cfg = ExperimentConfig::default();
        cfg.link.sweep_db = vec![0.0, 8.0];
        let mut out = Vec::new();
        cmd_bounds(&cfg, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("K1 = 1.3333e-3"));
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "snr_db,crb,bpsk_as_written,bpsk_penalty,ber_theory");
        assert_eq!(rows.len(), 3);
        assert!(rows[2].starts_with("8,7.92"));
    }

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from([
            "linklab",
            "link",
            "--esn0",
            "6",
            "--set",
            "link.delta_f_hz=0",
            "-s",
            "4",
        ])
        .unwrap();
        let cfg = load_config(&cli).unwrap();
        assert_eq!(cfg.link.delta_f_hz, 0.0);
        assert_eq!(cfg.link.seed, 4);
    }

    #[test]
    fn bad_override_is_usage_error() {
        let cli = Cli::try_parse_from(["linklab", "bounds", "--set", "link.nope=1"]).unwrap();
        assert!(matches!(load_config(&cli), Err(CliError::Usage(_))));
        let cli = Cli::try_parse_from(["linklab", "bounds", "--set", "novalue"]).unwrap();
        assert!(matches!(load_config(&cli), Err(CliError::Usage(_))));
    }
}
