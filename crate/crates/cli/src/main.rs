mod regcheck;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nbwsd::campaign::{
    load_payload, parse_pairs, read_iq, read_iq_meta, receive, run_link, sidecar_path, sweep, transmit, write_iq,
    write_iq_meta, write_outputs, write_tables, ConfigError, IqMeta, Stage,
};
use nbwsd::channelsim::apply_channel_burst;
use nbwsd::linkstats::export_csv_rows;
use nbwsd::regulation::CalibrationTable;
use nbwsd::{CampaignConfig, CampaignError, LinkReport, Scheme};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "nbwsd", version, about = "Narrowband TV white space modem, link benchmark and rule checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Modulate a payload file into a raw I/Q capture.
    Tx(TxArgs),
    /// Demodulate a raw I/Q capture back into a payload and a report.
    Rx(RxArgs),
    /// Run one simulated link end to end.
    Simulate(SimulateArgs),
    /// Run simulated links over a list of SNR values.
    Sweep(SweepArgs),
    /// Check a transmitter setup against the white space device rules.
    Regcheck(regcheck::RegcheckArgs),
    /// Convert between normalized gain and calibrated output power.
    Calibrate(CalibrateArgs),
}

/// Options shared by every command that builds a campaign configuration.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Key-value configuration file.
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_key_value)]
    set: Vec<(String, String)>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TxArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Payload file; a seeded random payload is used when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Capture to write. A `.meta` sidecar is written next to it.
    #[arg(long)]
    iq: PathBuf,
    /// Pass the capture through the configured channel before writing.
    #[arg(long)]
    impair: bool,
    /// Channel SNR in dB; implies --impair.
    #[arg(long)]
    snr: Option<String>,
}

#[derive(Debug, Args)]
struct RxArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Capture written by `tx`, with its `.meta` sidecar.
    #[arg(long)]
    iq: PathBuf,
    /// Where to write the received payload.
    #[arg(long)]
    output: Option<PathBuf>,
    /// CSV file the report row is appended to.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Channel SNR in dB, or `inf` for a clean channel.
    #[arg(long)]
    snr: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    input: Option<PathBuf>,
    /// SNR points as `start:stop:step` or a comma-separated list.
    #[arg(long)]
    snr: Option<String>,
    /// Comma-separated schemes, or `all`. Defaults to the configured scheme.
    #[arg(long)]
    schemes: Option<String>,
    /// Runs pooled into each point.
    #[arg(long)]
    repeats: Option<usize>,
    /// CSV file the sweep rows are appended to.
    #[arg(long, default_value = "sweep.csv")]
    csv: PathBuf,
    /// Directory for the per-scheme two-column tables.
    #[arg(long, default_value = "tables")]
    tables: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Normalized gain in [0, 1] to convert to dBm.
    #[arg(long, conflicts_with = "power_dbm")]
    gain: Option<f64>,
    /// Output power in dBm to convert to a gain setting.
    #[arg(long)]
    power_dbm: Option<f64>,
    /// Calibration CSV with columns gain, channel_power_dbm, psd_dbm_hz, peak_dbm.
    #[arg(long)]
    table: Option<PathBuf>,
}

/// Bad input from the command line or configuration.
#[derive(Debug, Error)]
#[error("{0}")]
struct UsageError(String);

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn path_str(p: &std::path::Path) -> String {
    p.to_string_lossy().into_owned()
}

impl ConfigArgs {
    /// Merges the config file, `--set` overrides and the given command flags,
    /// later sources winning.
    fn build(&self, flags: Vec<(&str, String)>) -> Result<CampaignConfig> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_pairs(&text)?
            }
            None => Vec::new(),
        };
        pairs.extend(self.set.iter().cloned());
        if let Some(s) = self.scheme {
            pairs.push(("scheme".into(), s.as_str().into()));
        }
        if let Some(seed) = self.seed {
            pairs.push(("seed".into(), seed.to_string()));
        }
        pairs.extend(flags.into_iter().map(|(k, v)| (k.to_string(), v)));
        let cfg = CampaignConfig::from_pairs(&pairs)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_report(r: &LinkReport) {
    let opt = |v: Option<f64>, prec: usize| v.map_or("n/a".to_string(), |x| format!("{x:.prec$}"));
    println!("scheme          {}", r.meta.scheme);
    println!("packets         {} sent, {} discarded, {} ok, {} failed", r.n_tx, r.n_discarded, r.n_ok, r.n_fail);
    println!("per             {:.6}", r.per);
    println!("plr             {:.6}", r.plr);
    println!("snr_db          {}", opt(r.snr_db, 2));
    println!("latency_ms      {}", opt(r.latency_ms, 3));
    println!("throughput_kbps {:.3}", r.throughput_kbps);
    println!("seed            {}", r.meta.seed);
}

fn cmd_tx(args: &TxArgs) -> Result<ExitCode> {
    let mut flags = Vec::new();
    if let Some(p) = &args.input {
        flags.push(("input", path_str(p)));
    }
    if let Some(s) = &args.snr {
        flags.push(("snr_db", s.clone()));
    }
    let cfg = args.config.build(flags)?;
    let payload = load_payload(&cfg)?;
    let burst = transmit(&cfg, &payload)?;
    let samples = if args.impair || args.snr.is_some() {
        let mut profile = cfg.channel.clone();
        profile.seed = cfg.seed;
        apply_channel_burst(&burst.samples, &profile, burst.burst_len)?
    } else {
        burst.samples
    };
    write_iq(&args.iq, &samples)?;
    let meta = IqMeta {
        scheme: cfg.scheme,
        sample_rate: samples.sample_rate,
        n_tx: burst.n_tx,
        payload_bytes: burst.payload_bytes,
        packet_len: cfg.frame.payload_len,
        burst_samples: burst.burst_len,
    };
    write_iq_meta(&sidecar_path(&args.iq), &meta)?;
    println!(
        "wrote {} samples at {} Hz ({} packets of {} bytes) to {}",
        samples.len(),
        samples.sample_rate,
        burst.n_tx,
        cfg.frame.payload_len,
        args.iq.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_rx(args: &RxArgs) -> Result<ExitCode> {
    let meta = read_iq_meta(&sidecar_path(&args.iq))?;
    if let Some(s) = args.config.scheme {
        if s != meta.scheme {
            return Err(UsageError(format!("capture holds {} but --scheme is {s}", meta.scheme)).into());
        }
    }
    let mut flags = vec![("scheme", meta.scheme.as_str().to_string()), ("packet_len", meta.packet_len.to_string())];
    if let Some(p) = &args.output {
        flags.push(("output", path_str(p)));
    }
    if let Some(p) = &args.csv {
        flags.push(("csv", path_str(p)));
    }
    let cfg = args.config.build(flags)?;
    let block = read_iq(&args.iq, meta.sample_rate)?;
    let outcome = receive(&cfg, &block, meta.burst_samples, meta.n_tx, meta.payload_bytes)?;
    write_outputs(&cfg, &outcome)?;
    if let Some(e) = &outcome.receiver_failure {
        eprintln!("warning: receiver gave up: {e}");
    }
    print_report(&outcome.report);
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let mut flags = Vec::new();
    for (key, p) in [("input", &args.input), ("output", &args.output), ("csv", &args.csv)] {
        if let Some(p) = p {
            flags.push((key, path_str(p)));
        }
    }
    if let Some(s) = &args.snr {
        flags.push(("snr_db", s.clone()));
    }
    let cfg = args.config.build(flags)?;
    let outcome = run_link(&cfg)?;
    if let Some(e) = &outcome.receiver_failure {
        eprintln!("warning: receiver gave up: {e}");
    }
    print_report(&outcome.report);
    Ok(ExitCode::SUCCESS)
}

fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Scheme::ALL.to_vec());
    }
    s.split(',')
        .map(|v| v.trim().parse::<Scheme>().map_err(|e| UsageError(e.to_string()).into()))
        .collect()
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode> {
    let mut flags = Vec::new();
    if let Some(p) = &args.input {
        flags.push(("input", path_str(p)));
    }
    if let Some(s) = &args.snr {
        flags.push(("sweep", s.clone()));
    }
    if let Some(r) = args.repeats {
        flags.push(("repeats", r.to_string()));
    }
    let cfg = args.config.build(flags)?;
    let schemes = match &args.schemes {
        Some(s) => parse_schemes(s)?,
        None => vec![cfg.scheme],
    };
    let mut points = Vec::new();
    let mut failed = 0;
    for scheme in schemes {
        let run = if scheme == cfg.scheme { cfg.clone() } else { cfg.with_scheme(scheme) };
        let out = sweep(&run)?;
        for f in &out.failures {
            eprintln!("{scheme} at {} dB failed: {}", f.snr_set_db, f.error);
        }
        failed += out.failures.len();
        for p in &out.points {
            let r = &p.report;
            println!(
                "{:<6} snr_set {:>6.1} dB  per {:.4}  plr {:.4}  throughput {:.2} kbps",
                scheme.as_str(),
                p.snr_set_db,
                r.per,
                r.plr,
                r.throughput_kbps
            );
        }
        points.extend(out.points);
    }
    let reports: Vec<LinkReport> = points.iter().map(|p| p.report.clone()).collect();
    export_csv_rows(&reports, &args.csv).with_context(|| format!("writing {}", args.csv.display()))?;
    let tables = write_tables(&points, &args.tables)?;
    println!("{} rows appended to {}, {} tables in {}", reports.len(), args.csv.display(), tables.len(), args.tables.display());
    if failed > 0 {
        bail!("{failed} sweep points failed");
    }
    Ok(ExitCode::SUCCESS)
}

fn load_calibration(path: Option<&std::path::Path>) -> Result<CalibrationTable> {
    Ok(match path {
        Some(p) => CalibrationTable::load(p)?,
        None => CalibrationTable::usrp_n210(),
    })
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<ExitCode> {
    let cal = load_calibration(args.table.as_deref())?;
    match (args.gain, args.power_dbm) {
        (Some(g), _) => println!("gain {g} -> {:.4} dBm", cal.gain_to_power(g)?),
        (None, Some(p)) => println!("{p} dBm -> gain {:.6}", cal.power_to_gain(p)?),
        (None, None) => {
            println!("gain  channel_power_dbm");
            for row in cal.rows() {
                println!("{:<5} {}", row.gain, row.channel_power_dbm);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn is_usage_error(e: &anyhow::Error) -> bool {
    e.is::<UsageError>()
        || e.is::<ConfigError>()
        || e.downcast_ref::<CampaignError>().is_some_and(|c| c.stage == Stage::Config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Tx(a) => cmd_tx(a),
        Command::Rx(a) => cmd_rx(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Regcheck(a) => regcheck::run(a),
        Command::Calibrate(a) => cmd_calibrate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_usage_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
