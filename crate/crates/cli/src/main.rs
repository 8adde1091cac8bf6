//! Command-line front end for the free-space optical bridge simulator.
//!
//! Exit codes: 0 on success, 2 on configuration validation errors, 3 when
//! a calibration routine does not converge, 1 otherwise.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fsobridge::calibrate::{calibrate_all, CalibrationReport};
use fsobridge::campaign::{campaign_report, run_month_campaign, run_subcarrier_report, run_sweep, run_throughput, LinkReport, ReportMeta};
use fsobridge::channel::WeatherTimeline;
use fsobridge::config::{ScenarioConfig, PRESET_NAME};
use fsobridge::report::{emit_report, load_report, ReportFormat};
use fsobridge::rng::RandomStream;
use fsobridge::Error;

#[derive(Parser)]
#[command(name = "fsobridge", version, about = "Free-space optical bridge simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario file; missing fields fall back to the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the campaign seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Built-in parameter preset.
    #[arg(long, global = true, default_value = PRESET_NAME)]
    preset: String,

    /// Output directory for report bundles.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Report encoding.
    #[arg(long, global = true, default_value = "csv")]
    format: String,

    /// Worker threads; 0 uses all cores. Outputs never depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the long-term paired coupling campaign.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep EVM against received optical power.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// One-hour high-resolution throughput trace.
    Throughput {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the receiver and campaign calibrations and write the frozen
    /// parameter file.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Re-emit CSV/JSON from a saved campaign directory.
    Report {
        /// Directory holding a previously written campaign.json.
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Write the generated default weather timeline.
    Timeline {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn load_scenario(common: &CommonArgs) -> Result<ScenarioConfig, Error> {
    if common.preset != PRESET_NAME {
        return Err(Error::Config(format!(
            "unknown preset '{}'; available: {PRESET_NAME}",
            common.preset
        )));
    }
    let mut cfg = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::paper_2023(),
    };
    if let Some(seed) = common.seed {
        cfg.campaign.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_format(common: &CommonArgs) -> Result<ReportFormat, Error> {
    common.format.parse()
}

fn meta(cfg: &ScenarioConfig, common: &CommonArgs) -> ReportMeta {
    ReportMeta {
        seed: cfg.campaign.seed,
        preset: common.preset.clone(),
        ..ReportMeta::default()
    }
}

fn emit(report: &LinkReport, common: &CommonArgs) -> Result<(), Error> {
    let format = report_format(common)?;
    let files = emit_report(report, &common.out, format)?;
    for file in files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn cmd_simulate(common: &CommonArgs) -> Result<(), Error> {
    let cfg = load_scenario(common)?;
    let traces = run_month_campaign(
        &cfg.link_topology(),
        &cfg.pointing_process(),
        &cfg.weather_timeline(),
        &cfg.weather.scintillation,
        cfg.campaign.duration_s,
        cfg.campaign.dt_s,
        &RandomStream::new(cfg.campaign.seed, 0),
        cfg.campaign.sample_cap,
    )?;
    let campaign = campaign_report(&traces)?;
    println!(
        "smf p2p {:.1} dB | mmf mean {:.1} dBm | mmf clear 3-sigma {:.2} dB | spread reduction {:.1} dB",
        campaign.smf_trace.peak_to_peak_db(),
        campaign.mmf_all.mean_dbm,
        campaign.mmf_clear.three_sigma_db,
        campaign.spread_reduction_db,
    );
    emit(
        &LinkReport {
            meta: meta(&cfg, common),
            campaign: Some(campaign),
            ..LinkReport::default()
        },
        common,
    )
}

fn cmd_sweep(common: &CommonArgs) -> Result<(), Error> {
    let cfg = load_scenario(common)?;
    let topology = cfg.link_topology();
    let stream = RandomStream::new(cfg.campaign.seed, 0);
    let sweep = run_sweep(
        &topology,
        &cfg.ofdm,
        &cfg.rop_grid(),
        cfg.receiver.crosstalk_model,
        &stream,
    )?;
    let subcarrier = run_subcarrier_report(
        &topology,
        &cfg.ofdm,
        topology.tail_terminal.receiver.saturation_rop_dbm,
        cfg.receiver.crosstalk_model,
        &stream,
    )?;
    println!(
        "10% EVM sensitivity: uni {} dBm, bidi {} dBm (OSCR {:.1} dB)",
        sweep
            .sensitivity_uni_dbm
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|| "-".into()),
        sweep
            .sensitivity_bidi_dbm
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|| "-".into()),
        sweep.oscr_db,
    );
    emit(
        &LinkReport {
            meta: meta(&cfg, common),
            sweep: Some(sweep),
            subcarrier_evm: Some(subcarrier),
            ..LinkReport::default()
        },
        common,
    )
}

fn cmd_throughput(common: &CommonArgs) -> Result<(), Error> {
    let cfg = load_scenario(common)?;
    let throughput = run_throughput(
        &cfg.link_topology(),
        &cfg.pointing_process(),
        &cfg.weather_timeline(),
        &cfg.weather.scintillation,
        cfg.campaign.throughput_duration_s,
        cfg.campaign.throughput_dt_s,
        &cfg.campaign.throughput,
        cfg.campaign.service_sensitivity_dbm,
        &RandomStream::new(cfg.campaign.seed, 0),
        cfg.campaign.sample_cap,
    )?;
    let min = throughput
        .trace
        .rate_mbps
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    println!("minimum per-second rate {min:.0} Mb/s over {} s", throughput.trace.seconds.len());
    emit(
        &LinkReport {
            meta: meta(&cfg, common),
            throughput: Some(throughput),
            ..LinkReport::default()
        },
        common,
    )
}

fn cmd_calibrate(common: &CommonArgs) -> Result<(), Error> {
    let mut cfg = load_scenario(common)?;
    let report: CalibrationReport = calibrate_all(&mut cfg)?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| Error::Io { path: common.out.display().to_string(), source: e })?;
    let frozen = common.out.join("calibrated.toml");
    cfg.save(&frozen)?;
    println!("wrote {}", frozen.display());
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("calibration report serializes")
    );
    Ok(())
}

fn cmd_report(input: &Path, common: &CommonArgs) -> Result<(), Error> {
    let report = load_report(input)?;
    emit(&report, common)
}

fn cmd_timeline(common: &CommonArgs) -> Result<(), Error> {
    let cfg = load_scenario(common)?;
    let timeline = WeatherTimeline::paper_month(cfg.campaign.seed);
    std::fs::create_dir_all(&common.out)
        .map_err(|e| Error::Io { path: common.out.display().to_string(), source: e })?;
    let path = common.out.join("timeline.toml");
    let text = toml::to_string_pretty(&timeline)
        .map_err(|e| Error::Config(format!("timeline serialize: {e}")))?;
    std::fs::write(&path, text)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(command: &Command) -> Result<(), Error> {
    match command {
        Command::Simulate { common } => with_pool(common, cmd_simulate),
        Command::Sweep { common } => with_pool(common, cmd_sweep),
        Command::Throughput { common } => with_pool(common, cmd_throughput),
        Command::Calibrate { common } => with_pool(common, cmd_calibrate),
        Command::Report { input, common } => cmd_report(input, common),
        Command::Timeline { common } => cmd_timeline(common),
    }
}

fn with_pool(common: &CommonArgs, f: fn(&CommonArgs) -> Result<(), Error>) -> Result<(), Error> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if common.workers > 0 {
        builder = builder.num_threads(common.workers);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| f(common))
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Config(_)
        | Error::NonFinite(_)
        | Error::Topology { .. }
        | Error::BeamTruncation { .. }
        | Error::ParaxialBound { .. } => 2,
        Error::Calibration(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}
