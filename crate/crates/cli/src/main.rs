//! `uavforensics` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 evidence-format error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

pub const EPOCH_ENV: &str = "UAVFORENSICS_TEST_EPOCH";

#[derive(Debug, Parser)]
#[command(name = "uavforensics", version, about = "Forensic analysis of multirotor UAV evidence")]
struct Cli {
    /// Fixed RFC 3339 timestamp used for generated_at and new manifests,
    /// for byte-identical reruns.
    #[arg(long, global = true, env = EPOCH_ENV, value_parser = parse_time)]
    test_epoch: Option<DateTime<Utc>>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CaseArgs {
    /// Case directory holding flight_log/, mission_plan/, parameter_dump/,
    /// battery_observation/, media_manifest/ and component_record/.
    case_dir: PathBuf,

    /// Output directory [default: <CASE_DIR>/analysis].
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AlignArgs {
    /// Seconds added to camera timestamps before mapping them to log time.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    camera_offset: f64,

    /// UTC instant (RFC 3339) of log time zero; derived from GPS time when omitted.
    #[arg(long, value_parser = parse_time)]
    log_epoch: Option<DateTime<Utc>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hash evidence files and create or extend manifest.json.
    Ingest {
        case_dir: PathBuf,
        /// Case identifier for a new manifest [default: directory name].
        #[arg(long)]
        case_id: Option<String>,
    },
    /// Decode ULog files and write a summary per log.
    Log {
        /// A `.ulg` file or a case directory.
        path: PathBuf,
        /// Output directory [default: <CASE_DIR>/analysis; a single file's digest goes to stdout].
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Evaluate parameters against the finding catalog.
    Params {
        #[command(flatten)]
        case: CaseArgs,
        /// Finding catalog JSON [default: embedded px4-default].
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Summarise the mission plan and compare it with the flown track.
    Mission {
        #[command(flatten)]
        case: CaseArgs,
        /// Distance in metres within which a waypoint counts as reached.
        #[arg(long, default_value_t = uavforensics::mission::DEFAULT_REACH_RADIUS_M)]
        reach_radius: f64,
    },
    /// Flight summary plus GeoJSON and KML track exports.
    Track {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Battery energy, flight time and maximum range.
    Range(RangeArgs),
    /// Geotag media by mapping capture times onto the trajectory.
    Media {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        align: AlignArgs,
    },
    /// Run every analysis the evidence supports and write report.json and report.md.
    Report {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = uavforensics::mission::DEFAULT_REACH_RADIUS_M)]
        reach_radius: f64,
        /// Battery empty voltage override in volts.
        #[arg(long)]
        empty_v: Option<f64>,
        #[command(flatten)]
        align: AlignArgs,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

/// Flags override the case's battery document; without a case every
/// quantity except `--empty-v`, `--avionics-w` and `--cells` is required.
#[derive(Debug, Args)]
struct RangeArgs {
    /// Case directory with a battery observation document.
    case_dir: Option<PathBuf>,
    /// Output directory [default: <CASE_DIR>/analysis; stdout only without a case].
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    capacity_mah: Option<f64>,
    /// Full-charge voltage [default: 4.2 V per cell].
    #[arg(long)]
    full_v: Option<f64>,
    /// Voltage at zero remaining capacity [default: 13.55 V scaled per cell].
    #[arg(long)]
    empty_v: Option<f64>,
    #[arg(long)]
    observed_v: Option<f64>,
    /// Cell count [default: full voltage / 4.2, rounded].
    #[arg(long)]
    cells: Option<u32>,
    /// Cruise power per motor in watts.
    #[arg(long)]
    motor_w: Option<f64>,
    #[arg(long)]
    motors: Option<u32>,
    #[arg(long)]
    avionics_w: Option<f64>,
    /// Average speed in m/s [default: document, then MPC_XY_CRUISE].
    #[arg(long)]
    cruise_mps: Option<f64>,
}

fn parse_time(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("expected an RFC 3339 timestamp: {e}"))
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Evidence(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Evidence(_) => 2,
        }
    }
}

pub fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

pub fn evidence(msg: impl std::fmt::Display) -> Failure {
    Failure::Evidence(anyhow::anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let now = cli.test_epoch.unwrap_or_else(Utc::now);
    match commands::run(cli.command, now) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Evidence(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
