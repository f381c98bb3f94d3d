//! `ose`: simulate rough-relief security elements, correlate their speckle
//! patterns, and run enrollment and verification from the shell.
//!
//! Exit codes: 0 success or genuine, 1 internal or I/O failure, 2 usage or
//! invalid input, 3 counterfeit, 4 inconclusive.

mod commands;
mod manifest;
mod units;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ose_core::auth::DEFAULT_THRESHOLD;
use ose_core::correlation::{RotationSearch, ShiftRange};
use ose_core::optics::{OpticalConfig, SensorSpec};
use ose_core::OseError;
use serde::Serialize;

pub use manifest::{manifest_path, FileDigest, RunManifest};
pub use units::{parse_angle, parse_length};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_COUNTERFEIT: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "ose", version, about = "Optical security element simulation and speckle authentication")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Print the result as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded random master relief.
    GenSurface(GenSurfaceArgs),
    /// Derive an imperfect replica of a master relief.
    Replicate(ReplicateArgs),
    /// Replace part of a relief (damage or dirt).
    Occlude(OccludeArgs),
    /// Image a relief (or a holographic copy of it) onto the sensor.
    Simulate(SimulateArgs),
    /// Expected and measured average speckle diameter.
    SpeckleSize(SpeckleSizeArgs),
    /// Best ZNCC of two patterns over shifts and rotations.
    Correlate(CorrelateArgs),
    /// Export the coefficient-versus-shift map of two patterns.
    Heatmap(HeatmapArgs),
    /// Store reference patterns under an id.
    Enroll(EnrollArgs),
    /// Check a pattern against the enrolled reference.
    Verify(VerifyArgs),
    /// Multi-setup challenge against the enrolled references.
    Challenge(ChallengeArgs),
    /// Decision threshold from genuine and impostor score samples.
    Calibrate(CalibrateArgs),
    /// Two masters, two replicas each: full pairwise score matrix and heat maps.
    #[command(name = "repro-table1")]
    ReproTable1(ReproArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenSurface(_) => "gen-surface",
            Command::Replicate(_) => "replicate",
            Command::Occlude(_) => "occlude",
            Command::Simulate(_) => "simulate",
            Command::SpeckleSize(_) => "speckle-size",
            Command::Correlate(_) => "correlate",
            Command::Heatmap(_) => "heatmap",
            Command::Enroll(_) => "enroll",
            Command::Verify(_) => "verify",
            Command::Challenge(_) => "challenge",
            Command::Calibrate(_) => "calibrate",
            Command::ReproTable1(_) => "repro-table1",
        }
    }

    fn parameters(&self) -> serde_json::Value {
        let v = match self {
            Command::GenSurface(a) => serde_json::to_value(a),
            Command::Replicate(a) => serde_json::to_value(a),
            Command::Occlude(a) => serde_json::to_value(a),
            Command::Simulate(a) => serde_json::to_value(a),
            Command::SpeckleSize(a) => serde_json::to_value(a),
            Command::Correlate(a) => serde_json::to_value(a),
            Command::Heatmap(a) => serde_json::to_value(a),
            Command::Enroll(a) => serde_json::to_value(a),
            Command::Verify(a) => serde_json::to_value(a),
            Command::Challenge(a) => serde_json::to_value(a),
            Command::Calibrate(a) => serde_json::to_value(a),
            Command::ReproTable1(a) => serde_json::to_value(a),
        };
        v.expect("arguments serialize")
    }
}

#[derive(Args, Debug, Serialize)]
struct SurfaceArgs {
    /// RMS roughness.
    #[arg(long, default_value = "500nm", value_parser = parse_length)]
    sigma: f64,
    /// Lateral correlation length.
    #[arg(long, default_value = "5um", value_parser = parse_length)]
    corr_len: f64,
}

#[derive(Args, Debug, Serialize)]
struct GridArgs {
    #[arg(long, default_value_t = 1024)]
    nx: usize,
    #[arg(long, default_value_t = 1024)]
    ny: usize,
    /// Lateral sample spacing.
    #[arg(long, default_value = "2um", value_parser = parse_length)]
    pitch: f64,
}

#[derive(Args, Debug, Serialize)]
struct GenSurfaceArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    surface: SurfaceArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output height map (OSEH format).
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ReplicateArgs {
    /// Master height map.
    #[arg(long)]
    master: PathBuf,
    /// RMS of the replication height error.
    #[arg(long, value_parser = parse_length)]
    error: f64,
    /// Correlation length of the error field; defaults to a multiple of the
    /// master's.
    #[arg(long, value_parser = parse_length)]
    error_corr_len: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
enum FillKind {
    Flat,
    Random,
}

#[derive(Args, Debug, Serialize)]
struct OccludeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Rectangle `x0,y0,width,height` in grid pixels.
    #[arg(long, value_delimiter = ',', num_args = 4, conflicts_with = "fraction")]
    rect: Option<Vec<usize>>,
    /// Fraction of columns replaced, starting at the left edge.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long, value_enum, default_value = "flat")]
    fill: FillKind,
    /// Seed of the fresh relief used by `--fill random`.
    #[arg(long, default_value_t = 0)]
    fill_seed: u64,
    #[command(flatten)]
    surface: SurfaceArgs,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct OpticsArgs {
    #[arg(long, default_value = "650nm", value_parser = parse_length)]
    lambda: f64,
    /// Incidence angle.
    #[arg(long, default_value = "0deg", value_parser = parse_angle)]
    theta: f64,
    /// Lens aperture diameter.
    #[arg(long, default_value = "5.9mm", value_parser = parse_length)]
    aperture: f64,
    /// Lens to sensor distance.
    #[arg(long, default_value = "75mm", value_parser = parse_length)]
    z: f64,
    #[arg(long, default_value = "2.2265625um", value_parser = parse_length)]
    px_pitch: f64,
    #[arg(long, default_value_t = 512)]
    px_w: usize,
    #[arg(long, default_value_t = 512)]
    px_h: usize,
    #[arg(long, default_value_t = 8)]
    bit_depth: u8,
    /// Illumination power relative to auto exposure.
    #[arg(long, default_value_t = 1.0)]
    exposure: f64,
}

impl OpticsArgs {
    fn config(&self) -> OpticalConfig {
        OpticalConfig {
            lambda: self.lambda,
            theta_inc: self.theta,
            aperture_d: self.aperture,
            dist_z: self.z,
            sensor: SensorSpec {
                px_w: self.px_w,
                px_h: self.px_h,
                px_pitch: self.px_pitch,
                bit_depth: self.bit_depth,
            },
            illum_power_scale: self.exposure,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Height map to image.
    #[arg(long)]
    surface: PathBuf,
    #[command(flatten)]
    optics: OpticsArgs,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    /// Image a holographic copy of the relief recorded at this wavelength
    /// instead of the relief itself.
    #[arg(long, value_parser = parse_length)]
    hologram_lambda: Option<f64>,
    /// Recording incidence angle of the holographic copy.
    #[arg(long, value_parser = parse_angle, requires = "hologram_lambda")]
    hologram_theta: Option<f64>,
    /// Output pattern PNG; the capture setup goes to a `.json` sidecar.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SpeckleSizeArgs {
    /// Pattern to measure; its sidecar supplies the setup.
    #[arg(long)]
    pattern: Option<PathBuf>,
    #[command(flatten)]
    optics: OpticsArgs,
    /// Write the result JSON here.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SearchArgs {
    /// Largest shift searched along each axis, in pixels.
    #[arg(long, default_value_t = 16)]
    max_shift: usize,
    /// Half-width of the rotation sweep.
    #[arg(long, default_value = "0.5deg", value_parser = parse_angle)]
    theta_range: f64,
    #[arg(long, default_value = "0.25deg", value_parser = parse_angle)]
    theta_step: f64,
    /// Step-halving passes around the best angle.
    #[arg(long, default_value_t = 0)]
    refine: u32,
}

impl SearchArgs {
    fn search(&self) -> RotationSearch {
        RotationSearch {
            theta_range: self.theta_range,
            theta_step: self.theta_step,
            shift: ShiftRange::square(self.max_shift),
            refine_levels: self.refine,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
enum MapFormat {
    Csv,
    Png,
}

#[derive(Args, Debug, Serialize)]
struct CorrelateArgs {
    /// Reference pattern.
    #[arg(long)]
    a: PathBuf,
    /// Pattern to register against the reference.
    #[arg(long)]
    b: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    /// Also export the map at the winning rotation (CSV or PNG by extension).
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct HeatmapArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 16)]
    max_shift: usize,
    /// Rotation of `b` relative to `a` to undo before shifting.
    #[arg(long, default_value = "0deg", value_parser = parse_angle)]
    rotation: f64,
    /// Defaults to the output file extension.
    #[arg(long, value_enum)]
    format: Option<MapFormat>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EnrollArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    id: String,
    /// Reference pattern PNG with sidecar; repeat for several setups.
    #[arg(long = "pattern", required = true)]
    patterns: Vec<PathBuf>,
    /// RFC 3339 creation time recorded in the manifest (default: now).
    #[arg(long)]
    created_at: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    id: String,
    /// Test pattern PNG with sidecar.
    #[arg(long)]
    pattern: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    search: SearchArgs,
    /// Write the decision JSON here.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ChallengeArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    id: String,
    /// Probe pattern PNG with sidecar; repeat once per setup.
    #[arg(long = "pattern", required = true)]
    patterns: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct CalibrateArgs {
    /// Comma-separated genuine scores.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    genuine: Vec<f64>,
    /// Comma-separated impostor scores.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    impostor: Vec<f64>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ReproArgs {
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
    /// Comma-separated seed sets; one full experiment per set.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    /// Replica error RMS.
    #[arg(long, default_value = "65nm", value_parser = parse_length)]
    error: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    surface: SurfaceArgs,
    #[command(flatten)]
    optics: OpticsArgs,
    #[command(flatten)]
    search: SearchArgs,
}

/// Where the run manifest of a command goes.
enum ManifestPlace {
    /// Beside this output file.
    Beside(PathBuf),
    /// Embedded as `run` in the JSON printed on stdout.
    Stdout,
}

/// What a command produced, before the manifest is attached.
struct Outcome {
    result: serde_json::Value,
    text: String,
    code: i32,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seeds: Vec<u64>,
    place: ManifestPlace,
}

/// Maps a library error to an exit code: bad input is a usage error,
/// failures of the environment are internal.
pub fn exit_code_for(err: &OseError) -> i32 {
    match err {
        OseError::Io { .. } => EXIT_INTERNAL,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    let outcome = match commands::execute(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    match finish(&cli, &args, outcome, start) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn finish(cli: &Cli, args: &[OsString], mut outcome: Outcome, start: Instant) -> Result<i32, OseError> {
    let digests = |paths: &[PathBuf]| -> Result<Vec<FileDigest>, OseError> {
        let mut all = Vec::new();
        for p in paths {
            all.extend(manifest::digest_tree(p).map_err(|e| OseError::Io {
                path: p.clone(),
                source: e,
            })?);
        }
        Ok(all)
    };
    let run = RunManifest {
        command: cli.command.name().to_string(),
        argv: args.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        parameters: cli.command.parameters(),
        seeds: outcome.seeds.clone(),
        inputs: digests(&outcome.inputs)?,
        outputs: digests(&outcome.outputs)?,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        duration_s: start.elapsed().as_secs_f64(),
    };
    match &outcome.place {
        ManifestPlace::Beside(path) => {
            let target = manifest_path(path);
            ose_core::io::write_json(&target, &run)?;
            if let serde_json::Value::Object(m) = &mut outcome.result {
                m.insert("run_manifest".into(), target.display().to_string().into());
            }
        }
        ManifestPlace::Stdout => {
            if let serde_json::Value::Object(m) = &mut outcome.result {
                m.insert("run".into(), serde_json::to_value(&run).expect("manifest serializes"));
            }
        }
    }
    let body = if cli.json {
        serde_json::to_string_pretty(&outcome.result).expect("result serializes")
    } else {
        outcome.text.trim_end().to_string()
    };
    // A closed pipe (`ose ... | head`) is not a failure of the command.
    let _ = writeln!(std::io::stdout().lock(), "{body}");
    Ok(outcome.code)
}
