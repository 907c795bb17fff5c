use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rotcon::metrics::Radius;

#[derive(Debug, Parser)]
#[command(
    name = "rotcon",
    version,
    about = "Design and evaluate rotated constellations for the Rayleigh fast-fading channel",
    long_about = "Design and evaluate rotated constellations for the Rayleigh fast-fading channel.\n\n\
        Constellations are scaled to unit energy per bit (average energy q for 2^q points) unless \
        --keep-energy is given, so N0 = 10^(-Eb/N0 / 10). Angles are in degrees."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Eb/N0 values in dB, comma separated.
    #[arg(
        long = "ebn0-db",
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true,
        value_name = "DB,.."
    )]
    pub ebn0_db: Vec<f64>,
    /// Search grid step in degrees [default: 0.0001 rad for opt-rotation, 0.001 rad for sweep].
    #[arg(long = "grid-step-deg", global = true, value_name = "DEG")]
    pub grid_step_deg: Option<f64>,
    /// Ball radius for local metrics; repeatable, `inf` allowed [default: 2 and inf].
    #[arg(long, global = true, value_name = "R")]
    pub radius: Vec<Radius>,
    /// Comparison rotation matrix (CSV) for the sweep's rate difference column.
    #[arg(long, global = true, value_name = "CSV")]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the family rotation Q_n(t), n = 2^k, as a CSV matrix.
    Family(FamilyArgs),
    /// Cutoff rate, diversity order and product distance report.
    Metrics(MetricsArgs),
    /// Maximize the cutoff rate over rotations; writes the optimal matrix.
    OptRotation(OptRotationArgs),
    /// Optimize the levels of a non-uniform QAM set.
    OptNuqam(OptNuqamArgs),
    /// Family optimum and cutoff rate for every --ebn0-db value.
    Sweep(SweepArgs),
    /// Monte Carlo bit error rate with ML decoding.
    Ber(BerArgs),
    /// Write a generated constellation as JSON or CSV.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("angle").required(true).args(["t_deg", "t"])))]
pub struct FamilyArgs {
    /// Dimension exponent, n = 2^k, 1 <= k <= 12.
    #[arg(long)]
    pub k: u32,
    /// Angle in degrees.
    #[arg(long = "t-deg", allow_negative_numbers = true)]
    pub t_deg: Option<f64>,
    /// Angle in radians.
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["qam", "nuqam", "input"])))]
pub struct Source {
    /// Square QAM order of each 2D factor (4, 16, 64, 256, 1024).
    #[arg(long, value_name = "ORDER")]
    pub qam: Option<usize>,
    /// Number of 2D QAM factors; the dimension is twice this.
    #[arg(long, default_value_t = 1, requires = "qam")]
    pub pairs: usize,
    /// Non-uniform QAM levels alpha_1 < .. < alpha_k, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "A,..")]
    pub nuqam: Option<Vec<f64>>,
    /// Constellation JSON file.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Use the points as given instead of scaling to unit energy per bit.
    #[arg(long)]
    pub keep_energy: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("rot").args(["rotation", "t_deg"])))]
pub struct Rotation {
    /// Rotation matrix CSV applied to the constellation.
    #[arg(long, value_name = "CSV")]
    pub rotation: Option<PathBuf>,
    /// Apply the family rotation Q_n(t) at this angle in degrees.
    #[arg(long = "t-deg", allow_negative_numbers = true, value_name = "DEG")]
    pub t_deg: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub rotation: Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Exhaustive search over the one-parameter family.
    Grid,
    /// Geodesic descent over all of SO(n).
    Manifold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Start {
    /// exp(H) with 1e-4 below and -1e-4 above the diagonal.
    Default,
    Identity,
}

#[derive(Debug, Args)]
pub struct OptRotationArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_enum, default_value_t = Mode::Grid)]
    pub mode: Mode,
    /// Also write the search profile (grid) or the descent trace (manifold) as CSV.
    #[arg(long, value_name = "PATH")]
    pub profile: Option<PathBuf>,
    /// Starting rotation for manifold mode.
    #[arg(long, value_enum, default_value_t = Start::Default)]
    pub start: Start,
    /// Initial descent step.
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Descent stops once the gradient field norm falls to this value.
    #[arg(long, default_value_t = 1e-8)]
    pub grad_tol: f64,
}

#[derive(Debug, Args)]
pub struct OptNuqamArgs {
    /// Bits per 2D symbol: 4, 6, 8 or 10.
    #[arg(long, value_name = "Q")]
    pub bits: u32,
    /// Starting levels; uniform QAM when omitted.
    #[arg(long, value_delimiter = ',', value_name = "A,..")]
    pub init: Option<Vec<f64>>,
    /// Additional randomly perturbed starts.
    #[arg(long, default_value_t = 0)]
    pub starts: usize,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: Source,
}

#[derive(Debug, Args)]
pub struct BerArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub rotation: Rotation,
    /// Rotate by the family optimum found at each Eb/N0.
    #[arg(long, conflicts_with = "rot")]
    pub t_opt: bool,
    /// Minimum number of simulated bits per Eb/N0 value.
    #[arg(long, default_value_t = 1_000_000)]
    pub min_bits: u64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub source: Source,
}
