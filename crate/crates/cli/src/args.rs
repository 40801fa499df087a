use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "birkhoff", version, about = "Billiards in smooth convex tables: tracing, path solving, focusing and insecurity witnesses")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for the single random generator of this invocation.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Default tolerances.
    #[arg(long, global = true, env = "BIRKHOFF_TOL_PROFILE", value_enum, default_value_t = TolProfile::Default)]
    pub tol_profile: TolProfile,

    /// General-position tolerance, overriding the profile.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Write the result here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TolProfile {
    Default,
    Strict,
    Loose,
}

impl TolProfile {
    pub fn gp_tol(self) -> f64 {
        match self {
            TolProfile::Default => 1e-4,
            TolProfile::Strict => 1e-5,
            TolProfile::Loose => 1e-3,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a table, validate it and print it with its report.
    Table(TableArgs),
    /// Trace a ray through a number of bounces.
    Trace(TraceArgs),
    /// Find billiard paths between two interior points.
    Path(PathArgs),
    /// Check whether the endpoints of a path are conjugate.
    Conjugate(ConjugateArgs),
    /// Perturb a table until it carries n paths in general position.
    Witness(WitnessArgs),
    /// Re-check a witness bundle file.
    Verify(VerifyArgs),
    /// Render a table, or a witness bundle, as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Circle,
    Ellipse,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[arg(long, value_enum, conflicts_with = "table")]
    pub preset: Option<Preset>,

    /// Table file (JSON).
    #[arg(long)]
    pub table: Option<PathBuf>,

    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,

    /// Ellipse semi-axis along x.
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,

    /// Ellipse semi-axis along y.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,

    /// Amplitude of random Fourier noise added to the preset.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    /// Highest noisy harmonic.
    #[arg(long, default_value_t = 5)]
    pub harmonics: usize,

    /// Sampling grid for validation and root bracketing.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub table: TableArgs,

    /// Interior start point.
    #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true, required_unless_present = "s")]
    pub start: Option<Vec<f64>>,

    /// Direction angle (radians) for an interior start.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub angle: f64,

    /// Boundary start parameter; use with --alpha.
    #[arg(long, requires = "alpha", conflicts_with = "start")]
    pub s: Option<f64>,

    /// Angle from the boundary tangent, in (0, pi).
    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long, default_value_t = 10)]
    pub bounces: usize,
}

#[derive(Debug, Args)]
pub struct Endpoints {
    #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true)]
    pub x: Vec<f64>,

    #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true)]
    pub y: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub table: TableArgs,

    #[command(flatten)]
    pub endpoints: Endpoints,

    #[arg(long, short = 'm', default_value_t = 1)]
    pub bounces: usize,

    /// Multi-start count.
    #[arg(long, default_value_t = 16)]
    pub starts: usize,

    /// Solve by shooting from this launch angle instead of maximizing length.
    #[arg(long, allow_negative_numbers = true)]
    pub shoot: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConjugateArgs {
    #[command(flatten)]
    pub table: TableArgs,

    #[command(flatten)]
    pub endpoints: Endpoints,

    #[arg(long, short = 'm', default_value_t = 1)]
    pub bounces: usize,

    /// Vertex parameters of the path; found by length maximization when absent.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub vertices: Option<Vec<f64>>,

    #[arg(long, default_value_t = 16)]
    pub starts: usize,
}

#[derive(Debug, Args)]
pub struct WitnessArgs {
    #[command(flatten)]
    pub table: TableArgs,

    #[command(flatten)]
    pub endpoints: Endpoints,

    /// Number of paths.
    #[arg(long, default_value_t = 3)]
    pub n: usize,

    /// Total C² distance the perturbations may spend.
    #[arg(long, default_value_t = 4.0)]
    pub budget: f64,

    #[arg(long, default_value_t = 24)]
    pub starts: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub bundle: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Witness bundle to draw; without it the table options are used.
    pub bundle: Option<PathBuf>,

    #[command(flatten)]
    pub table: TableArgs,

    /// Annotate vertices with focusing distances.
    #[arg(long)]
    pub focus: bool,

    /// Image width in pixels.
    #[arg(long, default_value_t = 640)]
    pub size: u32,
}
