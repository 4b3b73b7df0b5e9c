mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use linregions_core::Error;

/// Exact linear-region analysis of piecewise-linear networks.
///
/// Exit codes: 0 success, 1 expectation or verification failure,
/// 2 usage or parse error, 3 region cap reached.
#[derive(Parser)]
#[command(name = "linregions", version)]
struct Cli {
    /// Worker threads for parallel enumeration (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Kind {
    /// One sawtooth group on R^1 (--p); --readout adds relu(folded + bias).
    Sawtooth,
    /// Folding rectifier net (--n0, --widths, --plain, --seed).
    Folding,
    /// (|x1|, |x2|) from four rectifiers.
    Abs,
    /// Maxout layer with parallel cuts (--n, --m, --k).
    Parallel,
    /// Deep maxout net of rotated cones (--n0, --depth, --k).
    Cones,
    /// Rank-2 cone net rewritten with rectifiers (--n0, --depth).
    Rank2,
    /// Maxout layer for x_i - x_j in {0, 1} (--n).
    Shi,
    /// Maxout layer for x_i - x_j in {-1, 0, 1} (--n).
    Catalan,
}

#[derive(clap::Args)]
pub struct Feasibility {
    /// Regions are clipped to the box (-B, B)^n0.
    #[arg(long = "box", default_value_t = 1e3)]
    pub box_halfwidth: f64,
    /// A region is kept iff its inscribed ball radius exceeds this.
    #[arg(long, default_value_t = 1e-7)]
    pub eps: f64,
    /// Re-check borderline regions in exact rational arithmetic.
    #[arg(long)]
    pub exact: bool,
    /// Fail with exit code 3 beyond this many regions.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form bounds for a structure: sum_{j<=n0} C(n1, j) for one layer,
    /// 2^N, prod floor(n_l/n0)^n0 * sum_j C(n_L, j) and its remainder form,
    /// maxout k^min(n,m) / min(sum_j C(k^2 m, j), k^m) and k^(L-1+n0),
    /// parameter counts and regions per parameter.
    Bounds {
        #[arg(long)]
        n0: usize,
        /// Comma-separated hidden widths.
        #[arg(long, value_delimiter = ',', required = true)]
        widths: Vec<usize>,
        /// Treat every layer as rank-k maxout.
        #[arg(long)]
        maxout_rank: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Build a witness network. The network goes to --out (or stdout), the
    /// witness description with its predicted count to --spec.
    Construct {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        readout: Option<f64>,
        #[arg(long)]
        n0: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        widths: Vec<usize>,
        /// Folding net: give remainder units zero weights.
        #[arg(long)]
        plain: bool,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Enumerate all linear regions (activation-pattern cells) of a network
    /// inside the box by layer-wise splitting with max-slack LPs.
    Enumerate {
        /// Network file; "-" or absent reads stdin.
        input: Option<PathBuf>,
        /// Exit with code 1 unless exactly this many regions are found.
        #[arg(long)]
        expect: Option<usize>,
        /// Only count regions, without geometry.
        #[arg(long)]
        count_only: bool,
        #[command(flatten)]
        feasibility: Feasibility,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count distinct activation patterns on a regular grid (n0 <= 2).
    Oracle {
        input: Option<PathBuf>,
        /// lo,hi per input coordinate, e.g. -1,1,-1,1.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        bounds: Vec<f64>,
        /// Grid points per axis.
        #[arg(long, default_value_t = 1001)]
        resolution: usize,
    },
    /// Polygons of the regions of a planar network as CSV
    /// (region_id,vertex_index,x,y) and SVG.
    Regions2d {
        input: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Clip polygons to [-V, V]^2.
        #[arg(long)]
        view: Option<f64>,
        #[command(flatten)]
        feasibility: Feasibility,
    },
    /// Distinct affine maps u.x + c of one unit over a set of points,
    /// keeping points where the unit is positive.
    Linmap {
        input: PathBuf,
        /// 1-based layer index.
        #[arg(long)]
        layer: usize,
        /// 1-based unit index within the layer.
        #[arg(long)]
        unit: usize,
        /// CSV file with one input point per row.
        #[arg(long)]
        points: PathBuf,
        /// Report at most this many pieces.
        #[arg(long)]
        max_pieces: Option<usize>,
    },
    /// Move the second point along its local gradient until the unit takes
    /// the same value as at the first point, keeping its activation pattern.
    Identify {
        input: PathBuf,
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        unit: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x1: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x2: Vec<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run every acceptance check and print a pass/fail table.
    VerifyAll {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

/// Failure with its exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn expectation(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::RegionBudget { .. } => 3,
            Error::Structure(_)
            | Error::Dimension { .. }
            | Error::Parse { .. }
            | Error::Hypothesis(_)
            | Error::Index(_)
            | Error::Io(_) => 2,
            Error::Lp { .. } | Error::NoIdentifiedPair(_) | Error::Verification { .. } => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let run = || commands::dispatch(cli.command);
    match cli.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::usage(format!("cannot start {n} workers: {e}")))?
            .install(run),
        None => run(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
