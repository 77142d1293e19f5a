use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "scca",
    version,
    about = "Two-stage sparse canonical correlation analysis",
    term_width = 80
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sparse CCA between two views
    Scca(SccaArgs),
    /// Sparse CCA across two or more views
    Mscca(MsccaArgs),
    /// Sparse CCA steered toward an accessory vector
    Dscca(DsccaArgs),
    /// Choose sparsity parameters by permutation test or cross-validation
    Tune(TuneArgs),
    /// Generate planted rank-one data, optionally with a noise sweep
    Simulate(SimulateArgs),
    /// Biplot or interpolation coordinates from a stored solution
    Report(ReportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PenaltyArg {
    L1,
    L0,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageTwoArg {
    Svd,
    Gep,
    Power,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderArg {
    /// View with more variables first
    Larger,
    /// View 1 first
    First,
    /// View 2 first
    Second,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeaderArg {
    Auto,
    Present,
    Absent,
}

/// Flags shared by every subcommand. Each may also be set in the file given
/// by `--config`; a flag on the command line wins over the file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML file with default values for any of these flags
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyArg>,

    /// Threshold(s) for view 1, one per factor or a single value for all
    #[arg(long, value_delimiter = ',')]
    pub gamma1: Option<Vec<f64>>,

    /// Threshold(s) for view 2, one per factor or a single value for all
    #[arg(long, value_delimiter = ',')]
    pub gamma2: Option<Vec<f64>>,

    /// Multi-view sparsity matrix, rows separated by `;` (e.g. "0,0.1;0.2,0")
    #[arg(long)]
    pub gamma_matrix: Option<String>,

    /// Multi-view per-view thresholds (alternative to --gamma-matrix)
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,

    /// Read thresholds as fractions of the largest column norm
    #[arg(long)]
    pub relative: bool,

    /// Alignment weight for view 1 (directed runs)
    #[arg(long)]
    pub eps1: Option<f64>,

    /// Alignment weight for view 2 (directed runs)
    #[arg(long)]
    pub eps2: Option<f64>,

    /// Number of canonical factors
    #[arg(long)]
    pub factors: Option<usize>,

    #[arg(long)]
    pub tol: Option<f64>,

    #[arg(long)]
    pub max_iter: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Extra random starts per stage-one pass
    #[arg(long)]
    pub restarts: Option<usize>,

    /// Which view is patterned first (two-view runs)
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,

    /// Scale columns to unit variance after centering (default)
    #[arg(long, overrides_with = "no_scale")]
    pub scale: bool,

    /// Center columns only
    #[arg(long, overrides_with = "scale")]
    pub no_scale: bool,

    #[arg(long, value_enum)]
    pub stage2: Option<StageTwoArg>,

    /// Ridge added to within-view covariances (gep back-end)
    #[arg(long)]
    pub ridge: Option<f64>,

    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Worker threads for tuning and sweeps
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Header detection for input tables
    #[arg(long, value_enum)]
    pub header: Option<HeaderArg>,
}

#[derive(Args, Debug)]
pub struct SccaArgs {
    /// View 1 table (samples in rows)
    pub x1: PathBuf,
    /// View 2 table (samples in rows)
    pub x2: PathBuf,
    /// Also write biplot coordinates in this format (needs two factors)
    #[arg(long, value_enum)]
    pub report: Option<FormatArg>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct MsccaArgs {
    /// View tables (two or more)
    #[arg(required = true, num_args = 2..)]
    pub views: Vec<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectedModeArg {
    /// Align with Xᵀy
    Dot,
    /// Align with regression coefficients of y
    Reg,
    /// Single stacked problem over both views
    Stacked,
    /// Univariate prefilter, then undirected CCA
    TwoStage,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetaArg {
    Joint,
    Univariate,
}

#[derive(Args, Debug)]
pub struct DsccaArgs {
    pub x1: PathBuf,
    pub x2: PathBuf,
    /// Accessory vector (single-column table)
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, value_enum, default_value = "dot")]
    pub mode: DirectedModeArg,
    /// Regression used by `reg` mode
    #[arg(long, value_enum, default_value = "joint")]
    pub beta: BetaArg,
    #[arg(long, default_value_t = 0.0)]
    pub beta_ridge: f64,
    /// Fraction of columns kept per view by `two-stage` mode
    #[arg(long, conflicts_with = "select_threshold")]
    pub keep_fraction: Option<f64>,
    /// Minimum |correlation with y| kept by `two-stage` mode
    #[arg(long)]
    pub select_threshold: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineArg {
    Scca,
    Mscca,
    Dscca,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Perm,
    Cv,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    /// View tables
    #[arg(required = true, num_args = 2..)]
    pub views: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub pipeline: Option<PipelineArg>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Candidate thresholds for view 1
    #[arg(long, value_delimiter = ',')]
    pub grid1: Option<Vec<f64>>,
    /// Candidate thresholds for view 2
    #[arg(long, value_delimiter = ',')]
    pub grid2: Option<Vec<f64>>,
    /// Candidate thresholds applied to every view (mscca)
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Accessory vector for the dscca pipeline
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Refit at the chosen cell and write the solution
    #[arg(long)]
    pub fit: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelArg {
    TwoView,
    ThreeView,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "two-view")]
    pub model: ModelArg,
    /// Noise standard deviation of the loadings
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    /// Number of samples
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// Noise levels for a recovery sweep (two-view model)
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatArg {
    Csv,
    Json,
    Svg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportKind {
    Biplot,
    Interp,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Solution file written by scca, mscca, dscca or tune --fit
    pub solution: PathBuf,
    /// The view tables the solution was fitted on, in order
    #[arg(long, required = true, num_args = 2..)]
    pub views: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "biplot")]
    pub kind: ReportKind,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Markers per variable for interpolation lines
    #[arg(long, default_value_t = 5)]
    pub markers: usize,
    #[command(flatten)]
    pub common: Common,
}
