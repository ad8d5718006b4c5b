use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Regional consistency assessment for multi-regional clinical trials.
#[derive(Debug, Parser)]
#[command(name = "mrct", version, about)]
pub struct Cli {
    /// Worker threads for replicate execution [default: available parallelism]
    #[arg(long, global = true, env = "MRCT_THREADS")]
    pub threads: Option<usize>,

    /// key=value file supplying defaults for the command's flags; flags given
    /// on the command line take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output format [default: csv for `tables`, json otherwise]
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the result here instead of standard output
    #[arg(long, short, global = true, value_name = "FILE")]
    pub output: Option<PathBuf>,

    /// Log progress to standard error (repeat for more detail)
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assess regional consistency on a trial CSV
    #[command(args_override_self = true)]
    Assess(AssessArgs),
    /// Estimate consistency probabilities for one scenario under the four
    /// table criteria and the criteria set by --q1/--q2
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Reproduce a consistency probability table (A5, A6 or A7)
    #[command(args_override_self = true)]
    Tables(TablesArgs),
    /// Run the luspatercept case study simulation
    #[command(args_override_self = true)]
    Believe(BelieveArgs),
    /// List the built-in simulation scenarios
    Scenarios,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EndpointKind {
    Continuous,
    Binary,
    Survival,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    /// Trial CSV: `y,t,region,x1..xp`, or `time,status,t,region,x1..xp` for survival
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,

    /// Region of interest
    #[arg(long)]
    pub region: String,

    /// Outcome type of the trial
    #[arg(long, value_enum, default_value_t = EndpointKind::Continuous)]
    pub endpoint: EndpointKind,

    /// RMST truncation time (survival only)
    #[arg(long, default_value_t = 100.0)]
    pub tau: f64,

    /// Randomization probability of the treatment arm
    #[arg(long, default_value_t = 0.5)]
    pub pi1: f64,

    /// Apply the marginal criterion alone
    #[arg(long)]
    pub one_step: bool,

    #[command(flatten)]
    pub thresholds: ThresholdArgs,

    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Step-1 threshold on the regional effect ratio
    #[arg(long, default_value_t = 0.9)]
    pub q1: f64,

    /// Step-2 threshold on the adjusted effect ratio
    #[arg(long, default_value_t = 0.5)]
    pub q2: f64,
}

/// Settings shared by every consistency criterion.
#[derive(Debug, Args)]
pub struct AnalysisArgs {
    /// One-sided level of the overall test
    #[arg(long, default_value_t = 0.025)]
    pub alpha: f64,

    /// Level of the CATE-similarity Wald test
    #[arg(long, default_value_t = 0.05)]
    pub alpha_interaction: f64,

    /// Non-inferiority margin added to every effect
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub margin: f64,

    /// Pseudo-count added to each covariate level in the density ratio
    #[arg(long, default_value_t = 0.5)]
    pub smoothing: f64,

    /// Covariance behind the Wald statistic
    #[arg(long, value_enum, default_value_t = Covariance::Ols)]
    pub covariance: Covariance,

    /// Terms of the per-arm regressions behind the LOOP predictions
    #[arg(long, value_enum, default_value_t = MhatTerms::RegionInteractions)]
    pub mhat_design: MhatTerms,

    /// Per-covariate or joint density ratio in step 2
    #[arg(long, value_enum, default_value_t = RatioKind::PerCovariate)]
    pub ratio_mode: RatioKind,

    /// Where tertile cut points are computed
    #[arg(long, value_enum, default_value_t = CutScope::Pooled)]
    pub quantile_scope: CutScope,

    /// Which subjects share a Kaplan-Meier fit for pseudo-observations
    #[arg(long, value_enum, default_value_t = PseudoGroups::PerArm)]
    pub pseudo_scope: PseudoGroups,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Covariance {
    Ols,
    Sandwich,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MhatTerms {
    RegionInteractions,
    RegionIndicator,
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RatioKind {
    PerCovariate,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CutScope {
    Pooled,
    PerRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PseudoGroups {
    PerArm,
    PerArmWithinRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Hazard {
    LogLinear,
    Linear,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    /// Monte Carlo replicates
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,

    /// Master seed; replicate i draws from stream i
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario name, see `mrct scenarios`
    #[arg(long)]
    pub scenario: String,

    /// Effect scale in the region of interest
    #[arg(long, default_value_t = 10.0)]
    pub kappa_r: f64,

    /// Effect scale in the other regions
    #[arg(long, default_value_t = 10.0)]
    pub kappa_minus_r: f64,

    /// Subjects in the region of interest
    #[arg(long, default_value_t = 60)]
    pub n_r: usize,

    /// Subjects in the other regions
    #[arg(long, default_value_t = 340)]
    pub n_minus_r: usize,

    /// Scale of the truncated normal covariates
    #[arg(long, default_value_t = 1.4)]
    pub sigma: f64,

    /// Randomization probability of the treatment arm
    #[arg(long, default_value_t = 0.5)]
    pub pi1: f64,

    /// Upper limit of the uniform censoring time
    #[arg(long, default_value_t = 200.0)]
    pub censor_upper: f64,

    /// RMST truncation time
    #[arg(long, default_value_t = 100.0)]
    pub tau: f64,

    /// Map from the survival linear predictor to the event rate
    #[arg(long, value_enum, default_value_t = Hazard::LogLinear)]
    pub hazard_link: Hazard,

    /// Exact equal arm split within each region
    #[arg(long)]
    pub balanced: bool,

    #[command(flatten)]
    pub thresholds: ThresholdArgs,

    #[command(flatten)]
    pub mc: MonteCarloArgs,

    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    /// One row per scenario and method, one column per effect ratio
    Wide,
    /// One row per scenario, method and effect ratio
    Long,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// Table to reproduce
    #[arg(long, value_parser = ["A5", "A6", "A7", "a5", "a6", "a7"])]
    pub which: String,

    /// CSV layout
    #[arg(long, value_enum, default_value_t = Layout::Wide)]
    pub layout: Layout,

    #[command(flatten)]
    pub mc: MonteCarloArgs,

    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Args)]
pub struct BelieveArgs {
    /// Start from the negated response model (low placebo response, benefit
    /// shrinking with transfusion burden); coefficient flags still apply
    #[arg(long)]
    pub sign_corrected: bool,

    /// Response-model intercept [default: 2.7, or -2.7 with --sign-corrected]
    #[arg(long, allow_negative_numbers = true)]
    pub intercept: Option<f64>,

    /// Treatment coefficient [default: -15, or 15 with --sign-corrected]
    #[arg(long, allow_negative_numbers = true)]
    pub treatment: Option<f64>,

    /// Burden-by-treatment coefficient [default: 1.3, or -1.3 with --sign-corrected]
    #[arg(long, allow_negative_numbers = true)]
    pub btb_treatment: Option<f64>,

    /// Burden main-effect coefficient
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub btb: f64,

    /// Asian cohort size
    #[arg(long, default_value_t = 117)]
    pub n_asian: usize,

    /// Non-Asian cohort size
    #[arg(long, default_value_t = 219)]
    pub n_non_asian: usize,

    /// Randomization probability of the treatment arm
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub pi1: f64,

    /// Share of Asian subjects in the high-burden range
    #[arg(long, default_value_t = 0.42)]
    pub high_fraction_asian: f64,

    /// Share of non-Asian subjects in the high-burden range
    #[arg(long, default_value_t = 0.18)]
    pub high_fraction_non_asian: f64,

    #[command(flatten)]
    pub mc: MonteCarloArgs,

    #[command(flatten)]
    pub analysis: AnalysisArgs,
}
