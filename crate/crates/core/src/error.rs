use std::fmt;

use thiserror::Error;

/// Pipeline stage an error was raised in, used to label failures surfaced
/// by the assessment and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Load,
    Discretize,
    Partition,
    Pseudo,
    Step1,
    Interaction,
    Step2,
    Simulation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Load => "load",
            Stage::Discretize => "discretize",
            Stage::Partition => "partition",
            Stage::Pseudo => "pseudo_observations",
            Stage::Step1 => "step1",
            Stage::Interaction => "interaction",
            Stage::Step2 => "step2",
            Stage::Simulation => "simulation",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("observation {index} has leverage 1; leave-one-out prediction undefined")]
    UnitLeverage { index: usize },

    #[error("moment target {target} is not attainable for moment order {order}")]
    MomentUnattainable { target: f64, order: u8 },

    #[error("missing column \"{0}\"")]
    MissingColumn(String),

    #[error("row {row}, column \"{column}\": {message}")]
    BadCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("constant covariate \"{0}\" cannot be discretized")]
    ConstantCovariate(String),

    #[error("dataset is already discretized")]
    AlreadyDiscretized,

    #[error("covariates must be discretized before this step")]
    NotDiscretized,

    #[error("unknown region \"{0}\"")]
    UnknownRegion(String),

    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    #[error("treatment arm is empty")]
    EmptyArm,

    #[error("standard error is zero")]
    ZeroStandardError,

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("density ratio undefined at level {level} of covariate {covariate}")]
    UndefinedRatio { covariate: usize, level: usize },

    #[error("survival hazard {rate} is not positive at these covariates")]
    NonPositiveHazard { rate: f64 },

    #[error("Wald statistic undefined: {0}")]
    DegenerateWald(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Stage label when the error carries one.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
