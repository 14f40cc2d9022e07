use thiserror::Error;

use scalesgd::algorithms::TrainError;
use scalesgd::data::DataError;
use scalesgd::generators::GenError;
use scalesgd::harness::HarnessError;
use scalesgd::metrics::MetricError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training diverged after step {last_finite_step}")]
    Diverged { last_finite_step: u64 },
    #[error("target not reached: {0}")]
    TargetNotReached(String),
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Diverged { .. } => 4,
            CliError::TargetNotReached(_) => 5,
            CliError::Output(_) => 1,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::InvalidSpec(m) => CliError::Config(m),
            GenError::Data(d) => d.into(),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(m) | TrainError::Unsupported(m) => CliError::Config(m),
            TrainError::Diverged { last_finite_step, .. } => CliError::Diverged { last_finite_step },
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidConfig(m) => CliError::Config(m),
            HarnessError::TargetNotReached { .. } | HarnessError::EmptyGrowths => {
                CliError::TargetNotReached(e.to_string())
            }
            HarnessError::Run { source, .. } => source.into(),
            HarnessError::Io(io) => CliError::Output(io),
        }
    }
}
