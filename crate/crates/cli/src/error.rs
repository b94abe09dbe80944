use libration::analysis::AnalysisError;
use libration::config::ConfigError;
use libration::lindblad::LindbladError;
use libration::noise_eater::NoiseEaterError;
use libration::params::ParamsError;
use libration::rates::RateError;
use libration::stochastic::StochasticError;
use libration::thermometry::ThermometryError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    /// Checks ran but at least one failed; the report has been written.
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) | CliError::Io(_) | CliError::ChecksFailed(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ParamsError> for CliError {
    fn from(e: ParamsError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<LindbladError> for CliError {
    fn from(e: LindbladError) -> Self {
        match e {
            LindbladError::DimensionTooLarge { .. } | LindbladError::MemoryBudget { .. } | LindbladError::StepUnderflow { .. } => {
                CliError::Budget(e.to_string())
            }
            LindbladError::CutoffTooSmall { .. } | LindbladError::InvalidInput { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<StochasticError> for CliError {
    fn from(e: StochasticError) -> Self {
        match e {
            StochasticError::InvalidInput { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<ThermometryError> for CliError {
    fn from(e: ThermometryError) -> Self {
        match e {
            ThermometryError::InvalidInput { .. } | ThermometryError::Io(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::InvalidInput { .. } | AnalysisError::EmptyGrid | AnalysisError::TooFewPoints { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<RateError> for CliError {
    fn from(e: RateError) -> Self {
        match e {
            RateError::InvalidInput { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<NoiseEaterError> for CliError {
    fn from(e: NoiseEaterError) -> Self {
        match e {
            NoiseEaterError::InvalidInput { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}
