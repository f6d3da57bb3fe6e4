//! Error-to-exit-code mapping: 1 usage, 2 data, 3 numerical.

use sqdistill_core::{AnalyticsError, MonteCarloError, TimeSeriesError};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or parameter values; exit code 1.
    Usage(String),
    /// Unreadable or malformed data files; exit code 2.
    Data(String),
    /// Numerical non-convergence or statistically empty results; exit 3.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::NonConvergence { .. } | AnalyticsError::Quadrature(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<MonteCarloError> for CliError {
    fn from(e: MonteCarloError) -> Self {
        match e {
            MonteCarloError::Analytics(inner) => inner.into(),
            MonteCarloError::NoAcceptedTrials | MonteCarloError::InsufficientAccepted { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TimeSeriesError> for CliError {
    fn from(e: TimeSeriesError) -> Self {
        match e {
            TimeSeriesError::Estimate(inner) => inner.into(),
            TimeSeriesError::SeriesTooShort { .. } | TimeSeriesError::InvalidThreshold { .. } => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
