use std::fmt;

use cohomolib::action::ActionError;
use cohomolib::arithmetic::ArithmeticError;
use cohomolib::calculus::CalculusError;
use cohomolib::circlemap::CircleMapError;
use cohomolib::coboundary::CoboundaryError;
use cohomolib::cocycle::CocycleError;
use cohomolib::fourier::FourierError;
use cohomolib::periodic::PeriodicError;

/// Classified failure; the variant decides the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unusable input: bad flags, unparseable config, unknown keys,
    /// malformed specs. Exit 4.
    Config(String),
    /// A computation ran out of its declared iteration/depth/denominator
    /// budget before it could answer. Exit 3.
    Budget(String),
    /// The run completed enough to know a claim is false, or an internal
    /// consistency gate tripped. Exit 2.
    Failure(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 4,
            CliError::Budget(_) => 3,
            CliError::Failure(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Budget(m) => write!(f, "budget exceeded: {m}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl From<ArithmeticError> for CliError {
    fn from(e: ArithmeticError) -> Self {
        match &e {
            // Enclosure ran out of certified bits before the requested depth.
            ArithmeticError::PrecisionExhausted { .. } => CliError::Budget(e.to_string()),
            ArithmeticError::InvalidQuotient { .. } => CliError::Config(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<CircleMapError> for CliError {
    fn from(e: CircleMapError) -> Self {
        match &e {
            CircleMapError::BudgetExceeded { .. } | CircleMapError::DepthUnavailable { .. } => {
                CliError::Budget(e.to_string())
            }
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<CocycleError> for CliError {
    fn from(e: CocycleError) -> Self {
        match &e {
            CocycleError::BudgetExceeded { .. }
            | CocycleError::DepthUnavailable { .. }
            | CocycleError::Map(CircleMapError::BudgetExceeded { .. })
            | CocycleError::Map(CircleMapError::DepthUnavailable { .. }) => {
                CliError::Budget(e.to_string())
            }
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<FourierError> for CliError {
    fn from(e: FourierError) -> Self {
        match &e {
            FourierError::ModeOutOfRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<PeriodicError> for CliError {
    fn from(e: PeriodicError) -> Self {
        match &e {
            PeriodicError::NonPowerOfTwoGrid { .. } | PeriodicError::ModeOutOfRange { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<ActionError> for CliError {
    fn from(e: ActionError) -> Self {
        match &e {
            ActionError::DepthUnavailable { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<CalculusError> for CliError {
    fn from(e: CalculusError) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<CoboundaryError> for CliError {
    fn from(e: CoboundaryError) -> Self {
        match &e {
            CoboundaryError::BudgetExceeded { .. }
            | CoboundaryError::DepthUnavailable { .. }
            | CoboundaryError::Map(CircleMapError::BudgetExceeded { .. })
            | CoboundaryError::Map(CircleMapError::DepthUnavailable { .. })
            | CoboundaryError::Cocycle(CocycleError::BudgetExceeded { .. })
            | CoboundaryError::Cocycle(CocycleError::DepthUnavailable { .. }) => {
                CliError::Budget(e.to_string())
            }
            CoboundaryError::UnsupportedSmoothness { .. }
            | CoboundaryError::LevelTooShallow { .. } => CliError::Config(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}
