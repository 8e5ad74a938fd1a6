use std::fmt;

use kms_core::classify::ClassifyError;
use kms_core::critical::CriticalError;
use kms_core::invariance::InvarianceError;
use kms_core::partition::PartitionError;
use kms_core::star::StarError;
use kms_core::states::StatesError;
use kms_core::words::WordsError;
use kms_core::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Bad configuration, input file or model: exit 1.
    Validation,
    /// A computation failed on valid input: exit 2.
    Numeric,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Validation,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Numeric,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Validation => 1,
            Kind::Numeric => 2,
        }
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::validation(format!("invalid model: {e}"))
    }
}

impl From<WordsError> for CliError {
    fn from(e: WordsError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<PartitionError> for CliError {
    fn from(e: PartitionError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<CriticalError> for CliError {
    fn from(e: CriticalError) -> Self {
        match e {
            CriticalError::DegenerateShells(_) => CliError::numeric(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<InvarianceError> for CliError {
    fn from(e: InvarianceError) -> Self {
        match e {
            InvarianceError::NotFixedPoint(_) => CliError::numeric(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<StatesError> for CliError {
    fn from(e: StatesError) -> Self {
        match e {
            StatesError::Partition(p) => p.into(),
            StatesError::Invariance(i) => (*i).into(),
            StatesError::DivergentNormalizer
            | StatesError::CoolingNotFinite(_)
            | StatesError::CoolingBoundViolated { .. } => CliError::numeric(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::States(s) => s.into(),
            ClassifyError::Invariance(i) => i.into(),
            ClassifyError::NullSpaceTooLarge(_) => CliError::numeric(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<StarError> for CliError {
    fn from(e: StarError) -> Self {
        match e {
            StarError::Partition(p) => p.into(),
            StarError::Model(m) => m.into(),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::numeric(format!("serialization failed: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::numeric(format!("csv output failed: {e}"))
    }
}
