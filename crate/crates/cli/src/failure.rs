use std::fmt;
use std::process::ExitCode;

use suicide_risk::corpus::CorpusError;
use suicide_risk::eval::EvalError;
use suicide_risk::lexicon::LexiconError;
use suicide_risk::models::ModelError;

/// Exit status classes shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Usage = 2,
    Data = 3,
    Training = 4,
    Internal = 5,
}

impl From<ExitClass> for ExitCode {
    fn from(c: ExitClass) -> Self {
        ExitCode::from(c as u8)
    }
}

#[derive(Debug)]
pub struct Failure {
    pub class: ExitClass,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(class: ExitClass, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            class,
            error: error.into(),
        }
    }

    pub fn usage(message: impl fmt::Display) -> Self {
        Failure::new(ExitClass::Usage, anyhow::anyhow!("{message}"))
    }

    pub fn data(message: impl fmt::Display) -> Self {
        Failure::new(ExitClass::Data, anyhow::anyhow!("{message}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Tags any error with an exit class.
pub trait Classify<T> {
    fn or_class(self, class: ExitClass) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_class(self, class: ExitClass) -> CliResult<T> {
        self.map_err(|e| Failure::new(class, e))
    }
}

fn io_class(e: &std::io::Error) -> ExitClass {
    if e.kind() == std::io::ErrorKind::NotFound {
        ExitClass::Usage
    } else {
        ExitClass::Data
    }
}

fn model_class(e: &ModelError) -> ExitClass {
    match e {
        ModelError::InvalidConfig(_) | ModelError::WrongBundle { .. } => ExitClass::Usage,
        ModelError::Nn(_) | ModelError::Diverged { .. } => ExitClass::Training,
        ModelError::DegenerateLabels
        | ModelError::EmptyTrainingSet
        | ModelError::EmptyUser(_)
        | ModelError::Io { .. }
        | ModelError::Format(_) => ExitClass::Data,
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        let class = match &e {
            CorpusError::Io { source, .. } => io_class(source),
            _ => ExitClass::Data,
        };
        Failure::new(class, e)
    }
}

impl From<LexiconError> for Failure {
    fn from(e: LexiconError) -> Self {
        let class = match &e {
            LexiconError::Io { source, .. } => io_class(source),
            _ => ExitClass::Data,
        };
        Failure::new(class, e)
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::new(model_class(&e), e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let class = match &e {
            EvalError::InvalidFolds(_) => ExitClass::Usage,
            EvalError::Model(m) => model_class(m),
            _ => ExitClass::Data,
        };
        Failure::new(class, e)
    }
}
