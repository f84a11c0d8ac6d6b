use nestprog::cohort::CohortError;
use nestprog::importance::ImportanceError;
use nestprog::metrics::MetricsError;
use nestprog::models::ModelError;
use nestprog::nestedcv::NestedCvError;
use nestprog::preprocess::PreprocessError;
use nestprog::synth::SynthError;
use nestprog::tabular::TabularError;
use nestprog::tuning::TuningError;
use thiserror::Error;

/// Failure classes; each maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numerical(_) => "numerical",
        }
    }

    /// Single-line rendering for stderr.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}] {msg}", self.class())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

impl From<TabularError> for CliError {
    fn from(e: TabularError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CohortError> for CliError {
    fn from(e: CohortError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Spec(m) => CliError::Config(m),
            SynthError::Tabular(t) => t.into(),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParams(_) => CliError::Config(e.to_string()),
            ModelError::NonConvergence { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::ZeroNeighbors => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TuningError> for CliError {
    fn from(e: TuningError) -> Self {
        match e {
            TuningError::ClassTooSmall { .. } => CliError::Data(e.to_string()),
            TuningError::AllFailed(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn in_fold(fold: usize, inner: CliError) -> CliError {
    let tag = |m: String| format!("outer fold {}: {m}", fold + 1);
    match inner {
        CliError::Config(m) => CliError::Config(tag(m)),
        CliError::Data(m) => CliError::Data(tag(m)),
        CliError::Numerical(m) => CliError::Numerical(tag(m)),
    }
}

impl From<NestedCvError> for CliError {
    fn from(e: NestedCvError) -> Self {
        match e {
            NestedCvError::TooFewRepeats(_) | NestedCvError::Pool(_) => CliError::Config(e.to_string()),
            NestedCvError::Preprocess { fold, source } => in_fold(fold, source.into()),
            NestedCvError::Tuning { fold, source } => in_fold(fold, source.into()),
            NestedCvError::Model { fold, source } => in_fold(fold, source.into()),
            NestedCvError::Tabular(t) => t.into(),
            NestedCvError::Metrics(m) => m.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ImportanceError> for CliError {
    fn from(e: ImportanceError) -> Self {
        match e {
            ImportanceError::Model(m) => m.into(),
            ImportanceError::Preprocess(p) => p.into(),
            ImportanceError::Tabular(t) => t.into(),
            ImportanceError::Metrics(m) => m.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}
