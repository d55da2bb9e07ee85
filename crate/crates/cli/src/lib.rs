//! Experiment harness: resolves a config, runs the chosen estimator over
//! seeded trials and emits CSV.

pub mod config;
pub mod experiment;
pub mod fit;
pub mod report;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] blockev::Error),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use blockev::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Output(_) => 1,
            CliError::Core(e) => match e {
                E::RegisterBudget { .. } | E::DegreeCap { .. } => 3,
                E::Promise(_) | E::Singular => 4,
                _ => 2,
            },
        }
    }
}
