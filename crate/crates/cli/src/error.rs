use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] tcic::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("config parse: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error("config write: {0}")]
    ConfigWrite(#[from] toml::ser::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
