use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    /// The subordinator or domain does not satisfy an assumption the experiment needs.
    #[error("config error: assumption ({condition}) not satisfied: {msg}")]
    Gating { condition: String, msg: String },

    #[error(transparent)]
    Core(#[from] skbm::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
