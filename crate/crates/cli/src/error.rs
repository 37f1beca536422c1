use std::fmt;

/// Failure of a subcommand, split by exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad flags, flag values or config file; exit code 2.
    Usage(String),
    /// The operation itself failed; exit code 1.
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn domain(msg: impl fmt::Display) -> Self {
        CliError::Domain(msg.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            CliError::Usage(m) | CliError::Domain(m) => m,
        };
        // Diagnostics are a single line.
        write!(f, "{}", msg.replace('\n', " "))
    }
}

impl std::error::Error for CliError {}

macro_rules! domain_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Domain(e.to_string())
            }
        }
    )*};
}

domain_from!(
    hepflow::fitting::FitError,
    hepflow::integration::IntegrationError,
    hepflow::phasespace::PhspError,
    hepflow::sampling::SamplingError,
    hepflow::splot::SplotError,
    hepflow::store::StoreError,
    hepflow::param::ParamError
);
