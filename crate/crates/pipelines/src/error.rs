use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] qembed_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Process exit statuses of the `qembed` binary.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const PARTIAL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        use qembed_core::Error as E;
        match self {
            PipelineError::Config(_) => exit::CONFIG,
            PipelineError::Data(_) | PipelineError::Io(_) => exit::DATA,
            PipelineError::Core(e) => match e {
                E::InvalidParameter(_) | E::UnsupportedQubitCount(_) => exit::CONFIG,
                E::Format(_)
                | E::Io(_)
                | E::DegenerateData(_)
                | E::SingleClass
                | E::NonFinite(_)
                | E::Empty(_)
                | E::RankDeficient { .. } => exit::DATA,
                _ => exit::PARTIAL,
            },
        }
    }
}
