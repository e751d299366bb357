use thiserror::Error;

pub type Result<T> = std::result::Result<T, GscmError>;

#[derive(Debug, Error)]
pub enum GscmError {
    #[error("tracks are not synchronized: user {user} {reason}")]
    UnsynchronizedTracks { user: u32, reason: String },

    #[error("invalid track for user {user}: {reason}")]
    InvalidTrack { user: u32, reason: String },

    #[error("duplicate user id {0}")]
    DuplicateUser(u32),

    #[error("base-station array has no elements")]
    EmptyArray,

    #[error("invalid array: {0}")]
    InvalidArray(String),

    #[error("unknown user {0}")]
    UnknownUser(u32),

    #[error("unknown segment {0}")]
    UnknownSegment(usize),

    #[error("connected component of {size} users exceeds the limit of {limit}")]
    ComponentTooLarge { size: usize, limit: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("degenerate focal-point geometry: {0}")]
    DegenerateGeometry(String),

    #[error("missing large-scale parameters for user {user} in segment {segment}")]
    MissingLsp { user: u32, segment: usize },

    #[error("incomplete owner views: {0}")]
    IncompleteViews(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<GscmError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GscmError {
    /// Machine-readable category reported on stderr by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            GscmError::UnsynchronizedTracks { .. }
            | GscmError::InvalidTrack { .. }
            | GscmError::DuplicateUser(_)
            | GscmError::EmptyArray
            | GscmError::InvalidArray(_)
            | GscmError::UnknownUser(_)
            | GscmError::UnknownSegment(_) => "layout",
            GscmError::ComponentTooLarge { .. } => "grouping",
            GscmError::InvalidScenario(_) | GscmError::MissingLsp { .. } => "lsp",
            GscmError::DegenerateGeometry(_) => "geometry",
            GscmError::IncompleteViews(_) => "synthesis",
            GscmError::Config(_) => "config",
            GscmError::Format(_) => "format",
            GscmError::Io(_) => "io",
            GscmError::Context { source, .. } => source.category(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        GscmError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
