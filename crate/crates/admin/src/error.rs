use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum AdminError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    /// `index` is 1-based; 0 means the user logins that precede the actions.
    #[error("action {index}: {message}")]
    Script { index: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] vocab_core::Error),
}

impl AdminError {
    pub(crate) fn parse(text: &str, span: Option<std::ops::Range<usize>>, message: impl Into<String>) -> Self {
        Self::Parse {
            line: span.map_or(1, |s| line_of(text, s.start)),
            message: message.into(),
        }
    }
}

/// 1-based line containing byte `offset`.
pub(crate) fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub(crate) fn toml_error(text: &str, err: toml::de::Error) -> AdminError {
    AdminError::parse(text, err.span(), err.message().to_owned())
}
