use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] deform_dcf_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed binary file; `offset` is where parsing stopped.
    #[error("{}: byte {offset}: {message}", path.display())]
    Format { path: PathBuf, offset: u64, message: String },
    #[error("frame index {index} out of range ({count} frames)")]
    Range { index: usize, count: usize },
    #[error("{}: {source}", path.display())]
    Image { path: PathBuf, source: image::ImageError },
    /// Invalid or missing configuration, assets included.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed text file; the message names the line.
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
