use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: cannot decode image: {message}", path.display())]
    Decode { path: PathBuf, message: String },
    #[error("{}: unsupported format: {what}", path.display())]
    Unsupported { path: PathBuf, what: String },
    #[error("{}: malformed PFM: {what}", path.display())]
    Pfm { path: PathBuf, what: String },
    #[error("{}: {count} non-finite disparity values", path.display())]
    NonFinite { path: PathBuf, count: usize },
    #[error("{}: degenerate disparity (max == min), cannot normalize", path.display())]
    DegenerateDisparity { path: PathBuf },
    #[error("{}: {source}", path.display())]
    Raster {
        path: PathBuf,
        #[source]
        source: layered3d_core::Error,
    },
    #[error("manifest field `{field}`: {message}")]
    Manifest { field: String, message: String },
    #[error("unsupported bundle version {found}, expected {expected}")]
    Version { found: u64, expected: u64 },
    #[error("no file names in common between {} and {}; unmatched: {unmatched:?}", pred.display(), gt.display())]
    NoPairs {
        pred: PathBuf,
        gt: PathBuf,
        unmatched: Vec<String>,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Core(#[from] layered3d_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Labels an error with the pipeline stage it came from.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e.into()),
        })
    }
}
