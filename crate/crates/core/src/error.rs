use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {what} at x = {point:?}")]
    Evaluation { what: &'static str, point: Vec<f64> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("state exploded after grid index {last_finite} (seed {seed})")]
    Explosion { last_finite: usize, seed: u64 },

    #[error("truncation not settled: level {level} still exits at grid index {exit_index} (n_max = {n_max})")]
    TruncationNotSettled {
        level: u32,
        exit_index: usize,
        n_max: u32,
    },

    #[error("non-finite derivative field entry at r = {r}, t = {t}")]
    Propagation { r: usize, t: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing growth metadata for derivative order {0}")]
    MissingGrowth(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
