//! Error classes and their process exit codes.
//!
//! | code | class |
//! |------|-------|
//! | 2 | usage: unknown flag or bad argument (reported by the parser) |
//! | 3 | input file missing |
//! | 4 | input file malformed |
//! | 5 | invalid configuration or specification |
//! | 6 | experiment failure (nothing to train on, single-class ROC) |
//! | 7 | service failure (bind, runtime) |
//! | 8 | other I/O failure (for example an unwritable output) |

use std::io;
use std::path::{Path, PathBuf};

use bathyedit::corpus::CorpusError;
use bathyedit::edit::EditError;
use bathyedit::eval::EvalError;
use bathyedit::gbdt::GbdtError;
use bathyedit::scores::ScoresFileError;
use bathyedit::splitter::SplitError;
use thiserror::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_MALFORMED: i32 = 4;
pub const EXIT_CONFIG: i32 = 5;
pub const EXIT_EXPERIMENT: i32 = 6;
pub const EXIT_SERVICE: i32 = 7;
pub const EXIT_IO: i32 = 8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: file not found", .0.display())]
    Missing(PathBuf),
    #[error("{0}")]
    Malformed(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Experiment(String),
    #[error("{0}")]
    Service(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Missing(_) => EXIT_MISSING,
            CliError::Malformed(_) => EXIT_MALFORMED,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Experiment(_) => EXIT_EXPERIMENT,
            CliError::Service(_) => EXIT_SERVICE,
            CliError::Io(_) => EXIT_IO,
        }
    }

    /// Classifies an I/O error raised while touching `path`.
    pub fn io(path: &Path, e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::NotFound {
            CliError::Missing(path.to_path_buf())
        } else {
            CliError::Io(format!("{}: {e}", path.display()))
        }
    }

    /// Wraps a library error in the class that fits it, prefixing `path`.
    pub fn at(path: &Path, e: impl Into<CliError>) -> Self {
        match e.into() {
            CliError::Missing(_) => CliError::Missing(path.to_path_buf()),
            CliError::Malformed(m) => CliError::Malformed(format!("{}: {m}", path.display())),
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}

fn from_io(e: io::Error) -> CliError {
    if e.kind() == io::ErrorKind::NotFound {
        CliError::Missing(PathBuf::new())
    } else {
        CliError::Io(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(e) => from_io(e),
            CorpusError::Spec(_) => CliError::Config(e.to_string()),
            _ => CliError::Malformed(e.to_string()),
        }
    }
}

impl From<SplitError> for CliError {
    fn from(e: SplitError) -> Self {
        match e {
            SplitError::Io(e) => from_io(e),
            SplitError::InvalidSpec(_) => CliError::Config(e.to_string()),
            SplitError::EmptyCorpus => CliError::Experiment(e.to_string()),
            _ => CliError::Malformed(e.to_string()),
        }
    }
}

impl From<GbdtError> for CliError {
    fn from(e: GbdtError) -> Self {
        match e {
            GbdtError::Io(e) => from_io(e),
            GbdtError::InvalidConfig(_) | GbdtError::FeatureMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            GbdtError::EmptyTrainSet => CliError::Experiment(e.to_string()),
            _ => CliError::Malformed(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(e) => from_io(e),
            EvalError::Split(e) => e.into(),
            EvalError::Train(e) => e.into(),
            EvalError::Malformed { .. } => CliError::Malformed(e.to_string()),
            _ => CliError::Experiment(e.to_string()),
        }
    }
}

impl From<ScoresFileError> for CliError {
    fn from(e: ScoresFileError) -> Self {
        match e {
            ScoresFileError::Io(e) => from_io(e),
            _ => CliError::Malformed(e.to_string()),
        }
    }
}

impl From<EditError> for CliError {
    fn from(e: EditError) -> Self {
        match e {
            EditError::Io(e) => from_io(e),
            _ => CliError::Malformed(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct() {
        let mut codes = vec![
            EXIT_USAGE,
            CliError::Missing(PathBuf::new()).exit_code(),
            CliError::Malformed(String::new()).exit_code(),
            CliError::Config(String::new()).exit_code(),
            CliError::Experiment(String::new()).exit_code(),
            CliError::Service(String::new()).exit_code(),
            CliError::Io(String::new()).exit_code(),
        ];
        let n = codes.len();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), n);
        assert!(!codes.contains(&0) && !codes.contains(&1));
    }

    #[test]
    fn not_found_is_missing() {
        let p = Path::new("x.csv");
        let e = CliError::at(p, CorpusError::Io(io::Error::from(io::ErrorKind::NotFound)));
        assert!(matches!(e, CliError::Missing(ref q) if q == p));
        let e = CliError::io(p, io::Error::from(io::ErrorKind::PermissionDenied));
        assert_eq!(e.exit_code(), EXIT_IO);
    }
}
