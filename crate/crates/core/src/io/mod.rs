//! Text file formats: trait matrices (CSV), calibrations, and MCMC traces (TSV).

mod calibrations;
mod matrix;
mod trace;

pub use calibrations::{read_calibrations, write_calibrations};
pub use matrix::{read_trait_matrix, write_trait_matrix, MatrixFile, CLASS_ROW_MARKER};
pub use trace::{read_trace, write_trace, TraceFile};

use std::path::Path;

use crate::data::TraitMatrix;
use crate::error::Result;
use crate::tree::CalibrationSet;

/// Reads a trait matrix file. Missing cells are logged and read as absent.
pub fn parse_trait_matrix(path: impl AsRef<Path>) -> Result<TraitMatrix> {
    let file = std::fs::File::open(path)?;
    let parsed = read_trait_matrix(file)?;
    if parsed.missing > 0 {
        log::warn!(
            "{} missing cells ('?') read as trait absence",
            parsed.missing
        );
    }
    Ok(parsed.matrix)
}

/// Reads a calibration file, checking taxon names against `taxa` when given.
pub fn parse_calibrations<S: AsRef<str>>(
    path: impl AsRef<Path>,
    taxa: Option<&[S]>,
) -> Result<CalibrationSet> {
    read_calibrations(&std::fs::read_to_string(path)?, taxa)
}
