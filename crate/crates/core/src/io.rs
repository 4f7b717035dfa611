//! Reading past-experiment records.
//!
//! CSV input needs a header with the columns `delta_hat` and `n`; JSON input
//! is an array of `{"delta_hat": .., "n": ..}` objects.

use std::io::Read;

use crate::error::{Error, Result};
use crate::priors::ExperimentRecord;

pub fn read_records_csv(reader: impl Read) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (row, rec) in rdr.deserialize::<ExperimentRecord>().enumerate() {
        // Row numbers count the header as line 1.
        out.push(rec.map_err(|e| Error::Input(format!("line {}: {e}", row + 2)))?);
    }
    Ok(out)
}

pub fn read_records_json(reader: impl Read) -> Result<Vec<ExperimentRecord>> {
    serde_json::from_reader(reader).map_err(|e| Error::Input(e.to_string()))
}
