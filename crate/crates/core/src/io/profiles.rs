//! Along-tract profiles as headerless CSV: one row per fiber, one column per
//! sample.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub fn write_profiles<W: Write>(profiles: &[Vec<f64>], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for p in profiles {
        w.write_record(p.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_profiles<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|e| {
                    Error::BadSpec(format!("profile row {}, column {}: {field:?}: {e}", out.len() + 1, j + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(row);
    }
    Ok(out)
}

pub fn save_profiles(profiles: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_profiles(profiles, f)
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_profiles(f)
}
