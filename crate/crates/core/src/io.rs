//! CSV and JSON emission. Floats are written in shortest round-trip form with
//! a `.` decimal separator, so identical inputs give byte-identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::ck::JointGrid;
use crate::error::Result;
use crate::fjsim::SojournSample;

/// Opens `path` for writing, creating parent directories as needed.
pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes one CSV row per record with a header taken from the field names.
pub fn write_records_csv<W: Write, T: Serialize>(w: W, records: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `id,t_a,t_b,t_sync,first_branch`, in the order given.
pub fn write_samples_csv<W: Write>(w: W, samples: &[SojournSample]) -> Result<()> {
    if samples.is_empty() {
        let mut w = w;
        writeln!(w, "id,t_a,t_b,t_sync,first_branch")?;
        return Ok(());
    }
    write_records_csv(w, samples)
}

pub fn read_samples_csv<R: Read>(r: R) -> Result<Vec<SojournSample>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// The joint distribution as a matrix: header `q_a,0,1,...`, then one row per
/// `q_a` whose first field is `q_a` and the rest `P(q_a, q_b)` by `q_b`.
pub fn write_grid_csv<W: Write>(w: W, grid: &JointGrid) -> Result<()> {
    let n = grid.size();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["q_a".to_string()];
    header.extend((0..n).map(|q| q.to_string()));
    out.write_record(&header)?;
    for qa in 0..n {
        let row: Vec<f64> = (0..n).map(|qb| grid.get(qa, qb)).collect();
        out.serialize((qa, row))?;
    }
    out.flush()?;
    Ok(())
}
