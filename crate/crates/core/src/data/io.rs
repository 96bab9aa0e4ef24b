//! Binary dataset files.
//!
//! ```text
//! magic     8 bytes  "HDCLDATA"
//! version   u32      1
//! dim       u64
//! classes   u64
//! n         u64
//! spec hash 32 bytes
//! n records: id u64, label u32, flags u8 (bit 0 hard, bit 1 flipped), dim × f64
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::io_util::ByteReader;
use crate::numcore::Matrix;

pub const MAGIC: &[u8; 8] = b"HDCLDATA";
pub const VERSION: u32 = 1;

const FLAG_HARD: u8 = 1;
const FLAG_FLIPPED: u8 = 2;

pub fn write_dataset_to<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(ds.dim() as u64).to_le_bytes())?;
    out.write_all(&(ds.classes as u64).to_le_bytes())?;
    out.write_all(&(ds.len() as u64).to_le_bytes())?;
    out.write_all(&ds.provenance.spec_hash)?;
    for i in 0..ds.len() {
        out.write_all(&ds.ids[i].to_le_bytes())?;
        out.write_all(&(ds.labels[i] as u32).to_le_bytes())?;
        let mut flags = 0u8;
        if ds.provenance.hard[i] {
            flags |= FLAG_HARD;
        }
        if ds.provenance.flipped[i] {
            flags |= FLAG_FLIPPED;
        }
        out.write_all(&[flags])?;
        for v in ds.features.row(i) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset_to(ds, File::create(path)?)
}

/// Reads a whole dataset; any truncation or corruption is reported with the
/// byte offset and no partial dataset is returned.
pub fn read_dataset_from<R: Read>(input: R) -> Result<Dataset> {
    let mut r = ByteReader::new(BufReader::new(input));
    let magic = r.bytes::<8>("magic")?;
    if &magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "not a dataset file".into(),
        });
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(r.error(format!("unsupported dataset version {version}")));
    }
    let dim = r.u64("dim")? as usize;
    let classes = r.u64("classes")? as usize;
    let n = r.u64("sample count")? as usize;
    if dim == 0 || n == 0 || classes == 0 || dim > 1 << 20 {
        return Err(r.error(format!("implausible header dim={dim} classes={classes} n={n}")));
    }
    let spec_hash = r.bytes::<32>("spec hash")?;

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut hard = Vec::new();
    let mut flipped = Vec::new();
    let mut features = Vec::new();
    for _ in 0..n {
        ids.push(r.u64("id")?);
        let label = r.u32("label")? as usize;
        if label >= classes {
            return Err(r.error(format!("label {label} out of range")));
        }
        labels.push(label);
        let flags = r.u8("flags")?;
        if flags & !(FLAG_HARD | FLAG_FLIPPED) != 0 {
            return Err(r.error(format!("unknown flag bits {flags:#04x}")));
        }
        hard.push(flags & FLAG_HARD != 0);
        flipped.push(flags & FLAG_FLIPPED != 0);
        features.extend(r.f64_block(dim, "features")?);
    }
    r.expect_eof()?;
    Dataset::new(
        Matrix::from_vec(n, dim, features)?,
        labels,
        ids,
        classes,
        Provenance {
            spec_hash,
            hard,
            flipped,
        },
    )
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset_from(File::open(path)?)
}

/// Plain-text sidecar: a `#` header line, then one tab-separated row per
/// sample: `id label flags f_0 … f_{d-1}`. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_text_export<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(
        out,
        "# hadcl-dataset v{VERSION} dim={} classes={} n={} spec={}",
        ds.dim(),
        ds.classes,
        ds.len(),
        hex::encode(ds.provenance.spec_hash)
    )?;
    for i in 0..ds.len() {
        let flags = u8::from(ds.provenance.hard[i]) | (u8::from(ds.provenance.flipped[i]) << 1);
        write!(out, "{}\t{}\t{}", ds.ids[i], ds.labels[i], flags)?;
        for v in ds.features.row(i) {
            write!(out, "\t{v:?}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
