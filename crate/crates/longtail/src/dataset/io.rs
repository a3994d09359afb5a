//! Feature-file persistence.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! "LTFS"  magic, 4 bytes
//! u16     format version (currently 1)
//! u64     N, sample count
//! u32     D, feature dimension
//! u32     C, class count
//! N * D   f32 features, row-major
//! N       u32 labels
//! ```
//!
//! Features are stored at 32-bit precision regardless of the in-memory scalar
//! type; arithmetic after loading runs at the scalar's full precision.
//!
//! A CSV loader accepts `f0,...,f{D-1},label` with one sample per row; the
//! class count is inferred as `max(label) + 1`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::LabeledFeatureSet;

pub const FEATURE_MAGIC: [u8; 4] = *b"LTFS";
pub const FEATURE_FORMAT_VERSION: u16 = 1;

pub fn write_features<S: Scalar>(path: &Path, dataset: &LabeledFeatureSet<S>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&FEATURE_MAGIC)?;
    w.write_u16::<LittleEndian>(FEATURE_FORMAT_VERSION)?;
    w.write_u64::<LittleEndian>(dataset.len() as u64)?;
    w.write_u32::<LittleEndian>(dataset.dim() as u32)?;
    w.write_u32::<LittleEndian>(dataset.num_classes() as u32)?;
    for &v in dataset.features().as_slice() {
        w.write_f32::<LittleEndian>(v.as_f64() as f32)?;
    }
    for &label in dataset.labels() {
        w.write_u32::<LittleEndian>(label as u32)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features<S: Scalar>(path: &Path) -> Result<LabeledFeatureSet<S>> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic bytes")?;
    if magic != FEATURE_MAGIC {
        return Err(Error::BadMagic {
            expected: FEATURE_MAGIC,
            found: magic,
        });
    }
    let version = r
        .read_u16::<LittleEndian>()
        .map_err(|e| eof_as_truncated(e, "format version"))?;
    if version != FEATURE_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FEATURE_FORMAT_VERSION,
        });
    }

    let n = r
        .read_u64::<LittleEndian>()
        .map_err(|e| eof_as_truncated(e, "sample count"))? as usize;
    let dim = r
        .read_u32::<LittleEndian>()
        .map_err(|e| eof_as_truncated(e, "feature dimension"))? as usize;
    let num_classes = r
        .read_u32::<LittleEndian>()
        .map_err(|e| eof_as_truncated(e, "class count"))? as usize;
    if dim == 0 {
        return Err(Error::malformed("feature dimension must be >= 1"));
    }
    if num_classes == 0 {
        return Err(Error::malformed("class count must be >= 1"));
    }

    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n * dim {
        let v = r
            .read_f32::<LittleEndian>()
            .map_err(|e| eof_as_truncated(e, "feature payload"))?;
        data.push(S::of(v as f64));
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = r
            .read_u32::<LittleEndian>()
            .map_err(|e| eof_as_truncated(e, "label payload"))? as usize;
        if label >= num_classes {
            return Err(Error::malformed(format!(
                "label {label} out of range for {num_classes} classes"
            )));
        }
        labels.push(label);
    }

    LabeledFeatureSet::new(Matrix::from_vec(n, dim, data), labels, num_classes)
}

pub fn read_features_csv<S: Scalar>(path: &Path) -> Result<LabeledFeatureSet<S>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());

    let header = lines
        .next()
        .ok_or_else(|| Error::malformed("csv file is empty"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 || columns.last() != Some(&"label") {
        return Err(Error::malformed(
            "csv header must be f0,...,f{D-1},label",
        ));
    }
    let dim = columns.len() - 1;
    for (i, col) in columns[..dim].iter().enumerate() {
        if *col != format!("f{i}") {
            return Err(Error::malformed(format!(
                "csv header column {i} is {col:?}, expected \"f{i}\""
            )));
        }
    }

    let mut data: Vec<S> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (line_no, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(Error::malformed(format!(
                "csv row {} has {} fields, expected {}",
                line_no + 2,
                fields.len(),
                dim + 1
            )));
        }
        for field in &fields[..dim] {
            // Parse at storage precision so csv and binary agree.
            let v: f32 = field.parse().map_err(|_| {
                Error::malformed(format!("csv row {}: bad feature value {field:?}", line_no + 2))
            })?;
            data.push(S::of(v as f64));
        }
        let label: usize = fields[dim].parse().map_err(|_| {
            Error::malformed(format!(
                "csv row {}: bad label {:?}",
                line_no + 2,
                fields[dim]
            ))
        })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::malformed("csv file has no data rows"));
    }

    let num_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    let n = labels.len();
    LabeledFeatureSet::new(Matrix::from_vec(n, dim, data), labels, num_classes)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| eof_as_truncated(e, what))
}

fn eof_as_truncated(e: std::io::Error, what: &str) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Truncated(what.to_string())
    } else {
        Error::Io(e)
    }
}
