//! Readers and writers for the `.fvecs` / `.ivecs` / `.bvecs` benchmark
//! formats: each record is a 4-byte little-endian dimension prefix followed
//! by that many elements (`f32`, `i32`, or `u8` respectively).
//!
//! Decoding is bit-exact and strict: the dimension must be positive and
//! constant across records, and a truncated record is an error naming the
//! byte offset where the file went wrong.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

/// Element codec for one of the three formats.
trait VecElem: Copy + Default {
    const WIDTH: usize;
    fn read_from(r: &mut impl Read) -> io::Result<Self>;
    fn write_to(self, w: &mut impl Write) -> io::Result<()>;
}

impl VecElem for f32 {
    const WIDTH: usize = 4;
    fn read_from(r: &mut impl Read) -> io::Result<Self> {
        r.read_f32::<LittleEndian>()
    }
    fn write_to(self, w: &mut impl Write) -> io::Result<()> {
        w.write_f32::<LittleEndian>(self)
    }
}

impl VecElem for i32 {
    const WIDTH: usize = 4;
    fn read_from(r: &mut impl Read) -> io::Result<Self> {
        r.read_i32::<LittleEndian>()
    }
    fn write_to(self, w: &mut impl Write) -> io::Result<()> {
        w.write_i32::<LittleEndian>(self)
    }
}

impl VecElem for u8 {
    const WIDTH: usize = 1;
    fn read_from(r: &mut impl Read) -> io::Result<Self> {
        r.read_u8()
    }
    fn write_to(self, w: &mut impl Write) -> io::Result<()> {
        w.write_u8(self)
    }
}

fn malformed(path: &Path, offset: u64, what: impl std::fmt::Display) -> Error {
    Error::MalformedFile {
        path: path.to_path_buf(),
        reason: format!("{what} at byte {offset}"),
    }
}

/// Read the 4-byte dimension prefix; `None` on clean end-of-file.
fn read_prefix(r: &mut impl Read) -> io::Result<Option<i32>> {
    let mut buf = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let n = r.read(&mut buf[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "truncated dimension prefix",
            ));
        }
        got += n;
    }
    Ok(Some(i32::from_le_bytes(buf)))
}

fn load_vecs<E: VecElem>(path: &Path) -> Result<Vec<Vec<E>>> {
    let file = File::open(path).map_err(|e| Error::MalformedFile {
        path: path.to_path_buf(),
        reason: format!("cannot open: {e}"),
    })?;
    let mut reader = BufReader::new(file);
    let mut rows: Vec<Vec<E>> = Vec::new();
    let mut offset: u64 = 0;
    let mut expect_dim: Option<usize> = None;

    loop {
        let record_start = offset;
        let dim = match read_prefix(&mut reader) {
            Ok(None) => break,
            Ok(Some(d)) => d,
            Err(e) => return Err(malformed(path, record_start, e)),
        };
        offset += 4;
        if dim <= 0 {
            return Err(malformed(
                path,
                record_start,
                format!("non-positive dimension {dim}"),
            ));
        }
        let dim = dim as usize;
        match expect_dim {
            None => expect_dim = Some(dim),
            Some(expected) if expected != dim => {
                return Err(malformed(
                    path,
                    record_start,
                    format!("record {} has dimension {dim}, expected {expected}", rows.len()),
                ));
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(dim);
        for _ in 0..dim {
            let value = E::read_from(&mut reader)
                .map_err(|e| malformed(path, record_start, format!("truncated record: {e}")))?;
            offset += E::WIDTH as u64;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn write_vecs<E: VecElem>(path: &Path, rows: &[Vec<E>]) -> Result<()> {
    if let Some(first) = rows.first() {
        if first.is_empty() {
            return Err(Error::invalid("records must have dimension >= 1"));
        }
        if rows.iter().any(|r| r.len() != first.len()) {
            return Err(Error::invalid("all records must share one dimension"));
        }
    }
    let mut writer = BufWriter::new(File::create(path)?);
    for row in rows {
        writer.write_i32::<LittleEndian>(row.len() as i32)?;
        for &value in row {
            value.write_to(&mut writer)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Load an `.fvecs` file (`f32` elements).
pub fn load_fvecs(path: impl AsRef<Path>) -> Result<Vec<Vec<f32>>> {
    load_vecs(path.as_ref())
}

/// Write an `.fvecs` file; bit-exact under [`load_fvecs`].
pub fn write_fvecs(path: impl AsRef<Path>, rows: &[Vec<f32>]) -> Result<()> {
    write_vecs(path.as_ref(), rows)
}

/// Load an `.ivecs` file (`i32` elements, used for ground-truth ids).
pub fn load_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<i32>>> {
    load_vecs(path.as_ref())
}

/// Write an `.ivecs` file; bit-exact under [`load_ivecs`].
pub fn write_ivecs(path: impl AsRef<Path>, rows: &[Vec<i32>]) -> Result<()> {
    write_vecs(path.as_ref(), rows)
}

/// Load a `.bvecs` file (`u8` elements).
pub fn load_bvecs(path: impl AsRef<Path>) -> Result<Vec<Vec<u8>>> {
    load_vecs(path.as_ref())
}

/// Write a `.bvecs` file; bit-exact under [`load_bvecs`].
pub fn write_bvecs(path: impl AsRef<Path>, rows: &[Vec<u8>]) -> Result<()> {
    write_vecs(path.as_ref(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn fvecs_round_trip_is_bit_exact() {
        let rows = vec![
            vec![0.0f32, -1.5, f32::MIN_POSITIVE, 3.25e7],
            vec![1.0, 2.0, -0.0, f32::MAX],
        ];
        let (_dir, path) = tmp("t.fvecs");
        write_fvecs(&path, &rows).unwrap();
        let back = load_fvecs(&path).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            let bits_a: Vec<u32> = a.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn ivecs_and_bvecs_round_trip() {
        let (_dir, ipath) = tmp("t.ivecs");
        let ivals = vec![vec![0i32, -5, i32::MAX], vec![7, 8, 9]];
        write_ivecs(&ipath, &ivals).unwrap();
        assert_eq!(load_ivecs(&ipath).unwrap(), ivals);

        let (_dir2, bpath) = tmp("t.bvecs");
        let bvals = vec![vec![0u8, 255, 128], vec![1, 2, 3]];
        write_bvecs(&bpath, &bvals).unwrap();
        assert_eq!(load_bvecs(&bpath).unwrap(), bvals);
    }

    #[test]
    fn mixed_dimensions_error_at_the_offending_record() {
        let (_dir, path) = tmp("mixed.ivecs");
        let mut bytes = Vec::new();
        for row in [vec![1i32, 2], vec![3, 4]] {
            bytes.extend((row.len() as i32).to_le_bytes());
            for v in row {
                bytes.extend(v.to_le_bytes());
            }
        }
        // Third record claims dimension 3.
        bytes.extend(3i32.to_le_bytes());
        bytes.extend(9i32.to_le_bytes());
        bytes.extend(9i32.to_le_bytes());
        bytes.extend(9i32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let err = load_ivecs(&path).unwrap_err().to_string();
        // Records 0 and 1 are 12 bytes each.
        assert!(err.contains("dimension 3"), "{err}");
        assert!(err.contains("byte 24"), "{err}");
    }

    #[test]
    fn truncation_and_bad_dims_are_rejected_with_offsets() {
        // Truncated payload: dim says 3, only two elements present.
        let (_dir, path) = tmp("trunc.fvecs");
        let mut bytes = Vec::new();
        bytes.extend(3i32.to_le_bytes());
        bytes.extend(1.0f32.to_le_bytes());
        bytes.extend(2.0f32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let err = load_fvecs(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
        assert!(err.contains("byte 0"), "{err}");

        // Truncated prefix after one good record.
        let (_dir2, path2) = tmp("trunc2.fvecs");
        let mut bytes2 = Vec::new();
        bytes2.extend(1i32.to_le_bytes());
        bytes2.extend(5.0f32.to_le_bytes());
        bytes2.extend([0u8, 0]); // half a prefix
        std::fs::write(&path2, &bytes2).unwrap();
        let err2 = load_fvecs(&path2).unwrap_err().to_string();
        assert!(err2.contains("byte 8"), "{err2}");

        // Non-positive dimension.
        let (_dir3, path3) = tmp("bad.fvecs");
        std::fs::write(&path3, (-2i32).to_le_bytes()).unwrap();
        let err3 = load_fvecs(&path3).unwrap_err().to_string();
        assert!(err3.contains("non-positive dimension"), "{err3}");
    }

    #[test]
    fn empty_file_is_an_empty_matrix() {
        let (_dir, path) = tmp("empty.fvecs");
        std::fs::write(&path, []).unwrap();
        assert!(load_fvecs(&path).unwrap().is_empty());
    }

    #[test]
    fn writer_rejects_ragged_input() {
        let (_dir, path) = tmp("ragged.fvecs");
        assert!(write_fvecs(&path, &[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(write_fvecs(&path, &[vec![]]).is_err());
    }
}
