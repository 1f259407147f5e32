use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: u64 = 12;

/// Dense row-major N×d matrix of pooled embeddings, one row per example.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows.saturating_mul(cols),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Narrows 64-bit rows to 32-bit storage.
    pub fn from_f64_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let narrowed: Vec<Vec<f32>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&v| v as f32).collect())
            .collect();
        Self::from_rows(&narrowed)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    /// 64-bit copy for the linear algebra routines.
    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_iterator(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| f64::from(v)),
        )
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &EmbeddingMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot stack d={} on d={}",
                other.cols, self.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::new(self.rows + other.rows, self.cols, data)
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::Shape(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, data)
    }
}

/// Writes `m` in EMB1 layout and returns the number of bytes emitted.
pub fn write_matrix<W: Write>(m: &EmbeddingMatrix, mut sink: W) -> Result<u64> {
    let mut offset = 0u64;
    let emit = |sink: &mut W, bytes: &[u8], offset: &mut u64| -> Result<()> {
        sink.write_all(bytes).map_err(|source| Error::Io {
            offset: *offset,
            source,
        })?;
        *offset += bytes.len() as u64;
        Ok(())
    };

    let rows = u32::try_from(m.rows)
        .map_err(|_| Error::Format(format!("row count {} exceeds u32", m.rows)))?;
    let cols = u32::try_from(m.cols)
        .map_err(|_| Error::Format(format!("column count {} exceeds u32", m.cols)))?;

    let mut header = [0u8; HEADER_LEN as usize];
    header[..4].copy_from_slice(EMB1_MAGIC);
    header[4..8].copy_from_slice(&rows.to_le_bytes());
    header[8..12].copy_from_slice(&cols.to_le_bytes());
    emit(&mut sink, &header, &mut offset)?;

    let mut buf = Vec::with_capacity(m.cols * 4);
    for row in m.iter_rows() {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        emit(&mut sink, &buf, &mut offset)?;
    }
    sink.flush()
        .map_err(|source| Error::Io { offset, source })?;
    Ok(offset)
}

/// Reads one EMB1 matrix. Bytes after the declared payload are not consumed.
pub fn read_matrix<R: Read>(mut source: R) -> Result<EmbeddingMatrix> {
    let mut header = [0u8; HEADER_LEN as usize];
    let got = read_fully(&mut source, &mut header)?;
    if got < 4 || &header[..4] != EMB1_MAGIC {
        let shown = String::from_utf8_lossy(&header[..got.min(4)]).into_owned();
        return Err(Error::Format(format!(
            "bad magic {shown:?}, expected \"EMB1\""
        )));
    }
    if got < header.len() {
        return Err(Error::Length {
            expected: HEADER_LEN,
            actual: got as u64,
        });
    }
    let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as u64;
    let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as u64;
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!(
            "header declares an empty {rows}x{cols} matrix"
        )));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format(format!("{rows}x{cols} payload overflows")))?;

    let mut payload = Vec::new();
    source
        .take(expected)
        .read_to_end(&mut payload)
        .map_err(|source| Error::Io {
            offset: HEADER_LEN,
            source,
        })?;
    if (payload.len() as u64) < expected {
        return Err(Error::Length {
            expected,
            actual: payload.len() as u64,
        });
    }

    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(rows as usize, cols as usize, data)
}

fn read_fully<R: Read>(source: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(source) => {
                return Err(Error::Io {
                    offset: filled as u64,
                    source,
                })
            }
        }
    }
    Ok(filled)
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_matrix(BufReader::new(file))
}

pub fn write_matrix_file(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<u64> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_matrix(m, BufWriter::new(file))
}
