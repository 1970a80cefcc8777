//! Dense binary matrices and the bit-packed `NBIN 1` file format.
//!
//! ```text
//! NBIN 1
//! <rows> <cols>
//! <row-major bytes, LSB first, each row padded to a byte boundary>
//! ```

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};

pub const MAGIC: &str = "NBIN 1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BinaryMatrix {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(BinaryMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[bool]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(BinaryMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Entries drawn independently with probability `p`.
    pub fn bernoulli<R: Rng + ?Sized>(rows: usize, cols: usize, p: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.random_bool(p)).collect();
        BinaryMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_slices(&self) -> Vec<&[bool]> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    /// Rows `range` as a new matrix.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        BinaryMatrix {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.count_ones() as f64 / self.data.len() as f64
        }
    }

    /// Product over the Boolean semiring (`1 + 1 = 1`).
    pub fn boolean_product(&self, other: &BinaryMatrix) -> Result<BinaryMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = BinaryMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                if self.get(i, k) {
                    for (d, &v) in dst.iter_mut().zip(other.row(k)) {
                        *d |= v;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn hamming(&self, other: &BinaryMatrix) -> Result<usize> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch {
                expected: self.data.len(),
                got: other.data.len(),
            });
        }
        Ok(self.data.iter().zip(&other.data).filter(|(a, b)| a != b).count())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "{} {}", self.rows, self.cols)?;
        let mut buf = vec![0u8; self.cols.div_ceil(8)];
        for i in 0..self.rows {
            buf.fill(0);
            for (j, &b) in self.row(i).iter().enumerate() {
                if b {
                    buf[j / 8] |= 1 << (j % 8);
                }
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        buf
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(Error::parse(1, format!("expected `{MAGIC}` header")));
        }
        line.clear();
        r.read_line(&mut line)?;
        let dims: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(2, format!("bad integer `{t}`"))))
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::parse(2, "expected `<rows> <cols>`"));
        };
        let stride = cols.div_ceil(8);
        let mut bytes = vec![0u8; rows * stride];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::parse(3, "truncated bit data"))?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::parse(3, "trailing bytes after bit data"));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for row in bytes.chunks(stride.max(1)).take(rows) {
            for j in 0..cols {
                data.push(row[j / 8] >> (j % 8) & 1 == 1);
            }
            if cols % 8 != 0 && row[cols / 8] >> (cols % 8) != 0 {
                return Err(Error::parse(3, "nonzero padding bits"));
            }
        }
        Ok(BinaryMatrix { rows, cols, data })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read(bytes)
    }
}
