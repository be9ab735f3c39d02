//! Versioned little-endian model container.
//!
//! ```text
//! magic    4 octets  "SVML"
//! version  u32       1
//! kind     u8        1 = PCA, 2 = LDA, 3 = FCN, other values for callers
//! dtype    u8        4 = f32, 8 = f64
//! reserved u16       0
//! body               model-specific sequence of fields
//! ```
//!
//! Body fields are u32/u64 integers, scalars of the header dtype, and
//! arrays written as a dimension table (`ndim: u32`, then `ndim` u64
//! extents) followed by the elements in row-major order.

use ndarray::{Array1, Array2};

use crate::{MlError, Result, Scalar};

pub const MAGIC: [u8; 4] = *b"SVML";
pub const VERSION: u32 = 1;

pub const KIND_PCA: u8 = 1;
pub const KIND_LDA: u8 = 2;
pub const KIND_FCN: u8 = 3;

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    /// Starts a container with the standard header.
    pub fn with_header<T: Scalar>(kind: u8) -> Self {
        let mut w = Writer::default();
        w.buf.extend_from_slice(&MAGIC);
        w.u32(VERSION);
        w.u8(kind);
        w.u8(T::BYTES);
        w.buf.extend_from_slice(&0u16.to_le_bytes());
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.u64(v.len() as u64);
        self.buf.extend_from_slice(v);
    }

    pub fn scalar<T: Scalar>(&mut self, v: T) {
        v.write_le(&mut self.buf);
    }

    pub fn array1<T: Scalar>(&mut self, a: &Array1<T>) {
        self.u32(1);
        self.u64(a.len() as u64);
        for &x in a {
            self.scalar(x);
        }
    }

    pub fn array2<T: Scalar>(&mut self, a: &Array2<T>) {
        self.u32(2);
        self.u64(a.nrows() as u64);
        self.u64(a.ncols() as u64);
        for &x in a {
            self.scalar(x);
        }
    }

    pub fn indices(&mut self, v: &[usize]) {
        self.u64(v.len() as u64);
        for &i in v {
            self.u64(i as u64);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    /// Validates the header and returns the kind byte.
    pub fn header<T: Scalar>(buf: &'a [u8]) -> Result<(Self, u8)> {
        let mut r = Reader::new(buf);
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(r.error_at(0, "bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.error_at(4, &format!("unsupported version {version}")));
        }
        let kind = r.u8()?;
        let dtype = r.u8()?;
        if dtype != T::BYTES {
            return Err(r.error_at(9, &format!("dtype {dtype} does not match {}", T::BYTES)));
        }
        r.take(2)?;
        Ok((r, kind))
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn error(&self, message: &str) -> MlError {
        self.error_at(self.pos, message)
    }

    fn error_at(&self, offset: usize, message: &str) -> MlError {
        MlError::Format {
            offset,
            message: message.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.error("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8")))
    }

    fn len(&mut self) -> Result<usize> {
        let at = self.pos;
        let n = self.u64()?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= self.buf.len())
            .ok_or_else(|| self.error_at(at, "length out of range"))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.len()?;
        self.take(n)
    }

    pub fn scalar<T: Scalar>(&mut self) -> Result<T> {
        Ok(T::read_le(self.take(T::BYTES as usize)?))
    }

    fn dims(&mut self, expect: u32) -> Result<Vec<usize>> {
        let at = self.pos;
        let ndim = self.u32()?;
        if ndim != expect {
            return Err(self.error_at(at, &format!("expected {expect}-d array, found {ndim}-d")));
        }
        (0..ndim).map(|_| self.len()).collect()
    }

    fn elements<T: Scalar>(&mut self, count: usize) -> Result<Vec<T>> {
        let width = T::BYTES as usize;
        let raw = self.take(count.checked_mul(width).ok_or_else(|| self.error("overflow"))?)?;
        Ok(raw.chunks_exact(width).map(T::read_le).collect())
    }

    pub fn array1<T: Scalar>(&mut self) -> Result<Array1<T>> {
        let dims = self.dims(1)?;
        Ok(Array1::from_vec(self.elements(dims[0])?))
    }

    pub fn array2<T: Scalar>(&mut self) -> Result<Array2<T>> {
        let dims = self.dims(2)?;
        let count = dims[0]
            .checked_mul(dims[1])
            .ok_or_else(|| self.error("overflow"))?;
        let data = self.elements(count)?;
        Array2::from_shape_vec((dims[0], dims[1]), data).map_err(|e| self.error(&e.to_string()))
    }

    pub fn indices(&mut self) -> Result<Vec<usize>> {
        let n = self.len()?;
        (0..n)
            .map(|_| {
                let at = self.pos;
                let v = self.u64()?;
                usize::try_from(v).map_err(|_| self.error_at(at, "index out of range"))
            })
            .collect()
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }

    /// Errors if trailing bytes remain.
    pub fn finish(self) -> Result<()> {
        if self.is_done() {
            Ok(())
        } else {
            Err(self.error("trailing bytes"))
        }
    }
}
