//! SVTR trace files, CSV export and train/validation/test splits.
//!
//! ```text
//! header   magic "SVTR" | version u32 = 1 | trace_count u64
//!          | samples_per_trace u32 | flags u32 (bit 0: keys present)
//! trace    iv [16] | key [32] if flagged | fixed u8 | samples f32 x S
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::campaign::TraceSet;
use crate::cipher::{hex, IV_LEN, KEY_LEN};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SVTR";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
const FLAG_KEYS: u32 = 1;

/// Bytes taken by one trace record.
pub fn record_len(samples_per_trace: usize, with_keys: bool) -> usize {
    IV_LEN + if with_keys { KEY_LEN } else { 0 } + 1 + 4 * samples_per_trace
}

pub fn write_to<W: Write>(ts: &TraceSet, mut w: W) -> io::Result<()> {
    let spt = u32::try_from(ts.samples_per_trace())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "trace too long"))?;
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ts.len() as u64).to_le_bytes())?;
    w.write_all(&spt.to_le_bytes())?;
    let flags = if ts.keys.is_some() { FLAG_KEYS } else { 0 };
    w.write_all(&flags.to_le_bytes())?;
    let mut buf = Vec::with_capacity(4 * ts.samples_per_trace());
    for i in 0..ts.len() {
        w.write_all(&ts.ivs[i])?;
        if let Some(keys) = &ts.keys {
            w.write_all(&keys[i])?;
        }
        w.write_all(&[u8::from(ts.fixed[i])])?;
        buf.clear();
        for &s in ts.trace(i) {
            buf.extend_from_slice(&s.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()
}

pub fn to_bytes(ts: &TraceSet) -> Vec<u8> {
    let mut out = Vec::new();
    write_to(ts, &mut out).expect("writing to memory");
    out
}

pub fn save(ts: &TraceSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_to(ts, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(self.format("truncated file")),
            Err(e) => Err(Error::Io {
                path: String::new(),
                source: e,
            }),
        }
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.fill(&mut b)?;
        Ok(b)
    }

    fn format(&self, message: &str) -> Error {
        Error::Format {
            offset: self.offset,
            message: message.to_string(),
        }
    }
}

pub fn read_from<R: Read>(r: R) -> Result<TraceSet> {
    let mut c = Cursor { inner: r, offset: 0 };
    if c.array::<4>()? != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad magic".into(),
        });
    }
    let version = u32::from_le_bytes(c.array()?);
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let count = u64::from_le_bytes(c.array()?);
    let spt = u32::from_le_bytes(c.array()?) as usize;
    let flags = u32::from_le_bytes(c.array()?);
    if flags & !FLAG_KEYS != 0 {
        return Err(Error::Format {
            offset: 20,
            message: format!("unknown flags {flags:#x}"),
        });
    }
    let with_keys = flags & FLAG_KEYS != 0;
    let n = usize::try_from(count).map_err(|_| c.format("trace count too large"))?;

    // Grow as records arrive so a corrupt count cannot force a huge allocation.
    let mut samples: Vec<f32> = Vec::new();
    let mut ivs = Vec::new();
    let mut keys = Vec::new();
    let mut fixed = Vec::new();
    let mut raw = vec![0u8; 4 * spt];
    for _ in 0..n {
        ivs.push(c.array::<IV_LEN>()?);
        if with_keys {
            keys.push(c.array::<KEY_LEN>()?);
        }
        let tag_at = c.offset;
        fixed.push(match c.array::<1>()?[0] {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Format {
                    offset: tag_at,
                    message: format!("fixed flag must be 0 or 1, got {other}"),
                })
            }
        });
        c.fill(&mut raw)?;
        samples.extend(raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])));
    }
    let mut probe = [0u8; 1];
    match c.inner.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(c.format("trailing bytes after declared traces")),
        Err(e) => {
            return Err(Error::Io {
                path: String::new(),
                source: e,
            })
        }
    }
    Ok(TraceSet {
        samples: Array2::from_shape_vec((n, spt), samples).expect("shape"),
        ivs,
        keys: with_keys.then_some(keys),
        fixed,
    })
}

pub fn from_bytes(bytes: &[u8]) -> Result<TraceSet> {
    read_from(bytes)
}

pub fn load(path: &Path) -> Result<TraceSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_from(BufReader::new(file)).map_err(|e| e.with_path(path))
}

/// CSV with header `iv,key,fixed,s0,...`; keys and IVs as hex.
pub fn write_csv<W: Write>(ts: &TraceSet, mut w: W) -> io::Result<()> {
    write!(w, "iv,key,fixed")?;
    for j in 0..ts.samples_per_trace() {
        write!(w, ",s{j}")?;
    }
    writeln!(w)?;
    for i in 0..ts.len() {
        let key = ts.keys.as_ref().map(|k| hex(&k[i])).unwrap_or_default();
        write!(w, "{},{},{}", hex(&ts.ivs[i]), key, u8::from(ts.fixed[i]))?;
        for s in ts.trace(i) {
            write!(w, ",{s}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let s = SplitSpec {
            train,
            val,
            test,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&f| !(f >= 0.0)) {
            return Err(Error::InvalidSplit("fractions must be non-negative".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// (train, val, test) sizes: val and test floored, remainder to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let part = |f: f64| ((n as f64 * f + 1e-9).floor() as usize).min(n);
        let val = part(self.val);
        let test = part(self.test).min(n - val);
        (n - val - test, val, test)
    }

    /// Shuffled index partition.
    pub fn indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        self.validate()?;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let (tr, va, _) = self.sizes(n);
        let test = idx.split_off(tr + va);
        let val = idx.split_off(tr);
        Ok((idx, val, test))
    }
}

pub fn split(ts: &TraceSet, spec: &SplitSpec) -> Result<(TraceSet, TraceSet, TraceSet)> {
    let (a, b, c) = spec.indices(ts.len())?;
    Ok((ts.subset(&a), ts.subset(&b), ts.subset(&c)))
}
