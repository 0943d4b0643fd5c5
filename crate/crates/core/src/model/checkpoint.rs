//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "RDMFCKPT"
//! version    u8       1
//! activation u8       0 linear, 1 relu, 2 sigmoid, 3 tanh
//! use_bias   u8       0 or 1
//! depth      u32      L
//! dims       (L+1) × u32
//! weights    for l in 0..L: m_{l+1}·m_l f64 values, row-major
//! biases     if use_bias, for l in 0..L: m_{l+1}·m_0 f64 values, row-major
//! ```
//!
//! Floats are stored as their raw IEEE-754 bits, so a round trip is exact.

use std::io::{Read, Write};

use super::{ActivationKind, FactorModel};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"RDMFCKPT";
pub const CHECKPOINT_VERSION: u8 = 1;

pub fn write_checkpoint<W: Write>(model: &FactorModel, mut out: W) -> std::io::Result<()> {
    out.write_all(&CHECKPOINT_MAGIC)?;
    out.write_all(&[
        CHECKPOINT_VERSION,
        model.activation().code(),
        model.use_bias() as u8,
    ])?;
    out.write_all(&(model.depth() as u32).to_le_bytes())?;
    for &m in model.dims() {
        out.write_all(&(m as u32).to_le_bytes())?;
    }
    for p in model.params() {
        for v in p.as_slice() {
            out.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    out.flush()
}

struct Reader<R> {
    inner: R,
    offset: usize,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|_| Error::Parse {
            offset: self.offset,
            message: format!("truncated checkpoint while reading {what}"),
        })?;
        self.offset += N;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>(what)?))
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<DenseMatrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(f64::from_bits(u64::from_le_bytes(self.bytes::<8>(what)?)));
        }
        DenseMatrix::from_vec(rows, cols, data)
    }
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<FactorModel> {
    let mut r = Reader {
        inner: input,
        offset: 0,
    };
    let magic = r.bytes::<8>("magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: "not a model checkpoint (bad magic)".into(),
        });
    }
    let [version, act, bias] = r.bytes::<3>("header")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Parse {
            offset: 8,
            message: format!("unsupported checkpoint version {version}"),
        });
    }
    let activation = ActivationKind::from_code(act).ok_or_else(|| Error::Parse {
        offset: 9,
        message: format!("unknown activation code {act}"),
    })?;
    let use_bias = match bias {
        0 => false,
        1 => true,
        other => {
            return Err(Error::Parse {
                offset: 10,
                message: format!("invalid bias flag {other}"),
            })
        }
    };
    let depth = r.u32("depth")? as usize;
    if depth == 0 || depth > 1024 {
        return Err(Error::Parse {
            offset: 11,
            message: format!("implausible depth {depth}"),
        });
    }
    let dims = (0..=depth)
        .map(|_| r.u32("dims").map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let weights = (0..depth)
        .map(|l| r.matrix(dims[l + 1], dims[l], "weights"))
        .collect::<Result<Vec<_>>>()?;
    let biases = if use_bias {
        Some(
            (0..depth)
                .map(|l| r.matrix(dims[l + 1], dims[0], "biases"))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    FactorModel::new(dims, weights, biases, activation)
}
