//! Binary containers for reservoirs and trained models.
//!
//! All integers are little-endian `u64` unless noted, all reals little-endian
//! IEEE-754 `f64`, so a round trip is bit-exact.
//!
//! Reservoir (`RSIGRESV`, version 1):
//! `magic[8] version:u16 k d seed activation:u8 slope:f64`, then `A_1..A_d`
//! row-major, `b_1..b_d`, `z0`.
//!
//! Model (`RSIGMODL`, version 1):
//! `magic[8] version:u16 k m lambda:f64 beta[k*m]` (row-major), then
//! `feature_kind:u8` (1 = randomized signature) and a length-prefixed
//! reservoir container.

use std::io::{Cursor, Read};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::readout::ReadoutModel;
use crate::rsig::{Activation, Reservoir};

const RESERVOIR_MAGIC: &[u8; 8] = b"RSIGRESV";
const MODEL_MAGIC: &[u8; 8] = b"RSIGMODL";
const VERSION: u16 = 1;
const FEATURE_RSIG: u8 = 1;

pub fn encode_reservoir(r: &Reservoir) -> Vec<u8> {
    let (k, d) = (r.k(), r.d());
    let mut out = Vec::with_capacity(51 + 8 * (d * k * k + d * k + k));
    out.extend_from_slice(RESERVOIR_MAGIC);
    out.write_u16::<LittleEndian>(VERSION).unwrap();
    for v in [k as u64, d as u64, r.seed()] {
        out.write_u64::<LittleEndian>(v).unwrap();
    }
    out.write_u8(r.activation().tag()).unwrap();
    out.write_f64::<LittleEndian>(r.activation().slope()).unwrap();
    let w = r.stacked_weights();
    for row in 0..d * k {
        for col in 0..k {
            out.write_f64::<LittleEndian>(w[(row, col)]).unwrap();
        }
    }
    for v in r.stacked_biases().iter().chain(r.z0().iter()) {
        out.write_f64::<LittleEndian>(*v).unwrap();
    }
    out
}

fn read_magic(cur: &mut Cursor<&[u8]>, magic: &[u8; 8]) -> Result<()> {
    let mut buf = [0u8; 8];
    cur.read_exact(&mut buf).map_err(|_| Error::format("truncated header"))?;
    if &buf != magic {
        return Err(Error::format("bad magic bytes"));
    }
    let version = cur.read_u16::<LittleEndian>().map_err(|_| Error::format("truncated header"))?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported container version {version}")));
    }
    Ok(())
}

fn read_u64(cur: &mut Cursor<&[u8]>) -> Result<u64> {
    cur.read_u64::<LittleEndian>().map_err(|_| Error::format("truncated container"))
}

fn read_f64s(cur: &mut Cursor<&[u8]>, n: usize) -> Result<Vec<f64>> {
    let remaining = cur.get_ref().len() as u64 - cur.position();
    if (n as u64).checked_mul(8).is_none_or(|bytes| bytes > remaining) {
        return Err(Error::format("container is shorter than its declared shape"));
    }
    let mut out = vec![0.0; n];
    cur.read_f64_into::<LittleEndian>(&mut out).map_err(|_| Error::format("truncated container"))?;
    Ok(out)
}

fn to_usize(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::format(format!("{what} does not fit in memory")))
}

fn decode_reservoir_from(cur: &mut Cursor<&[u8]>) -> Result<Reservoir> {
    read_magic(cur, RESERVOIR_MAGIC)?;
    let k = to_usize(read_u64(cur)?, "k")?;
    let d = to_usize(read_u64(cur)?, "d")?;
    let seed = read_u64(cur)?;
    let tag = cur.read_u8().map_err(|_| Error::format("truncated container"))?;
    let slope = cur.read_f64::<LittleEndian>().map_err(|_| Error::format("truncated container"))?;
    let activation = Activation::from_tag(tag, slope)?;
    if k == 0 || d == 0 {
        return Err(Error::format("reservoir sizes must be positive"));
    }
    let dk = d.checked_mul(k).ok_or_else(|| Error::format("reservoir shape overflows"))?;
    let nw = dk.checked_mul(k).ok_or_else(|| Error::format("reservoir shape overflows"))?;
    let w = read_f64s(cur, nw)?;
    let b = read_f64s(cur, dk)?;
    let z0 = read_f64s(cur, k)?;
    Reservoir::from_parts(
        k,
        d,
        seed,
        activation,
        DMatrix::from_row_slice(dk, k, &w),
        DVector::from_vec(b),
        DVector::from_vec(z0),
    )
    .map_err(|e| Error::format(e.to_string()))
}

fn expect_end(cur: &Cursor<&[u8]>) -> Result<()> {
    if cur.position() as usize != cur.get_ref().len() {
        return Err(Error::format("trailing bytes after container"));
    }
    Ok(())
}

pub fn decode_reservoir(bytes: &[u8]) -> Result<Reservoir> {
    let mut cur = Cursor::new(bytes);
    let r = decode_reservoir_from(&mut cur)?;
    expect_end(&cur)?;
    Ok(r)
}

/// A readout together with the reservoir it was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub readout: ReadoutModel,
    pub reservoir: Reservoir,
}

pub fn encode_model(model: &ModelFile) -> Vec<u8> {
    let beta = model.readout.beta();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.write_u16::<LittleEndian>(VERSION).unwrap();
    out.write_u64::<LittleEndian>(beta.nrows() as u64).unwrap();
    out.write_u64::<LittleEndian>(beta.ncols() as u64).unwrap();
    out.write_f64::<LittleEndian>(model.readout.lambda()).unwrap();
    for r in 0..beta.nrows() {
        for c in 0..beta.ncols() {
            out.write_f64::<LittleEndian>(beta[(r, c)]).unwrap();
        }
    }
    out.write_u8(FEATURE_RSIG).unwrap();
    let res = encode_reservoir(&model.reservoir);
    out.write_u64::<LittleEndian>(res.len() as u64).unwrap();
    out.extend_from_slice(&res);
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelFile> {
    let mut cur = Cursor::new(bytes);
    read_magic(&mut cur, MODEL_MAGIC)?;
    let k = to_usize(read_u64(&mut cur)?, "k")?;
    let m = to_usize(read_u64(&mut cur)?, "m")?;
    let lambda = cur.read_f64::<LittleEndian>().map_err(|_| Error::format("truncated container"))?;
    let n = k.checked_mul(m).ok_or_else(|| Error::format("model shape overflows"))?;
    let beta = read_f64s(&mut cur, n)?;
    let readout =
        ReadoutModel::new(DMatrix::from_row_slice(k, m, &beta), lambda).map_err(|e| Error::format(e.to_string()))?;
    let kind = cur.read_u8().map_err(|_| Error::format("truncated container"))?;
    if kind != FEATURE_RSIG {
        return Err(Error::format(format!("unknown feature map kind {kind}")));
    }
    let len = to_usize(read_u64(&mut cur)?, "reservoir length")?;
    let start = cur.position() as usize;
    let end =
        start.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| Error::format("truncated reservoir"))?;
    let reservoir = decode_reservoir(&bytes[start..end])?;
    if end != bytes.len() {
        return Err(Error::format("trailing bytes after container"));
    }
    if reservoir.k() != k {
        return Err(Error::format(format!("model has {k} features but its reservoir has {}", reservoir.k())));
    }
    Ok(ModelFile { readout, reservoir })
}
