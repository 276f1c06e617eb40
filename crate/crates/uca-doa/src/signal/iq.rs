//! Raw sample dump: a 32-byte header followed by little-endian interleaved
//! `f64` real/imaginary pairs in row-major (element, sample) order.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::signal::TimeSamples;
use crate::{CMatrix, C64};

const MAGIC: &[u8; 6] = b"UCAIQ\0";

/// Header size in bytes.
pub const IQ_HEADER_LEN: usize = 32;

fn header(m: u32, kt: u64, fs: f64) -> [u8; IQ_HEADER_LEN] {
    let mut h = [0u8; IQ_HEADER_LEN];
    h[..6].copy_from_slice(MAGIC);
    h[8..12].copy_from_slice(&m.to_le_bytes());
    h[16..24].copy_from_slice(&kt.to_le_bytes());
    h[24..32].copy_from_slice(&fs.to_le_bytes());
    h
}

fn write_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<sample stream>".into(),
        source: e,
    }
}

/// Writes `samples` in the dump format.
pub fn write_iq<W: Write>(samples: &TimeSamples, mut out: W) -> Result<()> {
    let (m, kt) = samples.data.shape();
    out.write_all(&header(m as u32, kt as u64, samples.sample_rate))
        .map_err(write_err)?;
    let mut buf = Vec::with_capacity(kt * 16);
    for e in 0..m {
        buf.clear();
        for t in 0..kt {
            let v = samples.data[(e, t)];
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        out.write_all(&buf).map_err(write_err)?;
    }
    out.flush().map_err(write_err)
}

/// Reads a dump written by [`write_iq`].
pub fn read_iq<R: Read>(mut input: R) -> Result<TimeSamples> {
    let mut h = [0u8; IQ_HEADER_LEN];
    input.read_exact(&mut h).map_err(write_err)?;
    if &h[..6] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let m = u32::from_le_bytes(h[8..12].try_into().unwrap()) as usize;
    let kt = u64::from_le_bytes(h[16..24].try_into().unwrap()) as usize;
    let fs = f64::from_le_bytes(h[24..32].try_into().unwrap());
    let mut body = Vec::new();
    input.read_to_end(&mut body).map_err(write_err)?;
    if body.len() != m * kt * 16 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            m * kt * 16,
            body.len()
        )));
    }
    let f = |i: usize| f64::from_le_bytes(body[i..i + 8].try_into().unwrap());
    let data = CMatrix::from_fn(m, kt, |e, t| {
        let i = (e * kt + t) * 16;
        C64::new(f(i), f(i + 8))
    });
    Ok(TimeSamples { data, sample_rate: fs })
}
