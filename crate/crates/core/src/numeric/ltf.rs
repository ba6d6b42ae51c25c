//! LTF: an ASCII header line `ltf <rows> <cols>\n` followed by `rows * cols`
//! little-endian IEEE-754 binary64 values in row-major order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::Matrix;
use crate::error::{Error, Result};

pub fn write_ltf<W: Write>(mut w: W, m: &Matrix) -> Result<()> {
    writeln!(w, "ltf {} {}", m.rows(), m.cols())?;
    let mut buf = Vec::with_capacity(m.data().len() * 8);
    for v in m.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_ltf<R: Read>(r: R) -> Result<Matrix> {
    let mut r = BufReader::new(r);
    let mut header = Vec::new();
    r.read_until(b'\n', &mut header)?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| Error::Format("LTF header is not ASCII".into()))?;
    let mut parts = header.trim_end_matches('\n').split(' ');
    if parts.next() != Some("ltf") {
        return Err(Error::Format(format!("bad LTF magic in header {header:?}")));
    }
    let mut dim = || -> Result<usize> {
        parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad LTF header {header:?}")))
    };
    let (rows, cols) = (dim()?, dim()?);
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("LTF dimensions overflow".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(Error::Format(format!(
            "LTF body has {} bytes, expected {} for {rows}x{cols}",
            bytes.len(),
            n * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn write_ltf_file(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut buf = Vec::new();
    write_ltf(&mut buf, m)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_ltf_file(path: impl AsRef<Path>) -> Result<Matrix> {
    read_ltf(fs::File::open(path)?)
}
