//! Binary columnar sample dumps.
//!
//! Layout (all integers and floats little-endian):
//!   magic  "PCHS" (4 bytes)
//!   version  u32 (currently 1)
//!   columns  u32
//!   rows     u64
//!   per column: name length u32, name bytes (UTF-8)
//!   per column: rows × f64 values
pub const MAGIC: &[u8; 4] = b"PCHS";
pub const VERSION: u32 = 1;

use crate::{CliError, CliResult};

pub fn encode(columns: &[(String, Vec<f64>)]) -> CliResult<Vec<u8>> {
    let rows = columns.first().map_or(0, |(_, v)| v.len());
    if columns.iter().any(|(_, v)| v.len() != rows) {
        return Err(CliError::new("pchs columns must have equal lengths"));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(columns.len() as u32).to_le_bytes());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    for (name, _) in columns {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for (_, values) in columns {
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> CliResult<Vec<(String, Vec<f64>)>> {
    let err = || CliError::new("malformed pchs file");
    let mut at = 0usize;
    let take = |at: &mut usize, n: usize| -> CliResult<&[u8]> {
        let s = bytes.get(*at..*at + n).ok_or_else(err)?;
        *at += n;
        Ok(s)
    };
    if take(&mut at, 4)? != MAGIC {
        return Err(CliError::new("bad pchs magic"));
    }
    let version = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(CliError::new(format!("unsupported pchs version {version}")));
    }
    let cols = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
    let rows = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()) as usize;
    let mut names = Vec::with_capacity(cols);
    for _ in 0..cols {
        let len = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut at, len)?.to_vec()).map_err(|_| err())?;
        names.push(name);
    }
    let mut out = Vec::with_capacity(cols);
    for name in names {
        let mut values = Vec::with_capacity(rows);
        for _ in 0..rows {
            values.push(f64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()));
        }
        out.push((name, values));
    }
    Ok(out)
}
