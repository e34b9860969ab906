//! Little-endian binary dataset records.
//!
//! Each record is a header `{"SSC1", N, N_RF, Q, L: u32, snr_db: f64, seed: u64}`
//! followed by `h~` (N complex), `M~` (Q N_RF x N, row-major) and `y~`
//! (Q N_RF complex). Complex values are interleaved `(re, im)` f64 pairs.

use std::io::{self, Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

pub const MAGIC: &[u8; 4] = b"SSC1";
pub const HEADER_BYTES: usize = 4 + 4 * 4 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub n_antennas: u32,
    pub n_rf: u32,
    pub n_slots: u32,
    pub n_paths: u32,
    pub snr_db: f64,
    pub seed: u64,
    pub channel: Vec<Complex64>,
    pub matrix: ComplexMatrix,
    pub pilots: Vec<Complex64>,
}

/// Size on disk of one record.
pub fn record_bytes(n_antennas: usize, n_rf: usize, n_slots: usize) -> u64 {
    let rows = (n_rf * n_slots) as u64;
    let n = n_antennas as u64;
    HEADER_BYTES as u64 + 16 * (n + rows * n + rows)
}

fn put_c(w: &mut impl Write, z: Complex64) -> io::Result<()> {
    w.write_all(&z.re.to_le_bytes())?;
    w.write_all(&z.im.to_le_bytes())
}

pub fn write_record(w: &mut impl Write, rec: &DatasetRecord) -> Result<()> {
    let rows = (rec.n_rf * rec.n_slots) as usize;
    let n = rec.n_antennas as usize;
    if rec.channel.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rec.channel.len() });
    }
    if rec.matrix.nrows() != rows || rec.matrix.ncols() != n {
        return Err(Error::DimensionMismatch { expected: rows * n, got: rec.matrix.nrows() * rec.matrix.ncols() });
    }
    if rec.pilots.len() != rows {
        return Err(Error::DimensionMismatch { expected: rows, got: rec.pilots.len() });
    }
    w.write_all(MAGIC)?;
    for v in [rec.n_antennas, rec.n_rf, rec.n_slots, rec.n_paths] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&rec.snr_db.to_le_bytes())?;
    w.write_all(&rec.seed.to_le_bytes())?;
    for z in &rec.channel {
        put_c(w, *z)?;
    }
    for i in 0..rows {
        for j in 0..n {
            put_c(w, rec.matrix.get(i, j))?;
        }
    }
    for z in &rec.pilots {
        put_c(w, *z)?;
    }
    Ok(())
}

fn get_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().expect("4 bytes"))
}

fn get_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b.try_into().expect("8 bytes"))
}

fn read_complex(r: &mut impl Read, count: usize) -> Result<Vec<Complex64>> {
    let mut buf = vec![0u8; 16 * count];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Format("truncated record".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf.chunks_exact(16).map(|c| Complex64::new(get_f64(&c[..8]), get_f64(&c[8..]))).collect())
}

/// Next record, or `None` at a clean end of stream.
pub fn read_record(r: &mut impl Read) -> Result<Option<DatasetRecord>> {
    let mut header = [0u8; HEADER_BYTES];
    let mut filled = 0;
    while filled < HEADER_BYTES {
        let k = r.read(&mut header[filled..])?;
        if k == 0 {
            break;
        }
        filled += k;
    }
    if filled == 0 {
        return Ok(None);
    }
    if filled < HEADER_BYTES {
        return Err(Error::Format("truncated header".into()));
    }
    if &header[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let n_antennas = get_u32(&header[4..8]);
    let n_rf = get_u32(&header[8..12]);
    let n_slots = get_u32(&header[12..16]);
    let n_paths = get_u32(&header[16..20]);
    let snr_db = get_f64(&header[20..28]);
    let seed = u64::from_le_bytes(header[28..36].try_into().expect("8 bytes"));
    let n = n_antennas as usize;
    let rows = (n_rf as usize)
        .checked_mul(n_slots as usize)
        .ok_or_else(|| Error::Format("measurement count overflows".into()))?;
    let channel = read_complex(r, n)?;
    let flat = read_complex(r, rows * n)?;
    let mut matrix = ComplexMatrix::zeros(rows, n);
    for i in 0..rows {
        for j in 0..n {
            matrix.set(i, j, flat[i * n + j]);
        }
    }
    let pilots = read_complex(r, rows)?;
    Ok(Some(DatasetRecord { n_antennas, n_rf, n_slots, n_paths, snr_db, seed, channel, matrix, pilots }))
}
