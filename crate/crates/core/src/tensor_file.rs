//! On-disk channel tensor formats.
//!
//! Binary layout, all little-endian:
//!
//! | field        | type            |
//! |--------------|-----------------|
//! | magic        | `b"GSCMCHT1"`   |
//! | dims         | 5 × u32: users, rx, tx, clusters, snapshots |
//! | carrier      | f64, Hz         |
//! | seed         | u64             |
//! | coefficients | (f32 re, f32 im) per entry, `[user, rx, tx, cluster, snapshot]` row-major |
//! | delays       | f64 per entry, `[user, cluster, snapshot]` row-major, seconds |
//!
//! Users appear in ascending id order. The file does not store the ids
//! themselves; readers number users `0..users`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::coefficients::ChannelTensor;
use crate::error::{GscmError, Result};

pub const MAGIC: &[u8; 8] = b"GSCMCHT1";

pub fn write_binary<W: Write>(tensor: &ChannelTensor, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    for d in tensor.dims() {
        let d = u32::try_from(d).map_err(|_| GscmError::Format(format!("dimension {d} exceeds u32")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    w.write_all(&tensor.carrier_hz.to_le_bytes())?;
    w.write_all(&tensor.seed.to_le_bytes())?;
    for c in &tensor.coefficients {
        w.write_all(&(c.re as f32).to_le_bytes())?;
        w.write_all(&(c.im as f32).to_le_bytes())?;
    }
    for d in &tensor.delays {
        w.write_all(&d.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| GscmError::Format(format!("truncated tensor file: {e}")))?;
    Ok(buf)
}

pub fn read_binary<R: Read>(mut r: R) -> Result<ChannelTensor> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(GscmError::Format("bad magic".into()));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = u32::from_le_bytes(read_array(&mut r)?) as usize;
    }
    let carrier_hz = f64::from_le_bytes(read_array(&mut r)?);
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let [users, rx, tx, clusters, snapshots] = dims;
    let mut tensor = ChannelTensor::zeros(
        (0..users as u32).collect(),
        rx,
        tx,
        clusters,
        snapshots,
        carrier_hz,
        seed,
    );
    for c in &mut tensor.coefficients {
        let re = f32::from_le_bytes(read_array(&mut r)?);
        let im = f32::from_le_bytes(read_array(&mut r)?);
        *c = Complex64::new(re as f64, im as f64);
    }
    for d in &mut tensor.delays {
        *d = f64::from_le_bytes(read_array(&mut r)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(GscmError::Format("trailing bytes after delay block".into()));
    }
    Ok(tensor)
}

pub fn write_binary_file(tensor: &ChannelTensor, path: &Path) -> Result<()> {
    write_binary(tensor, BufWriter::new(File::create(path)?))
}

pub fn read_binary_file(path: &Path) -> Result<ChannelTensor> {
    read_binary(BufReader::new(File::open(path)?))
}

/// Tab-separated coefficients, one row per entry.
pub fn write_text_coefficients<W: Write>(tensor: &ChannelTensor, mut w: W) -> Result<()> {
    writeln!(w, "user\trx\ttx\tcluster\tsnapshot\tre\tim")?;
    for (u, user) in tensor.users.iter().enumerate() {
        for j in 0..tensor.rx {
            for i in 0..tensor.tx {
                for c in 0..tensor.clusters {
                    for t in 0..tensor.snapshots {
                        let h = tensor.coefficient(u, j, i, c, t);
                        writeln!(w, "{user}\t{j}\t{i}\t{c}\t{t}\t{}\t{}", h.re, h.im)?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_text_delays<W: Write>(tensor: &ChannelTensor, mut w: W) -> Result<()> {
    writeln!(w, "user\tcluster\tsnapshot\tdelay_s")?;
    for (u, user) in tensor.users.iter().enumerate() {
        for c in 0..tensor.clusters {
            for t in 0..tensor.snapshots {
                writeln!(w, "{user}\t{c}\t{t}\t{}", tensor.delay(u, c, t))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
