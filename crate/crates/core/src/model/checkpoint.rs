//! Flat binary checkpoint format.
//!
//! ```text
//! magic        8 bytes  "SMEMPRM1"
//! dim_v        u64 LE
//! dim_q        u64 LE
//! hidden       u64 LE
//! num_classes  u64 LE
//! then for each layer in order enc_v, enc_q, fusion, head_main, head_v, head_q:
//!   weight     rows*cols f64 LE, row-major (rows = outputs)
//!   bias       rows f64 LE
//! ```
//!
//! Layer shapes follow from the header: encoders are `hidden x dim`,
//! fusion is `hidden x 2*hidden`, heads are `num_classes x hidden`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Group, Parameters};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SMEMPRM1";

// Guards allocation when reading untrusted headers.
const MAX_DIM: u64 = 1 << 20;

pub fn write_parameters<W: Write>(p: &Parameters, mut w: W) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    for d in [p.dim_v(), p.dim_q(), p.hidden(), p.num_classes()] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for g in Group::ALL {
        for v in p.layer(g).values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_parameters<R: Read>(mut r: R) -> Result<Parameters> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Parse("bad checkpoint magic".into()));
    }
    let mut dims = [0usize; 4];
    for d in dims.iter_mut() {
        let v = read_u64(&mut r)?;
        if v == 0 || v > MAX_DIM {
            return Err(Error::Parse(format!("checkpoint dimension {v} out of range")));
        }
        *d = v as usize;
    }
    let [dim_v, dim_q, hidden, num_classes] = dims;
    if num_classes < 2 {
        return Err(Error::Parse("checkpoint num_classes < 2".into()));
    }
    let mut p = Parameters::zeros(dim_v, dim_q, hidden, num_classes);
    let mut b = [0u8; 8];
    for g in Group::ALL {
        for v in p.layer_mut(g).values_mut() {
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
    }
    if r.read(&mut b)? != 0 {
        return Err(Error::Parse("trailing bytes after checkpoint".into()));
    }
    if !p.is_finite() {
        return Err(Error::Parse("non-finite parameter in checkpoint".into()));
    }
    Ok(p)
}

pub fn save_parameters(p: &Parameters, path: &Path) -> Result<()> {
    write_parameters(p, BufWriter::new(File::create(path)?))
}

pub fn load_parameters(path: &Path) -> Result<Parameters> {
    read_parameters(BufReader::new(File::open(path)?))
}
