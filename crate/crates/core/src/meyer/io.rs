//! Binary path dumps. Little-endian: `u32` tag `0x4D59_5200 + d`, `u64`
//! record count, then per record `f64` time, `d × f64` state, `u8` mark.

use std::io::{Read, Write};

use super::{Mark, PathSkeleton};
use crate::error::{Error, Result};

const TAG_BASE: u32 = 0x4D59_5200;

#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub marks: Vec<Mark>,
}

pub fn write_path<W: Write>(path: &PathSkeleton, mut w: W) -> Result<()> {
    w.write_all(&(TAG_BASE + path.dim as u32).to_le_bytes())?;
    w.write_all(&(path.len() as u64).to_le_bytes())?;
    for i in 0..path.len() {
        w.write_all(&path.times[i].to_le_bytes())?;
        for v in path.state(i) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[path.marks[i] as u8])?;
    }
    Ok(())
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_path<R: Read>(mut r: R) -> Result<PathRecord> {
    let mut tag = [0u8; 4];
    r.read_exact(&mut tag)?;
    let tag = u32::from_le_bytes(tag);
    let dim = tag.wrapping_sub(TAG_BASE) as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::Schema(format!("not a path dump (tag {tag:#010x})")));
    }
    let mut count = [0u8; 8];
    r.read_exact(&mut count)?;
    let n = u64::from_le_bytes(count) as usize;
    let mut rec = PathRecord {
        dim,
        times: Vec::with_capacity(n),
        states: Vec::with_capacity(n * dim),
        marks: Vec::with_capacity(n),
    };
    for _ in 0..n {
        rec.times.push(read_f64(&mut r)?);
        for _ in 0..dim {
            rec.states.push(read_f64(&mut r)?);
        }
        let mut m = [0u8; 1];
        r.read_exact(&mut m)?;
        rec.marks.push(Mark::from_u8(m[0])?);
    }
    Ok(rec)
}
