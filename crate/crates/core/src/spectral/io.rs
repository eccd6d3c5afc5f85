//! Field snapshot files.
//!
//! Binary layout, little-endian:
//!
//! ```text
//! u32 N | u32 mode_count | mode_count x { i32 k1, i32 k2, i32 k3, f64 re1, im1, re2, im2, re3, im3 }
//! ```
//!
//! One record per stored representative `k` (the coefficient at `-k` is the
//! conjugate). The CSV export has the header `k1,k2,k3,re1,im1,re2,im2,re3,im3`.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{mode_count, mode_index, wavevector, SpectralField, WaveVector};
use crate::error::{Error, Result};

pub const RECORD_BYTES: usize = 3 * 4 + 6 * 8;

pub fn write_snapshot<W: Write>(u: &SpectralField, mut w: W) -> Result<()> {
    let n = u.resolution();
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(mode_count(n) as u32).to_le_bytes())?;
    let mut rec = Vec::with_capacity(RECORD_BYTES);
    for (k, c) in u.iter() {
        rec.clear();
        for kc in k.0 {
            rec.extend_from_slice(&kc.to_le_bytes());
        }
        for z in c {
            rec.extend_from_slice(&z.re.to_le_bytes());
            rec.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&rec)?;
    }
    Ok(())
}

pub fn snapshot_bytes(u: &SpectralField) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + mode_count(u.resolution()) * RECORD_BYTES);
    write_snapshot(u, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<SpectralField> {
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let count = u32::from_le_bytes(b4) as usize;
    if count > mode_count(n) {
        return Err(Error::Format(format!(
            "{count} records exceed the {} modes of resolution {n}",
            mode_count(n)
        )));
    }
    let mut coeffs = vec![[Complex64::new(0.0, 0.0); 3]; mode_count(n)];
    let mut rec = [0u8; RECORD_BYTES];
    for _ in 0..count {
        r.read_exact(&mut rec)?;
        let ki = |j: usize| i32::from_le_bytes(rec[4 * j..4 * j + 4].try_into().unwrap());
        let f = |j: usize| f64::from_le_bytes(rec[12 + 8 * j..20 + 8 * j].try_into().unwrap());
        let k = WaveVector([ki(0), ki(1), ki(2)]);
        let (idx, conj) = mode_index(k, n)
            .ok_or_else(|| Error::Format(format!("wavevector {k} outside resolution {n}")))?;
        let mut v = [
            Complex64::new(f(0), f(1)),
            Complex64::new(f(2), f(3)),
            Complex64::new(f(4), f(5)),
        ];
        if conj {
            v = v.map(|z| z.conj());
        }
        coeffs[idx] = v;
    }
    let u = SpectralField::from_coeffs_unchecked(n, coeffs);
    if u.divergence_residual() > 1e-12 {
        return Err(Error::Format("snapshot is not divergence-free".into()));
    }
    Ok(u)
}

pub fn write_csv<W: Write>(u: &SpectralField, mut w: W) -> Result<()> {
    writeln!(w, "k1,k2,k3,re1,im1,re2,im2,re3,im3")?;
    for (i, c) in u.coeffs().iter().enumerate() {
        let k = wavevector(i, u.resolution());
        writeln!(
            w,
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
            k.0[0], k.0[1], k.0[2], c[0].re, c[0].im, c[1].re, c[1].im, c[2].re, c[2].im
        )?;
    }
    Ok(())
}
