//! Gray-coded square M-QAM mapping, coherent hard demapping, error counting.
//!
//! Bits of one symbol are laid out as `[I bits | Q bits]`. Within a dimension
//! the Gray label `g` selects level index `gray_decode(g)`, levels ordered
//! from the most positive amplitude, so an all-zero label maps to the
//! upper-right corner point.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sysmodel::ModulationSpec;

fn gray_encode(m: u32) -> u32 {
    m ^ (m >> 1)
}

fn gray_decode(mut g: u32) -> u32 {
    let mut m = g;
    while g > 1 {
        g >>= 1;
        m ^= g;
    }
    m
}

fn bits_to_label(bits: &[u8]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | u32::from(b & 1))
}

fn label_to_bits(label: u32, width: u32, out: &mut Vec<u8>) {
    for i in (0..width).rev() {
        out.push(((label >> i) & 1) as u8);
    }
}

/// Map one symbol worth of bits to its constellation point.
pub fn map_symbol(bits: &[u8], spec: &ModulationSpec) -> Complex64 {
    let w = spec.bits_per_dim() as usize;
    let i = spec.level(gray_decode(bits_to_label(&bits[..w])));
    let q = spec.level(gray_decode(bits_to_label(&bits[w..2 * w])));
    Complex64::new(i, q)
}

/// Map a bit stream (values 0/1) to symbols.
pub fn map_bits(bits: &[u8], spec: &ModulationSpec) -> Result<Vec<Complex64>> {
    let b = spec.bits_per_symbol as usize;
    if !bits.len().is_multiple_of(b) {
        return Err(Error::BadLength {
            expected: bits.len().div_ceil(b) * b,
            actual: bits.len(),
        });
    }
    Ok(bits.chunks_exact(b).map(|c| map_symbol(c, spec)).collect())
}

/// Nearest level index in one dimension. Ties go to the smaller Gray label.
fn slice_dim(x: f64, spec: &ModulationSpec) -> u32 {
    let side = spec.side as f64;
    // level(m) = (side - 1 - 2m) a/2  =>  m = (side - 1 - 2x/a) / 2
    let pos = (side - 1.0 - 2.0 * x / spec.amplitude_step) / 2.0;
    let lo = pos.floor().clamp(0.0, side - 1.0) as u32;
    let hi = (lo + 1).min(spec.side - 1);
    let dl = (x - spec.level(lo)).abs();
    let dh = (x - spec.level(hi)).abs();
    if dh < dl || (dh == dl && gray_encode(hi) < gray_encode(lo)) {
        hi
    } else {
        lo
    }
}

/// Minimum-distance decision on `y / gain`, appended to `out` as bits.
pub fn demap_into(y: Complex64, gain: Complex64, spec: &ModulationSpec, out: &mut Vec<u8>) -> Result<()> {
    if gain == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroGain);
    }
    let z = y / gain;
    let w = spec.bits_per_dim();
    label_to_bits(gray_encode(slice_dim(z.re, spec)), w, out);
    label_to_bits(gray_encode(slice_dim(z.im, spec)), w, out);
    Ok(())
}

pub fn demap(y: Complex64, gain: Complex64, spec: &ModulationSpec) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(spec.bits_per_symbol as usize);
    demap_into(y, gain, spec, &mut out)?;
    Ok(out)
}

/// `(bit_errors, bits)` between two equal-length streams.
pub fn count_errors(tx: &[u8], rx: &[u8]) -> Result<(u64, u64)> {
    if tx.len() != rx.len() {
        return Err(Error::BadLength {
            expected: tx.len(),
            actual: rx.len(),
        });
    }
    let errors = tx.iter().zip(rx).filter(|(a, b)| a != b).count();
    Ok((errors as u64, tx.len() as u64))
}
