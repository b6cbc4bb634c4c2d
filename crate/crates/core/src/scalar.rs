//! Scalar abstraction for vector components.
//!
//! Index structures, datasets, and metrics are generic over [`Scalar`] so the
//! same code paths serve `f32` (the common on-disk ANN format) and `f64`
//! (useful when checking numerical behaviour of the exact oracle). The crate
//! root exports concrete `F32`/`F64` aliases for the main types so most
//! callers never spell out the parameter.

use std::fmt::{Debug, Display};
use std::io::{self, Read, Write};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type usable in datasets and indexes.
///
/// Extends [`num_traits::Float`] with the plumbing the I/O and persistence
/// layers need: a stable one-byte dtype tag and little-endian (de)serialization
/// of single values.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Tag stored in persisted index headers so a file built for one element
    /// type is never reinterpreted as another.
    const DTYPE: u8;

    /// Size of one encoded element in bytes.
    const WIDTH: usize;

    /// Human-readable dtype name (used in error messages).
    const NAME: &'static str;

    /// Write one value in little-endian byte order.
    fn write_le<W: Write>(self, w: &mut W) -> io::Result<()>;

    /// Read one value in little-endian byte order.
    fn read_le<R: Read>(r: &mut R) -> io::Result<Self>;

    /// Lossy conversion from `f64`, saturating through `num_traits`.
    ///
    /// Panics only if the target type cannot represent any finite value,
    /// which cannot happen for the float types implemented here.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float scalar")
    }

    /// Lossy conversion to `f64` for reporting and aggregation.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("float scalar converts to f64")
    }
}

impl Scalar for f32 {
    const DTYPE: u8 = 1;
    const WIDTH: usize = 4;
    const NAME: &'static str = "f32";

    fn write_le<W: Write>(self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.to_le_bytes())
    }

    fn read_le<R: Read>(r: &mut R) -> io::Result<Self> {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf)?;
        Ok(f32::from_le_bytes(buf))
    }
}

impl Scalar for f64 {
    const DTYPE: u8 = 2;
    const WIDTH: usize = 8;
    const NAME: &'static str = "f64";

    fn write_le<W: Write>(self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.to_le_bytes())
    }

    fn read_le<R: Read>(r: &mut R) -> io::Result<Self> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        Ok(f64::from_le_bytes(buf))
    }
}

/// Squared Euclidean distance between two equal-length slices.
///
/// Callers guarantee equal lengths; debug builds assert it.
#[inline]
pub fn l2_sq<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc = acc + d * d;
    }
    acc
}

/// Inner product between two equal-length slices.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b.iter()) {
        acc = acc + x * y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_sq_matches_hand_computation() {
        let a = [1.0f32, 2.0, 3.0];
        let b = [4.0f32, 6.0, 3.0];
        // (3^2 + 4^2 + 0^2) = 25
        assert_eq!(l2_sq(&a, &b), 25.0);
        assert_eq!(l2_sq(&a, &a), 0.0);
    }

    #[test]
    fn dot_matches_hand_computation() {
        let a = [1.0f64, 2.0, 3.0];
        let b = [4.0f64, 5.0, 6.0];
        assert_eq!(dot(&a, &b), 32.0);
    }

    #[test]
    fn le_round_trip_preserves_bits() {
        let mut buf = Vec::new();
        let v = -123.456f32;
        v.write_le(&mut buf).unwrap();
        assert_eq!(buf.len(), f32::WIDTH);
        let back = f32::read_le(&mut buf.as_slice()).unwrap();
        assert_eq!(v.to_bits(), back.to_bits());

        let mut buf = Vec::new();
        let v = 1.0e300f64;
        v.write_le(&mut buf).unwrap();
        assert_eq!(buf.len(), f64::WIDTH);
        let back = f64::read_le(&mut buf.as_slice()).unwrap();
        assert_eq!(v.to_bits(), back.to_bits());
    }

    #[test]
    fn dtype_tags_are_distinct() {
        assert_ne!(<f32 as Scalar>::DTYPE, <f64 as Scalar>::DTYPE);
    }
}
