//! Ring arithmetic modulo `2^l` and fixed-point encoding of reals.
//!
//! All protocol values live in `Z_{2^l}` for `l` in {32, 64, 128}. The 128-bit
//! ring is used where double-width products of `t = 32` fixed-point values
//! must survive until truncation.

/// Number of fractional bits used by the fixed-point encoding.
pub const FRAC_BITS: u32 = 32;

/// An unsigned integer type acting as `Z_{2^l}` with wrapping arithmetic.
pub trait Ring:
    Copy + Clone + Eq + PartialEq + std::fmt::Debug + std::hash::Hash + Send + Sync + 'static
{
    const BITS: u32;
    const ZERO: Self;
    const ONE: Self;

    fn wrapping_add(self, rhs: Self) -> Self;
    fn wrapping_sub(self, rhs: Self) -> Self;
    fn wrapping_mul(self, rhs: Self) -> Self;
    fn wrapping_neg(self) -> Self;
    fn shr(self, bits: u32) -> Self;
    fn shl(self, bits: u32) -> Self;
    /// Least significant bit.
    fn bit(self, idx: u32) -> bool;
    fn from_u64(v: u64) -> Self;
    fn to_u128(self) -> u128;
    fn from_u128(v: u128) -> Self;
    fn to_le_bytes(self, out: &mut Vec<u8>);
    fn from_le_slice(src: &[u8]) -> Self;
    fn byte_len() -> usize {
        (Self::BITS / 8) as usize
    }
}

macro_rules! impl_ring {
    ($t:ty, $bits:expr) => {
        impl Ring for $t {
            const BITS: u32 = $bits;
            const ZERO: Self = 0;
            const ONE: Self = 1;

            #[inline]
            fn wrapping_add(self, rhs: Self) -> Self {
                <$t>::wrapping_add(self, rhs)
            }
            #[inline]
            fn wrapping_sub(self, rhs: Self) -> Self {
                <$t>::wrapping_sub(self, rhs)
            }
            #[inline]
            fn wrapping_mul(self, rhs: Self) -> Self {
                <$t>::wrapping_mul(self, rhs)
            }
            #[inline]
            fn wrapping_neg(self) -> Self {
                <$t>::wrapping_neg(self)
            }
            #[inline]
            fn shr(self, bits: u32) -> Self {
                self >> bits
            }
            #[inline]
            fn shl(self, bits: u32) -> Self {
                self << bits
            }
            #[inline]
            fn bit(self, idx: u32) -> bool {
                (self >> idx) & 1 == 1
            }
            #[inline]
            fn from_u64(v: u64) -> Self {
                v as $t
            }
            #[inline]
            fn to_u128(self) -> u128 {
                self as u128
            }
            #[inline]
            fn from_u128(v: u128) -> Self {
                v as $t
            }
            #[inline]
            fn to_le_bytes(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            #[inline]
            fn from_le_slice(src: &[u8]) -> Self {
                let mut buf = [0u8; ($bits / 8) as usize];
                buf.copy_from_slice(&src[..($bits / 8) as usize]);
                <$t>::from_le_bytes(buf)
            }
        }
    };
}

impl_ring!(u32, 32);
impl_ring!(u64, 64);
impl_ring!(u128, 128);

/// Errors from fixed-point encoding.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RingError {
    #[error("value {0} exceeds the representable fixed-point range")]
    Range(f64),
}

/// Encodes a real into `Z_{2^64}` as `round(x * 2^t)`, two's complement.
///
/// Rounding is half-away-from-zero so the error is symmetric for signed inputs.
pub fn encode(x: f64, t: u32) -> Result<u64, RingError> {
    if !x.is_finite() || x.abs() >= (1u64 << (63 - t)) as f64 {
        return Err(RingError::Range(x));
    }
    let scaled = x * (1u64 << t) as f64;
    let rounded = if scaled >= 0.0 {
        (scaled + 0.5).floor()
    } else {
        (scaled - 0.5).ceil()
    };
    Ok((rounded as i64) as u64)
}

/// Decodes a `Z_{2^64}` element as signed two's complement divided by `2^t`.
pub fn decode(r: u64, t: u32) -> f64 {
    (r as i64) as f64 / (1u64 << t) as f64
}

/// Encodes into the 128-bit ring used for double-width intermediates.
pub fn encode128(x: f64, t: u32) -> Result<u128, RingError> {
    encode(x, t).map(|v| (v as i64) as i128 as u128)
}

/// Decodes a 128-bit ring element as signed two's complement over `2^t`.
pub fn decode128(r: u128, t: u32) -> f64 {
    (r as i128) as f64 / (1u64 << t) as f64
}

/// Plaintext fixed-point product: 128-bit intermediate, truncated by `2^t`,
/// reduced mod `2^64`.
pub fn fixed_mul(a: u64, b: u64, t: u32) -> u64 {
    let prod = (a as i64 as i128).wrapping_mul(b as i64 as i128);
    ((prod >> t) as i64) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_zero_and_one() {
        assert_eq!(encode(0.0, 32).unwrap(), 0);
        assert_eq!(encode(1.0, 32).unwrap(), 1u64 << 32);
    }

    #[test]
    fn encode_negative_half() {
        // two's complement of -2^31, i.e. 2^64 - 2^31
        assert_eq!(encode(-0.5, 32).unwrap(), (-(1i64 << 31)) as u64);
        assert!((decode(encode(-0.5, 32).unwrap(), 32) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn decode_unit_values() {
        assert_eq!(decode(1u64 << 32, 32), 1.0);
        assert_eq!(decode((1u64 << 32).wrapping_neg(), 32), -1.0);
    }

    #[test]
    fn round_trip_pi() {
        let x = 3.141592653;
        let back = decode(encode(x, 32).unwrap(), 32);
        assert!((back - x).abs() <= 2f64.powi(-32));
    }

    #[test]
    fn range_error() {
        assert!(encode(1e12, 32).is_err());
        assert!(encode(f64::NAN, 32).is_err());
    }

    #[test]
    fn fixed_mul_matches_real_product() {
        let a = encode(1.5, 32).unwrap();
        let b = encode(-2.25, 32).unwrap();
        let p = decode(fixed_mul(a, b, 32), 32);
        assert!((p - (-3.375)).abs() <= 2f64.powi(-31));
    }

    proptest! {
        #[test]
        fn encode_decode_is_near_identity(x in -1.0e6f64..1.0e6) {
            let back = decode(encode(x, 32).unwrap(), 32);
            prop_assert!((back - x).abs() <= 2f64.powi(-32));
        }

        #[test]
        fn addition_homomorphism(x in -1.0e6f64..1.0e6, y in -1.0e6f64..1.0e6) {
            let s = decode(encode(x, 32).unwrap().wrapping_add(encode(y, 32).unwrap()), 32);
            prop_assert!((s - (x + y)).abs() <= 2f64.powi(-31));
        }

        #[test]
        fn negation_wraps_to_zero(x in -1.0e6f64..1.0e6) {
            let a = encode(x, 32).unwrap();
            let b = encode(-x, 32).unwrap();
            prop_assert_eq!(a.wrapping_add(b), 0);
        }
    }

    // ~1e5-sample randomized round-trip bound, kept cheap with a plain RNG.
    #[test]
    fn round_trip_bound_dense_sampling() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let x: f64 = rng.gen_range(-1.0e6..1.0e6);
            let back = decode(encode(x, 32).unwrap(), 32);
            assert!((back - x).abs() <= 2f64.powi(-32));
        }
    }
}
