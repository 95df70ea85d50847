//! Fixed-point rational encoding with two's-complement signs.
//!
//! A decimal `x` becomes the pair `(x·10^k, 10^k)`. Each component is then
//! sign-encoded modulo `z = 2^i`: negative values map to `n + z`, and decoding
//! reduces modulo `z` and subtracts `z` when the residue exceeds `z/2`.
//! Arithmetic on encoded values therefore wraps exactly like `i`-bit machine
//! integers.
//!
//! The decode rule uses a strict `> z/2`, so the residue `z/2` decodes to
//! `+z/2`. To keep encode and decode inverse to each other the legal signed
//! range is `-z/2 < n < z/2`.

use alloc::string::String;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, Zero};

use crate::error::{Error, Result};

/// Decimal scaling exponent `k` and sign-encoding modulus `z = 2^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodecParams {
    k: u32,
    i: u32,
}

impl CodecParams {
    pub const DEFAULT_K: u32 = 12;
    pub const DEFAULT_I: u32 = 128;

    pub fn new(k: u32, i: u32) -> Result<Self> {
        if i == 0 {
            return Err(Error::Config("codec exponent i must be positive".into()));
        }
        Ok(CodecParams { k, i })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn i(&self) -> u32 {
        self.i
    }

    /// The modulus `z = 2^i`.
    pub fn z(&self) -> BigUint {
        BigUint::one() << self.i
    }

    pub fn half_z(&self) -> BigUint {
        BigUint::one() << (self.i - 1)
    }

    /// The fixed denominator `10^k`.
    pub fn scale(&self) -> BigUint {
        pow10(self.k)
    }

    /// Whether a signed integer lies in the legal range `(-z/2, z/2)`.
    pub fn in_range(&self, n: &BigInt) -> bool {
        *n.magnitude() < self.half_z()
    }
}

impl Default for CodecParams {
    fn default() -> Self {
        CodecParams {
            k: Self::DEFAULT_K,
            i: Self::DEFAULT_I,
        }
    }
}

pub(crate) fn pow10(k: u32) -> BigUint {
    Pow::pow(BigUint::from(10u8), k)
}

/// Sign-encoded `(numerator, denominator)` pair, each in `[0, z)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedRational {
    pub numerator: BigUint,
    pub denominator: BigUint,
}

/// `n` if non-negative, `n + z` otherwise.
pub fn sign_encode(n: &BigInt, params: &CodecParams) -> Result<BigUint> {
    if !params.in_range(n) {
        return Err(Error::Range(alloc::format!(
            "{n} is outside the signed range of a {}-bit codec",
            params.i
        )));
    }
    Ok(sign_encode_wrapping(n, params))
}

/// Two's-complement reduction of an arbitrary integer into `[0, z)`.
///
/// Agrees with [`sign_encode`] on the legal range and wraps outside it.
pub fn sign_encode_wrapping(n: &BigInt, params: &CodecParams) -> BigUint {
    let z = BigInt::from_biguint(Sign::Plus, params.z());
    n.mod_floor(&z)
        .to_biguint()
        .expect("mod_floor by a positive modulus")
}

/// Reduce modulo `z`, then map residues above `z/2` back to negatives.
pub fn sign_decode(n: &BigUint, params: &CodecParams) -> BigInt {
    let z = params.z();
    let m = n % &z;
    if m > params.half_z() {
        BigInt::from_biguint(Sign::Plus, m) - BigInt::from_biguint(Sign::Plus, z)
    } else {
        BigInt::from_biguint(Sign::Plus, m)
    }
}

/// Encode `x` as `(x·10^k, 10^k)` using the codec's `k`.
pub fn encode(x: &BigRational, params: &CodecParams) -> Result<EncodedRational> {
    encode_with_scale(x, params.k, params)
}

/// Encode `x` as `(x·10^scale, 10^scale)`. Inputs whose decimal expansion
/// does not terminate within `scale` digits are rejected.
pub fn encode_with_scale(
    x: &BigRational,
    scale: u32,
    params: &CodecParams,
) -> Result<EncodedRational> {
    let denominator = pow10(scale);
    let scaled =
        x * BigRational::from_integer(BigInt::from_biguint(Sign::Plus, denominator.clone()));
    if !scaled.is_integer() {
        return Err(Error::Precision { max: scale });
    }
    let numerator = sign_encode(&scaled.to_integer(), params)?;
    let denominator = sign_encode(&BigInt::from_biguint(Sign::Plus, denominator), params)?;
    Ok(EncodedRational {
        numerator,
        denominator,
    })
}

/// Exact rational `sign_decode(numerator) / sign_decode(denominator)`.
pub fn decode(v: &EncodedRational, params: &CodecParams) -> Result<BigRational> {
    let numerator = sign_decode(&v.numerator, params);
    let denominator = sign_decode(&v.denominator, params);
    if denominator.is_zero() {
        return Err(Error::DivisionByZero);
    }
    Ok(BigRational::new(numerator, denominator))
}

/// Truncate `x` toward zero to `places` fractional decimal digits.
pub fn truncate_to_places(x: &BigRational, places: u32) -> BigRational {
    let scale = BigInt::from_biguint(Sign::Plus, pow10(places));
    // BigRational::trunc rounds toward zero.
    let scaled = (x * BigRational::from_integer(scale.clone())).trunc();
    scaled / BigRational::from_integer(scale)
}

/// Parse a plain decimal literal such as `-12`, `0.5` or `+3.25`.
pub fn parse_decimal(text: &str) -> Result<BigRational> {
    let invalid = || Error::InvalidDecimal(text.into());
    let trimmed = text.trim();
    let (negative, body) = if let Some(rest) = trimmed.strip_prefix('-') {
        (true, rest)
    } else if let Some(rest) = trimmed.strip_prefix('\u{2212}') {
        (true, rest)
    } else if let Some(rest) = trimmed.strip_prefix('+') {
        (false, rest)
    } else {
        (false, trimmed)
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    let all_digits = |s: &str| s.bytes().all(|c| c.is_ascii_digit());
    if int_part.is_empty() && frac_part.is_empty()
        || !all_digits(int_part)
        || !all_digits(frac_part)
    {
        return Err(invalid());
    }
    let mut digits = String::with_capacity(int_part.len() + frac_part.len());
    digits.push_str(int_part);
    digits.push_str(frac_part);
    let magnitude = BigInt::parse_bytes(digits.as_bytes(), 10).ok_or_else(invalid)?;
    let numerator = if negative { -magnitude } else { magnitude };
    let denominator = BigInt::from_biguint(Sign::Plus, pow10(frac_part.len() as u32));
    Ok(BigRational::new(numerator, denominator))
}

/// Render `x` truncated toward zero to at most `places` fractional digits,
/// without trailing zeros.
/// Number of fractional digits in the decimal expansion of `x`, or `None`
/// if it does not terminate.
pub fn decimal_places(x: &BigRational) -> Option<u32> {
    let mut den = x.denom().abs();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let (mut twos, mut fives) = (0u32, 0u32);
    while den.is_even() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    den.is_one().then_some(twos.max(fives))
}

/// Exact decimal when the expansion terminates, otherwise truncated to
/// `max_places` digits.
pub fn format_exact_or_truncated(x: &BigRational, max_places: u32) -> String {
    format_decimal(x, decimal_places(x).unwrap_or(max_places))
}

pub fn format_decimal(x: &BigRational, places: u32) -> String {
    let truncated = truncate_to_places(x, places);
    let scale = BigInt::from_biguint(Sign::Plus, pow10(places));
    let scaled = (truncated * BigRational::from_integer(scale.clone())).to_integer();
    let negative = scaled.is_negative();
    let (int_part, frac_part) = scaled.abs().div_rem(&scale);
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&alloc::format!("{int_part}"));
    if places > 0 && !frac_part.is_zero() {
        let frac = alloc::format!("{:0>width$}", frac_part, width = places as usize);
        out.push('.');
        out.push_str(frac.trim_end_matches('0'));
    }
    out
}
