//! Multiplicative scheme over encoded rational pairs.
//!
//! The group is the order-`q` subgroup of `Z_p*` for a safe prime
//! `p = 2q + 1`. Messages are used as raw residues (textbook ElGamal), and
//! the encoded value 0 is encrypted as `(g^r, 0)` so that products stay
//! complete over the integers. A zero plaintext is therefore recognisable
//! from its ciphertext.
//!
//! Division swaps the divisor's numerator and denominator and multiplies.
//! Denominators grow with every operation; nothing here renormalises them.

use num_bigint::{BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand_core::RngCore;

use crate::encoding::{self, CodecParams, EncodedRational};
use crate::error::{Error, Result};
use crate::fingerprint::KeyFingerprint;
use crate::numtheory::{gen_safe_prime, mod_inv, rand_below};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElGamalPublicKey {
    p: BigUint,
    q: BigUint,
    g: BigUint,
    h: BigUint,
    bits: u64,
    codec: CodecParams,
    fingerprint: KeyFingerprint,
}

#[derive(Clone, PartialEq, Eq)]
pub struct ElGamalKeyPair {
    public: ElGamalPublicKey,
    x: BigUint,
}

impl core::fmt::Debug for ElGamalKeyPair {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ElGamalKeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

/// One encrypted residue `(g^r, m·h^r)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElGamalPair {
    pub c1: BigUint,
    pub c2: BigUint,
}

impl ElGamalPair {
    fn mul(&self, other: &ElGamalPair, p: &BigUint) -> ElGamalPair {
        ElGamalPair {
            c1: &self.c1 * &other.c1 % p,
            c2: &self.c2 * &other.c2 % p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElGamalCiphertext {
    num: ElGamalPair,
    den: ElGamalPair,
    key_fp: KeyFingerprint,
}

impl ElGamalCiphertext {
    pub fn from_parts(num: ElGamalPair, den: ElGamalPair, key_fp: KeyFingerprint) -> Self {
        ElGamalCiphertext { num, den, key_fp }
    }

    pub fn num(&self) -> &ElGamalPair {
        &self.num
    }

    pub fn den(&self) -> &ElGamalPair {
        &self.den
    }

    pub fn key_fingerprint(&self) -> &KeyFingerprint {
        &self.key_fp
    }
}

impl ElGamalPublicKey {
    /// Rebuild a public key, re-checking the group structure.
    pub fn from_parts(
        p: BigUint,
        g: BigUint,
        h: BigUint,
        bits: u64,
        codec: CodecParams,
    ) -> Result<Self> {
        if p.bits() != bits || p < BigUint::from(7u32) {
            return Err(Error::InvalidKey(alloc::format!(
                "modulus has {} bits, key claims {bits}",
                p.bits()
            )));
        }
        let q = (&p - 1u32) >> 1u32;
        if g.is_one() || g >= p || !g.modpow(&q, &p).is_one() {
            return Err(Error::InvalidKey(
                "g does not generate the order-q subgroup".into(),
            ));
        }
        if h.is_zero() || h >= p || !h.modpow(&q, &p).is_one() {
            return Err(Error::InvalidKey("h is not a subgroup element".into()));
        }
        let fingerprint = KeyFingerprint::compute("elgamal", &[&p, &g, &h], &codec);
        Ok(ElGamalPublicKey {
            p,
            q,
            g,
            h,
            bits,
            codec,
            fingerprint,
        })
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    /// Subgroup order `(p - 1)/2`.
    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn h(&self) -> &BigUint {
        &self.h
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn codec(&self) -> &CodecParams {
        &self.codec
    }

    pub fn fingerprint(&self) -> &KeyFingerprint {
        &self.fingerprint
    }

    fn encrypt_component<R: RngCore + ?Sized>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<ElGamalPair> {
        if *m >= self.p {
            return Err(Error::Range(
                "encoded component does not fit below the modulus p".into(),
            ));
        }
        let r = rand_below(&(&self.q - 1u32), rng)? + 1u32;
        let c1 = self.g.modpow(&r, &self.p);
        let c2 = if m.is_zero() {
            BigUint::zero()
        } else {
            m * self.h.modpow(&r, &self.p) % &self.p
        };
        Ok(ElGamalPair { c1, c2 })
    }

    /// Encrypt an already encoded pair.
    pub fn encrypt_encoded<R: RngCore + ?Sized>(
        &self,
        v: &EncodedRational,
        rng: &mut R,
    ) -> Result<ElGamalCiphertext> {
        Ok(ElGamalCiphertext {
            num: self.encrypt_component(&v.numerator, rng)?,
            den: self.encrypt_component(&v.denominator, rng)?,
            key_fp: self.fingerprint,
        })
    }

    pub fn encrypt<R: RngCore + ?Sized>(
        &self,
        x: &BigRational,
        rng: &mut R,
    ) -> Result<ElGamalCiphertext> {
        self.encrypt_encoded(&encoding::encode(x, &self.codec)?, rng)
    }

    fn check(&self, ct: &ElGamalCiphertext) -> Result<()> {
        if ct.key_fp != self.fingerprint {
            return Err(Error::KeyMismatch);
        }
        let valid = |pair: &ElGamalPair| pair.c1 < self.p && pair.c2 < self.p;
        if !valid(&ct.num) || !valid(&ct.den) {
            return Err(Error::Range(
                "ciphertext component is not a residue mod p".into(),
            ));
        }
        Ok(())
    }

    /// `(n1·n2, d1·d2)`.
    pub fn mul(&self, a: &ElGamalCiphertext, b: &ElGamalCiphertext) -> Result<ElGamalCiphertext> {
        self.check(a)?;
        self.check(b)?;
        Ok(ElGamalCiphertext {
            num: a.num.mul(&b.num, &self.p),
            den: a.den.mul(&b.den, &self.p),
            key_fp: self.fingerprint,
        })
    }

    /// `(n1·d2, d1·n2)`. Dividing by an encrypted zero is only detected when
    /// the result is decrypted.
    pub fn div(&self, a: &ElGamalCiphertext, b: &ElGamalCiphertext) -> Result<ElGamalCiphertext> {
        self.check(a)?;
        self.check(b)?;
        Ok(ElGamalCiphertext {
            num: a.num.mul(&b.den, &self.p),
            den: a.den.mul(&b.num, &self.p),
            key_fp: self.fingerprint,
        })
    }
}

impl ElGamalKeyPair {
    pub fn generate<R: RngCore + ?Sized>(
        bits: u64,
        codec: CodecParams,
        rng: &mut R,
    ) -> Result<Self> {
        crate::check_key_bits(bits)?;
        let p = gen_safe_prime(bits, rng)?;
        let p_minus_one = &p - 1u32;
        // Squares generate the order-q subgroup; only 1 has to be excluded.
        let g = loop {
            let a = rand_below(&(&p_minus_one - 2u32), rng)? + 2u32;
            let g = &a * &a % &p;
            if !g.is_one() {
                break g;
            }
        };
        let q = &p_minus_one >> 1u32;
        let x = rand_below(&(&q - 1u32), rng)? + 1u32;
        let h = g.modpow(&x, &p);
        let public = ElGamalPublicKey::from_parts(p, g, h, bits, codec)?;
        Ok(ElGamalKeyPair { public, x })
    }

    /// Rebuild a key pair, checking `h = g^x mod p`.
    pub fn from_parts(public: ElGamalPublicKey, x: BigUint) -> Result<Self> {
        if x.is_zero() || x >= public.q || public.g.modpow(&x, &public.p) != public.h {
            return Err(Error::InvalidKey("secret exponent does not match h".into()));
        }
        Ok(ElGamalKeyPair { public, x })
    }

    pub fn public(&self) -> &ElGamalPublicKey {
        &self.public
    }

    pub fn secret_exponent(&self) -> &BigUint {
        &self.x
    }

    fn decrypt_component(&self, pair: &ElGamalPair) -> Result<BigUint> {
        if pair.c2.is_zero() {
            return Ok(BigUint::zero());
        }
        let p = &self.public.p;
        let shared = pair.c1.modpow(&self.x, p);
        Ok(&pair.c2 * mod_inv(&shared, p)? % p)
    }

    /// Decrypt both components to residues modulo `z`.
    pub fn decrypt_encoded(&self, ct: &ElGamalCiphertext) -> Result<EncodedRational> {
        self.public.check(ct)?;
        let codec = &self.public.codec;
        let reduce = |m: BigUint| {
            encoding::sign_encode_wrapping(&num_bigint::BigInt::from_biguint(Sign::Plus, m), codec)
        };
        Ok(EncodedRational {
            numerator: reduce(self.decrypt_component(&ct.num)?),
            denominator: reduce(self.decrypt_component(&ct.den)?),
        })
    }

    pub fn decrypt(&self, ct: &ElGamalCiphertext) -> Result<BigRational> {
        encoding::decode(&self.decrypt_encoded(ct)?, &self.public.codec)
    }
}
