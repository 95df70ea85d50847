//! Additive scheme over encoded rational pairs.
//!
//! Uses the `g = n + 1` variant with `λ = lcm(p-1, q-1)` and
//! `μ = λ⁻¹ mod n`. Numerator and denominator are encrypted separately.
//! Every ciphertext records the decimal scale of its denominator; addition
//! and subtraction only combine ciphertexts with equal scales, so "all
//! numbers share the denominator 10^k" is checked without the private key.
//!
//! Plaintexts live modulo `n`. Decryption lifts residues above `n/2` to
//! negatives before reducing modulo `z`, which lets subtraction use the
//! plain inverse ciphertext even though `n` is not a multiple of `z`.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand_core::RngCore;

use crate::encoding::{self, CodecParams, EncodedRational};
use crate::error::{Error, Result};
use crate::fingerprint::KeyFingerprint;
use crate::numtheory::{gen_prime, mod_inv, rand_below};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierPublicKey {
    n: BigUint,
    g: BigUint,
    n_squared: BigUint,
    bits: u64,
    codec: CodecParams,
    fingerprint: KeyFingerprint,
}

#[derive(Clone, PartialEq, Eq)]
pub struct PaillierPrivateKey {
    lambda: BigUint,
    mu: BigUint,
}

impl core::fmt::Debug for PaillierPrivateKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("PaillierPrivateKey { .. }")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierKeyPair {
    public: PaillierPublicKey,
    private: PaillierPrivateKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierCiphertext {
    c_num: BigUint,
    c_den: BigUint,
    den_scale: u32,
    key_fp: KeyFingerprint,
}

impl PaillierCiphertext {
    pub fn from_parts(
        c_num: BigUint,
        c_den: BigUint,
        den_scale: u32,
        key_fp: KeyFingerprint,
    ) -> Self {
        PaillierCiphertext {
            c_num,
            c_den,
            den_scale,
            key_fp,
        }
    }

    pub fn c_num(&self) -> &BigUint {
        &self.c_num
    }

    pub fn c_den(&self) -> &BigUint {
        &self.c_den
    }

    /// Decimal exponent of the encrypted denominator, `10^den_scale`.
    pub fn den_scale(&self) -> u32 {
        self.den_scale
    }

    pub fn key_fingerprint(&self) -> &KeyFingerprint {
        &self.key_fp
    }
}

fn l_function(u: &BigUint, n: &BigUint) -> BigUint {
    (u - 1u32) / n
}

impl PaillierPublicKey {
    /// Rebuild a public key from its modulus and generator. Only `g = n + 1`
    /// is supported.
    pub fn from_parts(n: BigUint, g: BigUint, bits: u64, codec: CodecParams) -> Result<Self> {
        if g != &n + 1u32 {
            return Err(Error::InvalidKey("generator must equal n + 1".into()));
        }
        if n.bits() != bits {
            return Err(Error::InvalidKey(alloc::format!(
                "modulus has {} bits, key claims {bits}",
                n.bits()
            )));
        }
        if n.is_even() || n < BigUint::from(15u32) {
            return Err(Error::InvalidKey("modulus must be an odd composite".into()));
        }
        let fingerprint = KeyFingerprint::compute("paillier", &[&n, &g], &codec);
        let n_squared = &n * &n;
        Ok(PaillierPublicKey {
            n,
            g,
            n_squared,
            bits,
            codec,
            fingerprint,
        })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
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

    fn encrypt_component<R: RngCore + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<BigUint> {
        if *m >= self.n {
            return Err(Error::Range(
                "encoded component does not fit below the modulus n".into(),
            ));
        }
        let r = loop {
            let r = rand_below(&(&self.n - 1u32), rng)? + 1u32;
            if r.gcd(&self.n).is_one() {
                break r;
            }
        };
        // g^m = (1 + n)^m = 1 + m·n (mod n²).
        let gm = (BigUint::one() + m * &self.n) % &self.n_squared;
        let rn = r.modpow(&self.n, &self.n_squared);
        Ok(gm * rn % &self.n_squared)
    }

    /// Encrypt a decimal with the codec's denominator `10^k`.
    pub fn encrypt<R: RngCore + ?Sized>(
        &self,
        x: &BigRational,
        rng: &mut R,
    ) -> Result<PaillierCiphertext> {
        self.encrypt_with_scale(x, self.codec.k(), rng)
    }

    /// Encrypt a decimal with denominator `10^scale`.
    pub fn encrypt_with_scale<R: RngCore + ?Sized>(
        &self,
        x: &BigRational,
        scale: u32,
        rng: &mut R,
    ) -> Result<PaillierCiphertext> {
        let encoded = encoding::encode_with_scale(x, scale, &self.codec)?;
        self.encrypt_encoded(&encoded, scale, rng)
    }

    /// Encrypt an already encoded pair whose denominator is `10^scale`.
    pub fn encrypt_encoded<R: RngCore + ?Sized>(
        &self,
        v: &EncodedRational,
        scale: u32,
        rng: &mut R,
    ) -> Result<PaillierCiphertext> {
        Ok(PaillierCiphertext {
            c_num: self.encrypt_component(&v.numerator, rng)?,
            c_den: self.encrypt_component(&v.denominator, rng)?,
            den_scale: scale,
            key_fp: self.fingerprint,
        })
    }

    fn check(&self, ct: &PaillierCiphertext) -> Result<()> {
        if ct.key_fp != self.fingerprint {
            return Err(Error::KeyMismatch);
        }
        if ct.c_num >= self.n_squared || ct.c_den >= self.n_squared {
            return Err(Error::Range(
                "ciphertext component is not a residue mod n^2".into(),
            ));
        }
        Ok(())
    }

    fn check_pair(&self, a: &PaillierCiphertext, b: &PaillierCiphertext) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        if a.den_scale != b.den_scale {
            return Err(Error::DenominatorMismatch {
                left: a.den_scale,
                right: b.den_scale,
            });
        }
        Ok(())
    }

    /// Homomorphic addition: multiply the numerator ciphertexts.
    pub fn add(
        &self,
        a: &PaillierCiphertext,
        b: &PaillierCiphertext,
    ) -> Result<PaillierCiphertext> {
        self.check_pair(a, b)?;
        Ok(PaillierCiphertext {
            c_num: &a.c_num * &b.c_num % &self.n_squared,
            ..a.clone()
        })
    }

    /// Homomorphic subtraction: multiply by the inverse numerator ciphertext.
    pub fn sub(
        &self,
        a: &PaillierCiphertext,
        b: &PaillierCiphertext,
    ) -> Result<PaillierCiphertext> {
        self.check_pair(a, b)?;
        let inverse = mod_inv(&b.c_num, &self.n_squared)?;
        Ok(PaillierCiphertext {
            c_num: &a.c_num * inverse % &self.n_squared,
            ..a.clone()
        })
    }

    /// Multiply the plaintext by an integer constant. Negative constants
    /// exponentiate the inverse ciphertext.
    pub fn scalar_mul(&self, a: &PaillierCiphertext, s: &BigInt) -> Result<PaillierCiphertext> {
        self.check(a)?;
        if !self.codec.in_range(s) {
            return Err(Error::Range(alloc::format!(
                "constant {s} is outside the codec range"
            )));
        }
        let base = if s.is_negative() {
            mod_inv(&a.c_num, &self.n_squared)?
        } else {
            a.c_num.clone()
        };
        Ok(PaillierCiphertext {
            c_num: base.modpow(s.magnitude(), &self.n_squared),
            ..a.clone()
        })
    }
}

impl PaillierKeyPair {
    pub fn generate<R: RngCore + ?Sized>(
        bits: u64,
        codec: CodecParams,
        rng: &mut R,
    ) -> Result<Self> {
        generate_with_factors(bits, codec, rng).map(|(pair, _, _)| pair)
    }

    /// Rebuild a key pair, checking `L(g^λ mod n²)·μ ≡ 1 (mod n)`.
    pub fn from_parts(public: PaillierPublicKey, lambda: BigUint, mu: BigUint) -> Result<Self> {
        let u = public.g.modpow(&lambda, &public.n_squared);
        if (l_function(&u, &public.n) * &mu % &public.n) != BigUint::one() {
            return Err(Error::InvalidKey(
                "lambda and mu do not decrypt under this modulus".into(),
            ));
        }
        Ok(PaillierKeyPair {
            public,
            private: PaillierPrivateKey { lambda, mu },
        })
    }

    pub fn public(&self) -> &PaillierPublicKey {
        &self.public
    }

    pub fn lambda(&self) -> &BigUint {
        &self.private.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.private.mu
    }

    fn decrypt_component(&self, c: &BigUint) -> BigInt {
        let n = &self.public.n;
        let u = c.modpow(&self.private.lambda, &self.public.n_squared);
        let m = l_function(&u, n) * &self.private.mu % n;
        let m = BigInt::from_biguint(Sign::Plus, m);
        if m > BigInt::from_biguint(Sign::Plus, n >> 1u32) {
            m - BigInt::from_biguint(Sign::Plus, n.clone())
        } else {
            m
        }
    }

    /// Decrypt both components to residues modulo `z`.
    pub fn decrypt_encoded(&self, ct: &PaillierCiphertext) -> Result<EncodedRational> {
        self.public.check(ct)?;
        let codec = &self.public.codec;
        Ok(EncodedRational {
            numerator: encoding::sign_encode_wrapping(&self.decrypt_component(&ct.c_num), codec),
            denominator: encoding::sign_encode_wrapping(&self.decrypt_component(&ct.c_den), codec),
        })
    }

    pub fn decrypt(&self, ct: &PaillierCiphertext) -> Result<BigRational> {
        encoding::decode(&self.decrypt_encoded(ct)?, &self.public.codec)
    }
}

fn generate_with_factors<R: RngCore + ?Sized>(
    bits: u64,
    codec: CodecParams,
    rng: &mut R,
) -> Result<(PaillierKeyPair, BigUint, BigUint)> {
    crate::check_key_bits(bits)?;
    let half = bits / 2;
    loop {
        let p = gen_prime(half, rng)?;
        let q = gen_prime(half, rng)?;
        if p == q {
            continue;
        }
        let n = &p * &q;
        if n.bits() != bits {
            continue;
        }
        let p1 = &p - 1u32;
        let q1 = &q - 1u32;
        if !n.gcd(&(&p1 * &q1)).is_one() {
            continue;
        }
        let lambda = p1.lcm(&q1);
        let Ok(mu) = mod_inv(&lambda, &n) else {
            continue;
        };
        let g = &n + 1u32;
        let public = PaillierPublicKey::from_parts(n, g, bits, codec)?;
        debug_assert!(!mu.is_zero());
        let pair = PaillierKeyPair {
            public,
            private: PaillierPrivateKey { lambda, mu },
        };
        return Ok((pair, p, q));
    }
}
