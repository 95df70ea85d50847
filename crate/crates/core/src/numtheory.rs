//! Modular arithmetic and probabilistic prime generation.
//!
//! Randomness is injected through [`rand_core::RngCore`]; tests use a seeded
//! ChaCha stream, production callers pass an OS-entropy source.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand_core::RngCore;

use crate::error::{Error, Result};

/// Miller–Rabin rounds used for every primality decision (error < 2^-80).
pub const MILLER_RABIN_ROUNDS: usize = 40;

/// Primes below this bound are used for trial division and sieving.
const SIEVE_BOUND: usize = 1 << 14;

/// Safe-prime search steps this far from a random start before resampling.
const SAFE_PRIME_WINDOW: u64 = 1 << 22;

/// Sieve bound for safe-prime candidates. Both `q` and `2q + 1` must
/// survive, so a deeper sieve than [`SIEVE_BOUND`] pays off.
const SAFE_SIEVE_BOUND: usize = 1 << 24;

/// Candidates per sieve window.
const SAFE_SIEVE_SPAN: usize = 1 << 16;

/// `base^exp mod modulus`.
pub fn mod_pow(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> Result<BigUint> {
    if *modulus < BigUint::from(2u8) {
        return Err(Error::Domain("modulus must be at least 2"));
    }
    Ok(base.modpow(exp, modulus))
}

/// Multiplicative inverse of `a` modulo `modulus` via the extended Euclidean
/// algorithm.
pub fn mod_inv(a: &BigUint, modulus: &BigUint) -> Result<BigUint> {
    if *modulus < BigUint::from(2u8) {
        return Err(Error::Domain("modulus must be at least 2"));
    }
    let m = BigInt::from_biguint(Sign::Plus, modulus.clone());
    let mut r0 = m.clone();
    let mut r1 = BigInt::from_biguint(Sign::Plus, a % modulus);
    let mut t0 = BigInt::zero();
    let mut t1 = BigInt::one();
    while !r1.is_zero() {
        let (q, r) = r0.div_rem(&r1);
        r0 = core::mem::replace(&mut r1, r);
        let t = &t0 - &q * &t1;
        t0 = core::mem::replace(&mut t1, t);
    }
    if !r0.is_one() {
        return Err(Error::NotInvertible);
    }
    Ok(t0
        .mod_floor(&m)
        .to_biguint()
        .expect("mod_floor of a positive modulus is non-negative"))
}

/// Uniform sample from `[0, bound)` by rejection over `bound.bits()` random bits.
pub fn rand_below<R: RngCore + ?Sized>(bound: &BigUint, rng: &mut R) -> Result<BigUint> {
    if bound.is_zero() {
        return Err(Error::Domain("bound must be at least 1"));
    }
    if bound.is_one() {
        return Ok(BigUint::zero());
    }
    let bits = bound.bits();
    loop {
        let candidate = random_bits(bits, rng);
        if candidate < *bound {
            return Ok(candidate);
        }
    }
}

/// Uniform value with at most `bits` bits.
fn random_bits<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    let nbytes = bits.div_ceil(8) as usize;
    let mut buf = vec![0u8; nbytes];
    rng.fill_bytes(&mut buf);
    let excess = (nbytes as u64 * 8 - bits) as u32;
    if excess > 0 {
        buf[0] &= 0xffu8 >> excess;
    }
    BigUint::from_bytes_be(&buf)
}

/// Odd value of exactly `bits` bits.
fn random_odd_with_top_bit<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    let mut candidate = random_bits(bits, rng);
    candidate.set_bit(bits - 1, true);
    candidate.set_bit(0, true);
    candidate
}

fn small_primes() -> Vec<u32> {
    primes_below(SIEVE_BOUND)
}

fn primes_below(bound: usize) -> Vec<u32> {
    let mut composite = vec![false; bound];
    let mut primes = Vec::new();
    for i in 2..bound {
        if !composite[i] {
            primes.push(i as u32);
            let mut j = i * i;
            while j < bound {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// One Miller–Rabin round against `base`. `d·2^s = n - 1` with `d` odd.
fn miller_rabin_round(
    n: &BigUint,
    n_minus_one: &BigUint,
    d: &BigUint,
    s: u64,
    base: &BigUint,
) -> bool {
    let mut x = base.modpow(d, n);
    if x.is_one() || x == *n_minus_one {
        return true;
    }
    for _ in 1..s {
        x = (&x * &x) % n;
        if x == *n_minus_one {
            return true;
        }
        if x.is_one() {
            return false;
        }
    }
    false
}

/// Miller–Rabin with `rounds` uniformly random bases in `[2, n-2]`.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    if let Some(small) = n.to_u64() {
        if small < 4 {
            return small >= 2;
        }
        if small % 2 == 0 {
            return false;
        }
    } else if n.is_even() {
        return false;
    }
    for p in small_primes().into_iter().take(64) {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().expect("n - 1 is non-zero");
    let d = &n_minus_one >> s;
    let span = n - 3u32;
    (0..rounds).all(|_| {
        let base = rand_below(&span, rng).expect("span is positive") + 2u32;
        miller_rabin_round(n, &n_minus_one, &d, s, &base)
    })
}

fn check_prime_bits(bits: u64) -> Result<()> {
    if bits < 16 {
        Err(Error::Domain("prime size must be at least 16 bits"))
    } else {
        Ok(())
    }
}

/// Probable prime with exactly `bits` bits.
pub fn gen_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<BigUint> {
    check_prime_bits(bits)?;
    let primes = small_primes();
    loop {
        let candidate = random_odd_with_top_bit(bits, rng);
        let divisible = primes.iter().any(|&p| {
            let r = (&candidate % p).to_u32().unwrap_or(1);
            r == 0 && candidate != BigUint::from(p)
        });
        if divisible {
            continue;
        }
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return Ok(candidate);
        }
    }
}

/// Probable safe prime `p` with exactly `bits` bits: `p` and `(p - 1)/2`
/// both prime.
///
/// Walks `q = q0, q0 + 2, …` from a random odd start of `bits - 1` bits in
/// windows of [`SAFE_SIEVE_SPAN`] candidates. Each window is sieved with
/// every prime below [`SAFE_SIEVE_BOUND`], striking offsets where `q` or
/// `2q + 1` is divisible. Survivors get a base-2 Fermat check on `p` before
/// the full Miller–Rabin runs on `q` and `p`.
pub fn gen_safe_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<BigUint> {
    check_prime_bits(bits)?;
    // Sieving primes must stay below the smallest possible q.
    let bound = u32::try_from(bits - 2)
        .ok()
        .and_then(|shift| 1usize.checked_shl(shift))
        .map_or(SAFE_SIEVE_BOUND, |q_min| SAFE_SIEVE_BOUND.min(q_min));
    let primes: Vec<u64> = primes_below(bound)
        .into_iter()
        .skip(1)
        .map(u64::from)
        .collect();
    let two = BigUint::from(2u8);
    let span = SAFE_SIEVE_SPAN as u64;
    loop {
        let start = random_odd_with_top_bit(bits - 1, rng);
        let mut residues: Vec<u64> = primes
            .iter()
            .map(|&p| (&start % p).to_u64().expect("residue below a u32 prime"))
            .collect();
        let mut composite = vec![false; SAFE_SIEVE_SPAN];
        for window in 0..SAFE_PRIME_WINDOW / (2 * span) {
            composite.fill(false);
            for (&p, r) in primes.iter().zip(&mut residues) {
                // Offset j stands for q = base + 2j, so q ≡ r + 2j (mod p).
                let half = p.div_ceil(2);
                let q_zero = (p - *r) % p * half % p;
                let p_zero = ((p - 1) / 2 + p - *r) % p * half % p;
                for first in [q_zero, p_zero] {
                    let mut j = first as usize;
                    while j < SAFE_SIEVE_SPAN {
                        composite[j] = true;
                        j += p as usize;
                    }
                }
                *r = (*r + 2 * span) % p;
            }
            let base = &start + 2 * span * window;
            for j in (0..SAFE_SIEVE_SPAN).filter(|&j| !composite[j]) {
                let q = &base + 2 * j as u64;
                if q.bits() != bits - 1 {
                    break;
                }
                let p = (&q << 1u32) + 1u32;
                if two.modpow(&(&p - 1u32), &p).is_one()
                    && is_probable_prime(&q, MILLER_RABIN_ROUNDS, rng)
                    && is_probable_prime(&p, MILLER_RABIN_ROUNDS, rng)
                {
                    return Ok(p);
                }
            }
        }
    }
}
