//! Homomorphic identities checked against plain rational arithmetic.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use phemu_core::elgamal::ElGamalKeyPair;
use phemu_core::paillier::PaillierKeyPair;
use phemu_core::{CodecParams, Error};
use proptest::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

fn keys() -> &'static (PaillierKeyPair, ElGamalKeyPair) {
    static KEYS: OnceLock<(PaillierKeyPair, ElGamalKeyPair)> = OnceLock::new();
    KEYS.get_or_init(|| {
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        let codec = CodecParams::default();
        (
            PaillierKeyPair::generate(512, codec, &mut rng).unwrap(),
            ElGamalKeyPair::generate(512, codec, &mut rng).unwrap(),
        )
    })
}

/// A decimal with at most six places and magnitude below 10^6.
fn arb_decimal() -> impl Strategy<Value = BigRational> {
    (-999_999_999_999i64..=999_999_999_999)
        .prop_map(|n| BigRational::new(n.into(), BigInt::from(1_000_000)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paillier_adds_and_subtracts(a in arb_decimal(), b in arb_decimal(), s in -1000i64..1000, seed: u64) {
        let (pair, _) = keys();
        let key = pair.public();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ca = key.encrypt(&a, &mut rng).unwrap();
        let cb = key.encrypt(&b, &mut rng).unwrap();
        prop_assert_eq!(pair.decrypt(&ca).unwrap(), a.clone());
        prop_assert_eq!(pair.decrypt(&key.add(&ca, &cb).unwrap()).unwrap(), &a + &b);
        prop_assert_eq!(pair.decrypt(&key.sub(&ca, &cb).unwrap()).unwrap(), &a - &b);
        let scaled = key.scalar_mul(&ca, &BigInt::from(s)).unwrap();
        prop_assert_eq!(pair.decrypt(&scaled).unwrap(), &a * BigRational::from_integer(s.into()));
    }

    #[test]
    fn elgamal_multiplies_and_divides(a in arb_decimal(), b in arb_decimal(), seed: u64) {
        let (_, pair) = keys();
        let key = pair.public();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ca = key.encrypt(&a, &mut rng).unwrap();
        let cb = key.encrypt(&b, &mut rng).unwrap();
        prop_assert_eq!(pair.decrypt(&ca).unwrap(), a.clone());
        prop_assert_eq!(pair.decrypt(&key.mul(&ca, &cb).unwrap()).unwrap(), &a * &b);
        let quotient = key.div(&ca, &cb);
        if b == BigRational::from_integer(0.into()) {
            prop_assert!(quotient.is_err() || pair.decrypt(&quotient.unwrap()).is_err());
        } else {
            prop_assert_eq!(pair.decrypt(&quotient.unwrap()).unwrap(), &a / &b);
        }
    }
}

#[test]
fn ciphertexts_are_bound_to_their_key() {
    let (pair, _) = keys();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let other = PaillierKeyPair::generate(512, CodecParams::default(), &mut rng).unwrap();
    let x = BigRational::from_integer(3.into());
    let ct = pair.public().encrypt(&x, &mut rng).unwrap();
    let foreign = other.public().encrypt(&x, &mut rng).unwrap();
    assert!(matches!(other.decrypt(&ct), Err(Error::KeyMismatch)));
    assert!(matches!(
        pair.public().add(&ct, &foreign),
        Err(Error::KeyMismatch)
    ));
}

#[test]
fn encryption_is_randomized() {
    let (paillier, elgamal) = keys();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let x = BigRational::from_integer(42.into());
    let a = paillier.public().encrypt(&x, &mut rng).unwrap();
    let b = paillier.public().encrypt(&x, &mut rng).unwrap();
    assert_ne!(a, b);
    let a = elgamal.public().encrypt(&x, &mut rng).unwrap();
    let b = elgamal.public().encrypt(&x, &mut rng).unwrap();
    assert_ne!(a, b);
}
