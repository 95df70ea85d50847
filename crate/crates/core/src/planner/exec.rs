use alloc::collections::BTreeMap;
use alloc::string::String;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand_core::RngCore;

use super::plan::{Action, ExecutionPlan, Source};
use crate::elgamal::{ElGamalCiphertext, ElGamalKeyPair};
use crate::encoding::{self, pow10, CodecParams, EncodedRational};
use crate::error::{Error, Result};
use crate::paillier::{PaillierCiphertext, PaillierKeyPair};
use crate::Scheme;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ExecMode {
    /// Track a plaintext shadow and fail with [`Error::Range`] wherever a
    /// decrypted value would have wrapped.
    #[default]
    Checked,
    /// Wrap silently with two's-complement semantics.
    Unchecked,
}

#[derive(Debug, Clone)]
enum Cipher {
    Paillier(PaillierCiphertext),
    ElGamal(ElGamalCiphertext),
}

/// Exact integers the ciphertext components should decrypt to.
///
/// `num`/`den` are the unbounded encoded values. `residues` follow the
/// actual plaintext-space arithmetic on the two's-complement residues:
/// signed sums for Paillier, non-negative products for ElGamal.
#[derive(Debug, Clone)]
struct Shadow {
    num: BigInt,
    den: BigInt,
    residues: (BigInt, BigInt),
}

fn int(n: &BigUint) -> BigInt {
    BigInt::from_biguint(Sign::Plus, n.clone())
}

struct Agent<'a, R: RngCore + ?Sized> {
    paillier: &'a PaillierKeyPair,
    elgamal: &'a ElGamalKeyPair,
    codec: CodecParams,
    mode: ExecMode,
    rng: &'a mut R,
}

impl<R: RngCore + ?Sized> Agent<'_, R> {
    /// Encode a value the agent holds in plaintext. Intermediates are first
    /// truncated to `k` digits; sources must already fit.
    fn encode(&self, x: &BigRational, truncate: bool) -> Result<(EncodedRational, Shadow)> {
        let k = self.codec.k();
        let x = if truncate {
            encoding::truncate_to_places(x, k)
        } else {
            x.clone()
        };
        let scale = int(&pow10(k));
        let scaled = &x * BigRational::from_integer(scale.clone());
        if !scaled.is_integer() {
            return Err(Error::Precision { max: k });
        }
        let num = scaled.to_integer();
        let encoded = match self.mode {
            ExecMode::Checked => encoding::encode_with_scale(&x, k, &self.codec)?,
            ExecMode::Unchecked => EncodedRational {
                numerator: encoding::sign_encode_wrapping(&num, &self.codec),
                denominator: encoding::sign_encode_wrapping(&scale, &self.codec),
            },
        };
        let residues = (int(&encoded.numerator), int(&encoded.denominator));
        Ok((
            encoded,
            Shadow {
                num,
                den: scale,
                residues,
            },
        ))
    }

    fn encrypt(&mut self, scheme: Scheme, encoded: &EncodedRational) -> Result<Cipher> {
        Ok(match scheme {
            Scheme::Paillier => Cipher::Paillier(self.paillier.public().encrypt_encoded(
                encoded,
                self.codec.k(),
                self.rng,
            )?),
            Scheme::ElGamal => {
                Cipher::ElGamal(self.elgamal.public().encrypt_encoded(encoded, self.rng)?)
            }
        })
    }

    fn decrypt(&self, id: &str, cipher: &Cipher, shadow: Option<&Shadow>) -> Result<BigRational> {
        if let Some(shadow) = shadow {
            self.check_shadow(id, cipher, shadow)?;
        }
        let value = match cipher {
            Cipher::Paillier(ct) => self.paillier.decrypt(ct)?,
            Cipher::ElGamal(ct) => self.elgamal.decrypt(ct)?,
        };
        if let Some(shadow) = shadow {
            if value != BigRational::new(shadow.num.clone(), shadow.den.clone()) {
                return Err(Error::ShadowMismatch(id.into()));
            }
        }
        Ok(value)
    }

    fn check_shadow(&self, id: &str, cipher: &Cipher, shadow: &Shadow) -> Result<()> {
        let (r_num, r_den) = &shadow.residues;
        let residues_ok = match cipher {
            Cipher::Paillier(_) => {
                let half_n = int(self.paillier.public().n()) >> 1u32;
                r_num.abs() <= half_n && r_den.abs() <= half_n
            }
            Cipher::ElGamal(_) => {
                let p = int(self.elgamal.public().p());
                *r_num < p && *r_den < p
            }
        };
        if !residues_ok {
            return Err(Error::Range(alloc::format!(
                "`{id}` exceeds the plaintext space of its scheme"
            )));
        }
        if !self.codec.in_range(&shadow.num) || !self.codec.in_range(&shadow.den) {
            return Err(Error::Range(alloc::format!(
                "`{id}` overflows the {}-bit codec",
                self.codec.i()
            )));
        }
        if shadow.den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(())
    }
}

fn combine(action: Action, a: &Shadow, b: &Shadow) -> Shadow {
    let (an, ad) = &a.residues;
    let (bn, bd) = &b.residues;
    match action {
        Action::Add => Shadow {
            num: &a.num + &b.num,
            den: a.den.clone(),
            residues: (an + bn, ad.clone()),
        },
        Action::Sub => Shadow {
            num: &a.num - &b.num,
            den: a.den.clone(),
            residues: (an - bn, ad.clone()),
        },
        Action::Mul => Shadow {
            num: &a.num * &b.num,
            den: &a.den * &b.den,
            residues: (an * bn, ad * bd),
        },
        Action::Div => Shadow {
            num: &a.num * &b.den,
            den: &a.den * &b.num,
            residues: (an * bd, ad * bn),
        },
        Action::Encrypt | Action::Decrypt | Action::ScalarMul => {
            unreachable!("not a binary ciphertext operation")
        }
    }
}

/// Run a plan step by step: the agent encrypts and decrypts, the compute
/// engine only ever sees ciphertexts.
///
/// Values re-encrypted between stages are truncated toward zero to `k`
/// digits. Both key pairs must share one codec.
pub fn execute_plan<R: RngCore + ?Sized>(
    plan: &ExecutionPlan,
    bindings: &BTreeMap<String, BigRational>,
    paillier: &PaillierKeyPair,
    elgamal: &ElGamalKeyPair,
    mode: ExecMode,
    rng: &mut R,
) -> Result<BigRational> {
    let codec = *paillier.public().codec();
    if codec != *elgamal.public().codec() {
        return Err(Error::CodecMismatch);
    }
    plan.validate()?;
    let mut plaintext: BTreeMap<&str, (BigRational, bool)> = BTreeMap::new();
    for (id, source) in plan.sources() {
        let value = match source {
            Source::Variable => bindings
                .get(id)
                .cloned()
                .ok_or_else(|| Error::UnboundVariable(id.clone()))?,
            Source::Literal(v) => v.clone(),
            Source::Constant(_) => continue,
        };
        plaintext.insert(id, (value, false));
    }

    let checked = mode == ExecMode::Checked;
    let mut agent = Agent {
        paillier,
        elgamal,
        codec,
        mode,
        rng,
    };
    let mut ciphers: BTreeMap<(&str, Scheme), (Cipher, Option<Shadow>)> = BTreeMap::new();

    for step in plan.steps() {
        let scheme = step.scheme;
        match step.action {
            Action::Encrypt => {
                for id in &step.inputs {
                    let (value, intermediate) = &plaintext[id.as_str()];
                    let (encoded, shadow) = agent.encode(value, *intermediate)?;
                    let cipher = agent.encrypt(scheme, &encoded)?;
                    ciphers.insert((id, scheme), (cipher, checked.then_some(shadow)));
                }
            }
            Action::Decrypt => {
                for id in &step.inputs {
                    let (cipher, shadow) = &ciphers[&(id.as_str(), scheme)];
                    let value = agent.decrypt(id, cipher, shadow.as_ref())?;
                    plaintext.insert(id, (value, true));
                }
            }
            Action::ScalarMul => {
                let (lhs, rhs) = (step.inputs[0].as_str(), step.inputs[1].as_str());
                let Some(Source::Constant(c)) = plan.sources().get(rhs) else {
                    unreachable!("validated plan");
                };
                let (Cipher::Paillier(a), shadow) = &ciphers[&(lhs, scheme)] else {
                    unreachable!("validated plan");
                };
                let out = Cipher::Paillier(paillier.public().scalar_mul(a, c)?);
                let shadow = shadow.as_ref().map(|s| Shadow {
                    num: &s.num * c,
                    den: s.den.clone(),
                    residues: (&s.residues.0 * c, s.residues.1.clone()),
                });
                ciphers.insert(
                    (step.output.as_deref().expect("validated plan"), scheme),
                    (out, shadow),
                );
            }
            action => {
                let (a, sa) = &ciphers[&(step.inputs[0].as_str(), scheme)];
                let (b, sb) = &ciphers[&(step.inputs[1].as_str(), scheme)];
                let out = match (action, a, b) {
                    (Action::Add, Cipher::Paillier(a), Cipher::Paillier(b)) => {
                        Cipher::Paillier(paillier.public().add(a, b)?)
                    }
                    (Action::Sub, Cipher::Paillier(a), Cipher::Paillier(b)) => {
                        Cipher::Paillier(paillier.public().sub(a, b)?)
                    }
                    (Action::Mul, Cipher::ElGamal(a), Cipher::ElGamal(b)) => {
                        Cipher::ElGamal(elgamal.public().mul(a, b)?)
                    }
                    (Action::Div, Cipher::ElGamal(a), Cipher::ElGamal(b)) => {
                        Cipher::ElGamal(elgamal.public().div(a, b)?)
                    }
                    _ => unreachable!("validated plan"),
                };
                let shadow = match (sa, sb) {
                    (Some(sa), Some(sb)) => Some(combine(action, sa, sb)),
                    _ => None,
                };
                ciphers.insert(
                    (step.output.as_deref().expect("validated plan"), scheme),
                    (out, shadow),
                );
            }
        }
    }

    let (result, _) = plan.result();
    Ok(plaintext
        .remove(result)
        .expect("validated plan decrypts the result")
        .0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::parse_decimal;
    use crate::planner::{
        assign_schemes, assign_schemes_with, build_plan, parse_expression, PlanOptions,
    };
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;
    use std::sync::OnceLock;

    fn keys() -> &'static (PaillierKeyPair, ElGamalKeyPair) {
        static KEYS: OnceLock<(PaillierKeyPair, ElGamalKeyPair)> = OnceLock::new();
        KEYS.get_or_init(|| {
            let mut rng = ChaCha20Rng::seed_from_u64(11);
            let codec = CodecParams::default();
            (
                PaillierKeyPair::generate(512, codec, &mut rng).unwrap(),
                ElGamalKeyPair::generate(512, codec, &mut rng).unwrap(),
            )
        })
    }

    fn run_with(
        text: &str,
        vars: &[(&str, &str)],
        options: PlanOptions,
        mode: ExecMode,
    ) -> Result<BigRational> {
        let (p, e) = keys();
        let plan = build_plan(&assign_schemes_with(
            &parse_expression(text).unwrap(),
            options,
        ));
        let bindings = vars
            .iter()
            .map(|(k, v)| (String::from(*k), parse_decimal(v).unwrap()))
            .collect();
        execute_plan(
            &plan,
            &bindings,
            p,
            e,
            mode,
            &mut ChaCha20Rng::seed_from_u64(3),
        )
    }

    fn run(text: &str, vars: &[(&str, &str)]) -> Result<BigRational> {
        run_with(text, vars, PlanOptions::default(), ExecMode::Checked)
    }

    fn dec(s: &str) -> BigRational {
        parse_decimal(s).unwrap()
    }

    #[test]
    fn evaluates_examples() {
        assert_eq!(
            run(
                "(a+b)*(c+d)",
                &[("a", "1"), ("b", "2"), ("c", "3"), ("d", "4")]
            ),
            Ok(dec("21"))
        );
        assert_eq!(
            run(
                "(a*b)+(c*d)",
                &[("a", "2"), ("b", "3"), ("c", "4"), ("d", "5")]
            ),
            Ok(dec("26"))
        );
        assert_eq!(run("a/b", &[("a", "1"), ("b", "8")]), Ok(dec("0.125")));
        assert_eq!(run("2+3", &[]), Ok(dec("5")));
        assert_eq!(run("a", &[("a", "-4.5")]), Ok(dec("-4.5")));
        assert_eq!(
            run("-a*b - 1.5", &[("a", "2"), ("b", "-7")]),
            Ok(dec("12.5"))
        );
    }

    #[test]
    fn exact_result_and_truncated_reencryption() {
        assert_eq!(
            run("a/b", &[("a", "1"), ("b", "3")]),
            Ok(BigRational::new(1.into(), 3.into()))
        );
        // 1/3 crosses a stage boundary and is truncated to 12 digits.
        assert_eq!(
            run("a/b + 0", &[("a", "1"), ("b", "3")]),
            Ok(dec("0.333333333333"))
        );
        assert_eq!(
            run("a/b - 1", &[("a", "-1"), ("b", "3")]),
            Ok(dec("-1.333333333333"))
        );
    }

    #[test]
    fn scalar_literals() {
        let options = PlanOptions {
            scalar_literals: true,
        };
        let vars = [("a", "2.25"), ("b", "1")];
        let out = run_with("3*a - b*-2", &vars, options, ExecMode::Checked);
        assert_eq!(out, run("3*a - b*-2", &vars));
        assert_eq!(out, Ok(dec("8.75")));
    }

    #[test]
    fn errors() {
        assert_eq!(
            run("a+b", &[("a", "1")]),
            Err(Error::UnboundVariable("b".into()))
        );
        assert_eq!(
            run("a/(b-b)", &[("a", "1"), ("b", "2")]),
            Err(Error::DivisionByZero)
        );
        assert_eq!(
            run("a+b", &[("a", "0.0000000000001"), ("b", "1")]),
            Err(Error::Precision { max: 12 })
        );
        let big = "1000000000000000000000000000";
        assert!(matches!(
            run("a+b", &[("a", big), ("b", "1")]),
            Err(Error::Range(_))
        ));
        // 10^13 · 10^13 has a scaled numerator of 10^50, beyond 2^127.
        let m = "10000000000000";
        assert!(matches!(
            run("a*b", &[("a", m), ("b", m)]),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn codec_mismatch() {
        let (p, _) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let small =
            ElGamalKeyPair::generate(256, CodecParams::new(0, 8).unwrap(), &mut rng).unwrap();
        let plan = build_plan(&assign_schemes(&parse_expression("a*b").unwrap()));
        let out = execute_plan(
            &plan,
            &BTreeMap::new(),
            p,
            &small,
            ExecMode::Checked,
            &mut rng,
        );
        assert_eq!(out, Err(Error::CodecMismatch));
    }

    #[test]
    fn unchecked_mode_wraps() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let codec = CodecParams::new(0, 8).unwrap();
        let p = PaillierKeyPair::generate(256, codec, &mut rng).unwrap();
        let e = ElGamalKeyPair::generate(256, codec, &mut rng).unwrap();
        let eval = |text: &str, mode| {
            let plan = build_plan(&assign_schemes(&parse_expression(text).unwrap()));
            execute_plan(
                &plan,
                &BTreeMap::new(),
                &p,
                &e,
                mode,
                &mut ChaCha20Rng::seed_from_u64(1),
            )
        };
        assert_eq!(eval("100+100", ExecMode::Unchecked), Ok(dec("-56")));
        assert_eq!(eval("16*16", ExecMode::Unchecked), Ok(dec("0")));
        assert!(matches!(
            eval("100+100", ExecMode::Checked),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            eval("16*16", ExecMode::Checked),
            Err(Error::Range(_))
        ));
        assert_eq!(eval("(100+100)*1", ExecMode::Unchecked), Ok(dec("-56")));
        assert!(matches!(
            eval("(100+100)*1", ExecMode::Checked),
            Err(Error::Range(_))
        ));
    }
}
