//! JSON files for keys, ciphertexts and plans.
//!
//! Big integers are lowercase hexadecimal strings. Private key fields are
//! optional; a file without them loads as a public key.

use num_bigint::BigUint;
use phemu_core::elgamal::{ElGamalCiphertext, ElGamalKeyPair, ElGamalPair, ElGamalPublicKey};
use phemu_core::paillier::{PaillierCiphertext, PaillierKeyPair, PaillierPublicKey};
use phemu_core::planner::{Actor, ExecutionPlan};
use phemu_core::{CodecParams, KeyFingerprint, Scheme};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field `{0}` is not a hexadecimal integer")]
    Hex(&'static str),
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error(transparent)]
    Core(#[from] phemu_core::Error),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

fn to_hex(n: &BigUint) -> String {
    n.to_str_radix(16)
}

fn from_hex(field: &'static str, s: &str) -> Result<BigUint> {
    if s.is_empty() {
        return Err(FormatError::Hex(field));
    }
    BigUint::parse_bytes(s.as_bytes(), 16).ok_or(FormatError::Hex(field))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct CodecDto {
    k: u32,
    i: u32,
}

impl From<&CodecParams> for CodecDto {
    fn from(c: &CodecParams) -> Self {
        CodecDto { k: c.k(), i: c.i() }
    }
}

impl TryFrom<CodecDto> for CodecParams {
    type Error = phemu_core::Error;

    fn try_from(c: CodecDto) -> Result<Self, Self::Error> {
        CodecParams::new(c.k, c.i)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
enum KeyDto {
    Paillier {
        bits: u64,
        n: String,
        g: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<String>,
        codec: CodecDto,
    },
    ElGamal {
        bits: u64,
        p: String,
        g: String,
        h: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<String>,
        codec: CodecDto,
    },
}

/// Contents of a key file.
#[derive(Debug, Clone)]
pub enum KeyFile {
    PaillierPublic(PaillierPublicKey),
    PaillierPair(PaillierKeyPair),
    ElGamalPublic(ElGamalPublicKey),
    ElGamalPair(ElGamalKeyPair),
}

impl KeyFile {
    pub fn scheme(&self) -> Scheme {
        match self {
            KeyFile::PaillierPublic(_) | KeyFile::PaillierPair(_) => Scheme::Paillier,
            KeyFile::ElGamalPublic(_) | KeyFile::ElGamalPair(_) => Scheme::ElGamal,
        }
    }

    pub fn codec(&self) -> CodecParams {
        match self {
            KeyFile::PaillierPublic(k) => *k.codec(),
            KeyFile::PaillierPair(k) => *k.public().codec(),
            KeyFile::ElGamalPublic(k) => *k.codec(),
            KeyFile::ElGamalPair(k) => *k.public().codec(),
        }
    }

    pub fn has_private(&self) -> bool {
        matches!(self, KeyFile::PaillierPair(_) | KeyFile::ElGamalPair(_))
    }

    /// The same key with private fields dropped.
    pub fn public_only(&self) -> KeyFile {
        match self {
            KeyFile::PaillierPair(k) => KeyFile::PaillierPublic(k.public().clone()),
            KeyFile::ElGamalPair(k) => KeyFile::ElGamalPublic(k.public().clone()),
            other => other.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let paillier =
            |k: &PaillierPublicKey, private: Option<&PaillierKeyPair>| KeyDto::Paillier {
                bits: k.bits(),
                n: to_hex(k.n()),
                g: to_hex(k.g()),
                lambda: private.map(|p| to_hex(p.lambda())),
                mu: private.map(|p| to_hex(p.mu())),
                codec: k.codec().into(),
            };
        let elgamal = |k: &ElGamalPublicKey, private: Option<&ElGamalKeyPair>| KeyDto::ElGamal {
            bits: k.bits(),
            p: to_hex(k.p()),
            g: to_hex(k.g()),
            h: to_hex(k.h()),
            x: private.map(|p| to_hex(p.secret_exponent())),
            codec: k.codec().into(),
        };
        let dto = match self {
            KeyFile::PaillierPublic(k) => paillier(k, None),
            KeyFile::PaillierPair(k) => paillier(k.public(), Some(k)),
            KeyFile::ElGamalPublic(k) => elgamal(k, None),
            KeyFile::ElGamalPair(k) => elgamal(k.public(), Some(k)),
        };
        serde_json::to_string_pretty(&dto).expect("key DTOs always serialize")
    }

    pub fn from_json(text: &str) -> Result<KeyFile> {
        Ok(match serde_json::from_str::<KeyDto>(text)? {
            KeyDto::Paillier {
                bits,
                n,
                g,
                lambda,
                mu,
                codec,
            } => {
                let public = PaillierPublicKey::from_parts(
                    from_hex("n", &n)?,
                    from_hex("g", &g)?,
                    bits,
                    codec.try_into()?,
                )?;
                match (lambda, mu) {
                    (Some(lambda), Some(mu)) => KeyFile::PaillierPair(PaillierKeyPair::from_parts(
                        public,
                        from_hex("lambda", &lambda)?,
                        from_hex("mu", &mu)?,
                    )?),
                    (None, None) => KeyFile::PaillierPublic(public),
                    _ => {
                        return Err(phemu_core::Error::InvalidKey(
                            "lambda and mu must be given together".into(),
                        )
                        .into())
                    }
                }
            }
            KeyDto::ElGamal {
                bits,
                p,
                g,
                h,
                x,
                codec,
            } => {
                let public = ElGamalPublicKey::from_parts(
                    from_hex("p", &p)?,
                    from_hex("g", &g)?,
                    from_hex("h", &h)?,
                    bits,
                    codec.try_into()?,
                )?;
                match x {
                    Some(x) => KeyFile::ElGamalPair(ElGamalKeyPair::from_parts(
                        public,
                        from_hex("x", &x)?,
                    )?),
                    None => KeyFile::ElGamalPublic(public),
                }
            }
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PairDto {
    c1: String,
    c2: String,
}

impl From<&ElGamalPair> for PairDto {
    fn from(p: &ElGamalPair) -> Self {
        PairDto {
            c1: to_hex(&p.c1),
            c2: to_hex(&p.c2),
        }
    }
}

impl PairDto {
    fn parse(&self) -> Result<ElGamalPair> {
        Ok(ElGamalPair {
            c1: from_hex("c1", &self.c1)?,
            c2: from_hex("c2", &self.c2)?,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
enum CiphertextDto {
    Paillier {
        key_fp: String,
        c_num: String,
        c_den: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        den_scale: Option<u32>,
    },
    ElGamal {
        key_fp: String,
        num: PairDto,
        den: PairDto,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ciphertext {
    Paillier(PaillierCiphertext),
    ElGamal(ElGamalCiphertext),
}

impl Ciphertext {
    pub fn scheme(&self) -> Scheme {
        match self {
            Ciphertext::Paillier(_) => Scheme::Paillier,
            Ciphertext::ElGamal(_) => Scheme::ElGamal,
        }
    }

    pub fn to_json(&self) -> String {
        let dto = match self {
            Ciphertext::Paillier(ct) => CiphertextDto::Paillier {
                key_fp: ct.key_fingerprint().to_string(),
                c_num: to_hex(ct.c_num()),
                c_den: to_hex(ct.c_den()),
                den_scale: Some(ct.den_scale()),
            },
            Ciphertext::ElGamal(ct) => CiphertextDto::ElGamal {
                key_fp: ct.key_fingerprint().to_string(),
                num: ct.num().into(),
                den: ct.den().into(),
            },
        };
        serde_json::to_string_pretty(&dto).expect("ciphertext DTOs always serialize")
    }

    /// Parse a ciphertext. Paillier files without `den_scale` get
    /// `default_scale`, normally the key's `k`.
    pub fn from_json(text: &str, default_scale: u32) -> Result<Ciphertext> {
        Ok(match serde_json::from_str::<CiphertextDto>(text)? {
            CiphertextDto::Paillier {
                key_fp,
                c_num,
                c_den,
                den_scale,
            } => Ciphertext::Paillier(PaillierCiphertext::from_parts(
                from_hex("c_num", &c_num)?,
                from_hex("c_den", &c_den)?,
                den_scale.unwrap_or(default_scale),
                key_fp.parse::<KeyFingerprint>()?,
            )),
            CiphertextDto::ElGamal { key_fp, num, den } => {
                Ciphertext::ElGamal(ElGamalCiphertext::from_parts(
                    num.parse()?,
                    den.parse()?,
                    key_fp.parse::<KeyFingerprint>()?,
                ))
            }
        })
    }

    /// Scheme named in a ciphertext file, without parsing the rest.
    pub fn peek_scheme(text: &str) -> Result<Scheme> {
        #[derive(Deserialize)]
        struct Tag {
            scheme: String,
        }
        let tag: Tag = serde_json::from_str(text)?;
        Scheme::from_id(&tag.scheme).ok_or(FormatError::UnknownScheme(tag.scheme))
    }
}

#[derive(Debug, Serialize)]
struct StepDto<'a> {
    actor: &'static str,
    action: String,
    inputs: &'a [String],
    output: Option<&'a str>,
}

/// The plan as a JSON array of `{actor, action, inputs, output}` steps.
pub fn plan_to_json(plan: &ExecutionPlan) -> String {
    let steps: Vec<StepDto<'_>> = plan
        .steps()
        .iter()
        .map(|s| StepDto {
            actor: match s.actor {
                Actor::Agent => "AGENT",
                Actor::Compute => "COMPUTE",
            },
            action: s.label(),
            inputs: &s.inputs,
            output: s.output.as_deref(),
        })
        .collect();
    serde_json::to_string_pretty(&steps).expect("plan steps always serialize")
}
