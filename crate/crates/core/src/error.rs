use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("value is not invertible modulo the given modulus")]
    NotInvertible,

    #[error("range error: {0}")]
    Range(String),

    #[error("precision error: value needs more than {max} fractional decimal digits")]
    Precision { max: u32 },

    #[error("division by zero")]
    DivisionByZero,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ciphertext was produced under a different key")]
    KeyMismatch,

    #[error("denominator mismatch: operands carry 10^{left} and 10^{right}")]
    DenominatorMismatch { left: u32, right: u32 },

    #[error("codec mismatch between the Paillier and ElGamal keys")]
    CodecMismatch,

    #[error("invalid key: {0}")]
    InvalidKey(String),

    #[error("syntax error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("empty expression")]
    EmptyExpression,

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("invalid decimal literal `{0}`")]
    InvalidDecimal(String),

    #[error("invalid plan at step {step}: {message}")]
    InvalidPlan { step: usize, message: String },

    #[error("plan execution diverged from the plaintext shadow at `{0}`")]
    ShadowMismatch(String),
}
