//! Timed operation loops, ratio-to-plaintext reporting, key-size sweeps and
//! linear cost estimates for emulation plans.
//!
//! Each measured pair runs one discarded warm-up repeat, then `repeats`
//! timed repeats of a loop over `iterations` operand pairs. Whole loops are
//! timed with [`Instant`]; operands are encrypted before the clock starts.

use std::collections::BTreeMap;
use std::fmt;
use std::hint::black_box;
use std::io;
use std::str::FromStr;
use std::time::Instant;

use num_bigint::BigInt;
use phemu_core::elgamal::ElGamalKeyPair;
use phemu_core::paillier::PaillierKeyPair;
use phemu_core::planner::{
    assign_schemes, build_plan, execute_plan, parse_expression, ExecMode, OperationCounts,
};
use phemu_core::{BigRational, CodecParams};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error("ratio against a plaintext time of {0} is undefined")]
    Domain(f64),
    #[error("timing table has no entry for {}", .0.join(", "))]
    MissingEntries(Vec<String>),
    #[error("timing table row {row}: {message}")]
    Table { row: usize, message: String },
    #[error(transparent)]
    Core(#[from] phemu_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $id:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn id(self) -> &'static str {
                match self {
                    $($name::$variant => $id),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.id())
            }
        }

        impl FromStr for $name {
            type Err = BenchError;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($id => Ok($name::$variant),)+
                    other => Err(BenchError::Config(format!(
                        "unknown {} `{other}`; expected one of {}",
                        stringify!($name),
                        [$($id),+].join(", ")
                    ))),
                }
            }
        }
    };
}

named_enum!(
    /// Implementation being timed. `Emulation` runs a two-operand plan
    /// through the re-encryption agent.
    BenchScheme {
        Plaintext => "plaintext",
        Paillier => "paillier",
        ElGamal => "elgamal",
        Emulation => "emulation",
    }
);

named_enum!(BenchOp {
    Add => "add",
    Sub => "sub",
    Mul => "mul",
    Div => "div",
    Encrypt => "encrypt",
    Decrypt => "decrypt",
    Keygen => "keygen",
});

impl BenchOp {
    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BenchOp::Add | BenchOp::Sub | BenchOp::Mul | BenchOp::Div
        )
    }

    fn symbol(self) -> Option<char> {
        match self {
            BenchOp::Add => Some('+'),
            BenchOp::Sub => Some('-'),
            BenchOp::Mul => Some('*'),
            BenchOp::Div => Some('/'),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub iterations: usize,
    pub repeats: usize,
    pub operand_digits: u32,
    pub operations: Vec<BenchOp>,
    pub schemes: Vec<BenchScheme>,
    pub key_bits: u64,
    pub seed: u64,
    /// Key generations per timed keygen repeat; keygen is too slow to loop
    /// `iterations` times.
    pub keygen_iterations: usize,
    pub codec: CodecParams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            iterations: 1000,
            repeats: 5,
            operand_digits: 2,
            operations: vec![BenchOp::Add, BenchOp::Sub, BenchOp::Mul, BenchOp::Div],
            schemes: vec![
                BenchScheme::Plaintext,
                BenchScheme::Paillier,
                BenchScheme::ElGamal,
            ],
            key_bits: 1024,
            seed: 0,
            keygen_iterations: 1,
            codec: CodecParams::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(BenchError::Config(m.into()));
        if self.iterations == 0 {
            return fail("iterations must be at least 1");
        }
        if self.repeats == 0 {
            return fail("repeats must be at least 1");
        }
        if self.keygen_iterations == 0 {
            return fail("keygen iterations must be at least 1");
        }
        if !(1..=18).contains(&self.operand_digits) {
            return fail("operand digits must be between 1 and 18");
        }
        if !phemu_core::SUPPORTED_KEY_BITS.contains(&self.key_bits) {
            return Err(BenchError::Config(format!(
                "unsupported key size {}; allowed sizes are 256, 512, 1024, 2048, 3072",
                self.key_bits
            )));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Signed operand pairs with exactly `operand_digits` digits and a uniform
/// sign; never zero, so division loops cannot abort.
pub fn operand_pairs(config: &BenchConfig) -> Vec<(i64, i64)> {
    let mut rng = config.rng(0);
    let lo = 10i64.pow(config.operand_digits - 1);
    let span = (10i64.pow(config.operand_digits) - lo) as u64;
    let zone = u64::MAX - u64::MAX % span;
    let mut draw = || {
        let magnitude = loop {
            let r = rng.next_u64();
            if r < zone {
                break lo + (r % span) as i64;
            }
        };
        if rng.next_u32() & 1 == 1 {
            -magnitude
        } else {
            magnitude
        }
    };
    (0..config.iterations).map(|_| (draw(), draw())).collect()
}

/// Dimensionless ratio of two durations in the same unit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Ratio(pub f64);

impl Ratio {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Nearest integer once the ratio reaches 1000.
    pub fn rounded(self) -> Option<u64> {
        (self.0 >= 1000.0).then(|| self.0.round() as u64)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rounded() {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "{:.2}", self.0),
        }
    }
}

pub fn compute_ratio(t_op: f64, t_plain: f64) -> Result<Ratio> {
    if t_plain.is_nan() || t_plain <= 0.0 {
        return Err(BenchError::Domain(t_plain));
    }
    if t_op.is_nan() || t_op < 0.0 {
        return Err(BenchError::Config(format!(
            "operation time {t_op} is not a duration"
        )));
    }
    Ok(Ratio(t_op / t_plain))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub scheme: BenchScheme,
    pub operation: BenchOp,
    /// `None` for plaintext.
    pub key_bits: Option<u64>,
    /// Operations per timed repeat.
    pub iterations: usize,
    pub repeats: usize,
    pub repeat_totals_ns: Vec<u64>,
    /// Mean per-operation time.
    pub mean_ns: f64,
    /// Against plaintext of the same operation; arithmetic only.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skipped {
    pub scheme: BenchScheme,
    pub operation: BenchOp,
    pub reason: &'static str,
}

impl fmt::Display for Skipped {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "skipping {} {}: {}",
            self.scheme, self.operation, self.reason
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub records: Vec<TimingRecord>,
    pub skipped: Vec<Skipped>,
}

fn unsupported(scheme: BenchScheme, op: BenchOp) -> Option<&'static str> {
    use BenchOp::*;
    use BenchScheme::*;
    match (scheme, op) {
        (Plaintext, Encrypt | Decrypt | Keygen) => Some("plaintext has no keys or ciphertexts"),
        (Paillier, Mul | Div) => Some("Paillier only adds and subtracts ciphertexts"),
        (ElGamal, Add | Sub) => Some("ElGamal only multiplies and divides ciphertexts"),
        (Emulation, Encrypt | Decrypt) => {
            Some("emulation encrypts through the scheme it schedules")
        }
        _ => None,
    }
}

/// Warm-up run, then `repeats` timed runs; each returns its wall time.
fn time_repeats(repeats: usize, mut run: impl FnMut() -> Result<()>) -> Result<Vec<u64>> {
    run()?;
    let mut totals = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        run()?;
        totals.push(start.elapsed().as_nanos() as u64);
    }
    Ok(totals)
}

fn rational(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

struct Keys {
    paillier: PaillierKeyPair,
    elgamal: ElGamalKeyPair,
}

struct Runner<'a> {
    config: &'a BenchConfig,
    pairs: Vec<(i64, i64)>,
    keys: Option<Keys>,
    rng: ChaCha20Rng,
}

impl Runner<'_> {
    fn keys(&mut self) -> Result<&Keys> {
        if self.keys.is_none() {
            let mut rng = self.config.rng(1);
            let (bits, codec) = (self.config.key_bits, self.config.codec);
            self.keys = Some(Keys {
                paillier: PaillierKeyPair::generate(bits, codec, &mut rng)?,
                elgamal: ElGamalKeyPair::generate(bits, codec, &mut rng)?,
            });
        }
        Ok(self.keys.as_ref().expect("initialized above"))
    }

    fn plaintext(&self, op: BenchOp) -> Result<Vec<u64>> {
        let a: Vec<f64> = self.pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = self.pairs.iter().map(|p| p.1 as f64).collect();
        let f: fn(f64, f64) -> f64 = match op {
            BenchOp::Add => |x, y| x + y,
            BenchOp::Sub => |x, y| x - y,
            BenchOp::Mul => |x, y| x * y,
            BenchOp::Div => |x, y| x / y,
            _ => unreachable!("filtered by unsupported()"),
        };
        time_repeats(self.config.repeats, || {
            for (x, y) in a.iter().zip(&b) {
                black_box(f(black_box(*x), black_box(*y)));
            }
            Ok(())
        })
    }

    fn measure(&mut self, scheme: BenchScheme, op: BenchOp) -> Result<Vec<u64>> {
        if scheme == BenchScheme::Plaintext {
            return self.plaintext(op);
        }
        let repeats = self.config.repeats;
        if op == BenchOp::Keygen {
            let (bits, codec, n) = (
                self.config.key_bits,
                self.config.codec,
                self.config.keygen_iterations,
            );
            let rng = &mut self.rng;
            return time_repeats(repeats, || {
                for _ in 0..n {
                    if scheme != BenchScheme::ElGamal {
                        black_box(PaillierKeyPair::generate(bits, codec, rng)?);
                    }
                    if scheme != BenchScheme::Paillier {
                        black_box(ElGamalKeyPair::generate(bits, codec, rng)?);
                    }
                }
                Ok(())
            });
        }
        self.keys()?;
        let keys = self.keys.as_ref().expect("generated above");
        let (pk, ek) = (&keys.paillier, &keys.elgamal);
        let rng = &mut self.rng;
        let xs: Vec<BigRational> = self.pairs.iter().map(|p| rational(p.0)).collect();
        let ys: Vec<BigRational> = self.pairs.iter().map(|p| rational(p.1)).collect();

        match (scheme, op) {
            (BenchScheme::Emulation, _) => {
                let symbol = op.symbol().expect("arithmetic operation");
                let plan = build_plan(&assign_schemes(&parse_expression(&format!(
                    "a {symbol} b"
                ))?));
                let bindings: Vec<BTreeMap<String, BigRational>> = xs
                    .iter()
                    .zip(&ys)
                    .map(|(x, y)| {
                        BTreeMap::from([("a".into(), x.clone()), ("b".into(), y.clone())])
                    })
                    .collect();
                time_repeats(repeats, || {
                    for vars in &bindings {
                        black_box(execute_plan(&plan, vars, pk, ek, ExecMode::Unchecked, rng)?);
                    }
                    Ok(())
                })
            }
            (BenchScheme::Paillier, BenchOp::Encrypt) => time_repeats(repeats, || {
                for x in &xs {
                    black_box(pk.public().encrypt(x, rng)?);
                }
                Ok(())
            }),
            (BenchScheme::ElGamal, BenchOp::Encrypt) => time_repeats(repeats, || {
                for x in &xs {
                    black_box(ek.public().encrypt(x, rng)?);
                }
                Ok(())
            }),
            (BenchScheme::Paillier, BenchOp::Decrypt) => {
                let ca = xs
                    .iter()
                    .map(|x| pk.public().encrypt(x, rng))
                    .collect::<Result<Vec<_>, _>>()?;
                time_repeats(repeats, || {
                    for a in &ca {
                        black_box(pk.decrypt(a)?);
                    }
                    Ok(())
                })
            }
            (BenchScheme::Paillier, _) => {
                let ca = xs
                    .iter()
                    .map(|x| pk.public().encrypt(x, rng))
                    .collect::<Result<Vec<_>, _>>()?;
                let cb = ys
                    .iter()
                    .map(|y| pk.public().encrypt(y, rng))
                    .collect::<Result<Vec<_>, _>>()?;
                let public = pk.public();
                time_repeats(repeats, || {
                    for (a, b) in ca.iter().zip(&cb) {
                        match op {
                            BenchOp::Add => black_box(public.add(a, b)?),
                            BenchOp::Sub => black_box(public.sub(a, b)?),
                            _ => unreachable!("filtered by unsupported()"),
                        };
                    }
                    Ok(())
                })
            }
            (BenchScheme::ElGamal, BenchOp::Decrypt) => {
                let ca = xs
                    .iter()
                    .map(|x| ek.public().encrypt(x, rng))
                    .collect::<Result<Vec<_>, _>>()?;
                time_repeats(repeats, || {
                    for a in &ca {
                        black_box(ek.decrypt(a)?);
                    }
                    Ok(())
                })
            }
            (BenchScheme::ElGamal, _) => {
                let ca = xs
                    .iter()
                    .map(|x| ek.public().encrypt(x, rng))
                    .collect::<Result<Vec<_>, _>>()?;
                let cb = ys
                    .iter()
                    .map(|y| ek.public().encrypt(y, rng))
                    .collect::<Result<Vec<_>, _>>()?;
                let public = ek.public();
                time_repeats(repeats, || {
                    for (a, b) in ca.iter().zip(&cb) {
                        match op {
                            BenchOp::Mul => black_box(public.mul(a, b)?),
                            BenchOp::Div => black_box(public.div(a, b)?),
                            _ => unreachable!("filtered by unsupported()"),
                        };
                    }
                    Ok(())
                })
            }
            (BenchScheme::Plaintext, _) => unreachable!("handled above"),
        }
    }
}

fn mean_per_op(totals: &[u64], ops_per_repeat: usize) -> f64 {
    let sum: f64 = totals.iter().map(|&t| t as f64).sum();
    sum / totals.len() as f64 / ops_per_repeat as f64
}

/// Measure every requested (scheme, operation) pair. Arithmetic ratios use
/// a plaintext baseline that is measured even when plaintext is not
/// requested. Unsupported pairs are reported in [`BenchReport::skipped`].
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let mut runner = Runner {
        config,
        pairs: operand_pairs(config),
        keys: None,
        rng: config.rng(2),
    };
    let mut report = BenchReport::default();
    let mut baselines: BTreeMap<BenchOp, f64> = BTreeMap::new();

    for &scheme in &config.schemes {
        for &op in &config.operations {
            if let Some(reason) = unsupported(scheme, op) {
                report.skipped.push(Skipped {
                    scheme,
                    operation: op,
                    reason,
                });
                continue;
            }
            let totals = runner.measure(scheme, op)?;
            let iterations = if op == BenchOp::Keygen {
                config.keygen_iterations
            } else {
                config.iterations
            };
            let mean_ns = mean_per_op(&totals, iterations);
            let ratio = if op.is_arithmetic() {
                let plain = match baselines.get(&op) {
                    Some(&t) => t,
                    None if scheme == BenchScheme::Plaintext => mean_ns,
                    None => mean_per_op(&runner.plaintext(op)?, config.iterations),
                };
                baselines.insert(op, plain);
                Some(compute_ratio(mean_ns, plain)?.value())
            } else {
                None
            };
            report.records.push(TimingRecord {
                scheme,
                operation: op,
                key_bits: (scheme != BenchScheme::Plaintext).then_some(config.key_bits),
                iterations,
                repeats: config.repeats,
                repeat_totals_ns: totals,
                mean_ns,
                ratio,
            });
        }
    }
    Ok(report)
}

/// Run the benchmark once per key size, records grouped by size.
pub fn sweep_key_size(sizes: &[u64], config: &BenchConfig) -> Result<BenchReport> {
    if sizes.is_empty() {
        return Err(BenchError::Config("no key sizes given".into()));
    }
    let mut report = BenchReport::default();
    for &bits in sizes {
        let sized = BenchConfig {
            key_bits: bits,
            ..config.clone()
        };
        let part = run_benchmark(&sized)?;
        report.records.extend(part.records);
        if report.skipped.is_empty() {
            report.skipped = part.skipped;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: [&str; 7] = [
    "scheme",
    "operation",
    "key_bits",
    "iterations",
    "repeats",
    "mean_ns",
    "ratio",
];

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    scheme: String,
    operation: String,
    key_bits: Option<u64>,
    iterations: Option<usize>,
    repeats: Option<usize>,
    mean_ns: f64,
    ratio: Option<f64>,
}

pub fn export_results(records: &[TimingRecord], format: ExportFormat) -> Result<Vec<u8>> {
    match format {
        ExportFormat::Json => {
            Ok(serde_json::to_vec_pretty(records)
                .map_err(|e| BenchError::Io(io::Error::other(e)))?)
        }
        ExportFormat::Csv => {
            let mut out = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            out.write_record(CSV_HEADER)?;
            for r in records {
                let key_bits = r.key_bits.map(|b| b.to_string()).unwrap_or_default();
                let ratio = r.ratio.map(|x| x.to_string()).unwrap_or_default();
                out.write_record([
                    r.scheme.id(),
                    r.operation.id(),
                    &key_bits,
                    &r.iterations.to_string(),
                    &r.repeats.to_string(),
                    &format!("{}", r.mean_ns.round() as u64),
                    &ratio,
                ])?;
            }
            out.into_inner().map_err(|e| BenchError::Io(e.into_error()))
        }
    }
}

pub fn import_records_json(bytes: &[u8]) -> Result<Vec<TimingRecord>> {
    serde_json::from_slice(bytes).map_err(|e| BenchError::Io(io::Error::other(e)))
}

/// Mean per-operation durations keyed by scheme and operation identifiers,
/// e.g. `("paillier", "add")`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingTable {
    pub source: String,
    entries: BTreeMap<(String, String), f64>,
}

impl TimingTable {
    pub fn new(source: impl Into<String>) -> Self {
        TimingTable {
            source: source.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, scheme: &str, operation: &str, mean_ns: f64) -> Result<()> {
        if !(mean_ns > 0.0 && mean_ns.is_finite()) {
            return Err(BenchError::Config(format!(
                "duration for {scheme} {operation} must be positive"
            )));
        }
        self.entries
            .insert((scheme.into(), operation.into()), mean_ns);
        Ok(())
    }

    pub fn get(&self, scheme: &str, operation: &str) -> Option<f64> {
        self.entries
            .get(&(scheme.into(), operation.into()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_records(source: impl Into<String>, records: &[TimingRecord]) -> Result<Self> {
        let mut table = TimingTable::new(source);
        for r in records {
            table.insert(r.scheme.id(), r.operation.id(), r.mean_ns)?;
        }
        Ok(table)
    }

    /// Read the CSV written by [`export_results`]. Only `scheme`,
    /// `operation` and `mean_ns` are required.
    pub fn from_csv<R: io::Read>(source: impl Into<String>, reader: R) -> Result<Self> {
        let mut table = TimingTable::new(source);
        let mut csv = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        for (index, row) in csv.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            let row_number = index + 2;
            table
                .insert(&row.scheme, &row.operation, row.mean_ns)
                .map_err(|e| BenchError::Table {
                    row: row_number,
                    message: e.to_string(),
                })?;
        }
        Ok(table)
    }
}

/// `Σ count · mean` over the plan's actions, all run one after another.
pub fn estimate_scenario_cost(counts: &OperationCounts, table: &TimingTable) -> Result<f64> {
    let mut total = 0.0;
    let mut missing = Vec::new();
    for (&(scheme, action), &n) in counts {
        match table.get(scheme.id(), action.id()) {
            Some(mean) => total += n as f64 * mean,
            None => missing.push(phemu_core::planner::action_label(scheme, action)),
        }
    }
    if missing.is_empty() {
        Ok(total)
    } else {
        Err(BenchError::MissingEntries(missing))
    }
}
