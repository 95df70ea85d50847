//! `phemu` command line.
//!
//! Exit status is 0 on success, 1 for usage and configuration errors and 2
//! for failures while running. Data goes to stdout or `--out`; diagnostics
//! go to stderr. Files are only written once a command has succeeded.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use phemu_core::elgamal::ElGamalKeyPair;
use phemu_core::encoding::{format_exact_or_truncated, parse_decimal};
use phemu_core::paillier::PaillierKeyPair;
use phemu_core::planner::{
    action_label, assign_schemes_with, build_plan, count_operations, execute_plan,
    parse_expression, ExecMode, ExecutionPlan, PlanOptions, SourceEncryption,
};
use phemu_core::{BigRational, CodecParams, Error as CoreError};
use rand_chacha::ChaCha20Rng;
use rand_core::{OsRng, RngCore, SeedableRng};

use crate::bench::{
    self, BenchConfig, BenchError, BenchOp, BenchReport, BenchScheme, ExportFormat, TimingTable,
};
use crate::formats::{Ciphertext, FormatError, KeyFile};

#[derive(Debug, Parser)]
#[command(
    name = "phemu",
    version,
    about = "Partially homomorphic encryption with emulated mixed evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Paillier,
    Elgamal,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a key pair.
    Keygen {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 1024)]
        bits: u64,
        /// Decimal digits kept after the point.
        #[arg(long, default_value_t = 12)]
        k: u32,
        /// Bit width of the two's-complement plaintext space.
        #[arg(long, default_value_t = 128)]
        i: u32,
        #[arg(long, env = "PHEMU_SEED")]
        seed: Option<u64>,
        /// Private key file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the public half here.
        #[arg(long)]
        public_out: Option<PathBuf>,
    },
    /// Encrypt one decimal value.
    Encrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        value: String,
        #[arg(long, env = "PHEMU_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decrypt a ciphertext file (`-` reads stdin).
    Decrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        ct: PathBuf,
    },
    /// Print the staged execution plan of an expression.
    Plan {
        expr: String,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        scalar_literals: bool,
    },
    /// Evaluate an expression through the emulation.
    Eval {
        expr: String,
        /// Bindings such as `a=1,b=-2.5`.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        vars: String,
        #[arg(long)]
        paillier_key: PathBuf,
        #[arg(long)]
        elgamal_key: PathBuf,
        #[arg(long)]
        show_plan: bool,
        /// Fail on overflow instead of wrapping.
        #[arg(long)]
        checked: bool,
        #[arg(long)]
        scalar_literals: bool,
        #[arg(long, env = "PHEMU_SEED")]
        seed: Option<u64>,
    },
    /// Time operations against a plaintext baseline.
    Bench(BenchArgs),
    /// Run the benchmark for several key sizes.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "512,1024,2048")]
        sizes: Vec<u64>,
        #[command(flatten)]
        bench: BenchArgs,
    },
    /// Estimate the cost of evaluating an expression from a timing table.
    Estimate {
        expr: String,
        /// CSV in the format written by `bench --csv`.
        #[arg(long)]
        table: PathBuf,
        /// Leave out the agent's encryptions of inputs.
        #[arg(long)]
        pre_encrypted: bool,
        #[arg(long)]
        scalar_literals: bool,
    },
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated: add, sub, mul, div, encrypt, decrypt, keygen.
    #[arg(long, value_delimiter = ',')]
    ops: Option<Vec<String>>,
    /// Comma-separated: plaintext, paillier, elgamal, emulation.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 2)]
    digits: u32,
    #[arg(long, default_value_t = 1024)]
    bits: u64,
    #[arg(long, default_value_t = 1)]
    keygen_iterations: usize,
    #[arg(long, env = "PHEMU_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Usage,
    Runtime,
}

#[derive(Debug)]
struct CliError {
    kind: Kind,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Usage,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Runtime,
            message: message.into(),
        }
    }

    fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Usage => 1,
            Kind::Runtime => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = match e {
            CoreError::Config(_)
            | CoreError::CodecMismatch
            | CoreError::Parse { .. }
            | CoreError::EmptyExpression
            | CoreError::InvalidDecimal(_) => Kind::Usage,
            _ => Kind::Runtime,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Core(core) => core.into(),
            other => CliError::runtime(other.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Core(core) => core.into(),
            BenchError::Config(_) | BenchError::MissingEntries(_) | BenchError::Table { .. } => {
                CliError::usage(e.to_string())
            }
            other => CliError::runtime(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Writes deferred until the command has finished without error.
#[derive(Default)]
struct Output {
    stdout: String,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Output {
    fn line(&mut self, text: impl AsRef<str>) {
        self.stdout.push_str(text.as_ref());
        self.stdout.push('\n');
    }

    fn to(&mut self, path: Option<&Path>, mut data: String) {
        match path {
            Some(path) => {
                data.push('\n');
                self.files.push((path.to_path_buf(), data.into_bytes()))
            }
            None => self.line(data),
        }
    }

    fn flush(self) -> CliResult<()> {
        for (path, data) in &self.files {
            fs::write(path, data)
                .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        }
        let mut stdout = io::stdout().lock();
        stdout
            .write_all(self.stdout.as_bytes())
            .and_then(|()| stdout.flush())
            .map_err(|e| CliError::runtime(e.to_string()))
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::runtime(format!("cannot read stdin: {e}")))?;
        return Ok(text);
    }
    fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))
}

fn read_key(path: &Path) -> CliResult<KeyFile> {
    KeyFile::from_json(&read_text(path)?).map_err(|e| {
        let mut e = CliError::from(e);
        e.message = format!("{}: {}", path.display(), e.message);
        e
    })
}

fn seeded_rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(seed) => ChaCha20Rng::seed_from_u64(seed),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn plan_expression(text: &str, scalar_literals: bool) -> CliResult<ExecutionPlan> {
    let expr = parse_expression(text)?;
    Ok(build_plan(&assign_schemes_with(
        &expr,
        PlanOptions { scalar_literals },
    )))
}

fn parse_bindings(text: &str) -> CliResult<BTreeMap<String, BigRational>> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((name, value)) = item.split_once('=') else {
            return Err(CliError::usage(format!(
                "binding `{item}` is not of the form name=value"
            )));
        };
        out.insert(name.trim().to_string(), parse_decimal(value.trim())?);
    }
    Ok(out)
}

fn keygen(
    scheme: SchemeArg,
    bits: u64,
    codec: CodecParams,
    seed: Option<u64>,
    out: Option<&Path>,
    public_out: Option<&Path>,
) -> CliResult<Output> {
    let mut rng = seeded_rng(seed);
    let key = match scheme {
        SchemeArg::Paillier => {
            KeyFile::PaillierPair(PaillierKeyPair::generate(bits, codec, &mut rng)?)
        }
        SchemeArg::Elgamal => {
            KeyFile::ElGamalPair(ElGamalKeyPair::generate(bits, codec, &mut rng)?)
        }
    };
    let mut output = Output::default();
    output.to(out, key.to_json());
    if let Some(path) = public_out {
        output.to(Some(path), key.public_only().to_json());
    }
    Ok(output)
}

fn encrypt(key: &Path, value: &str, seed: Option<u64>, out: Option<&Path>) -> CliResult<Output> {
    let key = read_key(key)?;
    let x = parse_decimal(value)?;
    let mut rng = seeded_rng(seed);
    let ct = match &key {
        KeyFile::PaillierPublic(k) => Ciphertext::Paillier(k.encrypt(&x, &mut rng)?),
        KeyFile::PaillierPair(k) => Ciphertext::Paillier(k.public().encrypt(&x, &mut rng)?),
        KeyFile::ElGamalPublic(k) => Ciphertext::ElGamal(k.encrypt(&x, &mut rng)?),
        KeyFile::ElGamalPair(k) => Ciphertext::ElGamal(k.public().encrypt(&x, &mut rng)?),
    };
    let mut output = Output::default();
    output.to(out, ct.to_json());
    Ok(output)
}

fn decrypt(key: &Path, ct: &Path) -> CliResult<Output> {
    let key = read_key(key)?;
    let text = read_text(ct)?;
    let codec = key.codec();
    let value = match (&key, Ciphertext::from_json(&text, codec.k())?) {
        (KeyFile::PaillierPair(k), Ciphertext::Paillier(ct)) => k.decrypt(&ct)?,
        (KeyFile::ElGamalPair(k), Ciphertext::ElGamal(ct)) => k.decrypt(&ct)?,
        (KeyFile::PaillierPublic(_) | KeyFile::ElGamalPublic(_), _) => {
            return Err(CliError::usage(
                "decryption needs a key file with private fields",
            ))
        }
        (_, ct) => {
            return Err(CliError::usage(format!(
                "ciphertext is {} but the key is {}",
                ct.scheme(),
                key.scheme()
            )))
        }
    };
    let mut output = Output::default();
    output.line(format_exact_or_truncated(&value, codec.k()));
    Ok(output)
}

#[allow(clippy::too_many_arguments)]
fn eval(
    expr: &str,
    vars: &str,
    paillier_key: &Path,
    elgamal_key: &Path,
    show_plan: bool,
    checked: bool,
    scalar_literals: bool,
    seed: Option<u64>,
) -> CliResult<Output> {
    let plan = plan_expression(expr, scalar_literals)?;
    let bindings = parse_bindings(vars)?;
    let KeyFile::PaillierPair(paillier) = read_key(paillier_key)? else {
        return Err(CliError::usage(
            "--paillier-key must be a Paillier key file with private fields",
        ));
    };
    let KeyFile::ElGamalPair(elgamal) = read_key(elgamal_key)? else {
        return Err(CliError::usage(
            "--elgamal-key must be an ElGamal key file with private fields",
        ));
    };
    let mode = if checked {
        ExecMode::Checked
    } else {
        ExecMode::Unchecked
    };
    let value = execute_plan(
        &plan,
        &bindings,
        &paillier,
        &elgamal,
        mode,
        &mut seeded_rng(seed),
    )?;
    let mut output = Output::default();
    if show_plan {
        output.stdout.push_str(&plan.render());
    }
    output.line(format_exact_or_truncated(
        &value,
        paillier.public().codec().k(),
    ));
    Ok(output)
}

fn parse_list<T>(items: &Option<Vec<String>>, default: &[T]) -> CliResult<Vec<T>>
where
    T: Clone + std::str::FromStr<Err = BenchError>,
{
    match items {
        None => Ok(default.to_vec()),
        Some(items) => items
            .iter()
            .map(|s| s.trim().parse::<T>().map_err(CliError::from))
            .collect(),
    }
}

fn bench_config(
    args: &BenchArgs,
    ops: &[BenchOp],
    schemes: &[BenchScheme],
) -> CliResult<BenchConfig> {
    Ok(BenchConfig {
        iterations: args.iterations,
        repeats: args.repeats,
        operand_digits: args.digits,
        operations: parse_list(&args.ops, ops)?,
        schemes: parse_list(&args.schemes, schemes)?,
        key_bits: args.bits,
        seed: args.seed.unwrap_or_else(|| OsRng.next_u64()),
        keygen_iterations: args.keygen_iterations,
        codec: CodecParams::default(),
    })
}

fn report_output(report: &BenchReport, args: &BenchArgs) -> CliResult<Output> {
    for skipped in &report.skipped {
        eprintln!("warning: {skipped}");
    }
    let mut output = Output::default();
    let csv = String::from_utf8(bench::export_results(&report.records, ExportFormat::Csv)?)
        .expect("CSV export is UTF-8");
    match &args.csv {
        Some(path) => output.files.push((path.clone(), csv.into_bytes())),
        None => output.stdout.push_str(&csv),
    }
    if let Some(path) = &args.json {
        output.files.push((
            path.clone(),
            bench::export_results(&report.records, ExportFormat::Json)?,
        ));
    }
    Ok(output)
}

fn estimate(
    expr: &str,
    table_path: &Path,
    pre_encrypted: bool,
    scalar_literals: bool,
) -> CliResult<Output> {
    let plan = plan_expression(expr, scalar_literals)?;
    let label = table_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = fs::File::open(table_path)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", table_path.display())))?;
    let table = TimingTable::from_csv(label, file)?;
    let sources = if pre_encrypted {
        SourceEncryption::PreEncrypted
    } else {
        SourceEncryption::Included
    };
    let counts = count_operations(&plan, sources);
    let total = bench::estimate_scenario_cost(&counts, &table)?;
    let mut output = Output::default();
    for (&(scheme, action), n) in &counts {
        output.line(format!("{} {n}", action_label(scheme, action)));
    }
    output.line(format!("operations {}", counts.values().sum::<usize>()));
    output.line(format!("total_ns {}", format_ns(total)));
    Ok(output)
}

fn format_ns(ns: f64) -> String {
    if ns.fract() == 0.0 && ns.abs() < 1e18 {
        format!("{}", ns as i64)
    } else {
        format!("{ns:.1}")
    }
}

fn dispatch(command: Command) -> CliResult<Output> {
    match command {
        Command::Keygen {
            scheme,
            bits,
            k,
            i,
            seed,
            out,
            public_out,
        } => {
            let codec = CodecParams::new(k, i)?;
            keygen(
                scheme,
                bits,
                codec,
                seed,
                out.as_deref(),
                public_out.as_deref(),
            )
        }
        Command::Encrypt {
            key,
            value,
            seed,
            out,
        } => encrypt(&key, &value, seed, out.as_deref()),
        Command::Decrypt { key, ct } => decrypt(&key, &ct),
        Command::Plan {
            expr,
            json,
            scalar_literals,
        } => {
            let plan = plan_expression(&expr, scalar_literals)?;
            let mut output = Output::default();
            if json {
                output.line(crate::formats::plan_to_json(&plan));
            } else {
                output.stdout.push_str(&plan.render());
            }
            Ok(output)
        }
        Command::Eval {
            expr,
            vars,
            paillier_key,
            elgamal_key,
            show_plan,
            checked,
            scalar_literals,
            seed,
        } => eval(
            &expr,
            &vars,
            &paillier_key,
            &elgamal_key,
            show_plan,
            checked,
            scalar_literals,
            seed,
        ),
        Command::Bench(args) => {
            let config = bench_config(
                &args,
                &[BenchOp::Add, BenchOp::Sub, BenchOp::Mul, BenchOp::Div],
                &[
                    BenchScheme::Plaintext,
                    BenchScheme::Paillier,
                    BenchScheme::ElGamal,
                ],
            )?;
            report_output(&bench::run_benchmark(&config)?, &args)
        }
        Command::Sweep { sizes, bench: args } => {
            let config = bench_config(
                &args,
                &[BenchOp::Keygen, BenchOp::Encrypt, BenchOp::Decrypt],
                &[BenchScheme::Paillier, BenchScheme::ElGamal],
            )?;
            report_output(&bench::sweep_key_size(&sizes, &config)?, &args)
        }
        Command::Estimate {
            expr,
            table,
            pre_encrypted,
            scalar_literals,
        } => estimate(&expr, &table, pre_encrypted, scalar_literals),
    }
}

/// Parse arguments, run the command and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command).and_then(Output::flush) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
