//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::Signed;
use phemu::bench::{
    compute_ratio, estimate_scenario_cost, operand_pairs, run_benchmark, sweep_key_size,
    BenchConfig, BenchOp, BenchScheme, TimingRecord, TimingTable,
};
use phemu_core::elgamal::ElGamalKeyPair;
use phemu_core::encoding::{sign_decode, sign_encode};
use phemu_core::paillier::PaillierKeyPair;
use phemu_core::planner::{
    assign_schemes, build_plan, count_operations, execute_plan, parse_expression, Action, ExecMode,
    SourceEncryption,
};
use phemu_core::{BigRational, CodecParams, Scheme};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

type Outcome = Result<String, String>;

fn check(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn codec(k: u32, i: u32) -> CodecParams {
    CodecParams::new(k, i).expect("valid codec")
}

fn homomorphic_correctness() -> Outcome {
    let config = BenchConfig {
        seed: 2024,
        ..BenchConfig::default()
    };
    let pairs = operand_pairs(&config);
    check(pairs.len() == 1000, || format!("{} pairs", pairs.len()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let paillier = PaillierKeyPair::generate(1024, CodecParams::default(), &mut rng)
        .map_err(|e| e.to_string())?;
    let elgamal = ElGamalKeyPair::generate(1024, CodecParams::default(), &mut rng)
        .map_err(|e| e.to_string())?;
    let (pk, ek) = (paillier.public(), elgamal.public());
    let mut wrong = Vec::new();
    for &(a, b) in &pairs {
        let (x, y) = (int(a), int(b));
        let (pa, pb) = (
            pk.encrypt(&x, &mut rng).unwrap(),
            pk.encrypt(&y, &mut rng).unwrap(),
        );
        let (ea, eb) = (
            ek.encrypt(&x, &mut rng).unwrap(),
            ek.encrypt(&y, &mut rng).unwrap(),
        );
        let results = [
            (
                "add",
                paillier.decrypt(&pk.add(&pa, &pb).unwrap()),
                int(a + b),
            ),
            (
                "sub",
                paillier.decrypt(&pk.sub(&pa, &pb).unwrap()),
                int(a - b),
            ),
            (
                "mul",
                elgamal.decrypt(&ek.mul(&ea, &eb).unwrap()),
                int(a * b),
            ),
            (
                "div",
                elgamal.decrypt(&ek.div(&ea, &eb).unwrap()),
                BigRational::new(a.into(), b.into()),
            ),
        ];
        for (op, got, want) in results {
            if got.as_ref() != Ok(&want) {
                wrong.push(format!("{a} {op} {b}: {got:?} != {want}"));
            }
        }
    }
    check(wrong.is_empty(), || {
        format!("{} mismatches, first: {}", wrong.len(), wrong[0])
    })?;
    Ok("1000 pairs exact for Paillier add/sub and ElGamal mul/div at 1024 bits".into())
}

const EXPECTED_PLAN: &str = "\
AGENT: Paillier_encrypt a, b, c, d
  COMPUTE: Paillier_add a, b -> p
  COMPUTE: Paillier_add c, d -> q
AGENT: Paillier_decrypt p, q
AGENT: ElGamal_encrypt p, q
  COMPUTE: ElGamal_multiply p, q -> r
AGENT: ElGamal_decrypt r
";

fn staged_plan() -> Outcome {
    let plan = build_plan(&assign_schemes(&parse_expression("(a+b)*(c+d)").unwrap()));
    check(plan.render() == EXPECTED_PLAN, || {
        format!("library plan:\n{}", plan.render())
    })?;
    plan.validate().map_err(|e| e.to_string())?;

    let out = Command::new(env!("CARGO_BIN_EXE_phemu"))
        .args(["plan", "(a+b)*(c+d)"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    check(out.status.success() && text == EXPECTED_PLAN, || {
        format!("cli plan:\n{text}")
    })?;

    let expected: BTreeMap<(Scheme, Action), usize> = [
        ((Scheme::Paillier, Action::Encrypt), 4),
        ((Scheme::Paillier, Action::Add), 2),
        ((Scheme::Paillier, Action::Decrypt), 2),
        ((Scheme::ElGamal, Action::Encrypt), 2),
        ((Scheme::ElGamal, Action::Mul), 1),
        ((Scheme::ElGamal, Action::Decrypt), 1),
    ]
    .into();
    let counts = count_operations(&plan, SourceEncryption::Included);
    check(counts == expected, || format!("counts {counts:?}"))?;
    Ok("7-step plan and counts {P_enc 4, P_add 2, P_dec 2, E_enc 2, E_mul 1, E_dec 1}".into())
}

fn worked_twos_complement() -> Outcome {
    let c = codec(0, 4);
    let two = sign_encode(&BigInt::from(2), &c).unwrap();
    let minus_one = sign_encode(&BigInt::from(-1), &c).unwrap();
    check(two == 2u32.into() && minus_one == 15u32.into(), || {
        format!("encoded {two}, {minus_one}")
    })?;
    let sum = &two + &minus_one;
    check(sum == 17u32.into(), || format!("sum {sum}"))?;
    let decoded = sign_decode(&sum, &c);
    check(decoded == BigInt::from(1), || format!("decoded {decoded}"))?;

    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let key = PaillierKeyPair::generate(256, c, &mut rng).unwrap();
    let pk = key.public();
    let ct = pk
        .add(
            &pk.encrypt(&int(2), &mut rng).unwrap(),
            &pk.encrypt(&int(-1), &mut rng).unwrap(),
        )
        .unwrap();
    let value = key.decrypt(&ct).unwrap();
    check(value == int(1), || format!("homomorphic sum {value}"))?;
    Ok("z=16: 2 -> 2, -1 -> 15, 17 -> 1 (also through Paillier)".into())
}

fn ratio_arithmetic() -> Outcome {
    let ratio = compute_ratio(4.44414e-4, 1.8e-9).map_err(|e| e.to_string())?;
    let rounded = ratio.rounded().ok_or("ratio below 1000")?;
    check(rounded.abs_diff(246_897) <= 1, || {
        format!("rounded ratio {rounded}")
    })?;
    Ok(format!("4.44414e-4 / 1.8e-9 reported as {ratio}"))
}

/// Random expression for the equivalence property, with its own exact
/// evaluation.
#[derive(Debug, Clone)]
enum Tree {
    Leaf(i64),
    Node(char, Box<Tree>, Box<Tree>),
}

const DIVISORS: [i64; 14] = [1, 2, 4, 5, 8, 10, 16, 20, 25, 32, 40, 50, 64, 80];

struct TreeGen {
    rng: ChaCha20Rng,
}

impl TreeGen {
    fn below(&mut self, n: u64) -> u64 {
        self.rng.next_u64() % n
    }

    fn operand(&mut self) -> Tree {
        Tree::Leaf(self.below(199) as i64 - 99)
    }

    fn divisor(&mut self) -> Tree {
        let d = DIVISORS[self.below(DIVISORS.len() as u64) as usize];
        Tree::Leaf(if self.below(2) == 0 { d } else { -d })
    }

    fn any(&mut self, depth: usize) -> Tree {
        if depth <= 1 || self.below(10) < 3 {
            return self.operand();
        }
        match self.below(4) {
            0 => Tree::Node(
                '+',
                Box::new(self.any(depth - 1)),
                Box::new(self.any(depth - 1)),
            ),
            1 => Tree::Node(
                '-',
                Box::new(self.any(depth - 1)),
                Box::new(self.any(depth - 1)),
            ),
            2 => Tree::Node(
                '*',
                Box::new(self.additive(depth - 1)),
                Box::new(self.additive(depth - 1)),
            ),
            _ => Tree::Node(
                '/',
                Box::new(self.additive(depth - 1)),
                Box::new(self.divisor()),
            ),
        }
    }

    /// A leaf or a sum/difference, so products never chain directly.
    fn additive(&mut self, depth: usize) -> Tree {
        if depth <= 1 || self.below(10) < 4 {
            return self.operand();
        }
        let op = if self.below(2) == 0 { '+' } else { '-' };
        Tree::Node(
            op,
            Box::new(self.any(depth - 1)),
            Box::new(self.any(depth - 1)),
        )
    }
}

impl Tree {
    /// Render with one variable per leaf and record the bindings.
    fn render(&self, vars: &mut BTreeMap<String, BigRational>) -> String {
        match self {
            Tree::Leaf(v) => {
                let name = format!("x{}", vars.len());
                vars.insert(name.clone(), int(*v));
                name
            }
            Tree::Node(op, l, r) => {
                let l = l.render(vars);
                let r = r.render(vars);
                format!("({l} {op} {r})")
            }
        }
    }

    /// Exact value, or `None` if any node leaves the admissible range.
    fn eval(&self, k: u32) -> Option<BigRational> {
        let value = match self {
            Tree::Leaf(v) => int(*v),
            Tree::Node(op, l, r) => {
                let (l, r) = (l.eval(k)?, r.eval(k)?);
                match op {
                    '+' => l + r,
                    '-' => l - r,
                    '*' => l * r,
                    _ if r == int(0) => return None,
                    _ => l / r,
                }
            }
        };
        let bound = int(1_000_000);
        let scaled = &value * BigRational::from_integer(BigInt::from(10u64.pow(k)));
        (value.abs() < bound && scaled.is_integer()).then_some(value)
    }
}

fn emulation_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let c = CodecParams::default();
    let paillier = PaillierKeyPair::generate(512, c, &mut rng).unwrap();
    let elgamal = ElGamalKeyPair::generate(512, c, &mut rng).unwrap();
    let mut gen = TreeGen {
        rng: ChaCha20Rng::seed_from_u64(77),
    };
    let (mut accepted, mut rejected, mut boundaries) = (0usize, 0usize, 0usize);
    let mut failures = Vec::new();
    while accepted < 200 {
        check(rejected < 20_000, || {
            "generator rejects almost everything".into()
        })?;
        let tree = gen.any(5);
        let Some(expected) = tree.eval(c.k()) else {
            rejected += 1;
            continue;
        };
        let mut vars = BTreeMap::new();
        let text = tree.render(&mut vars);
        let expr = parse_expression(&text).unwrap();
        check(expr.depth() <= 5, || format!("{text} is deeper than 5"))?;
        let plan = build_plan(&assign_schemes(&expr));
        boundaries += plan.reencryption_boundaries();
        accepted += 1;
        match execute_plan(
            &plan,
            &vars,
            &paillier,
            &elgamal,
            ExecMode::Checked,
            &mut rng,
        ) {
            Ok(v) if v == expected => {}
            other => failures.push(format!("{text}: {other:?}, expected {expected}")),
        }
    }
    check(failures.is_empty(), || {
        format!("{}/200 wrong, first: {}", failures.len(), failures[0])
    })?;
    Ok(format!(
        "200/200 equal ({rejected} generated expressions rejected by the range filter, {boundaries} re-encryption boundaries, {:.1}s)",
        start.elapsed().as_secs_f64()
    ))
}

fn overflow_fidelity() -> Outcome {
    let c = codec(0, 8);
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let paillier = PaillierKeyPair::generate(256, c, &mut rng).unwrap();
    let elgamal = ElGamalKeyPair::generate(256, c, &mut rng).unwrap();
    let (pk, ek) = (paillier.public(), elgamal.public());

    let sum = pk
        .add(
            &pk.encrypt(&int(100), &mut rng).unwrap(),
            &pk.encrypt(&int(100), &mut rng).unwrap(),
        )
        .unwrap();
    let sum = paillier.decrypt(&sum).unwrap();
    let machine_sum = 100i8.wrapping_add(100);
    check(sum == int(machine_sum.into()), || {
        format!("100+100 gave {sum}, i8 gives {machine_sum}")
    })?;

    let product = ek
        .mul(
            &ek.encrypt(&int(16), &mut rng).unwrap(),
            &ek.encrypt(&int(16), &mut rng).unwrap(),
        )
        .unwrap();
    let product = elgamal.decrypt(&product).unwrap();
    let machine_product = 16i8.wrapping_mul(16);
    check(product == int(machine_product.into()), || {
        format!("16*16 gave {product}, i8 gives {machine_product}")
    })?;
    Ok(format!("k=0 i=8: 100+100 = {sum}, 16*16 = {product}"))
}

fn majority_increasing(small: &TimingRecord, large: &TimingRecord) -> bool {
    let per_op = |r: &TimingRecord, i: usize| r.repeat_totals_ns[i] as f64 / r.iterations as f64;
    let wins = (0..small.repeats)
        .filter(|&i| per_op(large, i) > per_op(small, i))
        .count();
    wins * 2 > small.repeats
}

fn sweep_shape() -> Outcome {
    let start = Instant::now();
    let sizes = [512u64, 1024, 2048];
    let config = BenchConfig {
        iterations: 10,
        repeats: 5,
        operations: vec![BenchOp::Keygen, BenchOp::Encrypt, BenchOp::Decrypt],
        schemes: vec![BenchScheme::Paillier, BenchScheme::ElGamal],
        seed: 9,
        ..BenchConfig::default()
    };
    let report = sweep_key_size(&sizes, &config).map_err(|e| e.to_string())?;
    let mut shape = Vec::new();
    for &scheme in &config.schemes {
        for &op in &config.operations {
            let series: Vec<&TimingRecord> = sizes
                .iter()
                .map(|&b| {
                    report
                        .records
                        .iter()
                        .find(|r| r.scheme == scheme && r.operation == op && r.key_bits == Some(b))
                        .expect("record for every size")
                })
                .collect();
            for pair in series.windows(2) {
                check(majority_increasing(pair[0], pair[1]), || {
                    format!(
                        "{scheme} {op} not increasing from {:?} to {:?} bits",
                        pair[0].key_bits, pair[1].key_bits
                    )
                })?;
            }
            let means: Vec<String> = series
                .iter()
                .map(|r| format!("{:.2e}", r.mean_ns))
                .collect();
            shape.push(format!("{scheme} {op} [{}] ns", means.join(" < ")));
        }
    }

    let ratios = run_benchmark(&BenchConfig {
        seed: 10,
        ..BenchConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let mut smallest = f64::INFINITY;
    for r in ratios
        .records
        .iter()
        .filter(|r| r.scheme != BenchScheme::Plaintext)
    {
        let ratio = r.ratio.ok_or("missing ratio")?;
        check(ratio > 1e3, || {
            format!(
                "{} {} ratio {ratio:.0} is not above 1000",
                r.scheme, r.operation
            )
        })?;
        smallest = smallest.min(ratio);
    }
    Ok(format!(
        "{}; smallest homomorphic ratio {smallest:.0} ({:.1}s)",
        shape.join("; "),
        start.elapsed().as_secs_f64()
    ))
}

fn scenario_estimator() -> Outcome {
    let plan = build_plan(&assign_schemes(&parse_expression("(a*b)+(c*d)").unwrap()));
    let mut table = TimingTable::new("synthetic");
    for scheme in ["paillier", "elgamal"] {
        for action in [
            "encrypt",
            "decrypt",
            "add",
            "sub",
            "mul",
            "div",
            "scalar_mul",
        ] {
            table.insert(scheme, action, 1.0).unwrap();
        }
    }
    let all = estimate_scenario_cost(&count_operations(&plan, SourceEncryption::Included), &table)
        .unwrap();
    let pre = estimate_scenario_cost(
        &count_operations(&plan, SourceEncryption::PreEncrypted),
        &table,
    )
    .unwrap();
    check(all == 12.0 && pre == 8.0, || {
        format!("estimates {all} and {pre}")
    })?;

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("table.csv");
    let mut rows = String::from("scheme,operation,key_bits,iterations,repeats,mean_ns,ratio\n");
    for scheme in ["paillier", "elgamal"] {
        for action in ["encrypt", "decrypt", "add", "mul"] {
            rows.push_str(&format!("{scheme},{action},1024,1,1,1000000,\n"));
        }
    }
    std::fs::write(&csv, rows).unwrap();
    let run = |extra: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_phemu"))
            .args(["estimate", "(a*b)+(c*d)", "--table"])
            .arg(&csv)
            .args(extra)
            .output()
            .unwrap();
        String::from_utf8_lossy(&out.stdout)
            .lines()
            .last()
            .unwrap_or_default()
            .to_string()
    };
    let (cli_all, cli_pre) = (run(&[]), run(&["--pre-encrypted"]));
    check(
        cli_all == "total_ns 12000000" && cli_pre == "total_ns 8000000",
        || format!("cli printed `{cli_all}` and `{cli_pre}`"),
    )?;
    Ok("12 units, 8 with pre-encrypted inputs (library and CLI)".into())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "homomorphic correctness at 1024 bits",
            homomorphic_correctness,
        ),
        ("staged plan for (a+b)*(c+d)", staged_plan),
        ("worked two's-complement example", worked_twos_complement),
        ("ratio arithmetic", ratio_arithmetic),
        ("emulation equivalence", emulation_equivalence),
        ("overflow fidelity", overflow_fidelity),
        ("key-size sweep shape", sweep_shape),
        ("scenario estimator", scenario_estimator),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (index, (name, criterion)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|payload| {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {message}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", index + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", index + 1);
            }
        }
    }
    drop(panic::take_hook());
    if failed > 0 {
        println!("{failed} of {} acceptance criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} acceptance criteria passed", criteria.len());
}
