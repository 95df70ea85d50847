//! Staged evaluation against a direct rational evaluation of the same tree.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use phemu_core::elgamal::ElGamalKeyPair;
use phemu_core::paillier::PaillierKeyPair;
use phemu_core::planner::{
    assign_schemes, assign_schemes_with, build_plan, execute_plan, parse_expression, ExecMode,
    PlanOptions,
};
use phemu_core::CodecParams;
use proptest::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

const K: u32 = 4;

fn keys() -> &'static (PaillierKeyPair, ElGamalKeyPair) {
    static KEYS: OnceLock<(PaillierKeyPair, ElGamalKeyPair)> = OnceLock::new();
    KEYS.get_or_init(|| {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let codec = CodecParams::new(K, 128).unwrap();
        (
            PaillierKeyPair::generate(512, codec, &mut rng).unwrap(),
            ElGamalKeyPair::generate(512, codec, &mut rng).unwrap(),
        )
    })
}

#[derive(Debug, Clone)]
enum Tree {
    Var(usize),
    Lit(i64),
    Op(char, Box<Tree>, Box<Tree>),
}

impl Tree {
    fn render(&self) -> String {
        match self {
            Tree::Var(i) => format!("x{i}"),
            Tree::Lit(n) => n.to_string(),
            Tree::Op(op, l, r) => format!("({} {op} {})", l.render(), r.render()),
        }
    }

    /// Every node value, or `None` on division by zero.
    fn eval(&self, vars: &[i64], out: &mut Vec<BigRational>) -> Option<BigRational> {
        let v = match self {
            Tree::Var(i) => BigRational::from_integer(vars[*i].into()),
            Tree::Lit(n) => BigRational::from_integer((*n).into()),
            Tree::Op(op, l, r) => {
                let a = l.eval(vars, out)?;
                let b = r.eval(vars, out)?;
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    _ if b.is_zero() => return None,
                    _ => a / b,
                }
            }
        };
        out.push(v.clone());
        Some(v)
    }
}

fn fits(v: &BigRational) -> bool {
    let scale = BigInt::from(10u32).pow(K);
    (v * BigRational::from_integer(scale)).is_integer()
        && v.abs() < BigRational::from_integer(10_000.into())
}

fn arb_tree() -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![
        3 => (0usize..6).prop_map(Tree::Var),
        1 => (1i64..10).prop_map(Tree::Lit),
    ];
    leaf.prop_recursive(3, 8, 2, |inner| {
        (
            prop::sample::select(&['+', '-', '*', '/'][..]),
            inner.clone(),
            inner,
        )
            .prop_map(|(op, l, r)| Tree::Op(op, Box::new(l), Box::new(r)))
    })
}

fn run(text: &str, vars: &[i64], options: PlanOptions, seed: u64) -> BigRational {
    let (paillier, elgamal) = keys();
    let plan = build_plan(&assign_schemes_with(
        &parse_expression(text).unwrap(),
        options,
    ));
    let bindings: BTreeMap<String, BigRational> = vars
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("x{i}"), BigRational::from_integer((*v).into())))
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    execute_plan(
        &plan,
        &bindings,
        paillier,
        elgamal,
        ExecMode::Checked,
        &mut rng,
    )
    .unwrap_or_else(|e| panic!("{text} with {vars:?}: {e}"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn staged_evaluation_is_exact(
        tree in arb_tree(),
        vars in prop::collection::vec(-20i64..=20, 6),
        scalar in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mut values = Vec::new();
        let expected = tree.eval(&vars, &mut values);
        prop_assume!(expected.is_some() && values.iter().all(fits));
        let got = run(&tree.render(), &vars, PlanOptions { scalar_literals: scalar }, seed);
        prop_assert_eq!(got, expected.unwrap());
    }
}

#[test]
fn division_by_zero_is_reported() {
    let (paillier, elgamal) = keys();
    let plan = build_plan(&assign_schemes(&parse_expression("a / (b - b)").unwrap()));
    let bindings = BTreeMap::from([
        ("a".to_string(), BigRational::from_integer(1.into())),
        ("b".to_string(), BigRational::from_integer(3.into())),
    ]);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let err = execute_plan(
        &plan,
        &bindings,
        paillier,
        elgamal,
        ExecMode::Checked,
        &mut rng,
    )
    .unwrap_err();
    assert!(matches!(err, phemu_core::Error::DivisionByZero), "{err}");
}
