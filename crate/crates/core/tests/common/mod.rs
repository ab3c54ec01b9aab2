#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use chaincore::{
    read_situation, Capacity, CharacteristicFunction, MrsSituation, PiecewiseLinearFn, RetailerSpec, Situation,
    SolverConfig, SupplierSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
}

pub fn situation(name: &str) -> Situation {
    read_situation(fixture_path(name)).unwrap().situation
}

fn build(name: &str) -> CharacteristicFunction {
    CharacteristicFunction::build(&situation(name), &SolverConfig::default()).unwrap()
}

/// Example 2: two retailers, two suppliers, capacity 10 everywhere.
pub fn example2() -> &'static CharacteristicFunction {
    static CF: OnceLock<CharacteristicFunction> = OnceLock::new();
    CF.get_or_init(|| build("example2"))
}

/// Example 2 with capacity 5 towards supplier 1, so the suppliers' volumes differ.
pub fn example2_asym() -> &'static CharacteristicFunction {
    static CF: OnceLock<CharacteristicFunction> = OnceLock::new();
    CF.get_or_init(|| build("example2_asym"))
}

/// Two retailers, two suppliers, unbounded production.
pub fn example4() -> &'static CharacteristicFunction {
    static CF: OnceLock<CharacteristicFunction> = OnceLock::new();
    CF.get_or_init(|| build("example4"))
}

/// One retailer and two suppliers with identical costs.
pub fn example5() -> &'static CharacteristicFunction {
    static CF: OnceLock<CharacteristicFunction> = OnceLock::new();
    CF.get_or_init(|| build("example5"))
}

pub fn close(actual: f64, expected: f64, tol: f64) -> bool {
    (actual - expected).abs() <= tol
}

pub fn rel_close(actual: f64, expected: f64, rel: f64) -> bool {
    (actual - expected).abs() <= rel * (1.0 + expected.abs())
}

/// Random situation with `n, m` in 1..=2 that passes validation.
///
/// Prices fall through two pieces to a root in [20, 60]; wholesale prices
/// drop by at most half their value over their first piece, which keeps
/// `q w(q)` nondecreasing; costs are a fixed fraction of the wholesale price.
pub fn random_situation(seed: u64) -> Situation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=2);
    let m = rng.gen_range(1..=2);
    let retailers = (0..n)
        .map(|i| {
            let p0: f64 = rng.gen_range(6.0..12.0);
            let root: f64 = rng.gen_range(20.0..60.0);
            let bend: f64 = rng.gen_range(0.2..0.8) * root;
            let mid: f64 = p0 * rng.gen_range(0.3..0.9) * (1.0 - bend / root) + 1e-3;
            RetailerSpec {
                id: (i + 1).to_string(),
                price: PiecewiseLinearFn::new(vec![(0.0, p0), (bend, mid.min(p0 - 1e-3)), (root, 0.0)]).unwrap(),
            }
        })
        .collect();
    let suppliers = (0..m)
        .map(|j| {
            let w0: f64 = rng.gen_range(2.0..5.0);
            let x1: f64 = rng.gen_range(10.0..40.0);
            let drop: f64 = rng.gen_range(0.0..0.45);
            let share: f64 = rng.gen_range(0.3..0.8);
            let wholesale = PiecewiseLinearFn::new(vec![(0.0, w0), (x1, w0 * (1.0 - drop))]).unwrap();
            let cost = wholesale.scaled(share);
            SupplierSpec {
                id: (j + 1).to_string(),
                wholesale,
                cost,
            }
        })
        .collect();
    let capacity = if rng.gen_bool(0.3) {
        Capacity::Unbounded
    } else {
        Capacity::Bounded(
            (0..n)
                .map(|_| (0..m).map(|_| rng.gen_range(3.0..15.0f64).round()).collect())
                .collect(),
        )
    };
    MrsSituation {
        retailers,
        suppliers,
        capacity,
    }
    .validate()
    .unwrap_or_else(|v| panic!("seed {seed} produced an invalid situation: {v:?}"))
}
