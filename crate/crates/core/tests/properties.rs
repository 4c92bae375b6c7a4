//! Property suites over values, rewriting, tables and whole programs.

mod common;

use common::props;
use mlq::harness::geomean;
use proptest::prelude::*;

fn ok(result: Result<u64, String>) -> u64 {
    result.unwrap_or_else(|e| panic!("{e}"))
}

#[test]
fn word_roundtrip_is_bit_exact() {
    assert!(ok(props::word_roundtrip(100_000)) >= 100_000);
}

#[test]
fn box_roundtrip_restores_heap() {
    assert!(ok(props::box_roundtrip(20_000)) >= 20_000);
}

#[test]
fn quicken_rewrites_one_cell() {
    ok(props::quicken_locality(5_000));
}

#[test]
fn ancestry_survives_interleavings() {
    ok(props::ancestor_consistency(1_000));
}

#[test]
fn derivative_tables_are_bijective() {
    ok(props::table_bijectivity());
}

#[test]
fn random_programs_agree_across_tiers() {
    ok(props::random_programs(300));
}

proptest! {
    #[test]
    fn geomean_ignores_order(mut xs in prop::collection::vec(1e-6f64..1e3, 1..20), seed in any::<u64>()) {
        let before = geomean(&xs);
        let n = xs.len();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            xs.swap(i, (state >> 33) as usize % (i + 1));
        }
        let after = geomean(&xs);
        prop_assert!((before - after).abs() <= 1e-12 * before.abs());
    }
}
