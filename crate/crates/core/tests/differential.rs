//! Differential testing: every corpus program must print the same bytes at
//! every tier, under every configuration, with a balanced heap.

mod common;

use common::{corpus, refcount_imbalance, run, run_at, transcript};
use mlq::interp::{Tier, VmConfig};

#[test]
fn corpus_is_large_enough() {
    assert!(corpus().len() >= 20, "{} programs", corpus().len());
}

#[test]
fn tiers_agree_and_heaps_balance() {
    for p in corpus() {
        let expected = transcript(&run_at(&p, Tier::Baseline));
        for tier in Tier::ALL {
            let out = run_at(&p, tier);
            assert_eq!(transcript(&out), expected, "{} at {tier}", p.name);
            if let Some(e) = refcount_imbalance(&out) {
                panic!("{} at {tier}: {e}", p.name);
            }
        }
    }
}

#[test]
fn audit_finds_no_violations() {
    for p in corpus() {
        let expected = transcript(&run_at(&p, Tier::Baseline));
        for tier in [Tier::Inca, Tier::Mlq] {
            let mut config = VmConfig::new(tier);
            config.audit = true;
            let out = run(&p, config);
            assert_eq!(transcript(&out), expected, "{} at {tier} under audit", p.name);
            assert!(out.audit.violations.is_empty(), "{}: {:?}", p.name, out.audit.violations);
            assert!(refcount_imbalance(&out).is_none(), "{} under audit", p.name);
        }
    }
}

#[test]
fn audit_actually_checks() {
    let p = corpus().into_iter().find(|p| p.name == "spectralnorm").expect("benchmark");
    let mut config = VmConfig::new(Tier::Mlq);
    config.audit = true;
    let report = run(&p, config).audit;
    assert!(report.guard_checks > 0);
    assert!(report.sequence_checks > 0);
    assert!(report.depth_checks > 0);
    // Analysis results are compared against concrete tags at tier 1.
    let mut config = VmConfig::new(Tier::Inca);
    config.audit = true;
    let report = run(&p, config).audit;
    assert!(report.absint_checks > 0);
    assert!(report.guard_checks > 0);
}

#[test]
fn sequence_runner_matches_shared_stack_execution() {
    for p in corpus() {
        let fast = run_at(&p, Tier::Mlq);
        let mut config = VmConfig::new(Tier::Mlq);
        config.audit = true;
        let audited = run(&p, config);
        assert_eq!(transcript(&fast), transcript(&audited), "{}", p.name);
        assert_eq!(fast.counters, audited.counters, "{}", p.name);
    }
}

#[test]
fn runs_are_deterministic() {
    for p in corpus() {
        for tier in Tier::ALL {
            let a = run_at(&p, tier);
            let b = run_at(&p, tier);
            assert_eq!(transcript(&a), transcript(&b), "{} at {tier}", p.name);
            assert_eq!(a.counters, b.counters, "{} at {tier}", p.name);
        }
    }
}

#[test]
fn tuning_parameters_do_not_change_output() {
    for p in corpus() {
        let expected = transcript(&run_at(&p, Tier::Baseline));
        for (threshold, miss_limit, max_deopts) in [(1, 1, 0), (1, 8, 2), (5, 2, 1), (50, 100, 10)] {
            let mut config = VmConfig::new(Tier::Mlq);
            config.mlq_threshold = threshold;
            config.miss_limit = miss_limit;
            config.max_deopts = max_deopts;
            let out = run(&p, config);
            assert_eq!(
                transcript(&out),
                expected,
                "{} with threshold {threshold}, miss limit {miss_limit}, max deopts {max_deopts}",
                p.name
            );
            assert!(refcount_imbalance(&out).is_none(), "{}", p.name);
        }
    }
}

#[test]
fn higher_tiers_do_less_work() {
    for p in corpus().iter().take(6) {
        let base = run_at(p, Tier::Baseline).counters;
        let mlq = run_at(p, Tier::Mlq).counters;
        assert!(mlq.dyn_dispatches <= base.dyn_dispatches, "{}", p.name);
        assert!(mlq.box_allocs <= base.box_allocs, "{}", p.name);
    }
}
