use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::BenchResult;
use crate::interp::Tier;

/// Table of geomean times with speedups relative to the baseline tier.
pub fn markdown_report(results: &[BenchResult]) -> String {
    let mut s = String::new();
    s.push_str("| benchmark | tier | reps | geomean (s) | speedup | dyn_dispatches | box_allocs | rc_ops | guard_misses | quicken_rewrites | deopt_events |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|---|---|\n");
    let baseline: BTreeMap<&str, f64> = results
        .iter()
        .filter(|r| r.tier_config == Tier::Baseline)
        .map(|r| (r.benchmark.as_str(), r.geomean_time))
        .collect();
    for r in results {
        let speedup = baseline
            .get(r.benchmark.as_str())
            .map(|b| format!("{:.3}", b / r.geomean_time))
            .unwrap_or_else(|| "-".into());
        let c = &r.counters;
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.6} | {} | {} | {} | {} | {} | {} | {} |",
            r.benchmark,
            r.tier_config,
            r.reps,
            r.geomean_time,
            speedup,
            c.dyn_dispatches,
            c.box_allocs,
            c.rc_ops,
            c.guard_misses,
            c.quicken_rewrites,
            c.deopt_events
        );
    }
    s
}

/// One JSON record per (benchmark, tier) pair.
pub fn structured_report(results: &[BenchResult]) -> String {
    serde_json::to_string_pretty(results).expect("bench results serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::values::RuntimeCounters;

    fn result(tier: Tier, t: f64) -> BenchResult {
        BenchResult {
            benchmark: "b".into(),
            tier_config: tier,
            reps: 1,
            wall_times: vec![t],
            geomean_time: t,
            counters: RuntimeCounters::default(),
            output_digest: "d".into(),
        }
    }

    #[test]
    fn speedup_normalized_by_baseline() {
        let rs = [result(Tier::Baseline, 2.0), result(Tier::Mlq, 0.5)];
        let md = markdown_report(&rs);
        assert!(md.contains("| b | baseline | 1 | 2.000000 | 1.000 |"), "{md}");
        assert!(md.contains("| b | mlq | 1 | 0.500000 | 4.000 |"), "{md}");
    }

    #[test]
    fn structured_field_names() {
        let json = structured_report(&[result(Tier::Inca, 1.0)]);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let rec = &v[0];
        for key in
            ["benchmark", "tier_config", "reps", "wall_times", "geomean_time", "counters", "output_digest"]
        {
            assert!(rec.get(key).is_some(), "missing {key}");
        }
        assert_eq!(rec["tier_config"], "inca");
        assert!(rec["counters"].get("box_allocs").is_some());
    }
}
