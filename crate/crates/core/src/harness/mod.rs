//! Running programs, the benchmark suite and reports.

mod report;
mod suite;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::absint;
use crate::bytecode::{disassemble, Module};
use crate::frontend::{self, FrontendError};
use crate::interp::{AuditReport, Tier, Vm, VmConfig, VmError};
use crate::values::RuntimeCounters;

pub use report::{markdown_report, structured_report};
pub use suite::{scaled_size, suite_programs, Benchmark, BENCHMARKS};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error("{benchmark}: {tier} output digest {got} differs from baseline {expected}")]
    DigestMismatch { benchmark: String, tier: Tier, expected: String, got: String },
    #[error("{benchmark} failed at {tier}: {error}")]
    BenchmarkFailed { benchmark: String, tier: Tier, error: VmError },
    #[error("unknown benchmark '{0}'")]
    UnknownBenchmark(String),
    #[error("reps must be at least 1")]
    NoReps,
}

/// Everything observable about one program execution.
pub struct RunOutcome {
    pub output: String,
    pub error: Option<VmError>,
    /// Counters at the end of execution, before teardown.
    pub counters: RuntimeCounters,
    /// Wall time of the interpretation phase in seconds.
    pub seconds: f64,
    /// Values still live after teardown (0 unless references leaked).
    pub leaked: usize,
    pub audit: AuditReport,
    pub vm: Vm,
}

/// Execute a compiled module. Timing excludes parsing and compilation.
pub fn run_module(module: Module, config: VmConfig) -> RunOutcome {
    let mut vm = Vm::new(module, config);
    let t = Instant::now();
    let result = vm.run_main();
    let seconds = t.elapsed().as_secs_f64();
    let counters = vm.snapshot_counters();
    let output = vm.take_output();
    let teardown = vm.teardown();
    let error = result.err().or(teardown.err());
    RunOutcome {
        output,
        error,
        counters,
        seconds,
        leaked: vm.heap.live(),
        audit: vm.audit_report().clone(),
        vm,
    }
}

pub fn run_source(src: &str, config: VmConfig) -> Result<RunOutcome, FrontendError> {
    Ok(run_module(frontend::compile_source(src)?, config))
}

pub fn digest(output: &str) -> String {
    Sha256::digest(output.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// exp(mean(ln t)).
pub fn geomean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "geomean of an empty set");
    (xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp()
}

/// Post-run listing of every function's instructions.
pub fn disassembly(vm: &Vm) -> String {
    let mut s = String::new();
    for code in &vm.functions {
        s.push_str(&format!("== {} ==\n", code.name));
        s.push_str(&disassemble(code));
    }
    s
}

/// Identified sequences per function: the registered ones at the mlq tier,
/// otherwise what the analysis finds on the current instructions.
pub fn sequence_dump(vm: &Vm) -> String {
    let mut s = String::new();
    for code in &vm.functions {
        let seqs = if vm.config.tier == Tier::Mlq { code.sequences.clone() } else { absint::propagate(code) };
        s.push_str(&absint::dump(code, &seqs));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub benchmark: String,
    pub tier_config: Tier,
    pub reps: usize,
    pub wall_times: Vec<f64>,
    pub geomean_time: f64,
    pub counters: RuntimeCounters,
    pub output_digest: String,
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub benchmarks: Vec<String>,
    pub tiers: Vec<Tier>,
    pub reps: usize,
    pub size_scale: f64,
    pub mlq_threshold: u64,
}

impl Default for BenchOptions {
    fn default() -> BenchOptions {
        BenchOptions {
            benchmarks: BENCHMARKS.iter().map(|b| b.name.to_string()).collect(),
            tiers: Tier::ALL.to_vec(),
            reps: 10,
            size_scale: 1.0,
            mlq_threshold: 2,
        }
    }
}

/// Run every benchmark at every tier. Timings are only reported once all
/// tiers produced the baseline output.
pub fn bench(options: &BenchOptions) -> Result<Vec<BenchResult>, HarnessError> {
    bench_with_progress(options, |_| {})
}

pub fn bench_with_progress(
    options: &BenchOptions,
    mut progress: impl FnMut(&BenchResult),
) -> Result<Vec<BenchResult>, HarnessError> {
    if options.reps == 0 {
        return Err(HarnessError::NoReps);
    }
    let mut results = Vec::new();
    for name in &options.benchmarks {
        let b = suite::find(name).ok_or_else(|| HarnessError::UnknownBenchmark(name.clone()))?;
        let module = frontend::compile_source(b.source)?;
        let size = scaled_size(b, options.size_scale);
        let mut reference: Option<String> = None;
        let mut times = vec![Vec::with_capacity(options.reps); options.tiers.len()];
        let mut last = vec![None; options.tiers.len()];
        // tiers alternate within each rep so machine drift affects all alike
        for _ in 0..options.reps {
            for (t, &tier) in options.tiers.iter().enumerate() {
                let mut config = VmConfig::new(tier);
                config.size = Some(size);
                config.mlq_threshold = options.mlq_threshold;
                let out = run_module(module.clone(), config);
                if let Some(error) = out.error {
                    return Err(HarnessError::BenchmarkFailed { benchmark: name.clone(), tier, error });
                }
                let d = digest(&out.output);
                match &reference {
                    None => reference = Some(d.clone()),
                    Some(expected) if *expected != d => {
                        return Err(HarnessError::DigestMismatch {
                            benchmark: name.clone(),
                            tier,
                            expected: expected.clone(),
                            got: d,
                        })
                    }
                    Some(_) => {}
                }
                times[t].push(out.seconds.max(1e-9));
                last[t] = Some((out.counters, d));
            }
        }
        for ((&tier, times), last) in options.tiers.iter().zip(times).zip(last) {
            let (counters, output_digest) = last.expect("reps >= 1");
            let r = BenchResult {
                benchmark: name.clone(),
                tier_config: tier,
                reps: options.reps,
                geomean_time: geomean(&times),
                wall_times: times,
                counters,
                output_digest,
            };
            progress(&r);
            results.push(r);
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geomean_definition() {
        assert!((geomean(&[2.0, 8.0]) - 4.0).abs() < 1e-12);
        assert!((geomean(&[3.0]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(digest(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn run_prints_sum() {
        let out = run_source("def sum(a, b): return a + b\nprint(sum(3, 4))", VmConfig::new(Tier::Baseline))
            .unwrap();
        assert_eq!(out.output, "7\n");
        assert!(out.error.is_none());
        assert_eq!(out.leaked, 0);
    }
}
