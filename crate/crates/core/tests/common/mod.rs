//! Helpers shared by the integration suites.

#![allow(dead_code)]

pub mod props;

use std::fs;
use std::path::Path;

use mlq::bytecode::{root, Module, Opcode};
use mlq::frontend::compile_source;
use mlq::harness::{run_module, RunOutcome, BENCHMARKS};
use mlq::interp::{FaultSite, Tier, VmConfig};

/// A guest program of the differential corpus.
#[derive(Clone, Debug)]
pub struct Program {
    pub name: String,
    pub source: String,
}

/// The targeted programs under `tests/programs`, sorted by name.
pub fn targeted_programs() -> Vec<Program> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/programs");
    let mut out: Vec<Program> = fs::read_dir(&dir)
        .expect("tests/programs exists")
        .map(|e| e.expect("readable entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "gl"))
        .map(|p| Program {
            name: p.file_stem().unwrap().to_string_lossy().into_owned(),
            source: fs::read_to_string(&p).expect("readable program"),
        })
        .collect();
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

/// Every benchmark at its default size followed by the targeted programs.
pub fn corpus() -> Vec<Program> {
    let mut out: Vec<Program> = BENCHMARKS
        .iter()
        .map(|b| Program { name: b.name.to_string(), source: b.source.to_string() })
        .collect();
    out.extend(targeted_programs());
    out
}

pub fn compile(p: &Program) -> Module {
    compile_source(&p.source).unwrap_or_else(|e| panic!("{}: {e}", p.name))
}

pub fn run(p: &Program, config: VmConfig) -> RunOutcome {
    run_module(compile(p), config)
}

pub fn run_at(p: &Program, tier: Tier) -> RunOutcome {
    run(p, VmConfig::new(tier))
}

/// Printed output followed by the error that ended the run, if any.
pub fn transcript(out: &RunOutcome) -> String {
    match &out.error {
        Some(e) => format!("{}error: {e}\n", out.output),
        None => out.output.clone(),
    }
}

/// Empty when the heap is balanced after teardown, else a description.
pub fn refcount_imbalance(out: &RunOutcome) -> Option<String> {
    let heap = &out.vm.heap;
    let (live, events, scan) = (heap.live(), heap.outstanding_refs(), heap.scan_refs());
    (live != 0 || events != 0 || scan != 0)
        .then(|| format!("live {live}, increfs - decrefs {events}, scanned refs {scan}"))
}

/// Every guarded tier-2 load (a local read) in the final code of an mlq
/// run: the fault-injection sites of the deoptimization suite.
pub fn tier2_load_sites(p: &Program) -> Vec<FaultSite> {
    let out = run_at(p, Tier::Mlq);
    let mut sites = Vec::new();
    for (function, code) in out.vm.functions.iter().enumerate() {
        for (pc, ins) in code.instructions.iter().enumerate() {
            if ins.op.tier() == 2 && root(ins.op) == Opcode::LoadFast {
                sites.push(FaultSite { function, pc });
            }
        }
    }
    sites
}

/// Run `p` at mlq with one forced guard failure at `site`.
pub fn run_with_fault(p: &Program, site: FaultSite) -> RunOutcome {
    let mut config = VmConfig::new(Tier::Mlq);
    config.fault = Some(site);
    run(p, config)
}

pub fn opcode_names(ops: &[Opcode]) -> Vec<&'static str> {
    ops.iter().map(|o| o.name()).collect()
}
