use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mlq::bytecode::disassemble_with_constants;
use mlq::frontend;
use mlq::harness::{self, BenchOptions, BENCHMARKS};
use mlq::interp::{Tier, VmConfig};

#[derive(Parser)]
#[command(name = "mlq", version, about = "Run guest programs on a multi-level quickening VM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a program.
    Run {
        file: PathBuf,
        #[arg(long, default_value = "mlq")]
        tier: Tier,
        /// Append the runtime counters.
        #[arg(long)]
        stats: bool,
        /// Print the disassembly after execution.
        #[arg(long)]
        disasm_after: bool,
        /// Print the identified sequences with their types.
        #[arg(long)]
        dump_sequences: bool,
        /// Call count at which a function is analyzed.
        #[arg(long, default_value_t = 2)]
        mlq_threshold: u64,
        /// Cap the tier at inca.
        #[arg(long)]
        no_mlq: bool,
        /// Value returned by size().
        #[arg(long)]
        size: Option<i64>,
    },
    /// Run the benchmark suite at every tier.
    Bench {
        /// "all" or a comma-separated list of benchmark names.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 1.0)]
        size_scale: f64,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
    /// Print the compiled bytecode.
    Disasm { file: PathBuf },
}

fn read(file: &PathBuf) -> Result<String, String> {
    std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run { file, tier, stats, disasm_after, dump_sequences, mlq_threshold, no_mlq, size } => {
            let src = read(&file)?;
            let module = frontend::compile_source(&src).map_err(|e| format!("{}:{e}", file.display()))?;
            let tier = if no_mlq && tier == Tier::Mlq { Tier::Inca } else { tier };
            let mut config = VmConfig::new(tier);
            config.mlq_threshold = mlq_threshold;
            config.size = size;
            let out = harness::run_module(module, config);
            print!("{}", out.output);
            if disasm_after {
                print!("{}", harness::disassembly(&out.vm));
            }
            if dump_sequences {
                print!("{}", harness::sequence_dump(&out.vm));
            }
            if stats {
                let c = out.counters;
                println!("-- counters ({tier}, {:.6}s)", out.seconds);
                println!("dyn_dispatches {}", c.dyn_dispatches);
                println!("box_allocs {}", c.box_allocs);
                println!("rc_ops {}", c.rc_ops);
                println!("guard_misses {}", c.guard_misses);
                println!("quicken_rewrites {}", c.quicken_rewrites);
                println!("deopt_events {}", c.deopt_events);
            }
            match out.error {
                Some(e) => Err(e.to_string()),
                None => Ok(()),
            }
        }
        Command::Bench { suite, reps, size_scale, format } => {
            let benchmarks = if suite == "all" {
                BENCHMARKS.iter().map(|b| b.name.to_string()).collect()
            } else {
                suite.split(',').map(|s| s.trim().to_string()).collect()
            };
            let options = BenchOptions { benchmarks, reps, size_scale, ..BenchOptions::default() };
            let results = harness::bench_with_progress(&options, |r| {
                eprintln!("{} {}: {:.6}s", r.benchmark, r.tier_config, r.geomean_time)
            })
            .map_err(|e| e.to_string())?;
            match format {
                Format::Md => print!("{}", harness::markdown_report(&results)),
                Format::Structured => println!("{}", harness::structured_report(&results)),
            }
            Ok(())
        }
        Command::Disasm { file } => {
            let src = read(&file)?;
            let module = frontend::compile_source(&src).map_err(|e| format!("{}:{e}", file.display()))?;
            for code in &module.functions {
                println!("== {} ==", code.name);
                print!("{}", disassemble_with_constants(code));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
