use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mesc::harness::{self, Config};
use mesc::sim::{Policy, Preemption};
use mesc::Error;

#[derive(Parser)]
#[command(name = "mesc", version, about = "Mixed-criticality scheduling with a preemptible accelerator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON configuration file; omitted sections use defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (gen, experiment) or simulation seed (sim).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (analyze, sim) or directory (gen, experiment).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write the per-event trace CSV next to the simulation output.
    #[arg(long, global = true)]
    trace: bool,
    #[arg(long, global = true, value_enum)]
    preemption: Option<PreemptionArg>,
    #[arg(long, global = true, value_enum)]
    policy: Option<PolicyArg>,
    /// Render an SVG chart next to every experiment CSV.
    #[arg(long, global = true)]
    plots: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate task sets.
    Gen,
    /// Response-time analysis of a task-set file.
    Analyze { taskset: PathBuf },
    /// Simulate a task-set file.
    Sim { taskset: PathBuf },
    /// Run the configured sweeps.
    Experiment,
}

#[derive(Clone, Copy, ValueEnum)]
enum PreemptionArg {
    None,
    Limited,
    Instr,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Mesc,
    Amc,
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> mesc::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(p) = cli.preemption {
        cfg.sim.preemption = match p {
            PreemptionArg::None => Preemption::NonPreemptive,
            PreemptionArg::Limited => Preemption::LimitedPreemption,
            PreemptionArg::Instr => Preemption::InstructionLevel,
        };
        cfg.experiment.axis_variant.preemption = cfg.sim.preemption;
    }
    if let Some(p) = cli.policy {
        cfg.sim.policy = match p {
            PolicyArg::Mesc => Policy::Mesc,
            PolicyArg::Amc => Policy::Amc,
        };
        cfg.experiment.axis_variant.policy = cfg.sim.policy;
    }
    let out = cli.out.as_deref();
    match &cli.cmd {
        Cmd::Gen => {
            let master = cli.seed.unwrap_or(cfg.gen.seed);
            for p in harness::cmd_gen(&cfg, master, out.unwrap_or(Path::new("tasksets")))? {
                println!("{}", p.display());
            }
        }
        Cmd::Analyze { taskset } => {
            let mut w = output(out)?;
            harness::cmd_analyze(&cfg, taskset, &mut w)?;
            w.flush()?;
        }
        Cmd::Sim { taskset } => {
            if let Some(s) = cli.seed {
                cfg.sim.seed = s;
            }
            let trace = cli.trace.then(|| match out {
                Some(p) => p.with_extension("trace.csv"),
                None => PathBuf::from("trace.csv"),
            });
            let mut w = output(out)?;
            harness::cmd_sim(&cfg, taskset, &mut w, trace.as_deref())?;
            w.flush()?;
        }
        Cmd::Experiment => {
            let master = cli.seed.unwrap_or(cfg.gen.seed);
            let dir = out.unwrap_or(Path::new("results"));
            for p in harness::cmd_experiment(&cfg, master, dir, cli.plots)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::InvariantViolation { .. }) => {
            eprintln!("internal error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
