use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use probpga::exec::{sample_many, Service, ServiceRegistry};
use probpga::projection::{project_full, ProjectionOptions, ServiceStyle};
use probpga::semantics::{
    absorption, apply_environment, bisimilar, build_pts, expected_steps, trace_distribution, Environment,
};
use probpga::syntax::{build_random_assignment, desugar_prchoice, eliminate_units, normalize, parse, print};
use probpga::{Instruction, InstructionSequence, Rational, Term};

#[derive(Parser)]
#[command(name = "probpga", version, about = "Probabilistic instruction sequences: projection, exact analysis, simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Bisim,
    Trace,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a file parses and summarize it.
    Parse { file: PathBuf },
    /// Print the program as parsed.
    Print { file: PathBuf },
    /// Print the canonical form (choices and units translated away).
    Normalize { file: PathBuf },
    /// Run the projection passes; the program goes to stdout, one report per pass to stderr.
    Project {
        file: PathBuf,
        /// Comma-separated pass names, in pipeline order: desugar, units, normalize,
        /// jumps-unbounded, jumps-bounded, fair-coin, services.
        #[arg(long)]
        passes: Option<String>,
        #[arg(long, default_value = "perq")]
        service_style: ServiceStyle,
    },
    /// Exact trace distribution, absorption probabilities and expected steps.
    Analyze {
        file: PathBuf,
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// Exit 0 if the programs are equivalent, 3 if not.
    Equiv {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, value_enum, default_value = "bisim")]
        mode: Mode,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        /// Reply model; for bisimulation, omitted means replies are left open.
        #[arg(long)]
        env: Option<PathBuf>,
    },
    /// Seeded runs, counted by trace and outcome.
    Simulate {
        file: PathBuf,
        /// Without a registry, every basic instruction replies True.
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        runs: u64,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
    },
    /// Print the random assignment of one of `x.set_1 .. x.set_k`.
    RandomAssign { x: String, k: usize },
}

enum Failure {
    Invalid(String),
    NotEquivalent,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load_term(path: &Path) -> Result<Term, Failure> {
    parse(&read(path)?).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

/// Choices and units translated away, in canonical form.
fn load(path: &Path) -> Result<InstructionSequence, Failure> {
    let t = load_term(path)?;
    Ok(normalize(&eliminate_units(&desugar_prchoice(&t)?)?)?)
}

fn load_env(path: Option<&Path>) -> Result<Environment, Failure> {
    match path {
        None => Ok(Environment::default()),
        Some(p) => Environment::parse(&read(p)?).map_err(|e| Failure::Invalid(format!("{}: {e}", p.display()))),
    }
}

fn fraction(q: &Rational) -> String {
    format!("{} ({})", q.to_fraction_string(), q.to_decimal_string(6))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotEquivalent) => ExitCode::from(3),
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Parse { file } => {
            let t = load_term(&file)?;
            let n = t.instructions().map_or(0, |v| v.len());
            println!(
                "ok: {n} instructions{}{}{}",
                if t.contains_rep() { ", repetition" } else { "" },
                if t.contains_units() { ", unit instructions" } else { "" },
                if t.contains_choice() { ", probabilistic choice" } else { "" },
            );
        }
        Command::Print { file } => println!("{}", print(&load_term(&file)?)),
        Command::Normalize { file } => println!("{}", load(&file)?),
        Command::Project { file, passes, service_style } => {
            let passes = match passes {
                Some(list) => ProjectionOptions::parse_passes(&list)?,
                None => ProjectionOptions::default().passes().to_vec(),
            };
            let opts = ProjectionOptions::new(service_style, passes)?;
            let (out, reports) = project_full(&load_term(&file)?, &opts)?;
            println!("{out}");
            for r in reports {
                eprintln!("{r}");
            }
        }
        Command::Analyze { file, env, depth } => {
            let s = load(&file)?;
            let env = load_env(env.as_deref())?;
            print!("{}", trace_distribution(&build_pts(&s), &env, depth));
            let p = apply_environment(&build_pts(&s), &env);
            let a = absorption(&p)?;
            println!("termination: {}", fraction(&a.terminated));
            println!("inaction: {}", fraction(&a.inaction));
            println!("divergence: {}", fraction(&a.divergence));
            println!("expected steps: {}", expected_steps(&p)?);
        }
        Command::Equiv { left, right, mode, depth, env } => {
            let (l, r) = (load(&left)?, load(&right)?);
            let env = env.as_deref().map(|p| load_env(Some(p))).transpose()?;
            let equal = match mode {
                Mode::Bisim => {
                    let (pl, pr) = match &env {
                        Some(e) => (apply_environment(&build_pts(&l), e), apply_environment(&build_pts(&r), e)),
                        None => (build_pts(&l), build_pts(&r)),
                    };
                    let b = bisimilar(&pl, &pr);
                    if let Some(e) = &b.evidence {
                        println!("not bisimilar: {e}");
                    }
                    b.equivalent
                }
                Mode::Trace => {
                    let env = env.unwrap_or_default();
                    let (dl, dr) = (trace_distribution(&build_pts(&l), &env, depth), trace_distribution(&build_pts(&r), &env, depth));
                    if dl != dr {
                        println!("trace distributions differ at depth {depth}:\n--- {}\n{dl}--- {}\n{dr}", left.display(), right.display());
                    }
                    dl == dr
                }
            };
            if !equal {
                return Err(Failure::NotEquivalent);
            }
            println!("equivalent");
        }
        Command::Simulate { file, registry, seed, runs, max_steps } => {
            let s = load(&file)?;
            let reg = match registry {
                Some(p) => ServiceRegistry::parse(&read(&p)?).map_err(|e| Failure::Invalid(format!("{}: {e}", p.display())))?,
                None => {
                    let mut reg = ServiceRegistry::new();
                    for i in s.instructions() {
                        if let Instruction::Basic(a) | Instruction::PosTest(a) | Instruction::NegTest(a) = i {
                            if a.random_service_probability().is_none() {
                                reg.register(a.service_key(), Service::Constant(true));
                            }
                        }
                    }
                    reg
                }
            }
            .with_random_services(&s);
            for ((labels, outcome), count) in sample_many(&s, &reg, seed, runs, max_steps) {
                let mut parts: Vec<String> = labels.iter().map(ToString::to_string).collect();
                parts.push(outcome.to_string());
                println!("{} : {count} ({:.6})", parts.join(";"), count as f64 / runs as f64);
            }
        }
        Command::RandomAssign { x, k } => println!("{}", print(&build_random_assignment(&x, k)?)),
    }
    Ok(())
}
