use bdie_cli::{run, Command, RunConfig, RunOptions};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bdie", version, about = "Exterior Dirichlet problems for div(a grad u) = f by boundary-domain integral equations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration; defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Report directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for power iterations and sampled checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Assembly threads; 0 uses all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the configured problem.
    Solve,
    /// Check identities, equivalence and the remainder split for the configured problem.
    Verify,
    /// Refinement study for a manufactured case.
    Convergence,
    /// Condition numbers across boundary refinements.
    Conditioning,
    /// Kernel, Gauss-identity and jump-relation oracles.
    Selftest {
        /// Reverse the boundary normals (negative control; the Gauss checks must fail).
        #[arg(long, hide = true)]
        flip_normals: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error [config]: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.to_string_lossy().into_owned();
    }
    let (command, opts) = match cli.command {
        Cmd::Solve => (Command::Solve, RunOptions::default()),
        Cmd::Verify => (Command::Verify, RunOptions::default()),
        Cmd::Convergence => (Command::Convergence, RunOptions::default()),
        Cmd::Conditioning => (Command::Conditioning, RunOptions::default()),
        Cmd::Selftest { flip_normals } => (Command::Selftest, RunOptions { flip_normals }),
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
        eprintln!("warning: thread pool already initialized: {e}");
    }
    faer::set_global_parallelism(faer::Par::Seq);
    let out = PathBuf::from(&cfg.output_dir);
    let (code, _) = run(&cfg, command, &out, &opts);
    ExitCode::from(code as u8)
}
