//! `dbar`: runs the verification suites of `dbar-core` from a TOML config.
//!
//! Exit status: 0 when every requested suite passes, 1 when one fails or
//! errors, 2 on a bad command line or config.

mod config;
mod report;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::Config;

/// Environment variable sizing the worker pool.
const THREADS_ENV: &str = "DBAR_THREADS";

#[derive(Parser, Debug)]
#[command(name = "dbar", version, about = "Henkin dbar-solver experiments and verification suites")]
struct Cli {
    /// TOML config; every key has a default.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the suites listed under `suites` in the config.
    Run,
    /// F / F* round-trip table, modulus tables and asymptotic fits.
    Profile,
    /// Evaluate the solution on a grid of the slice y1 = y2 = 0.
    Solve,
    Verify {
        #[arg(value_enum)]
        which: Verify,
    },
    Probe {
        #[arg(value_enum)]
        which: Probe,
    },
    /// Empirical f-Holder constant of a computed solution.
    Holder,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Verify {
    Kernel,
    Bounds,
    Hl,
    Levi,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Probe {
    Gradient,
    Supnorm,
}

fn suite_list(cmd: &Cmd, cfg: &Config) -> Vec<String> {
    let one = |s: &str| vec![s.to_string()];
    match cmd {
        Cmd::Run => cfg.suites.clone(),
        Cmd::Profile => one("profile"),
        Cmd::Solve => one("solve"),
        Cmd::Verify { which } => one(match which {
            Verify::Kernel => "verify.kernel",
            Verify::Bounds => "verify.bounds",
            Verify::Hl => "verify.hl",
            Verify::Levi => "verify.levi",
        }),
        Cmd::Probe { which } => one(match which {
            Probe::Gradient => "probe.gradient",
            Probe::Supnorm => "probe.supnorm",
        }),
        Cmd::Holder => one("holder"),
    }
}

fn load(cli: &Cli) -> anyhow::Result<Config> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol {
        cfg.tol = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        dbar_core::par::init_threads(n)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let list = suite_list(&cli.cmd, &cfg);
    let mut ok = true;
    for name in &list {
        match suites::run(name, &cfg) {
            Ok(out) => {
                if let Err(e) = write_all(&cfg.out, &out.files) {
                    eprintln!("{name}: cannot write outputs: {e:#}");
                    return ExitCode::from(1);
                }
                println!("{} {name}", if out.report.pass { "PASS" } else { "FAIL" });
                ok &= out.report.pass;
            }
            Err(e) => {
                println!("FAIL {name}");
                eprintln!("{name}: {e:#}");
                ok = false;
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn write_all(dir: &std::path::Path, files: &[(String, String)]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}
