//! `spdg` command-line front-end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "spdg", version, about = "Structure-preserving DG operators and vortex-stream solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Div-curl residuals of a trigonometric or random field.
    ValidateDivcurl(Common),
    /// Grid-refinement study written as `<case>_<N>_conv.csv`.
    Convergence(Common),
    /// Time integration with diagnostics and snapshots.
    Run(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Path to a `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for cell loops.
    #[arg(long, env = "SPDG_THREADS")]
    threads: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", common.config.display())))?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::ValidateDivcurl(c) => {
            let cfg = load(&c)?;
            let r = commands::validate_divcurl(&cfg)?;
            println!(
                "degree {} sp residual {:.3e} tilde residual {:.3e} threshold {:.1e}: {}",
                cfg.degree,
                r.sp,
                r.tilde,
                cfg.threshold,
                if r.passed { "ok" } else { "FAILED" }
            );
            Ok(r.passed)
        }
        Command::Convergence(c) => {
            let cfg = load(&c)?;
            let r = commands::convergence(&cfg)?;
            for row in &r.rows {
                let cols: Vec<String> = row
                    .quantities
                    .iter()
                    .map(|q| {
                        let o = q.order_l1.map_or("-".to_string(), |o| format!("{o:.2}"));
                        format!("{} L1 {:.4e} ({o}) Linf {:.4e}", q.label, q.l1, q.linf)
                    })
                    .collect();
                println!("{:>4} | {} | divcurl {:.2e}", row.n_h, cols.join(" | "), row.divcurl);
            }
            println!("wrote {}", r.csv.display());
            Ok(true)
        }
        Command::Run(c) => {
            let cfg = load(&c)?;
            let r = commands::run(&cfg)?;
            println!(
                "{} steps to t = {} ; max involution residual {:.3e} ; {} snapshots ; diagnostics in {}",
                r.steps,
                r.t,
                r.max_involution,
                r.snapshots.len(),
                r.diagnostics.display()
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
