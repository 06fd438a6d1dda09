use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use heteroclinic::cli::{apply_overrides, parse_config, run, EXIT_ERROR};

/// Computes a heteroclinic connection u'' = h(x) ∇W(u) by constrained
/// minimization and writes the profile, a JSON report and plot data.
#[derive(Parser, Debug)]
#[command(name = "heteroclinic", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override a configuration entry, e.g. `solver.L=8` (repeatable).
    #[arg(long = "override", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Also solve with h replaced by h_inf and report the energy gap.
    #[arg(long)]
    compare_asymptotic: bool,
    /// Also run the scalar shooting solver and report the sup-norm gap.
    #[arg(long)]
    oracle: bool,
    /// Single-threaded, byte-reproducible run.
    #[arg(long)]
    deterministic: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let code = match load(&args) {
        Ok(cfg) => run(&cfg),
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}

fn load(args: &Args) -> Result<heteroclinic::cli::RunConfig, String> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let text = apply_overrides(&text, &args.overrides).map_err(|e| e.to_string())?;
    let mut cfg = parse_config(&text).map_err(|e| e.to_string())?;
    cfg.deterministic |= args.deterministic;
    cfg.diagnostics.oracle |= args.oracle;
    cfg.diagnostics.compare_asymptotic |= args.compare_asymptotic;
    Ok(cfg)
}
