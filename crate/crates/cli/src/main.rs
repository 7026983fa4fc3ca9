//! Command-line driver: config-driven experiment pipelines with
//! machine-readable pass/fail checks.
//!
//! Exit codes: 0 pass, 1 assertion failure in --check mode, 2 usage or
//! config error, 3 numerical failure.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use pipeline::Outcome;

#[derive(Parser)]
#[command(name = "nodalab", version, about = "eigenfunction nodal-set workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Eigenvalues/eigenfunctions of the configured surface
    Spectrum(CommonArgs),
    /// Nodal set extraction, lengths, CSV + SVG charts
    Nodal(CommonArgs),
    /// Geodesic pixel decomposition
    Pixels(CommonArgs),
    /// Dong upper bound per pixel with regularization stability
    Dong(CommonArgs),
    /// Nodal length against sqrt(lambda) across the family
    Scaling(CommonArgs),
    /// Harnack component ratios and Bernstein quotients
    Harnack(CommonArgs),
    /// Weighted Hardy constants (gh sweep + 2-D log variant)
    Hardy(CommonArgs),
    /// Lojasiewicz exponent fits
    Loja(CommonArgs),
    /// Harmonic approximation contraction runs
    Harmapprox(CommonArgs),
    /// Phase-amplitude extraction along rays
    Phase(CommonArgs),
    /// Full pipeline with the aggregate summary
    Run(CommonArgs),
}

#[derive(Parser, Clone)]
struct CommonArgs {
    /// Configuration file (key = value sections); defaults apply if omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports and artifacts
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Fail (exit 1) if any assertion fails
    #[arg(long)]
    check: bool,
    /// Seed for the eigensolver start vector and sampling operations
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Spectrum(a) => ("spectrum", a),
        Command::Nodal(a) => ("nodal", a),
        Command::Pixels(a) => ("pixels", a),
        Command::Dong(a) => ("dong", a),
        Command::Scaling(a) => ("scaling", a),
        Command::Harnack(a) => ("harnack", a),
        Command::Hardy(a) => ("hardy", a),
        Command::Loja(a) => ("loja", a),
        Command::Harmapprox(a) => ("harmapprox", a),
        Command::Phase(a) => ("phase", a),
        Command::Run(a) => ("run", a),
    };

    let (cfg, cfg_text) = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match config::parse(&text) {
                Ok(cfg) => (cfg, text),
                Err(e) => {
                    eprintln!("config error: {e:#}");
                    return ExitCode::from(2);
                }
            },
            Err(e) => {
                eprintln!("cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => {
            let cfg = config::Config::default();
            let text = config::emit(&cfg);
            (cfg, text)
        }
    };

    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("cannot create output directory {}: {e}", args.out.display());
        return ExitCode::from(2);
    }

    let result = match name {
        "spectrum" => pipeline::run_spectrum(&cfg, &args.out, args.seed),
        "nodal" => pipeline::run_nodal(&cfg, &args.out),
        "pixels" => pipeline::run_pixels(&cfg, &args.out),
        "dong" => pipeline::run_dong(&cfg, &args.out),
        "scaling" => pipeline::run_scaling(&cfg, &args.out),
        "harnack" => pipeline::run_harnack(&cfg, &args.out),
        "hardy" => pipeline::run_hardy(&cfg, &args.out),
        "loja" => pipeline::run_loja(&cfg, &args.out, args.seed),
        "harmapprox" => pipeline::run_harmapprox(&cfg, &args.out),
        "phase" => pipeline::run_phase(&cfg, &args.out),
        "run" => pipeline::run_all(&cfg, &args.out, args.seed, &config::explicit_sections(&cfg_text)),
        _ => unreachable!(),
    };

    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let msg = format!("{e:#}");
            if msg.contains("numerical failure") {
                eprintln!("[{name}] {msg}");
                return ExitCode::from(3);
            }
            eprintln!("[{name}] {msg}");
            return ExitCode::from(2);
        }
    };

    if let Err(e) = write_summary(name, args, &cfg_text, &outcome) {
        eprintln!("cannot write summary: {e:#}");
        return ExitCode::from(2);
    }

    for c in &outcome.checks {
        println!(
            "[{}] {}: {} ({})",
            name,
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.detail
        );
    }
    if args.check && !outcome.passed() {
        let failed = outcome.checks.iter().filter(|c| !c.pass).count();
        eprintln!("[{name}] {failed} assertion(s) failed");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn write_summary(
    name: &str,
    args: &CommonArgs,
    cfg_text: &str,
    outcome: &Outcome,
) -> anyhow::Result<()> {
    let mut hasher = Sha256::new();
    hasher.update(cfg_text.as_bytes());
    let config_hash = hex_string(&hasher.finalize());
    let checks: Vec<serde_json::Value> = outcome
        .checks
        .iter()
        .map(|c| {
            serde_json::json!({
                "name": c.name,
                "pass": c.pass,
                "detail": c.detail,
            })
        })
        .collect();
    let summary = serde_json::json!({
        "command": name,
        "provenance": {
            "config_sha256": config_hash,
            "seed": args.seed,
            "version": env!("CARGO_PKG_VERSION"),
        },
        "checks": checks,
        "report": outcome.report,
    });
    std::fs::write(
        args.out.join(format!("{name}_summary.json")),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
