use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optcons::harness::{
    self, graph_report, load_config, oracle_report, run, sweep_k, HarnessError, RunOptions,
    RunReport, Suite,
};

#[derive(Parser)]
#[command(
    name = "optcons",
    version,
    about = "Distributed optimal-consensus simulator and claim checker"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory for traces and reports.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the integrator step.
    #[arg(long)]
    h: Option<f64>,
    /// Print only errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the scenario and write traces.
    Sim(Common),
    /// Terminal metrics and oracle values over a grid of gains.
    SweepK {
        #[command(flatten)]
        common: Common,
        /// Comma-separated gains; defaults to analysis.k_grid.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
    },
    /// Connectivity report for the configured topology.
    CheckGraph(Common),
    /// Global minimum and stationary-set solves.
    Oracle(Common),
    /// Run a verification suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// simulate | verify-thm1 | verify-thm2 | verify-thm34 | audit
        #[arg(long)]
        suite: Suite,
    },
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            out_dir: self.out_dir.clone(),
            seed: self.seed,
            h: self.h,
        }
    }
}

/// Writes a line to stdout, ignoring a closed pipe.
fn out(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_report(report: &RunReport, quiet: bool) {
    if quiet {
        return;
    }
    for c in &report.claims {
        let margin = c
            .margin
            .map(|m| format!(" (margin {m:.3e})"))
            .unwrap_or_default();
        out(&format!(
            "[{}] {}: {}{margin}",
            if c.pass { "PASS" } else { "FAIL" },
            c.id,
            c.detail
        ));
    }
    for a in &report.artifacts {
        out(&format!("wrote {a}"));
    }
    out(&format!("report hash {}", report.report_hash));
}

fn print_json(v: &serde_json::Value, quiet: bool) {
    if !quiet {
        out(&serde_json::to_string_pretty(v).expect("json"));
    }
}

fn execute(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::Sim(c) => {
            let report = run(&load_config(&c.config)?, Suite::Simulate, &c.options())?;
            print_report(&report, c.quiet);
            Ok(report.exit_code())
        }
        Command::Verify { common: c, suite } => {
            let report = run(&load_config(&c.config)?, suite, &c.options())?;
            print_report(&report, c.quiet);
            Ok(report.exit_code())
        }
        Command::SweepK { common: c, k } => {
            let cfg = load_config(&c.config)?;
            let grid = k
                .or_else(|| cfg.analysis.k_grid.clone())
                .ok_or_else(|| HarnessError::Requirement("give --k or analysis.k_grid".into()))?;
            let rows = sweep_k(&cfg, &grid, &c.options())?;
            if !c.quiet {
                let cell =
                    |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
                out("k,terminal_diameter,optimality_gap,oracle_diameter,oracle_error,bound_margin");
                for r in rows {
                    out(&format!(
                        "{},{},{},{},{},{}",
                        r.k,
                        cell(r.terminal_diameter),
                        cell(r.optimality_gap),
                        cell(r.oracle_diameter),
                        cell(r.oracle_error),
                        cell(r.bound_margin)
                    ));
                }
            }
            Ok(harness::EXIT_PASS)
        }
        Command::CheckGraph(c) => {
            print_json(&graph_report(&load_config(&c.config)?)?, c.quiet);
            Ok(harness::EXIT_PASS)
        }
        Command::Oracle(c) => {
            print_json(&oracle_report(&load_config(&c.config)?)?, c.quiet);
            Ok(harness::EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                harness::EXIT_CONFIG
            } else {
                harness::EXIT_PASS
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = execute(cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
