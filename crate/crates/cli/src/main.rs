use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use commands::Context;

/// Quasi-3D thermal model of a spray-cooled stator winding.
#[derive(Debug, Parser)]
#[command(name = "quasitherm", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, created when missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for assembly, solves and sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the cross-section mesh and write it to the output directory.
    Mesh,
    /// Solve the configured case and export probes, sections and a summary.
    Solve,
    /// Solve once per value of current density or heat transfer coefficient.
    Sweep(SweepArgs),
    /// Classify the droplet impact regime of the configured spray.
    SprayClassify(SprayArgs),
    /// Run the validation checks; exit status 0 only when all pass.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// current_density (J) or h_spray (h); overrides `sweep.parameter`.
    #[arg(long)]
    parameter: Option<String>,

    /// Comma-separated values; overrides `sweep.values`.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,

    /// Unit for bare values, e.g. `A/mm2` or `kW/Km2`; SI when omitted.
    #[arg(long)]
    unit: Option<String>,
}

#[derive(Debug, Args)]
pub struct SprayArgs {
    /// Weber number; with --re and --delta classifies directly.
    #[arg(long, requires_all = ["re", "delta"])]
    we: Option<f64>,
    #[arg(long, requires_all = ["we", "delta"])]
    re: Option<f64>,
    /// Film thickness over droplet diameter.
    #[arg(long, requires_all = ["we", "re"])]
    delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Check to run; repeat for several. All checks when omitted.
    #[arg(long = "check")]
    checks: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result =
        Context::new(cli.config.as_deref(), cli.out, cli.threads).and_then(|ctx| {
            match cli.command {
                Command::Mesh => commands::mesh(&ctx),
                Command::Solve => commands::solve(&ctx),
                Command::Sweep(args) => commands::sweep(&ctx, &args),
                Command::SprayClassify(args) => commands::spray_classify(&ctx, &args),
                Command::Validate(args) => commands::validate(&ctx, &args),
            }
        });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn sweep_values_split_on_commas() {
        let cli = Cli::try_parse_from([
            "quasitherm",
            "sweep",
            "--parameter",
            "J",
            "--values",
            "10,20,30",
            "--unit",
            "A/mm2",
        ])
        .unwrap();
        let Command::Sweep(args) = cli.command else {
            panic!()
        };
        assert_eq!(args.values, ["10", "20", "30"]);
    }

    #[test]
    fn spray_flags_come_together() {
        assert!(Cli::try_parse_from(["quasitherm", "spray-classify", "--we", "78"]).is_err());
        assert!(Cli::try_parse_from([
            "quasitherm",
            "spray-classify",
            "--we",
            "78",
            "--re",
            "300",
            "--delta",
            "0.33"
        ])
        .is_ok());
    }
}
