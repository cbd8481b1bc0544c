use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cocrn_cli::commands::{
    cmd_analyze, cmd_simulate, cmd_sweep, cmd_validate, CliResult, SimFlags, EXIT_USAGE,
};

#[derive(Parser)]
#[command(
    name = "cocrn",
    version,
    about = "Stable throughput of cooperative cognitive radio networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic PU/SU throughput, stability and delay for one configuration.
    Analyze {
        config: PathBuf,
        /// Include the protocol flow-graph branch gains.
        #[arg(long)]
        dump_gains: bool,
        /// Replace q by its grid optimum before reporting.
        #[arg(long)]
        optimize_q: bool,
    },
    /// Evaluate a sweep spec and emit CSV.
    Sweep {
        spec: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Slot-level simulation compared with the analytic values.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value_t = SimFlags::default().slots)]
        slots: u64,
        #[arg(long, default_value_t = SimFlags::default().warmup)]
        warmup: u64,
        #[arg(long, default_value_t = SimFlags::default().seed)]
        seed: u64,
        /// Keep the PU queue always backlogged.
        #[arg(long)]
        saturated: bool,
        #[arg(long, default_value_t = SimFlags::default().replications)]
        replications: u32,
        #[arg(long, default_value_t = SimFlags::default().batches)]
        batches: u32,
        /// Let SUs that overhear an assisted retransmission become relays.
        #[arg(long)]
        join_mid_packet: bool,
        /// Print the first N slots of replication 0 to stderr.
        #[arg(long, value_name = "N")]
        trace: Option<u64>,
    },
    /// Run the validation battery and print a CSV table.
    Validate {
        /// `quick` or `full`.
        #[arg(default_value = "quick")]
        level: String,
    },
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Analyze {
            config,
            dump_gains,
            optimize_q,
        } => cmd_analyze(&config, dump_gains, optimize_q),
        Command::Sweep { spec, out } => cmd_sweep(&spec, out.as_deref()),
        Command::Simulate {
            config,
            slots,
            warmup,
            seed,
            saturated,
            replications,
            batches,
            join_mid_packet,
            trace,
        } => {
            let flags = SimFlags {
                slots,
                warmup,
                seed,
                saturated,
                replications,
                batches,
                join_mid_packet,
                trace,
            };
            cmd_simulate(&config, &flags)
        }
        Command::Validate { level } => cmd_validate(&level),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            let _ = std::io::stdout().flush();
            eprint!("{}", out.stderr);
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
