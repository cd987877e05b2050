use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netcloak::anonymize::{AnonymityParams, KdmaLevel};
use netcloak::expansion::SamplingKind;
use netcloak::pipeline::{
    run_pipeline, Anonymizer, ExpansionMode, FailureKind, RepairMode, RunConfig,
};
use netcloak::repair::IbgpStrategy;

#[derive(Parser)]
#[command(name = "netcloak", about = "Configuration anonymization through topology expansion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Anonymize a configuration snapshot and repair its routing.
    Anonymize(AnonymizeArgs),
}

#[derive(Args)]
struct AnonymizeArgs {
    /// Input snapshot directory (configs/, hosts/)
    #[arg(long)]
    input: PathBuf,
    /// Output snapshot directory
    #[arg(long)]
    output: PathBuf,
    /// Node addition strategy
    #[arg(long, default_value = "embedding")]
    mode: String,
    /// Number of fake routers to add
    #[arg(long, default_value_t = 0)]
    add_routers: usize,
    /// Router anonymity parameter k_R
    #[arg(long, default_value_t = 2)]
    k_routers: usize,
    /// Host anonymity parameter k_H
    #[arg(long, default_value_t = 2)]
    k_hosts: usize,
    /// Anonymity level: weak | strong
    #[arg(long, default_value = "strong")]
    kdma: String,
    /// Anonymization algorithm: greedy | maxsmt | kda
    #[arg(long, default_value = "greedy")]
    anonymizer: String,
    /// Sampling strategy for sample-connect mode
    #[arg(long, default_value = "rw")]
    sampling: String,
    /// Intra-AS repair method: constraint | iterative
    #[arg(long, default_value = "constraint")]
    repair: String,
    /// iBGP discrepancy strategy: filter-nexthop | block-igp
    #[arg(long, default_value = "filter-nexthop")]
    ibgp_strategy: String,
    /// Directory of GraphML reference topologies
    #[arg(long)]
    reference_dir: Option<PathBuf>,
    /// Deterministic seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON run report here
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_or_exit<T: std::str::FromStr<Err = String>>(value: &str, what: &str) -> T {
    match value.parse() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("invalid {what}: {e}");
            std::process::exit(1);
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Anonymize(args) => {
            let mode: ExpansionMode = parse_or_exit(&args.mode, "--mode");
            let level: KdmaLevel = parse_or_exit(&args.kdma, "--kdma");
            let anonymizer: Anonymizer = parse_or_exit(&args.anonymizer, "--anonymizer");
            let sampling: SamplingKind = parse_or_exit(&args.sampling, "--sampling");
            let repair_mode: RepairMode = parse_or_exit(&args.repair, "--repair");
            let ibgp: IbgpStrategy = parse_or_exit(&args.ibgp_strategy, "--ibgp-strategy");
            let cfg = RunConfig {
                reference_dir: args.reference_dir,
                mode,
                add_routers: args.add_routers,
                params: AnonymityParams {
                    k_routers: args.k_routers,
                    k_hosts: args.k_hosts,
                    kdma_level: level,
                    mul: 1,
                    seed: args.seed,
                },
                anonymizer,
                sampling,
                repair_mode,
                ibgp_strategy: ibgp,
                seed: args.seed,
                report_path: args.report,
                ..RunConfig::new(args.input, args.output)
            };
            match run_pipeline(&cfg) {
                Ok(report) => {
                    println!(
                        "mode={} anonymizer={} adds={}/{} kdma(strong)={} equivalence={} n_r {:.3}->{:.3}",
                        report.mode,
                        report.anonymizer,
                        report.actual_adds,
                        report.requested_adds,
                        report.kdma_check.strong,
                        report.functional_equivalence,
                        report.n_r_before,
                        report.n_r_after,
                    );
                    if report.functional_equivalence {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!(
                            "verification failed: {} original paths missing",
                            report.missing_paths.len()
                        );
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    match e.kind {
                        FailureKind::InfeasibleAnonymity => ExitCode::from(3),
                        FailureKind::SolverTimeout => ExitCode::from(4),
                        FailureKind::Generic => ExitCode::from(1),
                    }
                }
            }
        }
    }
}
