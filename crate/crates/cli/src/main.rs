mod output;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wearsim::trace::WorkloadKind;

#[derive(Debug, Parser)]
#[command(name = "wearsim", version, about = "Trace-driven wear-leveling simulator for non-volatile main memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic trace file.
    Gen(GenArgs),
    /// Replay a trace against the baseline and a leveled configuration.
    Run(RunArgs),
    /// Turn a finished run directory into per-segment histogram CSVs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    kind: WorkloadKind,
    #[arg(long)]
    writes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Trace file to replay.
    #[arg(long, conflicts_with = "kind")]
    pub trace: Option<PathBuf>,
    /// Generate the trace in memory instead of reading one.
    #[arg(long, requires = "writes")]
    pub kind: Option<WorkloadKind>,
    #[arg(long)]
    pub writes: Option<u64>,
    /// Generator seed (also stored as the config seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// `key = value` file, or a report.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub t: Option<u64>,
    #[arg(long)]
    pub step: Option<u64>,
    #[arg(long, overrides_with = "no_coarse")]
    pub coarse: bool,
    #[arg(long)]
    pub no_coarse: bool,
    #[arg(long, overrides_with = "no_fine")]
    pub fine: bool,
    #[arg(long)]
    pub no_fine: bool,
    #[arg(long)]
    pub pool_pages: Option<u64>,
    /// Valid stack bytes assumed when the trace carries no sp updates.
    #[arg(long)]
    pub valid_stack: Option<u64>,
    #[arg(long, default_value = "wearsim-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
    /// `key=v1,v2,...` over config keys; every combination runs in its own
    /// subdirectory. Repeatable.
    #[arg(long)]
    pub sweep: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Bins {
    Linear,
    Log2,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub dir: PathBuf,
    /// Only this segment.
    #[arg(long)]
    pub segment: Option<String>,
    #[arg(long, value_enum, default_value_t = Bins::Linear)]
    pub bins: Bins,
    /// Which wear map to histogram.
    #[arg(long, default_value = "leveled", value_parser = ["leveled", "baseline"])]
    pub wear: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run::cmd_run(a),
        Command::Report(a) => report::cmd_report(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn gen(a: GenArgs) -> anyhow::Result<()> {
    let layout = wearsim::MemoryLayout::default_layout();
    let trace = wearsim::trace::gen_workload(a.kind, a.writes, &layout, a.seed)?;
    output::write_atomic(&a.out, trace.to_text().as_bytes())?;
    let sp = trace.events.len() as u64 - trace.write_count();
    println!("wrote {}: {} events ({} writes, {} sp updates)", a.out.display(), trace.events.len(), trace.write_count(), sp);
    for s in layout.segments() {
        println!("  {:<5} {:#x}..{:#x} ({} pages)", s.kind.name(), s.start, s.end, s.len() / layout.page_size());
    }
    Ok(())
}

/// Usage errors found after parsing still exit with status 2.
pub fn usage_error(msg: impl std::fmt::Display) -> ! {
    use clap::CommandFactory;
    Cli::command().error(clap::error::ErrorKind::ArgumentConflict, msg).exit()
}
