use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use cellfree_core::harness::{
    self, best_alpha_table, convergence_table, emit_json, emit_report, game_trace_table, metrics_vs_k_table,
    per_drop_table, per_ue_table, tradeoff_table, ExperimentConfig, ReportFormat,
};

/// Exit status for runs that hit `max_iterations` without converging.
const EXIT_NONCONVERGED: u8 = 2;

#[derive(Parser)]
#[command(name = "cellfree", version, about = "Game-based uplink power control in cell-free massive MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Game-PAS trajectories (power, potential, per-UE state) on one drop.
    Convergence(RunArgs),
    /// Drop-averaged SE/EE of Game-PAS and full power for each UE count.
    MetricsVsK(RunArgs),
    /// Total SE and EE across the alpha grid.
    Tradeoff(RunArgs),
    /// Print the desk-scale default configuration as TOML.
    DefaultConfig,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `output_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Exit with status 0 even if some game run did not converge.
    #[arg(long)]
    allow_nonconverged: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

impl RunArgs {
    fn load(&self) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
        let mut config = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let out = self.out.clone().unwrap_or_else(|| config.output_dir.clone());
        Ok((config, out))
    }
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn convergence(args: &RunArgs) -> anyhow::Result<usize> {
    let (config, out) = args.load()?;
    let run = harness::run_convergence::<f64>(&config)?;
    let tables = [convergence_table(&run), game_trace_table(&run)];
    report_written(&emit_report(&tables, args.format.into(), &out)?);
    report_written(&[
        emit_json(&run.summaries(), &out, "certificates.json")?,
        emit_json(&cellfree_core::propagation::LayoutSnapshot::new(&run.setup.layout, &run.setup.large), &out, "layout.json")?,
        emit_json(&cellfree_core::association::AssignmentSnapshot::from(&run.setup.assignment), &out, "assignment.json")?,
    ]);
    for s in run.summaries() {
        eprintln!(
            "alpha {}: {:?} after {} rounds, {} updates, epsilon-Nash {}",
            s.alpha, s.termination, s.rounds, s.accepted_updates, s.certificate.is_epsilon_nash
        );
    }
    Ok(run.nonconverged_runs())
}

fn metrics_vs_k(args: &RunArgs) -> anyhow::Result<usize> {
    let (config, out) = args.load()?;
    let reports = harness::metrics_vs_k::<f64>(&config)?;
    let tables = [metrics_vs_k_table(&reports), best_alpha_table(&reports), per_drop_table(&reports), per_ue_table(&reports)];
    report_written(&emit_report(&tables, args.format.into(), &out)?);
    for r in &reports {
        for b in &r.best {
            eprintln!(
                "K={} {}: best alpha {} ({:.4e} vs {:.4e}, {:+.2}%)",
                r.num_ues,
                b.metric,
                b.alpha,
                b.game_pas,
                b.greedy_pas,
                100.0 * b.relative_gain()
            );
        }
    }
    Ok(reports.iter().map(|r| r.nonconverged_runs()).sum())
}

fn tradeoff(args: &RunArgs) -> anyhow::Result<usize> {
    let (config, out) = args.load()?;
    let (report, rows) = harness::sweep_alpha::<f64>(&config)?;
    let reports = [report];
    let tables = [tradeoff_table(&rows), best_alpha_table(&reports), per_drop_table(&reports)];
    report_written(&emit_report(&tables, args.format.into(), &out)?);
    for r in &rows {
        eprintln!("alpha {:<5} total SE {:.4} bit/s/Hz  total EE {:.4e} bit/J", r.alpha, r.total_se, r.total_ee);
    }
    Ok(reports[0].nonconverged_runs())
}

fn finish(nonconverged: usize, allow: bool) -> ExitCode {
    if nonconverged == 0 {
        return ExitCode::SUCCESS;
    }
    eprintln!("{nonconverged} game run(s) reached max_iterations without converging");
    if allow {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NONCONVERGED)
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let (result, args) = match &cli.command {
        Command::Convergence(a) => (convergence(a), a),
        Command::MetricsVsK(a) => (metrics_vs_k(a), a),
        Command::Tradeoff(a) => (tradeoff(a), a),
        Command::DefaultConfig => {
            let text = toml::to_string(&ExperimentConfig::desk_scale(10)).context("serializing default config")?;
            print!("{text}");
            return Ok(ExitCode::SUCCESS);
        }
    };
    Ok(finish(result?, args.allow_nonconverged))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

