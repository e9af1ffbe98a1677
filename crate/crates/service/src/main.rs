use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use judgematch::assignment::{Assignment, ConstraintSet, SimilarityGrid};
use judgematch_service::export::{assignment_csv, assignment_report, round6};
use judgematch_service::pipeline::{read_artifact, Stamped, ASSIGNMENT_FILE, GRID_FILE};
use judgematch_service::{server, Pipeline, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "judgematch", version, about = "Judge-to-venture assignment pipeline")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "judgematch.toml")]
    config: PathBuf,

    /// Replace every seed in the config.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Ingest,
    Similarity,
    Train,
    Assign,
    Evaluate,
    /// All stages.
    Run,
    /// Review API over the artifacts in --out.
    Serve {
        /// Listen address; defaults to $JUDGEMATCH_ADDR.
        #[arg(long)]
        addr: Option<String>,
    },
    Export {
        #[arg(long, value_enum)]
        artifact: Artifact,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long)]
        path: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Artifact {
    Assignment,
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log_level).format_timestamp_millis().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(&cli.config).with_context(|| format!("loading {}", cli.config.display()))?;
    if let Some(seed) = cli.seed_override {
        cfg.apply_seed_override(seed);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let until = match &cli.command {
        Command::Ingest => Some(Stage::Ingest),
        Command::Similarity => Some(Stage::Similarity),
        Command::Train => Some(Stage::Train),
        Command::Assign => Some(Stage::Assign),
        Command::Run => Some(Stage::Evaluate),
        _ => None,
    };
    if let Some(until) = until {
        let summary = Pipeline::new(load_config(&cli)?, &cli.out).run(until)?;
        for t in &summary.timings {
            log::info!("{:<10} {:>10.1} ms{}", t.stage, t.wall_ms, if t.cache_hit { " (cached)" } else { "" });
        }
        if let Some(a) = &summary.assigned {
            println!(
                "assigned {} pairs; min venture quality {:.6}; {:?}",
                a.assignment.pairs.len(),
                a.assignment.min_quality(&a.grid),
                a.assignment.optimality
            );
        }
        if let Some(e) = &summary.evaluation {
            println!("auc {:.6}; p {:.6} over {} resamples", e.auc, e.p, e.n_resamples);
        }
        return Ok(());
    }
    match cli.command {
        Command::Evaluate => {
            let e = Pipeline::new(load_config(&cli)?, &cli.out).evaluate_only()?;
            println!("auc {:.6}; p {:.6} over {} resamples", e.auc, e.p, e.n_resamples);
        }
        Command::Serve { addr } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(&cli.out, addr))?;
        }
        Command::Export { artifact, format, path } => export(&cli.out, artifact, format, &path)?,
        _ => unreachable!("pipeline verbs handled above"),
    }
    Ok(())
}

fn export(out: &std::path::Path, artifact: Artifact, format: Format, path: &std::path::Path) -> anyhow::Result<()> {
    let grid = read_artifact::<SimilarityGrid>(out, GRID_FILE)?.data;
    let stamped = read_artifact::<(ConstraintSet, Assignment)>(out, ASSIGNMENT_FILE)?;
    let (constraints, assignment) = &stamped.data;
    let bytes = match (artifact, format) {
        (Artifact::Assignment, Format::Csv) => assignment_csv(assignment, &grid, None)?,
        (Artifact::Assignment, Format::Json) => pretty(&stamped)?,
        (Artifact::Report, Format::Json) => pretty(&Stamped {
            engine_version: stamped.engine_version.clone(),
            config_hash: stamped.config_hash.clone(),
            data: assignment_report(assignment, &grid, constraints),
        })?,
        (Artifact::Report, Format::Csv) => {
            let report = assignment_report(assignment, &grid, constraints);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["venture_id", "track", "quality", "judges"])?;
            for v in &report.ventures {
                w.write_record([&v.venture_id, &v.track, &format!("{:.6}", round6(v.quality)), &v.judges.join(";")])?;
            }
            w.into_inner()?
        }
    };
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn pretty<T: serde::Serialize>(v: &T) -> anyhow::Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}
