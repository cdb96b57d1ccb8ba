//! Command-line interface for the federated stacking simulator.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stackfed::runner::{
    emit_plot_data, read_graphs, read_results, run_experiment, write_graphs, write_results,
    write_synthetic_csv, ExperimentConfig, Panel,
};

#[derive(Parser)]
#[command(
    name = "stackfed",
    about = "Personalized federated learning via stacked generalization: \
             seeded experiment sweeps over synthetic non-IID federations",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep from a JSON config file.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: STACKFED_WORKERS or available
        /// parallelism). Results are identical for any worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Aggregate a results file into plot-ready CSV data.
    Plots {
        /// Path to a results.csv produced by `run`.
        #[arg(long)]
        results: PathBuf,
        /// Panel name; one of the documented aggregations.
        #[arg(long)]
        panel: String,
        /// Output directory (default: directory of the results file).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export per-round contribution edge lists from a run directory.
    Graph {
        /// Directory containing graphs.csv (the `run` output directory).
        #[arg(long)]
        results_dir: PathBuf,
        /// Output directory (default: <results-dir>/graphs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the built-in synthetic classification dataset.
    Synth {
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Number of rows.
        #[arg(long, default_value_t = 20_000)]
        rows: usize,
        /// Generator seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn workers_from_env() -> Option<usize> {
    std::env::var("STACKFED_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .filter_map(|c| match c {
            '=' => None,
            c if c.is_ascii_alphanumeric() || c == '.' || c == '-' => Some(c),
            _ => Some('_'),
        })
        .collect()
}

fn run(command: Command) -> stackfed::Result<()> {
    match command {
        Command::Run { config, workers } => {
            let cfg = ExperimentConfig::load(&config)?;
            let workers = workers.or_else(workers_from_env);
            let output = run_experiment(&cfg, workers)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let results_path = cfg.output_dir.join("results.csv");
            write_results(&output.rows, &results_path)?;
            write_graphs(&output.graphs, cfg.output_dir.join("graphs.csv"))?;
            println!(
                "wrote {} rows to {} ({} skips logged)",
                output.rows.len(),
                results_path.display(),
                output.skipped.len()
            );
            Ok(())
        }
        Command::Plots {
            results,
            panel,
            out,
        } => {
            let panel: Panel = panel.parse()?;
            let rows = read_results(&results)?;
            let graphs_path = results
                .parent()
                .map(|p| p.join("graphs.csv"))
                .unwrap_or_else(|| PathBuf::from("graphs.csv"));
            let graphs = if graphs_path.exists() {
                read_graphs(&graphs_path)?
            } else {
                Vec::new()
            };
            let out_dir = out
                .or_else(|| results.parent().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let path = emit_plot_data(&rows, &graphs, panel, &out_dir)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Graph { results_dir, out } => {
            let graphs = read_graphs(results_dir.join("graphs.csv"))?;
            let out_dir = out.unwrap_or_else(|| results_dir.join("graphs"));
            std::fs::create_dir_all(&out_dir)?;
            // split the combined edge table into one edge list per round
            let mut per_cell: BTreeMap<String, Vec<&stackfed::runner::GraphRow>> = BTreeMap::new();
            for g in &graphs {
                let key = format!(
                    "{}_s{}_r{}_{}",
                    sanitize(&g.params),
                    g.partition_seed,
                    g.repeat,
                    g.mode
                );
                per_cell.entry(key).or_default().push(g);
            }
            let count = per_cell.len();
            for (key, edges) in per_cell {
                let path = out_dir.join(format!("{key}.csv"));
                let mut w = csv::Writer::from_path(&path)
                    .map_err(|e| stackfed::Error::Csv(e.to_string()))?;
                w.write_record(["from", "to", "weight"])
                    .map_err(|e| stackfed::Error::Csv(e.to_string()))?;
                for e in edges {
                    w.write_record([
                        e.from.to_string(),
                        e.to.to_string(),
                        stackfed::runner::format_g6(e.weight),
                    ])
                    .map_err(|e| stackfed::Error::Csv(e.to_string()))?;
                }
                w.flush()?;
            }
            println!("wrote {count} edge lists to {}", out_dir.display());
            Ok(())
        }
        Command::Synth { out, rows, seed } => {
            if let Some(parent) = out.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            write_synthetic_csv(&out, rows, seed)?;
            println!("wrote {rows} rows to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
