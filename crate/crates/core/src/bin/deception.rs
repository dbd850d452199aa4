use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use posg_deception::harness::{self, ExperimentSpec, OutputFormat, Policy};
use posg_deception::netsec::NetworkConfig;
use posg_deception::robust::BnbOptions;
use posg_deception::synthesis::SynthesisConfig;
use posg_deception::{Error, Result};

#[derive(Parser)]
#[command(
    name = "deception",
    version,
    about = "Deception strategies for one-sided partially observable games"
)]
struct Cli {
    /// Seed for synthesis; for `experiment`, a single seed replacing the spec's list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Format of experiment rows.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Synthesis convergence tolerance, and the ordering-check tolerance of `experiment`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a layered network game with its labels and metadata.
    Generate {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        layers: Option<u64>,
        /// TOML or JSON network configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Synthesize infiltrator strategies that are strong against the deceiver.
    Synth {
        #[arg(long)]
        model: PathBuf,
        /// Infiltrator memory nodes.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        /// Number of strategies.
        #[arg(long, short = 'n', default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        /// Threshold the strategies must guarantee; defaults to the uniform strategy's value.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Fill up with the best non-strong candidates when too few are strong.
        #[arg(long)]
        allow_weak_fill: bool,
    },
    /// Find the deceiver strategy minimizing the worst case over a strategy set.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        strategies: PathBuf,
        /// Stop after this many search nodes and report the remaining gap.
        #[arg(long)]
        node_limit: Option<usize>,
    },
    /// Worst-case cost of a deceiver policy over a strategy set.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        strategies: PathBuf,
        /// `optimal`, `always_engage`, `always_block`, or a strategy file.
        #[arg(long)]
        policy: String,
        /// State labels, needed by the baseline policies.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Sweep network sizes, memory, strategy-set sizes and seeds.
    Experiment {
        /// TOML or JSON experiment spec; flags below override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        layers: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        memory: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Write the fixed-strategy deceiver program in LP format.
    ExportMilp {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        strategies: PathBuf,
        /// Memory size to export when the set mixes several.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "milp.lp")]
        file: String,
    },
    /// Write the robust program with symbolic infiltrator probabilities.
    ExportRobustMilp {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "robust_milp.lp")]
        file: String,
    },
    /// Check a model file and list every violation.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    let out = &cli.out;
    match cli.command {
        Command::Generate { layers, config } => {
            let mut cfg = match config {
                Some(path) => NetworkConfig::read(&path)?,
                None => NetworkConfig::default(),
            };
            if let Some(n) = layers {
                cfg.layers = n as usize;
            }
            let net = harness::cmd_generate(&cfg, out)?;
            println!("{}", serde_json::to_string(&net.metadata)?);
        }
        Command::Synth {
            model,
            k,
            count,
            threshold,
            restarts,
            allow_weak_fill,
        } => {
            let posg = harness::load_model(&model)?;
            let defaults = SynthesisConfig::default();
            let cfg = SynthesisConfig {
                threshold,
                count: count as usize,
                restarts: restarts.unwrap_or(defaults.restarts),
                convergence_tol: cli.tol.unwrap_or(defaults.convergence_tol),
                seed: cli.seed.unwrap_or(defaults.seed),
                memory: k as usize,
                allow_weak_fill,
                ..defaults
            };
            let result = harness::cmd_synth(&posg, &cfg, out)?;
            println!("{}", serde_json::to_string(&harness::SynthSummary::new(&result, &cfg))?);
        }
        Command::Solve {
            model,
            strategies,
            node_limit,
        } => {
            let posg = harness::load_model(&model)?;
            let entries = harness::read_strategies(&strategies)?;
            let opts = BnbOptions {
                node_limit,
                ..BnbOptions::default()
            };
            let solved = harness::cmd_solve(&posg, &entries, &opts, out)?;
            println!("{}", solved.value);
        }
        Command::Eval {
            model,
            strategies,
            policy,
            labels,
        } => {
            let posg = harness::load_model(&model)?;
            let entries = harness::read_strategies(&strategies)?;
            let labels = labels.as_deref().map(harness::read_labels).transpose()?;
            let value = harness::evaluate_policy(
                &posg,
                labels.as_deref(),
                &Policy::parse(&policy),
                &entries,
                &BnbOptions::default(),
            )?;
            println!("{value}");
        }
        Command::Experiment {
            spec,
            layers,
            memory,
            strategies,
            seeds,
            restarts,
        } => {
            let mut s = match spec {
                Some(path) => ExperimentSpec::read(&path)?,
                None => ExperimentSpec::default(),
            };
            s.layers = layers.unwrap_or(s.layers);
            s.memory = memory.unwrap_or(s.memory);
            s.strategies = strategies.unwrap_or(s.strategies);
            s.seeds = seeds.or(cli.seed.map(|x| vec![x])).unwrap_or(s.seeds);
            s.restarts = restarts.or(s.restarts);
            s.tol = cli.tol.unwrap_or(s.tol);
            let format = match cli.format {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
            };
            let report = harness::cmd_experiment(&s, format, out)?;
            for c in &report.checks {
                println!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
                for v in &c.violations {
                    println!("  {v}");
                }
            }
        }
        Command::ExportMilp {
            model,
            strategies,
            k,
            file,
        } => {
            let posg = harness::load_model(&model)?;
            let entries = harness::read_strategies(&strategies)?;
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            harness::cmd_export_milp(&posg, &entries, k, &out.join(file))?;
        }
        Command::ExportRobustMilp { model, file } => {
            let posg = harness::load_model(&model)?;
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            harness::cmd_export_robust_milp(&posg, &out.join(file))?;
        }
        Command::Validate { model } => {
            let report = harness::cmd_validate(&model)?;
            if !report.is_valid() {
                return Err(Error::InvalidModel(report));
            }
            println!("valid");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
