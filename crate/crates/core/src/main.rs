use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use graphbss::experiments::{
    gen_graph, run_to_dir, separate, write_matrix_csv, EstimatorKind, ExperimentConfig, ExperimentKind,
    GraphKindArgs,
};
use graphbss::BssError;

#[derive(Parser)]
#[command(name = "graphbss", version, about = "Blind source separation of graph signals: experiments and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// GraDe with one, four and sixteen graphs under graph errors.
    Fig1(RunArgs),
    /// Bounds and GraDe/ML variances for two sources on C1–C4.
    Fig2(RunArgs),
    /// Five estimators on the four-source models M1–M4.
    Fig3(RunArgs),
    /// Bound-only sweep over the second source's parameter.
    CrbSweep(RunArgs),
    /// Scenario defined in the config's [custom] table.
    Custom(RunArgs),
    /// Draw a random graph and write its edge list.
    GenGraph(GenGraphArgs),
    /// Estimate the unmixing matrix of a data file.
    Separate(SeparateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Node counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Output directory; the CSV is written as <out>/<experiment>.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add a wall-clock column.
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Er,
    Sbm,
    Geometric,
}

#[derive(Args)]
struct GenGraphArgs {
    #[arg(long, value_enum)]
    kind: GraphKind,
    #[arg(long)]
    n: usize,
    /// Edge probability (er).
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Within-block edge probability (sbm).
    #[arg(long, default_value_t = 0.13)]
    p_in: f64,
    /// Between-block edge probability (sbm).
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    /// Connection radius (geometric).
    #[arg(long, default_value_t = 0.16)]
    radius: f64,
    #[arg(long)]
    seed: u64,
    /// Edge-list file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SeparateArgs {
    /// Headerless CSV, one row per signal and one column per node.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_estimator)]
    estimator: EstimatorKind,
    /// Edge-list file; repeat for several graphs (in signal order for ML).
    #[arg(long = "graph")]
    graphs: Vec<PathBuf>,
    /// TOML config whose [estimators] table sets the hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// True mixing matrix CSV; the MD index is then printed.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Seed of FastICA restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV for the unmixing matrix.
    #[arg(long)]
    out: PathBuf,
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    EstimatorKind::parse(s).map_err(|e| e.to_string())
}

fn load_config(path: Option<&PathBuf>) -> graphbss::Result<ExperimentConfig> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load)
}

fn run_experiment(kind: ExperimentKind, args: RunArgs) -> graphbss::Result<()> {
    let mut cfg = load_config(args.config.as_ref())?;
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.reps.is_some() {
        cfg.reps = args.reps;
    }
    if args.n.is_some() {
        cfg.n = args.n;
    }
    if args.timing {
        cfg.record_timing = true;
    }
    let out = args.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let path = run_to_dir(kind, &cfg, &out)?;
    println!("{}", path.display());
    Ok(())
}

fn run(cli: Cli) -> graphbss::Result<()> {
    match cli.command {
        Command::Fig1(a) => run_experiment(ExperimentKind::Fig1, a),
        Command::Fig2(a) => run_experiment(ExperimentKind::Fig2, a),
        Command::Fig3(a) => run_experiment(ExperimentKind::Fig3, a),
        Command::CrbSweep(a) => run_experiment(ExperimentKind::CrbSweep, a),
        Command::Custom(a) => run_experiment(ExperimentKind::Custom, a),
        Command::GenGraph(a) => {
            let kind = match a.kind {
                GraphKind::Er => GraphKindArgs::Er { n: a.n, eps: a.eps },
                GraphKind::Sbm => GraphKindArgs::Sbm { n: a.n, p_in: a.p_in, p_out: a.p_out },
                GraphKind::Geometric => GraphKindArgs::Geometric { n: a.n, radius: a.radius },
            };
            let g = gen_graph(&kind, a.seed, &a.out)?;
            println!("{}: {} nodes, {} edges", a.out.display(), g.n(), g.edge_count());
            Ok(())
        }
        Command::Separate(a) => {
            let cfg = load_config(a.config.as_ref())?;
            let s = separate(&a.data, a.estimator, &a.graphs, &cfg.estimators, a.truth.as_deref(), a.seed)?;
            write_matrix_csv(&s.gamma_hat, &a.out)?;
            if !s.converged {
                log::warn!("{} did not converge", a.estimator.name());
            }
            if let Some(md) = s.md {
                println!("md_index={md}");
            }
            Ok(())
        }
    }
}

fn exit_code(e: &BssError) -> u8 {
    match e {
        BssError::Config(_) | BssError::Io(_) | BssError::Parameter(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
