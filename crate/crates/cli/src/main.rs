use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fusionbench::config::RunConfig;
use fusionbench::{bench, bundled, gradcheck, params, resolve_seed, synth, CliError, CliResult};
use fusionbench_core::fusion::FusionKind;

#[derive(Parser)]
#[command(name = "fusionbench", version, about = "Multimodal fusion parameter audits, gradient checks, benchmarks and synthetic training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FusionArg {
    Elementwise,
    Mcb,
    Mutan,
    All,
}

impl FusionArg {
    fn kinds(self) -> Vec<FusionKind> {
        match self {
            FusionArg::Elementwise => vec![FusionKind::Elementwise],
            FusionArg::Mcb => vec![FusionKind::Mcb],
            FusionArg::Mutan => vec![FusionKind::Mutan],
            FusionArg::All => FusionKind::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    Lr,
    Hr,
    Ablation,
}

#[derive(Subcommand)]
enum Command {
    /// Learned-parameter breakdown as `config,block,count` CSV
    Params {
        /// Config file describing the head
        config: Option<PathBuf>,
        /// Print a bundled table instead of reading a config
        #[arg(long, value_enum, conflicts_with_all = ["config", "checkpoint"])]
        table: Option<TableArg>,
        /// Audit a saved checkpoint
        #[arg(long, conflicts_with = "config")]
        checkpoint: Option<PathBuf>,
    },
    /// Compare analytic fusion gradients with central finite differences
    Gradcheck {
        #[arg(long, value_enum, default_value = "all")]
        fusion: FusionArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time fusion forward calls, CSV `fusion,dim,mode,ns_per_call`
    Bench {
        #[arg(long, value_enum, default_value = "all")]
        fusion: FusionArg,
        /// Input dimensions, comma separated
        #[arg(long, value_delimiter = ',', default_value = "64,256,1200")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        /// MCB sketch size (default: the input dimension)
        #[arg(long)]
        mcb_d: Option<usize>,
        #[arg(long, default_value_t = 310)]
        mutan_t: usize,
        #[arg(long, default_value_t = 360)]
        mutan_t_o: usize,
        #[arg(long, default_value_t = 13)]
        rank: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one head per configured fusion on a synthetic task
    Synth {
        config: PathBuf,
        /// Output directory (default: the config's `output` key)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite existing reports
        #[arg(long)]
        force: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Params { config, table, checkpoint } => {
            let report = match (config, table, checkpoint) {
                (None, Some(t), None) => {
                    let name = match t {
                        TableArg::Lr => "lr",
                        TableArg::Hr => "hr",
                        TableArg::Ablation => "ablation",
                    };
                    params::params_report(&bundled::table(name).expect("known table")?)?
                }
                (Some(path), None, None) => params::params_report(&[RunConfig::load(&path)?])?,
                (None, None, Some(path)) => params::checkpoint_report(&path)?,
                _ => return Err(CliError::Usage("params needs exactly one of CONFIG, --table or --checkpoint".into())),
            };
            print!("{}", report.csv);
            for c in &report.comparisons {
                eprintln!("{}", c.describe());
            }
        }
        Command::Gradcheck { fusion, trials, seed } => {
            let seed = resolve_seed(seed, 0)?;
            let rows = gradcheck::run(&fusion.kinds(), trials, seed)?;
            print!("{}", gradcheck::to_csv(&rows)?);
            if let Some(bad) = rows.iter().find(|r| !r.passed()) {
                return Err(CliError::Failure(format!(
                    "{}: max relative error {:e}, replay with --fusion {} --trials 1 --seed {}",
                    bad.fusion.as_str(),
                    bad.max_rel_err,
                    bad.fusion.as_str(),
                    bad.worst_seed
                )));
            }
        }
        Command::Bench { fusion, dims, iters, mcb_d, mutan_t, mutan_t_o, rank, seed } => {
            let opts = bench::BenchOptions {
                kinds: fusion.kinds(),
                dims,
                iters,
                mcb_d,
                mutan_t,
                mutan_t_o,
                mutan_rank: rank,
                seed: resolve_seed(seed, 0)?,
            };
            print!("{}", bench::to_csv(&bench::run(&opts)?)?);
        }
        Command::Synth { config, out, force, seed } => {
            let cfg = RunConfig::load(&config)?;
            let seed = resolve_seed(seed, cfg.seed)?;
            let cfg = cfg.with_seed(seed);
            let dir = out
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| CliError::Usage("no output directory: pass --out or set `output` in the config".into()))?;
            let outcome = synth::run(&cfg, &dir, force)?;
            for line in synth::summary_lines(&outcome) {
                println!("{line}");
            }
            if !outcome.failures.is_empty() {
                return Err(CliError::Failure(outcome.failures.join("; ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fusionbench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
