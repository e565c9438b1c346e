use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gk_base::{parse_q, Z};
use gk_cli::modules::{self, StagePair};
use gk_cli::output::{write_module, ModuleOutput};
use gk_cli::pipeline::{run_pipeline, stamp};
use gk_cli::{CliError, ExperimentConfig, EXIT_CHECK_FAILED, EXIT_INTERNAL, EXIT_PASS};
use stage_gen::StageParams;

#[derive(Parser)]
#[command(name = "gk", version, about = "Finite-stage checks of the Gaussian–Kronecker construction")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON experiment config; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Build stages 0..=N.
    #[arg(long, global = true)]
    stages: Option<u32>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run every check but write no files.
    #[arg(long, global = true)]
    check_only: bool,
    /// Worker threads; 0 uses all cores. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Stages 0..N with their condition table.
    Stages,
    /// Witness re-certification on the chain, or the orbit of one vector.
    Torus {
        /// Comma-separated fractions, e.g. `1/3,2/5`.
        #[arg(long, requires = "q")]
        vector: Option<String>,
        #[arg(long)]
        q: Option<String>,
        #[arg(long, default_value = "1/100")]
        resolution: String,
    },
    /// Level sets, support containment and the k search.
    Kronecker,
    /// Covariance and symbol-dynamics checks on Brownian paths.
    Wiener {
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        paths: Option<usize>,
        /// JSON stage; replaces the chain for the measures and the shift law.
        #[arg(long)]
        stage_file: Option<PathBuf>,
        /// Binary dump of the main ensemble.
        #[arg(long)]
        dump_ensemble: Option<PathBuf>,
    },
    /// Commuting square, stacking and the partition certificates.
    Diagram,
    /// The assembled conjugacy and its checks.
    Conjugacy {
        /// JSON `{"prev": stage, "next": stage}`; defaults to the tiny pair.
        #[arg(long)]
        stage_file: Option<PathBuf>,
        /// Flat binary dump of the sampled grid map.
        #[arg(long)]
        dump_grid: Option<PathBuf>,
    },
    /// Every module in order.
    Pipeline,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Internal(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_config(g: &Global) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(n) = g.stages {
        cfg.stages = n;
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn emit(cfg: &ExperimentConfig, check_only: bool, out: ModuleOutput) -> Result<Vec<String>, CliError> {
    if !check_only {
        write_module(&cfg.out, &stamp(cfg), &out)?;
    }
    Ok(out.failures())
}

fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    let mut cfg = load_config(&cli.global)?;
    let co = cli.global.check_only;
    match cli.command {
        Command::Pipeline => {
            let outcome = run_pipeline(&cfg, co)?;
            for m in &outcome.modules {
                println!(
                    "{:<10} {} ({} checks)",
                    m.module,
                    if m.passed() { "PASS" } else { "FAIL" },
                    m.checks.len()
                );
            }
            Ok(outcome.failures())
        }
        Command::Stages => {
            cfg.validate()?;
            let chain = modules::build_chain(&cfg)?;
            emit(&cfg, co, modules::run_stages(&chain))
        }
        Command::Torus {
            vector,
            q,
            resolution,
        } => {
            cfg.validate()?;
            let out = match vector {
                Some(v) => {
                    let bad = |e: String| CliError::Config(e);
                    let coords = v
                        .split(',')
                        .map(|s| parse_q(s.trim()).map_err(|e| bad(e.to_string())))
                        .collect::<Result<Vec<_>, _>>()?;
                    let qq: Z = q
                        .as_deref()
                        .unwrap_or("1")
                        .parse()
                        .map_err(|e| bad(format!("--q: {e}")))?;
                    let res = parse_q(&resolution).map_err(|e| bad(e.to_string()))?;
                    modules::run_torus_vector(coords, &qq, &res)?
                }
                None => modules::run_torus(&modules::build_chain(&cfg)?)?,
            };
            emit(&cfg, co, out)
        }
        Command::Kronecker => {
            cfg.validate()?;
            let chain = modules::build_chain(&cfg)?;
            emit(&cfg, co, modules::run_kronecker(&cfg, &chain)?)
        }
        Command::Wiener {
            depth,
            paths,
            stage_file,
            dump_ensemble,
        } => {
            if let Some(d) = depth {
                cfg.wiener.depth = d;
            }
            if let Some(p) = paths {
                cfg.wiener.paths = p;
            }
            let stages: Vec<StageParams> = match &stage_file {
                Some(p) => {
                    let st: StageParams = read_json(p)?;
                    st.validate()?;
                    cfg.wiener.measures = vec![gk_cli::config::MeasureSpec::Stage { n: st.n }];
                    vec![st]
                }
                None => {
                    cfg.validate()?;
                    modules::build_chain(&cfg)?
                        .into_iter()
                        .map(|l| l.stage)
                        .collect()
                }
            };
            cfg.validate()?;
            emit(&cfg, co, modules::run_wiener(&cfg, &stages, dump_ensemble.as_deref())?)
        }
        Command::Diagram => {
            cfg.validate()?;
            emit(&cfg, co, modules::run_diagram(&cfg)?)
        }
        Command::Conjugacy {
            stage_file,
            dump_grid,
        } => {
            cfg.validate()?;
            let pair: Option<StagePair> = stage_file.as_deref().map(read_json).transpose()?;
            emit(
                &cfg,
                co,
                modules::run_conjugacy(&cfg, pair.as_ref(), dump_grid.as_deref())?,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.global.workers;
    let result = std::panic::catch_unwind(|| gk_base::par::with_workers(workers, || run(cli)));
    let code = match result {
        Ok(Ok(failing)) if failing.is_empty() => EXIT_PASS,
        Ok(Ok(failing)) => {
            eprintln!("{} failing checks:", failing.len());
            for id in &failing {
                eprintln!("  {id}");
            }
            EXIT_CHECK_FAILED
        }
        Ok(Err(e)) => {
            eprintln!("{e}");
            e.exit_code()
        }
        Err(_) => EXIT_INTERNAL,
    };
    ExitCode::from(code as u8)
}
