//! Benchmark CLI: reproduce the error tables and interior-decay sweeps as
//! CSV, run custom experiment configs, and export fields for plotting.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use longdomain_bench::csvio::{parse_config, write_field, write_history, write_results};
use longdomain_bench::experiment::{preset, run_experiment, GridSpec, Method, RunOutput};
use longdomain_bench::rhs::{rhs_vector, Case};
use longdomain_bench::{BenchError, ExpsumCache, Runner};
use longdomain_core::als::{als_solve, AlsOptions};
use longdomain_core::method1::method1_solution;
use longdomain_core::method3::{method3_solve_detailed, Method3Config};

#[derive(Parser)]
#[command(
    name = "longdomain-bench",
    about = "Error tables and decay curves for low-rank Poisson solvers on long product domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the method grid as h:hprime (interval and cross-section
    /// spacings)
    #[arg(long)]
    resolution: Option<String>,
    /// Directory for cached exponential-sum coefficients
    #[arg(long, default_value = "expsum-cache")]
    cache_dir: PathBuf,
    /// Write the per-rank iteration history of method 2 to this CSV
    #[arg(long)]
    history: Option<PathBuf>,
    /// Suppress progress output
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One-term approximation errors on the planar cylinder
    Table1(RunFlags),
    /// Alternating-enrichment errors on the planar cylinder
    Table2(RunFlags),
    /// Exponential-sum solver errors on the planar cylinder
    Table3(RunFlags),
    /// One-term approximation errors on the L-shape domain
    Table4(RunFlags),
    /// Alternating-enrichment errors on the L-shape domain
    Table5(RunFlags),
    /// Exponential-sum solver errors on the L-shape domain
    Table6(RunFlags),
    /// Windowed interior errors of the one-term approximation
    Fig3(RunFlags),
    /// Run an experiment described by a key=value config file
    Custom {
        /// Path to the config file
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Compute one solution field and export it as CSV for plotting
    ExportField {
        /// 2d or 3d
        #[arg(long)]
        case: String,
        /// m1, m2 or m3
        #[arg(long)]
        method: String,
        /// catalog right-hand side name
        #[arg(long)]
        rhs: String,
        /// interval half-length
        #[arg(long)]
        ell: f64,
        /// iteration count (m2) or rank (m3)
        #[arg(long)]
        param: Option<usize>,
        /// output CSV path
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "expsum-cache")]
        cache_dir: PathBuf,
    },
}

fn parse_resolution(spec: &str) -> Result<GridSpec, BenchError> {
    let (h, hp) = spec
        .split_once(':')
        .ok_or_else(|| BenchError::Parse("resolution must be h:hprime".into()))?;
    let h: f64 = h
        .trim()
        .parse()
        .map_err(|_| BenchError::Parse("bad interval spacing".into()))?;
    let hp: f64 = hp
        .trim()
        .parse()
        .map_err(|_| BenchError::Parse("bad cross-section spacing".into()))?;
    Ok(GridSpec {
        hprime: hp,
        min_interval_cells: 0,
        max_interval_h: Some(h),
    })
}

fn emit(out: &RunOutput, flags: &RunFlags) -> Result<(), BenchError> {
    match &flags.out {
        Some(path) => {
            let f = BufWriter::new(File::create(path)?);
            write_results(&out.rows, f)?;
            if !flags.quiet {
                eprintln!("wrote {} rows to {}", out.rows.len(), path.display());
            }
        }
        None => write_results(&out.rows, io::stdout().lock())?,
    }
    if let Some(path) = &flags.history {
        let f = BufWriter::new(File::create(path)?);
        write_history(&out.histories, f)?;
    }
    Ok(())
}

fn run_preset(name: &str, flags: &RunFlags) -> Result<(), BenchError> {
    let mut configs =
        preset(name).ok_or_else(|| BenchError::Parse(format!("unknown preset {name}")))?;
    if let Some(res) = &flags.resolution {
        let grid = parse_resolution(res)?;
        configs = configs
            .into_iter()
            .map(|mut c| {
                c.method_grid = grid;
                c
            })
            .collect();
        configs.dedup_by(|a, b| a == b);
    }
    let mut runner = Runner::new(ExpsumCache::new(Some(flags.cache_dir.clone()))?);
    let mut merged = RunOutput::default();
    for (i, cfg) in configs.iter().enumerate() {
        if !flags.quiet {
            eprintln!(
                "running {name} part {}/{} ({} x {} cells)",
                i + 1,
                configs.len(),
                cfg.rhs.len(),
                cfg.ells.len()
            );
        }
        let out = run_experiment(cfg, &mut runner);
        merged.rows.extend(out.rows);
        merged.histories.extend(out.histories);
    }
    emit(&merged, flags)
}

fn run_custom(config_path: &PathBuf, flags: &RunFlags) -> Result<(), BenchError> {
    let text = std::fs::read_to_string(config_path)?;
    let mut config = parse_config(&text)?;
    if let Some(res) = &flags.resolution {
        config.method_grid = parse_resolution(res)?;
    }
    let mut runner = Runner::new(ExpsumCache::new(Some(flags.cache_dir.clone()))?);
    let out = run_experiment(&config, &mut runner);
    emit(&out, flags)
}

fn export_field(
    case: &str,
    method: &str,
    rhs: &str,
    ell: f64,
    param: Option<usize>,
    out_path: &PathBuf,
    cache_dir: &PathBuf,
) -> Result<(), BenchError> {
    let case = Case::parse(case)?;
    let method = Method::parse(method)?;
    let spec = GridSpec::default_for(case);
    let (g1, gcs) = spec.build(case, ell)?;
    let f = rhs_vector(case, rhs, &gcs)?;
    let field = match method {
        Method::M1 => method1_solution(&f, &g1, &gcs)?,
        Method::M2 => {
            let opts = AlsOptions {
                max_rank: param.unwrap_or(1).max(1),
                ..AlsOptions::default()
            };
            als_solve(&f, &g1, &gcs, &opts, None)?.0
        }
        Method::M3 => {
            let cache = ExpsumCache::new(Some(cache_dir.clone()))?;
            let rank = param.unwrap_or(5).max(1);
            let cfg = Method3Config::new(rank)?;
            // reuse cache through the normalized fit
            let a1 = longdomain_core::assemble_laplacian_1d(&g1);
            let acs = longdomain_core::assemble_laplacian_cs(&gcs);
            let (a, b) = longdomain_core::method3::spectral_interval(&a1, &acs, cfg.margin)?;
            match cache.fit(rank, a, b) {
                Ok(sum) => longdomain_core::method3::method3_solve_with_sum(
                    &f, &g1, &gcs, &cfg, &sum,
                )?,
                Err(_) => method3_solve_detailed(&f, &g1, &gcs, &cfg)?.0,
            }
        }
        Method::Reference => {
            return Err(BenchError::Parse(
                "export-field supports m1, m2 and m3".into(),
            ))
        }
    };
    let full = field.evaluate_full();
    let fh = BufWriter::new(File::create(out_path)?);
    write_field(&full, fh)?;
    Ok(())
}

fn run() -> Result<(), BenchError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Table1(f) => run_preset("table1", f),
        Command::Table2(f) => run_preset("table2", f),
        Command::Table3(f) => run_preset("table3", f),
        Command::Table4(f) => run_preset("table4", f),
        Command::Table5(f) => run_preset("table5", f),
        Command::Table6(f) => run_preset("table6", f),
        Command::Fig3(f) => run_preset("fig3", f),
        Command::Custom { config, flags } => run_custom(config, flags),
        Command::ExportField {
            case,
            method,
            rhs,
            ell,
            param,
            out,
            cache_dir,
        } => export_field(case, method, rhs, *ell, *param, out, cache_dir),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut stderr = io::stderr().lock();
            let _ = writeln!(stderr, "error: {e}");
            ExitCode::FAILURE
        }
    }
}
