use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gebo::acquisition::AcquisitionKind;
use gebo::config::ConfigFile;
use gebo::harness::{report_medians, run_experiment, Method, SummaryRow};
use gebo::kernels::KernelKind;
use gebo::problems::ProblemSpec;
use gebo::trace::RunStatus;

/// Gradient-enhanced Bayesian optimization experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method from a set of Latin hypercube starts and write CSVs.
    Run(RunArgs),
    /// Rebuild the summary table from trace CSVs in a directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// quad:<n>, bowl:<n>, rosen:<n>:<a>, lorenz:<t_J> or lorenz:<t_J>:free
    #[arg(long)]
    problem: Option<String>,
    /// Comma-separated list of bo, bfgs.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Standard deviation of Gaussian noise added to every gradient.
    #[arg(long)]
    grad_noise: Option<f64>,
    /// TOML file overriding experiment, BO and BFGS settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian, matern or ratquad:<alpha>
    #[arg(long)]
    kernel: Option<String>,
    /// ei or uc:<omega>
    #[arg(long)]
    acquisition: Option<String>,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    dir: PathBuf,
    #[arg(long, default_value_t = 1e-5)]
    f_tol: f64,
    #[arg(long, default_value_t = 10.0)]
    orders: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Report(args) => report(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(args: RunArgs) -> gebo::Result<ExitCode> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let problem = args.problem.as_deref().map(ProblemSpec::parse).transpose()?;
    let mut cfg = file.to_experiment(problem.clone())?;
    // command-line flags win over the file
    if let Some(p) = problem {
        cfg.problem = p;
    }
    if let Some(m) = &args.method {
        cfg.methods = Method::parse_list(m)?;
    }
    if let Some(n) = args.runs {
        cfg.n_runs = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(g) = args.grad_noise {
        cfg.grad_noise = g;
    }
    if let Some(k) = &args.kernel {
        cfg.bo.kernel = KernelKind::parse(k)?;
    }
    if let Some(a) = &args.acquisition {
        cfg.bo.acquisition.kind = AcquisitionKind::parse(a)?;
    }
    if let Some(n) = args.max_evals {
        cfg.bo.max_evals = n;
        cfg.qn.max_evals = n;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.out_dir = Some(args.out.clone());

    let results = run_experiment(&cfg)?;
    let mut failed = 0;
    for r in &results {
        let last = r.trace.last();
        println!(
            "{:<5} run {:>3}  {:<16} evals {:>4}  f_best {:>11.4e}  ratio {:>10.3e}",
            r.method.name(),
            r.run_id,
            r.trace.status.label(),
            last.map_or(0, |l| l.n_feval),
            r.trace.final_f_best(),
            last.map_or(f64::NAN, |l| l.opt_ratio),
        );
        if let RunStatus::Failed(why) = &r.trace.status {
            eprintln!("  failed: {why}");
            failed += 1;
        }
    }
    let summary = report_medians(&args.out, cfg.f_tol, cfg.optimality_orders)?;
    print_summary(&summary);
    println!("wrote {}", args.out.display());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn report(args: ReportArgs) -> gebo::Result<ExitCode> {
    let summary = report_medians(&args.dir, args.f_tol, args.orders)?;
    print_summary(&summary);
    Ok(ExitCode::SUCCESS)
}

fn print_summary(rows: &[SummaryRow]) {
    println!("{:<6} {:<14} {:>4} {:>9} {:>14}", "method", "problem", "n_d", "success", "median evals");
    for r in rows {
        println!(
            "{:<6} {:<14} {:>4} {:>5}/{:<3} {:>14}",
            r.method, r.problem, r.n_d, r.successes, r.n_runs, r.median_evals
        );
    }
}
