use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cnmf_cli::bench::{run_bench, summary_line, BenchConfig};
use cnmf_cli::check_forms::check_forms;
use cnmf_cli::error::{CliError, Result};
use cnmf_cli::format;
use cnmf_core::{
    fit, normalized_loss, synth_generate, Algorithm, DataMatrix, SolverConfig, SynthParams,
};

#[derive(Parser)]
#[command(name = "cnmf", about = "Convolutive NMF fitting, synthesis, and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a CNMF model to a data matrix
    Fit(FitArgs),
    /// Generate a synthetic CNMF dataset
    Synth(SynthArgs),
    /// Compare solvers on one dataset, one trace file per (algorithm, seed)
    Bench(BenchArgs),
    /// Verify the equivalent reconstruction forms on random instances
    CheckForms(CheckFormsArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input data matrix (binary or .csv)
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "L")]
    l: usize,
    #[arg(long, default_value = "hals")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 3600.0)]
    time_limit_s: f64,
    #[arg(long, default_value_t = 0.0)]
    rel_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    l1_w: f64,
    #[arg(long, default_value_t = 0.0)]
    l1_h: f64,
    #[arg(long, default_value_t = 0.0)]
    l2_w: f64,
    #[arg(long, default_value_t = 0.0)]
    l2_h: f64,
    /// Output path for the fitted motif tensor (3-D binary)
    #[arg(long)]
    out_w: Option<PathBuf>,
    /// Output path for the fitted activation matrix (2-D)
    #[arg(long)]
    out_h: Option<PathBuf>,
    /// Output path for the convergence trace CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write iteration counts instead of wall-clock times in the trace
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Clone)]
struct SynthParamArgs {
    #[arg(long = "N", default_value_t = 250)]
    n: usize,
    #[arg(long = "T", default_value_t = 500)]
    t: usize,
    #[arg(long = "K", default_value_t = 5)]
    k: usize,
    #[arg(long = "L", default_value_t = 20)]
    l: usize,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    dirichlet_alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    zero_prob: f64,
    #[arg(long, default_value_t = 1.0)]
    exp_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SynthParamArgs {
    fn to_params(&self) -> SynthParams {
        SynthParams {
            n: self.n,
            t: self.t,
            k: self.k,
            l: self.l,
            sigma: self.sigma,
            dirichlet_alpha: self.dirichlet_alpha,
            zero_prob: self.zero_prob,
            exp_rate: self.exp_rate,
            noise_std: self.noise_std,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    params: SynthParamArgs,
    #[arg(long)]
    out_x: PathBuf,
    #[arg(long)]
    out_w: Option<PathBuf>,
    #[arg(long)]
    out_h: Option<PathBuf>,
    /// Re-read the written X and confirm it is nonnegative
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Input data matrix; mutually exclusive with --synth
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generate the dataset instead of loading one
    #[arg(long)]
    synth: bool,
    #[command(flatten)]
    synth_params: SynthParamArgs,
    /// Comma-separated list: mu,hals,anls
    #[arg(long, value_delimiter = ',', default_value = "mu,hals,anls")]
    algorithms: Vec<Algorithm>,
    /// Comma-separated seeds
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Model rank; defaults to the synth K
    #[arg(long = "fit-K")]
    fit_k: Option<usize>,
    /// Motif length; defaults to the synth L
    #[arg(long = "fit-L")]
    fit_l: Option<usize>,
    #[arg(long, default_value_t = 120.0)]
    time_limit_s: f64,
    #[arg(long, default_value_t = usize::MAX)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.0)]
    rel_tol: f64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct CheckFormsArgs {
    /// Dimensions as N,T,K,L
    #[arg(long, default_value = "4,10,2,3")]
    dims: String,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_data(path: &PathBuf) -> Result<DataMatrix> {
    let m = format::read_matrix(path)?;
    DataMatrix::new(m).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let x = load_data(&args.input)?;
    let cfg = SolverConfig {
        algorithm: args.algorithm,
        max_iters: args.max_iters,
        time_limit_s: args.time_limit_s,
        rel_tol: args.rel_tol,
        l1_w: args.l1_w,
        l1_h: args.l1_h,
        l2_w: args.l2_w,
        l2_h: args.l2_h,
        seed: args.seed,
        ..Default::default()
    };
    cfg.validate().map_err(|e| CliError::InvalidInput(e.to_string()))?;
    let result = fit(&x, args.k, args.l, &cfg)?;
    if let Some(path) = &args.out_w {
        format::write_tensor(path, result.model.motifs.values())?;
    }
    if let Some(path) = &args.out_h {
        format::write_matrix(path, result.model.activations.values())?;
    }
    if let Some(path) = &args.trace {
        format::write_trace(path, &result.trace, args.no_timing)?;
    }
    if result.nnls_warning {
        eprintln!("warning: some NNLS sub-solves fell back to projected gradient");
    }
    println!("{}", summary_line(&result));
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let params = args.params.to_params();
    params.validate().map_err(|e| CliError::InvalidInput(e.to_string()))?;
    let dataset = synth_generate(&params)?;
    format::write_matrix(&args.out_x, dataset.x.values())?;
    if let Some(path) = &args.out_w {
        format::write_tensor(path, dataset.w_true.values())?;
    }
    if let Some(path) = &args.out_h {
        format::write_matrix(path, dataset.h_true.values())?;
    }
    if args.verify {
        let reread = format::read_matrix(&args.out_x)?;
        if reread.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(CliError::Malformed(format!(
                "{}: verification found a negative or non-finite entry",
                args.out_x.display()
            )));
        }
        let x = DataMatrix::new(reread)?;
        let loss = normalized_loss(&x, &dataset.w_true, &dataset.h_true)?;
        println!(
            "{{\"written\": \"{}\", \"verified\": true, \"loss_vs_true_factors\": {:.16e}}}",
            args.out_x.display(),
            loss
        );
    } else {
        println!("{{\"written\": \"{}\"}}", args.out_x.display());
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<i32> {
    let x = match (&args.input, args.synth) {
        (Some(path), false) => load_data(path)?,
        (None, true) => {
            let params = args.synth_params.to_params();
            params.validate().map_err(|e| CliError::InvalidInput(e.to_string()))?;
            synth_generate(&params)?.x
        }
        _ => {
            return Err(CliError::InvalidInput(
                "exactly one of --input or --synth is required".into(),
            ))
        }
    };
    if args.algorithms.is_empty() || args.seeds.is_empty() {
        return Err(CliError::InvalidInput("--algorithms and --seeds must be non-empty".into()));
    }
    let cfg = BenchConfig {
        algorithms: args.algorithms,
        seeds: args.seeds,
        k: args.fit_k.unwrap_or(args.synth_params.k),
        l: args.fit_l.unwrap_or(args.synth_params.l),
        max_iters: args.max_iters,
        time_limit_s: args.time_limit_s,
        rel_tol: args.rel_tol,
        no_timing: args.no_timing,
    };
    let runs = run_bench(&x, &cfg, Some(&args.out_dir))?;
    let ok = runs.iter().filter(|r| r.outcome.is_ok()).count();
    println!(
        "{{\"runs\": {}, \"succeeded\": {}, \"out_dir\": \"{}\"}}",
        runs.len(),
        ok,
        args.out_dir.display()
    );
    Ok(if ok >= 1 { 0 } else { 1 })
}

fn cmd_check_forms(args: CheckFormsArgs) -> Result<i32> {
    let parts: Vec<usize> = args
        .dims
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::InvalidInput(format!("--dims: {e}")))?;
    let [n, t, k, l] = parts[..] else {
        return Err(CliError::InvalidInput("--dims expects N,T,K,L".into()));
    };
    let report = check_forms(n, t, k, l, args.trials, args.seed)?;
    println!(
        "{{\"trials\": {}, \"max_deviation\": {:.3e}, \"passed\": {}}}",
        report.trials,
        report.max_deviation,
        report.passed()
    );
    Ok(if report.passed() { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: Result<i32> = match cli.command {
        Command::Fit(args) => cmd_fit(args).map(|()| 0),
        Command::Synth(args) => cmd_synth(args).map(|()| 0),
        Command::Bench(args) => cmd_bench(args),
        Command::CheckForms(args) => cmd_check_forms(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
