//! `fusedg`: leave-one-domain-out experiments from the command line.

mod spec_args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fusedg_core::data::{write_window_file, Sidecar, WindowFile};
use fusedg_core::evaluation::evaluate;
use fusedg_core::experiment::{
    aggregate_from_dir, run_distance_substitution, run_experiment, run_sweep, ExperimentResult, ExperimentSpec,
    BETA_GRID, LAMBDA_GRID,
};
use fusedg_core::network::load_params;
use spec_args::SpecArgs;

#[derive(Debug, Parser)]
#[command(name = "fusedg", version, about = "Leave-one-domain-out activity recognition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a raw dataset into a window file.
    Import(ImportArgs),
    /// Train and test over the target rotation and seeds.
    Train(SpecArgs),
    /// Re-evaluate a saved run on its held-out domain.
    Eval(EvalArgs),
    /// Grid search over λ and β on validation data.
    Sweep(SweepArgs),
    /// Compare the alignment distances against each other and ERM.
    Substitute(SpecArgs),
    /// Recompute an experiment's aggregate table from its run files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ImportArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Window file to write; a `.meta` sidecar is written next to it.
    #[arg(long = "file")]
    file: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// A run directory, e.g. `results/experiment-…/runs/target0_seed0`.
    #[arg(long)]
    run: PathBuf,
    /// Directory for report.txt, confusion.csv and roc.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Comma-separated λ values.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Comma-separated β values.
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// An experiment result directory.
    #[arg(long)]
    dir: PathBuf,
}

type CliResult = Result<bool, String>;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Import(a) => import(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Substitute(a) => substitute(&a),
        Command::Report(a) => report(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn import(args: &ImportArgs) -> CliResult {
    let spec = args.spec.spec()?;
    let (domains, classes) = spec.load_domains().map_err(|e| e.to_string())?;
    let file = WindowFile::from_domains(&domains, classes).map_err(|e| e.to_string())?;
    let mut sidecar = Sidecar::default();
    sidecar.set("dataset", spec.dataset).set("num_classes", classes);
    for d in &domains {
        sidecar.set(format!("domain.{}.name", d.domain_id), &d.name);
    }
    write_window_file(&args.file, &file, &sidecar).map_err(|e| e.to_string())?;
    println!(
        "wrote {} windows from {} domains to {}",
        file.windows.len(),
        domains.len(),
        args.file.display()
    );
    Ok(true)
}

fn print_experiment(r: &ExperimentResult) {
    println!("results: {}", r.dir.display());
    print!("{}", r.table.to_csv());
    for run in &r.runs {
        if let Err(e) = &run.result {
            eprintln!("run target {} seed {} failed: {e}", run.target, run.seed);
        }
    }
}

fn train(args: &SpecArgs) -> CliResult {
    let spec = args.spec()?;
    let result = run_experiment(&spec, &args.options()).map_err(|e| e.to_string())?;
    print_experiment(&result);
    Ok(result.all_succeeded())
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn summary_value(summary: &str, key: &str) -> Result<String, String> {
    summary
        .lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim().to_string())
        .ok_or_else(|| format!("summary.txt has no `{key}`"))
}

fn eval(args: &EvalArgs) -> CliResult {
    let experiment = args
        .run
        .parent()
        .and_then(Path::parent)
        .ok_or("the run directory must sit inside <experiment>/runs/")?;
    let spec = ExperimentSpec::from_json(&read(&experiment.join("spec.json"))?).map_err(|e| e.to_string())?;
    let summary = read(&args.run.join("summary.txt"))?;
    let target: usize = summary_value(&summary, "target")?.parse().map_err(|_| "bad target in summary.txt")?;
    let stats = serde_json::from_str(&read(&args.run.join("stats.json"))?).map_err(|e| format!("stats.json: {e}"))?;
    let params = load_params(&args.run.join("params.dgm")).map_err(|e| e.to_string())?;
    let (domains, _) = spec.load_domains().map_err(|e| e.to_string())?;
    let test = domains.get(target).ok_or("target out of range for the dataset")?;
    let report = evaluate(&params, test, &stats).map_err(|e| e.to_string())?;
    print!("{}", report.to_text());
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
        let files = [
            ("report.txt", report.to_text()),
            ("confusion.csv", report.confusion_csv()),
            ("roc.csv", report.roc_csv()),
        ];
        for (name, text) in files {
            std::fs::write(out.join(name), text).map_err(|e| format!("{name}: {e}"))?;
        }
    }
    Ok(true)
}

fn sweep(args: &SweepArgs) -> CliResult {
    let spec = args.spec.spec()?;
    let lambdas = args.lambdas.clone().unwrap_or_else(|| LAMBDA_GRID.to_vec());
    let betas = args.betas.clone().unwrap_or_else(|| BETA_GRID.to_vec());
    let result = run_sweep(&spec, &lambdas, &betas, &args.spec.options()).map_err(|e| e.to_string())?;
    println!("sweep: {}", result.dir.display());
    println!("lambda\\beta,{}", betas.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    for (l, row) in lambdas.iter().zip(&result.val_f1) {
        println!("{l},{}", row.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    }
    println!("selected lambda = {}, beta = {}", result.best.0, result.best.1);
    print_experiment(&result.experiment);
    Ok(result.experiment.all_succeeded())
}

fn substitute(args: &SpecArgs) -> CliResult {
    let spec = args.spec()?;
    let result = run_distance_substitution(&spec, &args.options()).map_err(|e| e.to_string())?;
    println!("results: {}", result.dir.display());
    print!("{}", read(&result.dir.join("substitution.csv"))?);
    Ok(result.rows.iter().all(|r| r.experiment.all_succeeded()))
}

fn report(args: &ReportArgs) -> CliResult {
    let table = aggregate_from_dir(&args.dir).map_err(|e| e.to_string())?;
    let recomputed = table.to_csv();
    print!("{recomputed}");
    let stored = read(&args.dir.join("aggregate.csv"))?;
    if stored != recomputed {
        eprintln!("aggregate.csv differs from the table recomputed from the run files");
        return Ok(false);
    }
    Ok(table.is_complete())
}
