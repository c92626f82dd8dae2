use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::spec::ExperimentSpec;
use crate::data::{DgTask, DomainDataset, NormStats};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_with_inference, EvalReport};
use crate::network::{save_params, ModelParams};
use crate::training::{model_config_for, train, Inference, TrainLog};

/// Where and how to run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Parent of the content-addressed result directory.
    pub out: PathBuf,
    /// Parallel runs; 0 uses every available core.
    pub workers: usize,
    /// Replace an existing result directory for the same spec.
    pub force: bool,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        RunOptions {
            out: out.into(),
            workers: 1,
            force: false,
        }
    }
}

/// Outcome of one (target, seed) run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub target: usize,
    pub seed: u64,
    pub result: std::result::Result<RunResult, String>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub params: ModelParams,
    pub stats: NormStats,
    pub log: TrainLog,
    /// Test-domain evaluation; absent for validation-only runs.
    pub report: Option<EvalReport>,
    pub inference: Option<Inference>,
}

impl RunOutcome {
    pub fn test_f1(&self) -> Option<f64> {
        self.result.as_ref().ok()?.report.as_ref().map(|r| r.weighted_f1)
    }

    pub fn val_f1(&self) -> Option<f64> {
        let r = self.result.as_ref().ok()?;
        Some(r.log.epochs[r.log.best_epoch - 1].val_weighted_f1)
    }
}

/// One row of the aggregate table.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub target: usize,
    pub domain: String,
    /// Test weighted F1 per seed, `None` for failed runs.
    pub scores: Vec<Option<f64>>,
}

impl AggregateRow {
    /// Mean over seeds, or `None` if any run is missing.
    pub fn mean(&self) -> Option<f64> {
        let v: Option<Vec<f64>> = self.scores.iter().copied().collect();
        v.map(|v| mean(&v))
    }

    pub fn std(&self) -> Option<f64> {
        let v: Option<Vec<f64>> = self.scores.iter().copied().collect();
        v.map(|v| sample_std(&v))
    }
}

/// Mean test weighted F1 per held-out domain over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<AggregateRow>,
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard deviation with `n − 1` in the denominator (0 for one value).
pub(crate) fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

impl AggregateTable {
    /// Mean of the per-target means, `None` if any cell is missing.
    pub fn average(&self) -> Option<f64> {
        let means: Option<Vec<f64>> = self.rows.iter().map(|r| r.mean()).collect();
        means.map(|m| mean(&m))
    }

    /// Standard deviation over seeds of the per-seed target averages.
    pub fn average_std(&self) -> Option<f64> {
        let per_seed: Option<Vec<f64>> = (0..self.seeds.len())
            .map(|s| {
                let v: Option<Vec<f64>> = self.rows.iter().map(|r| r.scores[s]).collect();
                v.map(|v| mean(&v))
            })
            .collect();
        per_seed.map(|v| sample_std(&v))
    }

    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(|r| r.scores.iter().all(Option::is_some))
    }

    /// `target,domain,mean_weighted_f1,std_weighted_f1,seed_<s>...` with a
    /// final `average` row. Missing cells are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("target,domain,mean_weighted_f1,std_weighted_f1");
        for seed in &self.seeds {
            let _ = write!(s, ",seed_{seed}");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{},{},{}", r.target, r.domain, fmt_opt(r.mean()), fmt_opt(r.std()));
            for v in &r.scores {
                let _ = write!(s, ",{}", fmt_opt(*v));
            }
            s.push('\n');
        }
        let _ = write!(s, "average,,{},{}", fmt_opt(self.average()), fmt_opt(self.average_std()));
        for i in 0..self.seeds.len() {
            let v: Option<Vec<f64>> = self.rows.iter().map(|r| r.scores[i]).collect();
            let _ = write!(s, ",{}", fmt_opt(v.map(|v| mean(&v))));
        }
        s.push('\n');
        s
    }
}

/// Everything produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub dir: PathBuf,
    pub spec: ExperimentSpec,
    pub table: AggregateTable,
    pub runs: Vec<RunOutcome>,
}

impl ExperimentResult {
    pub fn all_succeeded(&self) -> bool {
        self.runs.iter().all(|r| r.result.is_ok())
    }

    pub fn average(&self) -> Option<f64> {
        self.table.average()
    }
}

/// Creates `out/<prefix>-<digest>`; refuses to touch an existing directory
/// unless `force` is set.
pub(crate) fn prepare_dir(out: &Path, prefix: &str, digest: &str, force: bool) -> Result<PathBuf> {
    let dir = out.join(format!("{prefix}-{}", &digest[..16]));
    if dir.exists() {
        if !force {
            return Err(Error::Config(format!(
                "{} already exists; pass --force to overwrite it",
                dir.display()
            )));
        }
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

pub(crate) fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Other(format!("cannot start worker pool: {e}")))
}

/// Trains and (optionally) tests every (target, seed) pair of the spec.
/// Results come back in target-major, seed-minor order.
pub(crate) fn execute(
    spec: &ExperimentSpec,
    domains: &[DomainDataset],
    num_classes: usize,
    workers: usize,
    test: bool,
) -> Result<Vec<RunOutcome>> {
    let targets = spec.target.indices(domains.len())?;
    let jobs: Vec<(usize, u64)> = targets
        .iter()
        .flat_map(|&t| spec.run_seeds().into_iter().map(move |s| (t, s)))
        .collect();
    let run = |&(target, seed): &(usize, u64)| -> RunOutcome {
        let result = run_one(spec, domains, num_classes, target, seed, test).map_err(|e| e.to_string());
        match &result {
            Ok(r) => tracing::info!(
                target,
                seed,
                test_f1 = r.report.as_ref().map(|r| r.weighted_f1),
                epochs = r.log.epochs.len(),
                "run finished"
            ),
            Err(e) => tracing::warn!(target, seed, error = %e, "run failed"),
        }
        RunOutcome { target, seed, result }
    };
    Ok(thread_pool(workers)?.install(|| jobs.par_iter().map(run).collect()))
}

fn run_one(
    spec: &ExperimentSpec,
    domains: &[DomainDataset],
    num_classes: usize,
    target: usize,
    seed: u64,
    test: bool,
) -> Result<RunResult> {
    let task = DgTask::leave_one_out(domains, target, num_classes, spec.val_fraction, seed)?;
    let model = model_config_for(&task, &spec.model);
    let (params, log) = train(&task, &model, &spec.effective_train(seed))?;
    let (report, inference) = if test {
        let (r, i) = evaluate_with_inference(&params, &task.test_domain.windows, &task.stats)?;
        (Some(r), Some(i))
    } else {
        (None, None)
    };
    Ok(RunResult {
        params,
        stats: task.stats,
        log,
        report,
        inference,
    })
}

pub(crate) fn run_dir_name(target: usize, seed: u64) -> String {
    format!("target{target}_seed{seed}")
}

fn write_run(dir: &Path, outcome: &RunOutcome, domains: &[DomainDataset]) -> Result<()> {
    let dir = dir.join("runs").join(run_dir_name(outcome.target, outcome.seed));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let r = match &outcome.result {
        Ok(r) => r,
        Err(e) => return write(&dir.join("error.txt"), format!("{e}\n")),
    };
    write(&dir.join("train_log.jsonl"), r.log.to_jsonl())?;
    let mut summary = String::new();
    let _ = writeln!(summary, "target = {}", outcome.target);
    let _ = writeln!(summary, "domain = {}", domains[outcome.target].name);
    let _ = writeln!(summary, "seed = {}", outcome.seed);
    let _ = writeln!(summary, "epochs = {}", r.log.epochs.len());
    let _ = writeln!(summary, "steps_per_epoch = {}", r.log.steps_per_epoch);
    let _ = writeln!(summary, "best_epoch = {}", r.log.best_epoch);
    let _ = writeln!(summary, "best_val_score = {}", r.log.best_score);
    let _ = writeln!(summary, "stop_reason = {:?}", r.log.stop_reason);
    let _ = writeln!(summary, "initial_total = {}", r.log.initial.total);
    write(&dir.join("summary.txt"), summary)?;
    write(
        &dir.join("stats.json"),
        serde_json::to_string_pretty(&r.stats).expect("plain data"),
    )?;
    save_params(&r.params, &dir.join("params.dgm"))?;
    if let (Some(report), Some(inf)) = (&r.report, &r.inference) {
        write(&dir.join("report.txt"), report.to_text())?;
        write(&dir.join("confusion.csv"), report.confusion_csv())?;
        write(&dir.join("roc.csv"), report.roc_csv())?;
        let truth: Vec<u16> = domains[outcome.target].windows.iter().map(|w| w.activity).collect();
        let mut s = String::from("window,true,pred");
        for k in 0..inf.weights.ncols() {
            let _ = write!(s, ",w_{k}");
        }
        s.push('\n');
        for (i, row) in inf.weights.rows().into_iter().enumerate() {
            let _ = write!(s, "{i},{},{}", truth[i], inf.predictions[i]);
            for w in row {
                let _ = write!(s, ",{w}");
            }
            s.push('\n');
        }
        write(&dir.join("weights.csv"), s)?;
    }
    Ok(())
}

pub(crate) fn build_table(spec: &ExperimentSpec, domains: &[DomainDataset], runs: &[RunOutcome]) -> Result<AggregateTable> {
    let seeds = spec.run_seeds();
    let rows = spec
        .target
        .indices(domains.len())?
        .into_iter()
        .map(|t| AggregateRow {
            target: t,
            domain: domains[t].name.clone(),
            scores: seeds
                .iter()
                .map(|&s| runs.iter().find(|r| r.target == t && r.seed == s).and_then(RunOutcome::test_f1))
                .collect(),
        })
        .collect();
    Ok(AggregateTable { seeds, rows })
}

fn fusion_summary(table: &AggregateTable, runs: &[RunOutcome]) -> String {
    let k = runs
        .iter()
        .find_map(|r| r.result.as_ref().ok()?.report.as_ref().map(|r| r.mean_weights.len()))
        .unwrap_or(0);
    let mut s = String::from("target,domain,runs");
    for j in 0..k {
        let _ = write!(s, ",mean_w_{j}");
    }
    s.push('\n');
    for row in &table.rows {
        let weights: Vec<&Vec<f64>> = runs
            .iter()
            .filter(|r| r.target == row.target)
            .filter_map(|r| r.result.as_ref().ok()?.report.as_ref().map(|r| &r.mean_weights))
            .collect();
        let _ = write!(s, "{},{},{}", row.target, row.domain, weights.len());
        for j in 0..k {
            let v: Vec<f64> = weights.iter().map(|w| w[j]).collect();
            let _ = write!(s, ",{}", fmt_opt((!v.is_empty()).then(|| mean(&v))));
        }
        s.push('\n');
    }
    s
}

/// Leave-one-domain-out training and testing for every target and seed.
///
/// Writes `spec.json`, `aggregate.csv`, `fusion_weights.csv` and one
/// directory per run under `runs/`. Failed runs leave an `error.txt` and
/// show up as `NA` in the aggregate; the call itself still succeeds.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ExperimentResult> {
    spec.validate()?;
    let (domains, num_classes) = spec.load_domains()?;
    spec.target.indices(domains.len())?;
    let dir = prepare_dir(&opts.out, "experiment", &spec.digest(), opts.force)?;
    run_experiment_in(spec, &domains, num_classes, opts.workers, dir)
}

pub(crate) fn run_experiment_in(
    spec: &ExperimentSpec,
    domains: &[DomainDataset],
    num_classes: usize,
    workers: usize,
    dir: PathBuf,
) -> Result<ExperimentResult> {
    write(&dir.join("spec.json"), spec.to_json())?;
    let runs = execute(spec, domains, num_classes, workers, true)?;
    for r in &runs {
        write_run(&dir, r, domains)?;
    }
    let table = build_table(spec, domains, &runs)?;
    write(&dir.join("aggregate.csv"), table.to_csv())?;
    write(&dir.join("fusion_weights.csv"), fusion_summary(&table, &runs))?;
    Ok(ExperimentResult {
        dir,
        spec: spec.clone(),
        table,
        runs,
    })
}

/// Rebuilds the aggregate table of a result directory from its per-run
/// report files alone.
pub fn aggregate_from_dir(dir: &Path) -> Result<AggregateTable> {
    let spec_path = dir.join("spec.json");
    let text = fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?;
    let spec = ExperimentSpec::from_json(&text)?;
    let seeds = spec.run_seeds();
    let agg_path = dir.join("aggregate.csv");
    let agg = fs::read_to_string(&agg_path).map_err(|e| Error::io(&agg_path, e))?;
    let mut rows = Vec::new();
    for line in agg.lines().skip(1).filter(|l| !l.starts_with("average")) {
        let mut cells = line.split(',');
        let target: usize = cells
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::Other(format!("bad aggregate line `{line}`")))?;
        let domain = cells.next().unwrap_or_default().to_string();
        let scores = seeds
            .iter()
            .map(|&s| {
                let run = dir.join("runs").join(run_dir_name(target, s));
                let report = run.join("report.txt");
                if !report.exists() {
                    return Ok(None);
                }
                let text = fs::read_to_string(&report).map_err(|e| Error::io(&report, e))?;
                let conf_path = run.join("confusion.csv");
                let conf = fs::read_to_string(&conf_path).map_err(|e| Error::io(&conf_path, e))?;
                Ok(Some(EvalReport::from_text(&text, &conf)?.weighted_f1))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(AggregateRow { target, domain, scores });
    }
    Ok(AggregateTable { seeds, rows })
}
