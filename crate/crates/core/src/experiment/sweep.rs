use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use super::run::{execute, mean, prepare_dir, run_experiment_in, sample_std, write, ExperimentResult, RunOptions};
use super::spec::ExperimentSpec;
use crate::distances::DistanceKind;
use crate::error::{Error, Result};
use crate::training::Baseline;

/// `λ` grid of the sensitivity study.
pub const LAMBDA_GRID: [f64; 6] = [0.005, 0.01, 0.1, 1.0, 5.0, 10.0];
/// `β` grid of the sensitivity study.
pub const BETA_GRID: [f64; 6] = [0.05, 0.1, 0.5, 1.0, 5.0, 10.0];

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub dir: PathBuf,
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Mean best-epoch validation weighted F1, `[λ index][β index]`; NaN
    /// where a run failed.
    pub val_f1: Vec<Vec<f64>>,
    pub best: (f64, f64),
    /// Full experiment (with test evaluation) at the selected point.
    pub experiment: ExperimentResult,
}

/// Index of the largest finite value in grid order; the first one wins ties.
pub fn grid_argmax(values: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v.is_finite() && best.map_or(true, |b| v > b.2) {
                best = Some((i, j, v));
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}

fn sweep_digest(spec: &ExperimentSpec, lambdas: &[f64], betas: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update(spec.to_json().as_bytes());
    h.update(format!("{lambdas:?}{betas:?}").as_bytes());
    hex::encode(h.finalize())
}

/// Trains at every `(λ, β)` grid point, scores each point by validation
/// weighted F1 only, and runs the full test evaluation at the best point.
pub fn run_sweep(spec: &ExperimentSpec, lambdas: &[f64], betas: &[f64], opts: &RunOptions) -> Result<SweepResult> {
    spec.validate()?;
    if lambdas.is_empty() || betas.is_empty() {
        return Err(Error::Config("sweep grids must not be empty".into()));
    }
    let (domains, num_classes) = spec.load_domains()?;
    spec.target.indices(domains.len())?;
    let dir = prepare_dir(&opts.out, "sweep", &sweep_digest(spec, lambdas, betas), opts.force)?;
    let mut val_f1 = vec![vec![f64::NAN; betas.len()]; lambdas.len()];
    let mut csv = String::from("lambda,beta,mean_val_weighted_f1,std_val_weighted_f1,failed_runs\n");
    for (i, &lambda) in lambdas.iter().enumerate() {
        for (j, &beta) in betas.iter().enumerate() {
            let mut point = spec.clone();
            point.train.lambda = lambda;
            point.train.beta = beta;
            let runs = execute(&point, &domains, num_classes, opts.workers, false)?;
            let scores: Vec<f64> = runs.iter().filter_map(|r| r.val_f1()).collect();
            let failed = runs.len() - scores.len();
            if failed == 0 {
                val_f1[i][j] = mean(&scores);
            }
            let std = if failed == 0 { sample_std(&scores).to_string() } else { "NA".into() };
            let m = if failed == 0 { val_f1[i][j].to_string() } else { "NA".into() };
            let _ = writeln!(csv, "{lambda},{beta},{m},{std},{failed}");
            tracing::info!(lambda, beta, val_f1 = val_f1[i][j], "grid point finished");
        }
    }
    write(&dir.join("sweep.csv"), &csv)?;
    let (bi, bj) = grid_argmax(&val_f1).ok_or_else(|| Error::Other("every grid point failed".into()))?;
    let best = (lambdas[bi], betas[bj]);
    write(&dir.join("best.txt"), format!("lambda = {}\nbeta = {}\nval_weighted_f1 = {}\n", best.0, best.1, val_f1[bi][bj]))?;
    let mut chosen = spec.clone();
    chosen.train.lambda = best.0;
    chosen.train.beta = best.1;
    let sub = dir.join(format!("experiment-{}", &chosen.digest()[..16]));
    std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    let experiment = run_experiment_in(&chosen, &domains, num_classes, opts.workers, sub)?;
    Ok(SweepResult {
        dir,
        lambdas: lambdas.to_vec(),
        betas: betas.to_vec(),
        val_f1,
        best,
        experiment,
    })
}

/// One row of the distance comparison.
#[derive(Debug, Clone)]
pub struct SubstitutionRow {
    /// `mmd`, `coral`, `adversarial`, or `erm` for the baseline.
    pub variant: String,
    pub experiment: ExperimentResult,
}

#[derive(Debug, Clone)]
pub struct SubstitutionResult {
    pub dir: PathBuf,
    pub rows: Vec<SubstitutionRow>,
}

/// Runs the full pipeline once per alignment distance, plus the ERM
/// baseline, and writes a side-by-side table of averages.
pub fn run_distance_substitution(spec: &ExperimentSpec, opts: &RunOptions) -> Result<SubstitutionResult> {
    spec.validate()?;
    let (domains, num_classes) = spec.load_domains()?;
    let targets = spec.target.indices(domains.len())?;
    let dir = prepare_dir(&opts.out, "substitution", &spec.digest(), opts.force)?;
    let mut variants: Vec<(String, ExperimentSpec)> = DistanceKind::ALL
        .iter()
        .map(|&kind| {
            let mut s = spec.clone();
            s.train.distance = kind;
            (kind.to_string(), s)
        })
        .collect();
    let mut erm = spec.clone();
    erm.train.baseline = Baseline::Erm;
    variants.push(("erm".into(), erm));
    let mut rows = Vec::new();
    for (name, s) in variants {
        let sub = dir.join(&name);
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let experiment = run_experiment_in(&s, &domains, num_classes, opts.workers, sub)?;
        rows.push(SubstitutionRow { variant: name, experiment });
    }
    let mut csv = String::from("variant,average_weighted_f1,std_weighted_f1");
    for t in &targets {
        let _ = write!(csv, ",target_{t}");
    }
    csv.push('\n');
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    for row in &rows {
        let table = &row.experiment.table;
        let _ = write!(csv, "{},{},{}", row.variant, na(table.average()), na(table.average_std()));
        for r in &table.rows {
            let _ = write!(csv, ",{}", na(r.mean()));
        }
        csv.push('\n');
    }
    write(&dir.join("substitution.csv"), csv)?;
    Ok(SubstitutionResult { dir, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_first_in_grid_order() {
        let v = vec![vec![0.1, 0.5], vec![0.5, f64::NAN]];
        assert_eq!(grid_argmax(&v), Some((0, 1)));
        assert_eq!(grid_argmax(&[vec![f64::NAN]]), None);
        assert_eq!(grid_argmax(&[vec![0.3, 0.3, 0.3]]), Some((0, 0)));
    }
}
