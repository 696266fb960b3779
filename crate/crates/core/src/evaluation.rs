//! Feature-selection recall and the synthetic benchmark harness.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, SyntheticSpec, N_FEATURES, N_RELEVANT};
use crate::error::{Error, Result};
use crate::objective::population_std;
use crate::optimizer::{self, CostConstraint, RunConfig};
use crate::rng;

const SUBSAMPLE_STREAM: u64 = 0x5B5;

/// Fraction of the relevant features that were selected.
pub fn fsr(selected: &[usize], relevant_truth: &[bool]) -> Result<f64> {
    let relevant = relevant_truth.iter().filter(|&&r| r).count();
    if relevant == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut seen = vec![false; relevant_truth.len()];
    let mut hits = 0;
    for &i in selected {
        if i >= relevant_truth.len() {
            return Err(Error::LengthMismatch {
                expected: relevant_truth.len(),
                found: i + 1,
            });
        }
        if relevant_truth[i] && !seen[i] {
            hits += 1;
        }
        seen[i] = true;
    }
    Ok(hits as f64 / relevant as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub condition: SyntheticSpec,
    pub label: String,
    pub seeds: Vec<u64>,
    pub fsr: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub convergence_fraction: Vec<f64>,
    pub runtimes: Vec<f64>,
}

impl ExperimentResult {
    /// Table cell in the `.92±.06` style.
    pub fn cell(&self) -> String {
        format!("{}±{}", short_decimal(self.mean), short_decimal(self.std))
    }
}

fn short_decimal(v: f64) -> String {
    let s = format!("{v:.2}");
    s.strip_prefix('0').map(str::to_string).unwrap_or(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub n_seeds: usize,
    /// Keep only this many rows (stratified on the PU label) before selection.
    pub subsample_rows: Option<usize>,
    /// Worker threads across seeds; results do not depend on this.
    pub jobs: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            n_seeds: 5,
            subsample_rows: None,
            jobs: 1,
        }
    }
}

/// The ten synthetic conditions, in result-table column order.
pub fn table_conditions() -> Vec<SyntheticSpec> {
    let mut out = Vec::new();
    for rate in [0.4, 0.1] {
        for (neg, pos) in [(8, 1), (8, 2), (1, 1), (1, 2)] {
            out.push(SyntheticSpec::clustered(rate, neg, pos, 0));
        }
    }
    out.push(SyntheticSpec::outlier(0.4, 0));
    out.push(SyntheticSpec::outlier(0.1, 0));
    out
}

/// One seed: generate, scale, select, score.
fn run_seed(
    spec: &SyntheticSpec,
    seed: u64,
    config: &RunConfig,
    options: &ExperimentOptions,
) -> Result<(f64, f64, f64)> {
    let start = Instant::now();
    let mut spec = spec.clone();
    spec.seed = seed;
    let mut data = dataset::generate(&spec)?;
    if let Some(n) = options.subsample_rows {
        data = dataset::subsample_rows(&data, n, rng::derive(seed, &[SUBSAMPLE_STREAM]))?;
    }
    let data = dataset::normalize(&data);
    let constraint = CostConstraint::unit(N_FEATURES, N_RELEVANT)?;
    let mut config = config.clone();
    config.seed = seed;
    let result = optimizer::run(&data, &config, &constraint)?;
    let truth = data.relevant_truth.as_ref().ok_or(Error::NoGroundTruth)?;
    let score = fsr(&result.selected_features, truth)?;
    Ok((
        score,
        result.convergence_fraction,
        start.elapsed().as_secs_f64(),
    ))
}

/// Repeat one condition over seeds `0..n_seeds` and aggregate FSR.
pub fn run_condition(
    spec: &SyntheticSpec,
    n_seeds: usize,
    config: &RunConfig,
) -> Result<ExperimentResult> {
    run_condition_with(
        spec,
        config,
        &ExperimentOptions {
            n_seeds,
            ..ExperimentOptions::default()
        },
    )
}

pub fn run_condition_with(
    spec: &SyntheticSpec,
    config: &RunConfig,
    options: &ExperimentOptions,
) -> Result<ExperimentResult> {
    spec.validate()?;
    if options.n_seeds == 0 {
        return Err(Error::Config("n_seeds must be at least 1".to_string()));
    }
    let seeds: Vec<u64> = (0..options.n_seeds as u64).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let outcomes: Vec<Result<(f64, f64, f64)>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_seed(spec, seed, config, options))
            .collect()
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let fsr: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let mean = fsr.iter().sum::<f64>() / fsr.len() as f64;
    let mut condition = spec.clone();
    condition.seed = 0;
    Ok(ExperimentResult {
        label: condition.label(),
        condition,
        seeds,
        std: population_std(&fsr),
        mean,
        convergence_fraction: outcomes.iter().map(|o| o.1).collect(),
        runtimes: outcomes.iter().map(|o| o.2).collect(),
        fsr,
    })
}

/// Write results as CSV (one row per condition) and JSON.
pub fn write_table(results: &[ExperimentResult], csv_path: &Path, json_path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(csv_path)?;
    writer.write_record([
        "condition",
        "cluster_assumption",
        "labeled_rate",
        "n_negative_clusters",
        "n_positive_clusters",
        "n_seeds",
        "mean_fsr",
        "std_fsr",
        "cell",
        "fsr_per_seed",
    ])?;
    for r in results {
        let c = &r.condition;
        let (neg, pos) = if c.cluster_assumption {
            (
                c.n_negative_clusters.to_string(),
                c.n_positive_clusters.to_string(),
            )
        } else {
            ("-".to_string(), "-".to_string())
        };
        writer.write_record([
            r.label.clone(),
            c.cluster_assumption.to_string(),
            c.labeled_rate.to_string(),
            neg,
            pos,
            r.seeds.len().to_string(),
            format!("{:?}", r.mean),
            format!("{:?}", r.std),
            r.cell(),
            r.fsr
                .iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(";"),
        ])?;
    }
    writer.flush()?;
    std::fs::write(json_path, serde_json::to_string_pretty(results)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> Vec<bool> {
        (0..50).map(|i| i < 25).collect()
    }

    #[test]
    fn fsr_examples() {
        let all: Vec<usize> = (0..25).collect();
        assert_eq!(fsr(&all, &truth()).unwrap(), 1.0);
        let none: Vec<usize> = (25..50).collect();
        assert_eq!(fsr(&none, &truth()).unwrap(), 0.0);
        let most: Vec<usize> = (5..30).collect();
        assert_eq!(fsr(&most, &truth()).unwrap(), 0.8);
    }

    #[test]
    fn fsr_needs_truth() {
        assert!(matches!(
            fsr(&[0], &[false, false]),
            Err(Error::NoGroundTruth)
        ));
    }

    #[test]
    fn cells() {
        let r = ExperimentResult {
            condition: SyntheticSpec::clustered(0.1, 8, 1, 0),
            label: String::new(),
            seeds: vec![0],
            fsr: vec![0.92],
            mean: 0.92,
            std: 0.06,
            convergence_fraction: vec![1.0],
            runtimes: vec![0.0],
        };
        assert_eq!(r.cell(), ".92±.06");
    }

    #[test]
    fn ten_conditions() {
        let c = table_conditions();
        assert_eq!(c.len(), 10);
        assert_eq!(c[4].label(), "{✓, 10%, 8, 1}");
        assert_eq!(c[9].label(), "{×, 10%}");
    }
}
