//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! The full-scale benchmark table check is slow (hours on one core) and only
//! runs when `FSCPU_FULL_TABLE=1`; the reduced smoke variant always runs.

use std::process::ExitCode;
use std::time::Instant;

use fscpu::checks::{self, random_clustering, ratio_gap_holds};
use fscpu::clustering::{ClusterConfig, Clustering};
use fscpu::dataset::SyntheticSpec;
use fscpu::evaluation::{self, ExperimentOptions};
use fscpu::objective::{
    brute_force_best_subset, combined_score, equal_frequency_bins, mi_score, objective_value,
    ScoreLog,
};
use fscpu::optimizer::{run_with_objective, CostConstraint, Evaluation, FeatureMask, RunConfig};
use fscpu::{rng, Dataset, Matrix, Result};
use rand::Rng as _;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, passed: bool, detail: String) {
        if !passed {
            self.failed += 1;
        }
        println!(
            "{} criterion {id}: {detail}",
            if passed { "PASS" } else { "FAIL" }
        );
    }
}

fn criteria_1_and_2(report: &mut Report) {
    let start = Instant::now();
    let mut rng = rng::from_seed(rng::derive(0xACC, &[1]));
    let instances: Vec<Clustering> = (0..1000)
        .map(|_| random_clustering(&mut rng, 12, 50))
        .collect();
    let mut mismatches = 0;
    let mut gap_cases = 0;
    let mut gap_violations = 0;
    for c in &instances {
        let fast = objective_value(c).expect("labeled instance");
        let slow = brute_force_best_subset(c).expect("K <= 12");
        let (n1, d1) = fast.exact.as_fraction();
        let (n2, d2) = slow.exact.as_fraction();
        if n1 * d2 != n2 * d1 || fast.chosen_clusters != slow.chosen_clusters {
            mismatches += 1;
        }
        if fast.chosen_clusters.len() < c.k {
            gap_cases += 1;
            if !ratio_gap_holds(c, &fast.chosen_clusters) {
                gap_violations += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report.line(
        "1",
        mismatches == 0 && secs < 10.0,
        format!("prefix search vs exhaustive oracle on 1000 instances: {mismatches} mismatches, {secs:.2}s"),
    );
    report.line(
        "2",
        gap_violations == 0,
        format!(
            "strict ratio gap on {gap_cases} proper-subset optima: {gap_violations} violations"
        ),
    );
}

fn criterion_3(report: &mut Report) {
    let o = checks::check_mcar(objective_value, 200, 0xACC);
    report.line(
        "3",
        o.passed && o.cases == 200,
        format!(
            "uniform labeled-rate instances recover the positive clusters: {}/{} failures",
            o.failures, o.cases
        ),
    );
}

fn criterion_4(report: &mut Report) {
    let o = checks::check_label_scaling(objective_value, 200, 0xACC);
    report.line(
        "4",
        o.passed && o.cases == 200,
        format!(
            "label-count scaling keeps subset and scales f exactly: {}/{} failures",
            o.failures, o.cases
        ),
    );
}

fn criterion_5(report: &mut Report) {
    let start = Instant::now();
    let o = checks::check_repair(10_000, 0xACC);
    let secs = start.elapsed().as_secs_f64();
    report.line(
        "5",
        o.passed && o.cases == 10_000 && secs < 5.0,
        format!(
            "repair feasible, maximal, exact popcount: {}/{} failures, {secs:.2}s",
            o.failures, o.cases
        ),
    );
}

fn onemax(mask: &FeatureMask, _seed: u64) -> Result<Evaluation> {
    Ok(Evaluation::plain(
        (0..25).filter(|&i| mask.get(i)).count() as f64 / 25.0,
    ))
}

fn criteria_6_and_8(report: &mut Report) {
    let start = Instant::now();
    let constraint = CostConstraint::unit(50, 25).expect("valid");
    let optimum: Vec<usize> = (0..25).collect();
    let mut exact = 0;
    let mut ordered = 0;
    let mut fractions = Vec::new();
    for seed in 0..10 {
        let config = RunConfig {
            seed,
            ..RunConfig::default()
        };
        let r = run_with_objective(&onemax, &constraint, &config).expect("surrogate run");
        exact += usize::from(r.selected_features == optimum);
        let head = r.final_theta[..25].iter().sum::<f64>() / 25.0;
        let tail = r.final_theta[25..].iter().sum::<f64>() / 25.0;
        ordered += usize::from(head > tail);
        fractions.push(r.convergence_fraction);
    }
    let secs = start.elapsed().as_secs_f64();
    report.line(
        "6",
        exact >= 9 && ordered == 10 && secs < 30.0,
        format!("constrained OneMax: optimum in {exact}/10 seeds, theta ordered in {ordered}/10, {secs:.2}s"),
    );
    let min = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    report.line(
        "8",
        min >= 0.9,
        format!("theta convergence fraction at T=3000: min {min:.3} over 10 seeds"),
    );
}

fn table_run(
    report: &mut Report,
    id: &str,
    spec: SyntheticSpec,
    config: &RunConfig,
    options: &ExperimentOptions,
    pass: impl Fn(f64) -> bool,
    target: &str,
    time_limit: Option<f64>,
) {
    let start = Instant::now();
    let r = evaluation::run_condition_with(&spec, config, options).expect("condition runs");
    let secs = start.elapsed().as_secs_f64();
    let in_time = time_limit.is_none_or(|t| secs < t);
    report.line(
        id,
        pass(r.mean) && in_time,
        format!(
            "{} mean FSR {:.3} ({}; {}), per seed {:?}, {secs:.0}s",
            r.label,
            r.mean,
            r.cell(),
            target,
            r.fsr
        ),
    );
}

fn criterion_7(report: &mut Report) {
    let smoke = RunConfig {
        iterations: 500,
        cluster: ClusterConfig {
            max_iter: 25,
            ..ClusterConfig::default()
        },
        ..RunConfig::default()
    };
    let smoke_opts = ExperimentOptions {
        n_seeds: 5,
        subsample_rows: Some(1500),
        jobs: 1,
    };
    let limit = Some(300.0);
    table_run(
        report,
        "7 (smoke)",
        SyntheticSpec::clustered(0.1, 8, 1, 0),
        &smoke,
        &smoke_opts,
        |m| m >= 0.70,
        "target >= 0.70",
        limit,
    );
    table_run(
        report,
        "7 (smoke)",
        SyntheticSpec::clustered(0.4, 8, 1, 0),
        &smoke,
        &smoke_opts,
        |_| true,
        "timing only",
        limit,
    );
    table_run(
        report,
        "7 (smoke)",
        SyntheticSpec::outlier(0.1, 0),
        &smoke,
        &smoke_opts,
        |_| true,
        "timing only",
        limit,
    );

    if std::env::var("FSCPU_FULL_TABLE").as_deref() == Ok("1") {
        let full = RunConfig::default();
        let opts = ExperimentOptions {
            n_seeds: 5,
            subsample_rows: None,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        table_run(
            report,
            "7 (full)",
            SyntheticSpec::clustered(0.1, 8, 1, 0),
            &full,
            &opts,
            |m| m >= 0.78,
            "target >= 0.78",
            None,
        );
        table_run(
            report,
            "7 (full)",
            SyntheticSpec::clustered(0.4, 8, 1, 0),
            &full,
            &opts,
            |m| m >= 0.80,
            "target >= 0.80",
            None,
        );
        table_run(
            report,
            "7 (full)",
            SyntheticSpec::outlier(0.1, 0),
            &full,
            &opts,
            |m| m <= 0.70,
            "target <= 0.70",
            None,
        );
    } else {
        println!("NOTE criterion 7 (full): full-scale table run skipped; set FSCPU_FULL_TABLE=1 to run it");
    }
}

/// Plug-in MI from an explicit joint table, summed as p(b,s) log p(b,s)/(p(b)p(s)).
fn table_mi(column: &[f64], s: &[bool]) -> f64 {
    let bins = equal_frequency_bins(column, 10);
    let n = column.len() as f64;
    let nb = bins.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![vec![0.0; 2]; nb];
    for (&b, &l) in bins.iter().zip(s) {
        joint[b][usize::from(l)] += 1.0 / n;
    }
    let ps: Vec<f64> = (0..2).map(|l| joint.iter().map(|r| r[l]).sum()).collect();
    let mut mi = 0.0;
    for row in &joint {
        let pb: f64 = row.iter().sum();
        for l in 0..2 {
            if row[l] > 0.0 {
                mi += row[l] * (row[l] / (pb * ps[l])).ln();
            }
        }
    }
    mi.max(0.0)
}

fn criterion_9(report: &mut Report) {
    let mut rng = rng::from_seed(rng::derive(0xACC, &[9]));
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let n = rng.random_range(20..120);
        let d = rng.random_range(1..4);
        let x: Vec<f64> = (0..n * d)
            .map(|_| (rng.random_range(-2.0..2.0) * 4.0_f64).round() / 4.0)
            .collect();
        let s: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        let Ok(data) = Dataset::new(Matrix::new(n, d, x), s) else {
            continue;
        };
        let expected = (0..d)
            .map(|j| table_mi(&data.x.column(j), &data.s))
            .sum::<f64>()
            / d as f64;
        let got = mi_score(&data, &FeatureMask::ones(d)).expect("non-empty mask");
        worst = worst.max((got - expected).abs());
        done += 1;
    }

    let mut log = ScoreLog::new();
    log.push(1.0, 2.0);
    log.push(3.0, 2.0);
    let a = combined_score(3.0, 2.0, &log);
    let mut log = ScoreLog::new();
    log.push(0.0, 0.0);
    log.push(2.0, 4.0);
    let b = combined_score(2.0, 4.0, &log);
    let mut log = ScoreLog::new();
    log.push(0.25, 0.5);
    let c = combined_score(0.25, 0.5, &log);
    let examples_ok = a == 5.0 && b == 4.0 && c == 0.75;
    report.line(
        "9",
        worst < 1e-12 && examples_ok,
        format!("MI vs contingency oracle on 100 instances: max error {worst:.1e}; combined examples {a}, {b}, {c}"),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };
    criteria_1_and_2(&mut report);
    criterion_3(&mut report);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criteria_6_and_8(&mut report);
    criterion_9(&mut report);
    criterion_7(&mut report);
    if report.failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", report.failed);
        ExitCode::FAILURE
    }
}
