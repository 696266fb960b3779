//! Self-check suite behind `fscpu check`.
//!
//! Each check draws random instances from a seeded generator and compares a
//! subset solver (normally [`objective_value`]) against the exhaustive oracle
//! and the structural properties the optimum must satisfy.

use std::cmp::Ordering;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::Serialize;

use crate::clustering::Clustering;
use crate::error::Result;
use crate::objective::{brute_force_best_subset, objective_value, ratio_order, ObjectiveReport};
use crate::optimizer::{repair, CostConstraint, FeatureMask, ThetaVector};
use crate::rng::{self, Rng};

pub type SubsetSolver = fn(&Clustering) -> Result<ObjectiveReport>;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub trials: usize,
    pub seed: u64,
    pub mcar_cases: usize,
    pub scaling_cases: usize,
    pub repair_cases: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 0,
            mcar_cases: 200,
            scaling_cases: 200,
            repair_cases: 10_000,
        }
    }
}

/// Deliberately wrong solver: keeps only the single best-ratio cluster.
/// Used as a negative control for the suite.
pub fn top_cluster_only(clustering: &Clustering) -> Result<ObjectiveReport> {
    let mut report = objective_value(clustering)?;
    let best = ratio_order(clustering)[0];
    let exact = crate::objective::subset_score(clustering, &[best]);
    report.chosen_clusters = vec![best];
    report.f = exact.value();
    report.recall = exact.recall();
    report.precision = exact.precision();
    report.exact = exact;
    Ok(report)
}

/// K in 2..=max_k, sizes in 1..=max_size, labeled in 0..=size, at least one labeled.
pub fn random_clustering(rng: &mut Rng, max_k: usize, max_size: usize) -> Clustering {
    loop {
        let k = rng.random_range(2..=max_k);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(1..=max_size)).collect();
        let labeled: Vec<usize> = sizes.iter().map(|&s| rng.random_range(0..=s)).collect();
        if labeled.iter().sum::<usize>() > 0 {
            return Clustering::from_counts(&sizes, &labeled).expect("valid counts");
        }
    }
}

/// Strict ratio separation between chosen and unchosen clusters.
pub fn ratio_gap_holds(clustering: &Clustering, chosen: &[usize]) -> bool {
    let inside: Vec<usize> = chosen.to_vec();
    let outside: Vec<usize> = (0..clustering.k).filter(|k| !chosen.contains(k)).collect();
    let a = &clustering.labeled_counts;
    let c = &clustering.sizes;
    inside.iter().all(|&k| {
        outside.iter().all(|&l| {
            (a[k] as u128 * c[l] as u128).cmp(&(a[l] as u128 * c[k] as u128)) == Ordering::Greater
        })
    })
}

fn outcome(name: &'static str, cases: usize, failures: usize, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: failures == 0,
        cases,
        failures,
        detail,
    }
}

pub fn check_oracle_equivalence(solver: SubsetSolver, trials: usize, seed: u64) -> CheckOutcome {
    let mut rng = rng::from_seed(rng::derive(seed, &[1]));
    let mut failures = 0;
    let mut first = String::new();
    for _ in 0..trials {
        let c = random_clustering(&mut rng, 12, 50);
        let fast = solver(&c);
        let slow = brute_force_best_subset(&c);
        let ok = match (&fast, &slow) {
            (Ok(f), Ok(s)) => {
                f.exact.cmp_exact(&s.exact) == Ordering::Equal
                    && f.chosen_clusters == s.chosen_clusters
            }
            _ => false,
        };
        if !ok {
            failures += 1;
            if first.is_empty() {
                first = format!("sizes={:?} labeled={:?}", c.sizes, c.labeled_counts);
            }
        }
    }
    outcome("oracle equivalence", trials, failures, first)
}

pub fn check_ratio_gap(solver: SubsetSolver, trials: usize, seed: u64) -> CheckOutcome {
    let mut rng = rng::from_seed(rng::derive(seed, &[1]));
    let mut failures = 0;
    let mut cases = 0;
    let mut first = String::new();
    for _ in 0..trials {
        let c = random_clustering(&mut rng, 12, 50);
        let Ok(report) = solver(&c) else {
            failures += 1;
            continue;
        };
        if report.chosen_clusters.len() == c.k {
            continue;
        }
        cases += 1;
        if !ratio_gap_holds(&c, &report.chosen_clusters) {
            failures += 1;
            if first.is_empty() {
                first = format!("sizes={:?} labeled={:?}", c.sizes, c.labeled_counts);
            }
        }
    }
    outcome("ratio gap (chosen > unchosen)", cases, failures, first)
}

/// Clusters `0..k_a` carry labeled ratio `beta`, the rest none.
pub fn mcar_instance(rng: &mut Rng) -> (Clustering, usize) {
    let k = rng.random_range(1..=12);
    let k_a = rng.random_range(1..=k);
    let denom = *[10usize, 4, 2].choose(rng).expect("non-empty");
    let sizes: Vec<usize> = (0..k).map(|_| denom * rng.random_range(1..=10)).collect();
    let labeled: Vec<usize> = sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| if i < k_a { s / denom } else { 0 })
        .collect();
    (
        Clustering::from_counts(&sizes, &labeled).expect("valid counts"),
        k_a,
    )
}

pub fn check_mcar(solver: SubsetSolver, cases: usize, seed: u64) -> CheckOutcome {
    let mut rng = rng::from_seed(rng::derive(seed, &[2]));
    let mut failures = 0;
    let mut first = String::new();
    for _ in 0..cases {
        let (c, k_a) = mcar_instance(&mut rng);
        let expected: Vec<usize> = (0..k_a).collect();
        if solver(&c).map(|r| r.chosen_clusters).ok() != Some(expected) {
            failures += 1;
            if first.is_empty() {
                first = format!("sizes={:?} labeled={:?}", c.sizes, c.labeled_counts);
            }
        }
    }
    outcome("labeled-rate subset recovery", cases, failures, first)
}

/// Instance whose labeled counts can be multiplied by up to 5 and stay valid.
pub fn scalable_instance(rng: &mut Rng) -> Clustering {
    loop {
        let k = rng.random_range(2..=12);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(5..=250)).collect();
        let labeled: Vec<usize> = sizes.iter().map(|&s| rng.random_range(0..=s / 5)).collect();
        if labeled.iter().sum::<usize>() > 0 {
            return Clustering::from_counts(&sizes, &labeled).expect("valid counts");
        }
    }
}

pub fn check_label_scaling(solver: SubsetSolver, cases: usize, seed: u64) -> CheckOutcome {
    let mut rng = rng::from_seed(rng::derive(seed, &[3]));
    let mut failures = 0;
    let mut first = String::new();
    for _ in 0..cases {
        let c = scalable_instance(&mut rng);
        let factor = *[2usize, 3, 5].choose(&mut rng).expect("non-empty");
        let scaled_counts: Vec<usize> = c.labeled_counts.iter().map(|a| a * factor).collect();
        let scaled = Clustering::from_counts(&c.sizes, &scaled_counts).expect("valid counts");
        let ok = match (solver(&c), solver(&scaled)) {
            (Ok(base), Ok(up)) => {
                let (n0, d0) = base.exact.as_fraction();
                let (n1, d1) = up.exact.as_fraction();
                base.chosen_clusters == up.chosen_clusters && n1 * d0 == factor as u128 * n0 * d1
            }
            _ => false,
        };
        if !ok {
            failures += 1;
            if first.is_empty() {
                first = format!(
                    "sizes={:?} labeled={:?} x{factor}",
                    c.sizes, c.labeled_counts
                );
            }
        }
    }
    outcome("label-count scaling", cases, failures, first)
}

/// Random (mask, costs, budget, theta) for the repair contract.
pub fn repair_instance(rng: &mut Rng) -> (FeatureMask, CostConstraint, ThetaVector, bool) {
    let d = rng.random_range(1..=60);
    let unit = rng.random_bool(0.5);
    let costs: Vec<f64> = if unit {
        vec![1.0; d]
    } else {
        (0..d)
            .map(|_| rng.random_range(1..=20) as f64 * 0.25)
            .collect()
    };
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let total: f64 = costs.iter().sum();
    let budget = if unit {
        rng.random_range(1..=d) as f64
    } else {
        rng.random_range(min..=total * 1.2)
    };
    let eps = 1.0 / d as f64 * 0.5;
    let theta = ThetaVector {
        theta: (0..d).map(|_| rng.random_range(eps..=1.0 - eps)).collect(),
        epsilon: eps,
        eta: 0.5 / d as f64,
    };
    let p = rng.random::<f64>();
    let mask = FeatureMask::new((0..d).map(|_| rng.random_bool(p)).collect());
    let constraint = CostConstraint::new(costs, budget).expect("budget >= min cost");
    (mask, constraint, theta, unit)
}

pub fn check_repair(cases: usize, seed: u64) -> CheckOutcome {
    let mut rng = rng::from_seed(rng::derive(seed, &[4]));
    let mut failures = 0;
    let mut first = String::new();
    for _ in 0..cases {
        let (mask, constraint, theta, unit) = repair_instance(&mut rng);
        let fixed = repair(&mask, &theta, &constraint, &mut rng);
        let mut ok = constraint.is_feasible_and_maximal(&fixed);
        if unit {
            let k = constraint.budget() as usize;
            ok &= fixed.count_ones() == k.min(constraint.len());
        }
        if !ok {
            failures += 1;
            if first.is_empty() {
                first = format!(
                    "costs={:?} budget={}",
                    constraint.costs(),
                    constraint.budget()
                );
            }
        }
    }
    outcome("repair feasible and maximal", cases, failures, first)
}

pub fn run_checks(options: &CheckOptions, solver: SubsetSolver) -> Vec<CheckOutcome> {
    vec![
        check_oracle_equivalence(solver, options.trials, options.seed),
        check_ratio_gap(solver, options.trials, options.seed),
        check_mcar(solver, options.mcar_cases, options.seed),
        check_label_scaling(solver, options.scaling_cases, options.seed),
        check_repair(options.repair_cases, options.seed),
    ]
}
