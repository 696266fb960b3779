//! Compact-GA search over binary feature masks under a hard cost budget.
//!
//! The search distribution is a product of Bernoulli(theta_l). Each iteration
//! samples two masks, repairs both onto the feasible-and-maximal set, scores
//! them, and moves theta by `eta * sign(f_a - f_b) * (m_a - m_b)`, clipped to
//! `[eps, 1 - eps]`. The final selection takes features in descending theta
//! order while the budget allows.

use std::cmp::Ordering;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::objective::{combined_score, FscpuObjective, ScoreLog};
use crate::rng::{self, Rng};

pub const DEFAULT_ITERATIONS: usize = 3000;
pub const DEFAULT_TRACE_EVERY: usize = 10;

/// Band outside of which a Bernoulli parameter counts as converged.
pub const CONVERGED_LOW: f64 = 0.1;
pub const CONVERGED_HIGH: f64 = 0.9;

const SAMPLING_STREAM: u64 = 0x5A4D;
const EVAL_STREAM: u64 = 0xE7A1;

/// Binary feature selection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMask {
    bits: Vec<bool>,
}

impl FeatureMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(vec![false; d])
    }

    pub fn ones(d: usize) -> Self {
        Self::new(vec![true; d])
    }

    pub fn from_indices(d: usize, indices: &[usize]) -> Self {
        let mut bits = vec![false; d];
        for &i in indices {
            bits[i] = true;
        }
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per-feature costs and the total budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostConstraint {
    costs: Vec<f64>,
    budget: f64,
}

impl CostConstraint {
    pub fn new(costs: Vec<f64>, budget: f64) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::InvalidCosts("no features".to_string()));
        }
        if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::InvalidCosts(format!(
                "cost {c} is not a positive finite number"
            )));
        }
        let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
        if !budget.is_finite() || budget < min_cost {
            return Err(Error::BudgetBelowMinCost { budget, min_cost });
        }
        Ok(Self { costs, budget })
    }

    /// Unit costs: the budget is a feature count.
    pub fn unit(d: usize, k: usize) -> Result<Self> {
        Self::new(vec![1.0; d], k as f64)
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn cost(&self, mask: &FeatureMask) -> f64 {
        mask.bits
            .iter()
            .zip(&self.costs)
            .filter(|(&b, _)| b)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn is_feasible(&self, mask: &FeatureMask) -> bool {
        self.cost(mask) <= self.budget
    }

    /// Feasible, and no unselected feature still fits in the remaining slack.
    pub fn is_feasible_and_maximal(&self, mask: &FeatureMask) -> bool {
        let slack = self.budget - self.cost(mask);
        slack >= 0.0
            && mask
                .bits
                .iter()
                .zip(&self.costs)
                .all(|(&b, &c)| b || c > slack)
    }
}

/// Bernoulli parameters with clip margin and learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaVector {
    pub theta: Vec<f64>,
    pub epsilon: f64,
    pub eta: f64,
}

impl ThetaVector {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    fn clip(&mut self) {
        let (lo, hi) = (self.epsilon, 1.0 - self.epsilon);
        for t in &mut self.theta {
            *t = t.clamp(lo, hi);
        }
    }

    /// `theta += eta * sign(f_a - f_b) * (m_a - m_b)`, then clip. Equal
    /// scores leave theta untouched.
    pub fn update(&mut self, a: &FeatureMask, b: &FeatureMask, f_a: f64, f_b: f64) -> Result<()> {
        for f in [f_a, f_b] {
            if !f.is_finite() {
                return Err(Error::NonFiniteScore(f));
            }
        }
        if a.len() != self.len() || b.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: a.len().min(b.len()),
            });
        }
        let sign = match f_a.partial_cmp(&f_b) {
            Some(Ordering::Greater) => 1.0,
            Some(Ordering::Less) => -1.0,
            _ => return Ok(()),
        };
        for (i, t) in self.theta.iter_mut().enumerate() {
            let diff = f64::from(u8::from(a.bits[i])) - f64::from(u8::from(b.bits[i]));
            *t += self.eta * sign * diff;
        }
        self.clip();
        Ok(())
    }

    /// Fraction of parameters at or beyond the converged band edges.
    pub fn convergence_fraction(&self) -> f64 {
        convergence_fraction(&self.theta)
    }
}

pub fn convergence_fraction(theta: &[f64]) -> f64 {
    if theta.is_empty() {
        return 0.0;
    }
    let converged = theta
        .iter()
        .filter(|&&t| t <= CONVERGED_LOW || t >= CONVERGED_HIGH)
        .count();
    converged as f64 / theta.len() as f64
}

pub fn default_epsilon(d: usize) -> f64 {
    1.0 / d as f64
}

pub fn default_eta(d: usize) -> f64 {
    1.0 / (2.0 * d as f64)
}

/// Uniform start at `budget / sum(costs)`, clipped, with `eps = 1/d` and
/// `eta = 1/(2d)`.
pub fn init_theta(constraint: &CostConstraint) -> ThetaVector {
    let d = constraint.len();
    init_theta_with(constraint, default_epsilon(d), default_eta(d))
}

pub fn init_theta_with(constraint: &CostConstraint, epsilon: f64, eta: f64) -> ThetaVector {
    let total: f64 = constraint.costs.iter().sum();
    let mut theta = ThetaVector {
        theta: vec![constraint.budget / total; constraint.len()],
        epsilon,
        eta,
    };
    theta.clip();
    theta
}

pub fn sample_mask(theta: &ThetaVector, rng: &mut Rng) -> FeatureMask {
    FeatureMask::new(
        theta
            .theta
            .iter()
            .map(|&t| rng.random::<f64>() < t)
            .collect(),
    )
}

/// Draw an index with probability proportional to its weight.
fn sample_weighted(candidates: &[(usize, f64)], rng: &mut Rng) -> usize {
    let total: f64 = candidates.iter().map(|(_, w)| w).sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for &(i, w) in candidates {
        acc += w;
        if acc > target {
            return i;
        }
    }
    candidates.last().expect("non-empty candidate set").0
}

/// Project a mask onto the feasible-and-maximal set.
///
/// While over budget, drop a selected feature chosen with weight
/// `1 - theta_l`. Then, while some unselected feature fits in the slack, add
/// one chosen among those that fit with weight `theta_l`.
pub fn repair(
    mask: &FeatureMask,
    theta: &ThetaVector,
    constraint: &CostConstraint,
    rng: &mut Rng,
) -> FeatureMask {
    let mut out = mask.clone();
    let mut candidates = Vec::with_capacity(out.len());

    while constraint.cost(&out) > constraint.budget {
        candidates.clear();
        candidates.extend(
            (0..out.len())
                .filter(|&l| out.bits[l])
                .map(|l| (l, 1.0 - theta.theta[l])),
        );
        let l = sample_weighted(&candidates, rng);
        out.bits[l] = false;
    }

    loop {
        let slack = constraint.budget - constraint.cost(&out);
        candidates.clear();
        candidates.extend(
            (0..out.len())
                .filter(|&l| !out.bits[l] && constraint.costs[l] <= slack)
                .map(|l| (l, theta.theta[l])),
        );
        if candidates.is_empty() {
            break;
        }
        let l = sample_weighted(&candidates, rng);
        out.bits[l] = true;
    }
    out
}

/// Features by descending theta (ties by index), taken greedily while they fit.
pub fn top_theta_selection(theta: &[f64], constraint: &CostConstraint) -> Vec<usize> {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
    let mut spent = 0.0;
    let mut selected = Vec::new();
    for l in order {
        let c = constraint.costs[l];
        if spent + c <= constraint.budget {
            spent += c;
            selected.push(l);
        }
    }
    selected.sort_unstable();
    selected
}

/// Raw scores for one mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub mi: Option<f64>,
}

impl Evaluation {
    pub fn plain(f: f64) -> Self {
        Self { f, mi: None }
    }
}

/// Anything that scores a mask. `seed` is unique per (iteration, candidate).
pub trait MaskObjective: Sync {
    fn evaluate(&self, mask: &FeatureMask, seed: u64) -> Result<Evaluation>;
}

impl<F> MaskObjective for F
where
    F: Fn(&FeatureMask, u64) -> Result<Evaluation> + Sync,
{
    fn evaluate(&self, mask: &FeatureMask, seed: u64) -> Result<Evaluation> {
        self(mask, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    #[default]
    Fscpu,
    FscpuMi,
}

impl std::str::FromStr for ObjectiveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fscpu" => Ok(ObjectiveMode::Fscpu),
            "fscpu-mi" | "fscpu_mi" => Ok(ObjectiveMode::FscpuMi),
            other => Err(Error::Config(format!("unknown objective '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub iterations: usize,
    pub seed: u64,
    pub objective: ObjectiveMode,
    pub trace_every: usize,
    /// Clustering backend and EM settings; `n_components` is the cluster count.
    pub cluster: ClusterConfig,
    /// Overrides for the default `1/(2d)` learning rate and `1/d` clip margin.
    pub eta: Option<f64>,
    pub epsilon: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            objective: ObjectiveMode::Fscpu,
            trace_every: DEFAULT_TRACE_EVERY,
            cluster: ClusterConfig::default(),
            eta: None,
            epsilon: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".to_string()));
        }
        if self.trace_every == 0 {
            return Err(Error::Config("trace_every must be at least 1".to_string()));
        }
        if self.cluster.n_components == 0 {
            return Err(Error::Config(
                "cluster count must be at least 1".to_string(),
            ));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps < 0.5) {
                return Err(Error::Config(format!("epsilon {eps} outside (0, 0.5)")));
            }
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::Config(format!("eta {eta} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub selected_features: Vec<usize>,
    pub final_theta: Vec<f64>,
    pub best_mask: Vec<usize>,
    pub best_f: f64,
    pub best_mi: Option<f64>,
    pub convergence_fraction: f64,
    pub evaluations: usize,
    pub config: RunConfig,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub trace: Vec<TracePoint>,
}

impl RunResult {
    /// Copy with the timing field zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> RunResult {
        RunResult {
            wall_clock_seconds: 0.0,
            ..self.clone()
        }
    }

    /// Trace as CSV: `iteration,theta_0,...,theta_{d-1}`.
    pub fn trace_csv(&self) -> String {
        let d = self.final_theta.len();
        let mut out = String::from("iteration");
        for i in 0..d {
            out.push_str(&format!(",theta_{i}"));
        }
        out.push('\n');
        for p in &self.trace {
            out.push_str(&p.iteration.to_string());
            for t in &p.theta {
                out.push_str(&format!(",{t:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Seed handed to the objective for candidate `candidate` of iteration `t`.
pub fn evaluation_seed(run_seed: u64, iteration: usize, candidate: usize) -> u64 {
    rng::derive(run_seed, &[EVAL_STREAM, iteration as u64, candidate as u64])
}

/// Run the optimizer against any mask objective.
pub fn run_with_objective<O: MaskObjective>(
    objective: &O,
    constraint: &CostConstraint,
    config: &RunConfig,
) -> Result<RunResult> {
    config.validate()?;
    let start = Instant::now();
    let d = constraint.len();
    let mut theta = init_theta_with(
        constraint,
        config.epsilon.unwrap_or_else(|| default_epsilon(d)),
        config.eta.unwrap_or_else(|| default_eta(d)),
    );
    let mut rng = rng::from_seed(rng::derive(config.seed, &[SAMPLING_STREAM]));
    let mut log = ScoreLog::new();
    let mut trace = vec![TracePoint {
        iteration: 0,
        theta: theta.theta.clone(),
    }];
    let mut best: Option<(FeatureMask, Evaluation)> = None;
    let mut evaluations = 0;

    for t in 1..=config.iterations {
        let raw_a = sample_mask(&theta, &mut rng);
        let raw_b = sample_mask(&theta, &mut rng);
        let a = repair(&raw_a, &theta, constraint, &mut rng);
        let b = repair(&raw_b, &theta, constraint, &mut rng);
        debug_assert!(constraint.is_feasible_and_maximal(&a));
        debug_assert!(constraint.is_feasible_and_maximal(&b));

        let (eval_a, eval_b) = rayon::join(
            || objective.evaluate(&a, evaluation_seed(config.seed, t, 0)),
            || objective.evaluate(&b, evaluation_seed(config.seed, t, 1)),
        );
        let (eval_a, eval_b) = (eval_a?, eval_b?);
        evaluations += 2;

        for (mask, eval) in [(&a, eval_a), (&b, eval_b)] {
            if best.as_ref().is_none_or(|(_, e)| eval.f > e.f) {
                best = Some((mask.clone(), eval));
            }
        }

        let (score_a, score_b) = match config.objective {
            ObjectiveMode::Fscpu => (eval_a.f, eval_b.f),
            ObjectiveMode::FscpuMi => {
                let missing = || Error::Config("objective did not report an MI score".to_string());
                let mi_a = eval_a.mi.ok_or_else(missing)?;
                let mi_b = eval_b.mi.ok_or_else(missing)?;
                log.push(eval_a.f, mi_a);
                log.push(eval_b.f, mi_b);
                (
                    combined_score(eval_a.f, mi_a, &log),
                    combined_score(eval_b.f, mi_b, &log),
                )
            }
        };
        theta.update(&a, &b, score_a, score_b)?;

        if t % config.trace_every == 0 || t == config.iterations {
            trace.push(TracePoint {
                iteration: t,
                theta: theta.theta.clone(),
            });
        }
    }

    let (best_mask, best_eval) = best.expect("at least one iteration");
    Ok(RunResult {
        selected_features: top_theta_selection(&theta.theta, constraint),
        convergence_fraction: theta.convergence_fraction(),
        final_theta: theta.theta,
        best_mask: best_mask.indices(),
        best_f: best_eval.f,
        best_mi: best_eval.mi,
        evaluations,
        config: config.clone(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        trace,
    })
}

/// Run the clustering objective on a dataset.
pub fn run(data: &Dataset, config: &RunConfig, constraint: &CostConstraint) -> Result<RunResult> {
    data.validate()?;
    if constraint.len() != data.n_features() {
        return Err(Error::LengthMismatch {
            expected: data.n_features(),
            found: constraint.len(),
        });
    }
    let objective = FscpuObjective::new(
        data,
        config.cluster.clone(),
        config.objective == ObjectiveMode::FscpuMi,
    );
    run_with_objective(&objective, constraint, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_theta_examples() {
        let t = init_theta(&CostConstraint::unit(50, 25).unwrap());
        assert!(t.theta.iter().all(|&v| v == 0.5));
        assert_eq!(t.epsilon, 0.02);
        assert_eq!(t.eta, 0.01);

        let t = init_theta(&CostConstraint::unit(4, 4).unwrap());
        assert!(t.theta.iter().all(|&v| v == 0.75));

        let t = init_theta(&CostConstraint::unit(10, 1).unwrap());
        assert!(t.theta.iter().all(|&v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn budget_below_min_cost() {
        assert!(matches!(
            CostConstraint::new(vec![2.0, 3.0], 1.0),
            Err(Error::BudgetBelowMinCost { .. })
        ));
        assert!(CostConstraint::new(vec![0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn update_direction_and_clip() {
        let c = CostConstraint::unit(3, 1).unwrap();
        let mut t = init_theta_with(&c, 0.1, 0.05);
        let a = FeatureMask::new(vec![true, false, false]);
        let b = FeatureMask::new(vec![false, true, false]);
        let before = t.theta.clone();
        t.update(&a, &b, 2.0, 1.0).unwrap();
        assert!((t.theta[0] - (before[0] + 0.05)).abs() < 1e-15);
        assert!((t.theta[1] - (before[1] - 0.05).max(0.1)).abs() < 1e-15);
        assert_eq!(t.theta[2], before[2]);

        let mut same = t.clone();
        same.update(&a, &a, 5.0, 1.0).unwrap();
        assert_eq!(same, t);

        let mut tie = t.clone();
        tie.update(&a, &b, 1.0, 1.0).unwrap();
        assert_eq!(tie, t);

        let mut top = t.clone();
        top.theta[0] = 0.9;
        top.update(&a, &b, 2.0, 1.0).unwrap();
        assert_eq!(top.theta[0], 0.9);

        assert!(matches!(
            t.update(&a, &b, f64::NAN, 1.0),
            Err(Error::NonFiniteScore(_))
        ));
    }

    #[test]
    fn repair_unit_costs_hits_budget() {
        let c = CostConstraint::unit(50, 25).unwrap();
        let theta = init_theta(&c);
        let mut rng = rng::from_seed(1);
        let over = FeatureMask::from_indices(50, &(0..30).collect::<Vec<_>>());
        let under = FeatureMask::from_indices(50, &(0..20).collect::<Vec<_>>());
        assert_eq!(repair(&over, &theta, &c, &mut rng).count_ones(), 25);
        assert_eq!(repair(&under, &theta, &c, &mut rng).count_ones(), 25);
        let fixed = repair(&under, &theta, &c, &mut rng);
        assert!((0..20).all(|i| fixed.get(i)));
    }

    #[test]
    fn top_theta_skips_what_does_not_fit() {
        let c = CostConstraint::new(vec![3.0, 2.0, 2.0], 4.0).unwrap();
        assert_eq!(top_theta_selection(&[0.9, 0.5, 0.4], &c), vec![0]);
        assert_eq!(top_theta_selection(&[0.1, 0.5, 0.4], &c), vec![1, 2]);
    }

    #[test]
    fn ties_in_theta_prefer_lower_index() {
        let c = CostConstraint::unit(4, 2).unwrap();
        assert_eq!(top_theta_selection(&[0.5; 4], &c), vec![0, 1]);
    }

    #[test]
    fn objective_mode_parse() {
        assert_eq!(
            "fscpu-mi".parse::<ObjectiveMode>().unwrap(),
            ObjectiveMode::FscpuMi
        );
        assert_eq!(
            "fscpu_mi".parse::<ObjectiveMode>().unwrap(),
            ObjectiveMode::FscpuMi
        );
        assert!("f1".parse::<ObjectiveMode>().is_err());
    }

    #[test]
    fn convergence_band_is_inclusive() {
        assert_eq!(convergence_fraction(&[0.1, 0.9, 0.5, 0.02]), 0.75);
    }
}
