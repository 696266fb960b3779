//! Clustering backends behind a single `fit_predict` entry point.
//!
//! Cluster indices are 0-based. Components that end up with no rows are
//! dropped and the survivors renumbered in their original order, so every
//! returned cluster is non-empty.

pub mod gmm;
pub mod kmeans;

pub use gmm::{fit as fit_gmm, GmmFit, GmmParams};
pub use kmeans::{fit as fit_kmeans, KMeansFit};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

pub const DEFAULT_N_COMPONENTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_VAR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClusterBackend {
    #[default]
    Gmm,
    Kmeans,
}

impl std::str::FromStr for ClusterBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmm" => Ok(ClusterBackend::Gmm),
            "kmeans" => Ok(ClusterBackend::Kmeans),
            other => Err(Error::Config(format!("unknown backend '{other}'"))),
        }
    }
}

/// EM / Lloyd settings shared by both backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub backend: ClusterBackend,
    pub n_components: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub var_floor: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            backend: ClusterBackend::Gmm,
            n_components: DEFAULT_N_COMPONENTS,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            var_floor: DEFAULT_VAR_FLOOR,
        }
    }
}

/// Hard partition of the rows plus per-cluster bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub k: usize,
    pub sizes: Vec<usize>,
    pub labeled_counts: Vec<usize>,
}

impl Clustering {
    /// Build from raw component labels, dropping empty components.
    pub fn from_assignment(raw: &[usize], n_components: usize) -> Self {
        let mut sizes = vec![0usize; n_components];
        for &c in raw {
            sizes[c] += 1;
        }
        let mut remap = vec![usize::MAX; n_components];
        let mut k = 0;
        for (c, &size) in sizes.iter().enumerate() {
            if size > 0 {
                remap[c] = k;
                k += 1;
            }
        }
        let assignment: Vec<usize> = raw.iter().map(|&c| remap[c]).collect();
        let sizes: Vec<usize> = sizes.into_iter().filter(|&s| s > 0).collect();
        Self {
            assignment,
            k,
            labeled_counts: vec![0; k],
            sizes,
        }
    }

    /// Build a clustering with the given per-cluster sizes and labeled counts.
    /// Rows are laid out cluster by cluster; labeled rows come first in each.
    pub fn from_counts(sizes: &[usize], labeled_counts: &[usize]) -> Result<Self> {
        if sizes.len() != labeled_counts.len() {
            return Err(Error::LengthMismatch {
                expected: sizes.len(),
                found: labeled_counts.len(),
            });
        }
        if let Some(k) = (0..sizes.len()).find(|&k| sizes[k] == 0 || labeled_counts[k] > sizes[k]) {
            return Err(Error::Config(format!(
                "cluster {k}: size {} with {} labeled",
                sizes[k], labeled_counts[k]
            )));
        }
        let assignment = sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k, n))
            .collect();
        Ok(Self {
            assignment,
            k: sizes.len(),
            sizes: sizes.to_vec(),
            labeled_counts: labeled_counts.to_vec(),
        })
    }

    /// The PU indicator consistent with [`Clustering::from_counts`].
    pub fn counts_indicator(&self) -> Vec<bool> {
        let mut s = Vec::with_capacity(self.assignment.len());
        for (&size, &labeled) in self.sizes.iter().zip(&self.labeled_counts) {
            s.extend((0..size).map(|i| i < labeled));
        }
        s
    }

    pub fn n_rows(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_labeled(&self) -> usize {
        self.labeled_counts.iter().sum()
    }
}

/// Recount labeled rows per cluster. The assignment is left untouched.
pub fn count_labeled(clustering: &Clustering, s: &[bool]) -> Result<Clustering> {
    if s.len() != clustering.assignment.len() {
        return Err(Error::LengthMismatch {
            expected: clustering.assignment.len(),
            found: s.len(),
        });
    }
    let mut out = clustering.clone();
    out.labeled_counts = vec![0; out.k];
    for (&c, &labeled) in out.assignment.iter().zip(s) {
        if labeled {
            out.labeled_counts[c] += 1;
        }
    }
    Ok(out)
}

/// Cluster the rows of `x` into at most `min(k, n)` non-empty clusters.
pub fn fit_predict(x: &Matrix, k: usize, seed: u64, config: &ClusterConfig) -> Clustering {
    let k = k.max(1);
    match config.backend {
        ClusterBackend::Gmm => fit_gmm(x, k, seed, config).clustering(),
        ClusterBackend::Kmeans => fit_kmeans(x, k, seed, config).clustering(),
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Draw a row with probability proportional to `dist`.
fn sample_by_distance(dist: &[f64], total: f64, rng: &mut Rng) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &d) in dist.iter().enumerate() {
        acc += d;
        if acc > target && d > 0.0 {
            return i;
        }
    }
    // rounding can leave target just above the final sum
    dist.iter().rposition(|&d| d > 0.0).expect("total > 0")
}

/// Greedy k-means++ seeding: returns row indices of the `k` chosen centers.
///
/// Each step draws `2 + ln k` candidates by squared distance and keeps the one
/// that lowers the total squared distance the most.
pub(crate) fn kmeans_plus_plus(x: &Matrix, k: usize, rng: &mut Rng) -> Vec<usize> {
    let n = x.rows();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centers = Vec::with_capacity(k);
    centers.push(rng.random_range(0..n));
    let mut dist: Vec<f64> = (0..n)
        .map(|i| sq_dist(x.row(i), x.row(centers[0])))
        .collect();
    let mut candidate_dist = vec![0.0; n];
    let mut best_dist = vec![0.0; n];
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        if total <= 0.0 {
            centers.push(rng.random_range(0..n));
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for _ in 0..trials {
            let cand = sample_by_distance(&dist, total, rng);
            let c = x.row(cand);
            let mut potential = 0.0;
            for (i, d) in candidate_dist.iter_mut().enumerate() {
                *d = dist[i].min(sq_dist(x.row(i), c));
                potential += *d;
            }
            if best.is_none_or(|(_, p)| potential < p) {
                best = Some((cand, potential));
                std::mem::swap(&mut best_dist, &mut candidate_dist);
            }
        }
        centers.push(best.expect("trials >= 2").0);
        std::mem::swap(&mut dist, &mut best_dist);
    }
    centers
}
