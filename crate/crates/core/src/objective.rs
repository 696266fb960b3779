//! Cluster-subset objective.
//!
//! For a clustering of all rows, pick the subset of clusters whose union best
//! "explains" the labeled rows, scoring a subset by
//!
//! ```text
//! recall * precision = (A / L) * (A / C) = A^2 / (L * C)
//! ```
//!
//! where `A` is the number of labeled rows inside the union, `C` the size of
//! the union and `L` the total number of labeled rows. The maximizing subset
//! is always a prefix of the clusters sorted by labeled ratio, so the search
//! is a sort plus a linear scan. All comparisons are exact integer
//! cross-multiplications.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::clustering::{count_labeled, fit_predict, ClusterConfig, Clustering};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::optimizer::{Evaluation, FeatureMask, MaskObjective};

/// Largest cluster count accepted by [`brute_force_best_subset`].
pub const BRUTE_FORCE_MAX_CLUSTERS: usize = 20;

/// Number of equal-frequency bins used by [`mi_score`].
pub const MI_BINS: usize = 10;

/// Integer pieces of a subset score, `labeled^2 / (total_labeled * size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SubsetScore {
    pub labeled: u64,
    pub size: u64,
    pub total_labeled: u64,
}

impl SubsetScore {
    /// Numerator and denominator of the score as a fraction.
    pub fn as_fraction(&self) -> (u128, u128) {
        let a = self.labeled as u128;
        (a * a, self.total_labeled as u128 * self.size as u128)
    }

    pub fn value(&self) -> f64 {
        let (num, den) = self.as_fraction();
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn recall(&self) -> f64 {
        self.labeled as f64 / self.total_labeled as f64
    }

    pub fn precision(&self) -> f64 {
        if self.size == 0 {
            0.0
        } else {
            self.labeled as f64 / self.size as f64
        }
    }

    /// Exact comparison of two scores. The empty subset scores 0.
    pub fn cmp_exact(&self, other: &SubsetScore) -> Ordering {
        let (n1, d1) = self.as_fraction();
        let (n2, d2) = other.as_fraction();
        match (d1 == 0, d2 == 0) {
            (true, true) => Ordering::Equal,
            (true, false) => 0.cmp(&n2),
            (false, true) => n1.cmp(&0),
            // (n1 / d1) vs (n2 / d2); n <= 2^64, d <= 2^64, so use checked math
            (false, false) => match (n1.checked_mul(d2), n2.checked_mul(d1)) {
                (Some(l), Some(r)) => l.cmp(&r),
                _ => (n1 as f64 / d1 as f64).total_cmp(&(n2 as f64 / d2 as f64)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub f: f64,
    pub recall: f64,
    pub precision: f64,
    /// Chosen cluster indices, ascending.
    pub chosen_clusters: Vec<usize>,
    pub ratios: Vec<f64>,
    pub mi: Option<f64>,
    pub combined: Option<f64>,
    #[serde(skip)]
    pub exact: SubsetScore,
}

impl ObjectiveReport {
    fn new(clustering: &Clustering, chosen: Vec<usize>, exact: SubsetScore) -> Self {
        let ratios = clustering
            .sizes
            .iter()
            .zip(&clustering.labeled_counts)
            .map(|(&c, &a)| a as f64 / c as f64)
            .collect();
        Self {
            f: exact.value(),
            recall: exact.recall(),
            precision: exact.precision(),
            chosen_clusters: chosen,
            ratios,
            mi: None,
            combined: None,
            exact,
        }
    }
}

/// Score of an arbitrary subset of clusters.
pub fn subset_score(clustering: &Clustering, subset: &[usize]) -> SubsetScore {
    SubsetScore {
        labeled: subset
            .iter()
            .map(|&k| clustering.labeled_counts[k] as u64)
            .sum(),
        size: subset.iter().map(|&k| clustering.sizes[k] as u64).sum(),
        total_labeled: clustering.n_labeled() as u64,
    }
}

fn require_labeled(clustering: &Clustering) -> Result<()> {
    if clustering.n_labeled() == 0 {
        Err(Error::NoLabeledData)
    } else {
        Ok(())
    }
}

/// Cluster order used by the prefix search: labeled ratio descending, then
/// size descending, then index ascending.
pub fn ratio_order(clustering: &Clustering) -> Vec<usize> {
    let a = &clustering.labeled_counts;
    let c = &clustering.sizes;
    let mut order: Vec<usize> = (0..clustering.k).collect();
    order.sort_by(|&i, &j| {
        let lhs = a[i] as u128 * c[j] as u128;
        let rhs = a[j] as u128 * c[i] as u128;
        rhs.cmp(&lhs).then(c[j].cmp(&c[i])).then(i.cmp(&j))
    });
    order
}

/// Best cluster subset by sorted-prefix search.
///
/// Every prefix of the ratio order is scored; the best one wins and ties go to
/// the longer prefix, which yields the largest optimal subset.
pub fn objective_value(clustering: &Clustering) -> Result<ObjectiveReport> {
    require_labeled(clustering)?;
    let order = ratio_order(clustering);
    let total_labeled = clustering.n_labeled() as u64;

    let mut running = SubsetScore {
        labeled: 0,
        size: 0,
        total_labeled,
    };
    let mut best = running;
    let mut best_len = 0;
    for (i, &k) in order.iter().enumerate() {
        running.labeled += clustering.labeled_counts[k] as u64;
        running.size += clustering.sizes[k] as u64;
        if running.cmp_exact(&best) != Ordering::Less {
            best = running;
            best_len = i + 1;
        }
    }
    let mut chosen = order[..best_len].to_vec();
    chosen.sort_unstable();
    Ok(ObjectiveReport::new(clustering, chosen, best))
}

/// Exhaustive search over all non-empty cluster subsets. Ties go to the
/// subset with more clusters. Reference oracle for [`objective_value`].
pub fn brute_force_best_subset(clustering: &Clustering) -> Result<ObjectiveReport> {
    let k = clustering.k;
    if k > BRUTE_FORCE_MAX_CLUSTERS {
        return Err(Error::TooManyClusters {
            k,
            max: BRUTE_FORCE_MAX_CLUSTERS,
        });
    }
    require_labeled(clustering)?;
    let total_labeled = clustering.n_labeled() as u64;
    let mut best: Option<(SubsetScore, u32, u32)> = None;
    for bits in 1u32..(1u32 << k) {
        let mut score = SubsetScore {
            labeled: 0,
            size: 0,
            total_labeled,
        };
        for j in 0..k {
            if bits & (1 << j) != 0 {
                score.labeled += clustering.labeled_counts[j] as u64;
                score.size += clustering.sizes[j] as u64;
            }
        }
        let better = match &best {
            None => true,
            Some((b, b_bits, _)) => match score.cmp_exact(b) {
                Ordering::Greater => true,
                Ordering::Equal => bits.count_ones() > b_bits.count_ones(),
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((score, bits, bits.count_ones()));
        }
    }
    let (score, bits, _) = best.expect("k >= 1 when labeled rows exist");
    let chosen = (0..k).filter(|&j| bits & (1 << j) != 0).collect();
    Ok(ObjectiveReport::new(clustering, chosen, score))
}

/// Mask the columns, cluster, count labels and score.
pub fn evaluate_mask(
    data: &Dataset,
    mask: &FeatureMask,
    k: usize,
    seed: u64,
    config: &ClusterConfig,
) -> Result<ObjectiveReport> {
    let cols = mask.indices();
    if cols.is_empty() {
        return Err(Error::EmptyMask);
    }
    if mask.len() != data.n_features() {
        return Err(Error::LengthMismatch {
            expected: data.n_features(),
            found: mask.len(),
        });
    }
    let x = data.x.select_columns(&cols);
    let clustering = fit_predict(&x, k, seed, config);
    let clustering = count_labeled(&clustering, &data.s)?;
    objective_value(&clustering)
}

// ---------------------------------------------------------------------------
// Mutual-information criterion

/// Equal-frequency bin index per value. Quantile edges that coincide are
/// merged, so a constant column lands in a single bin.
pub fn equal_frequency_bins(values: &[f64], n_bins: usize) -> Vec<usize> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (1..n_bins)
        .map(|i| sorted[((i * n) / n_bins).min(n - 1)])
        .collect();
    edges.dedup();
    values
        .iter()
        .map(|&v| edges.partition_point(|&e| e <= v))
        .collect()
}

/// Plug-in mutual information (nats) between discrete codes and a binary label.
pub fn discrete_mutual_information(codes: &[usize], s: &[bool]) -> f64 {
    let n = codes.len();
    if n == 0 {
        return 0.0;
    }
    let n_codes = codes.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![[0usize; 2]; n_codes];
    for (&c, &l) in codes.iter().zip(s) {
        joint[c][usize::from(l)] += 1;
    }
    let n_s = [
        s.iter().filter(|&&l| !l).count() as f64,
        s.iter().filter(|&&l| l).count() as f64,
    ];
    let nf = n as f64;
    let mut mi = 0.0;
    for row in &joint {
        let n_b = (row[0] + row[1]) as f64;
        for (label, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let c = count as f64;
            mi += c / nf * (c * nf / (n_b * n_s[label])).ln();
        }
    }
    mi.max(0.0)
}

/// Binned MI between one feature column and `s`.
pub fn feature_mi(column: &[f64], s: &[bool]) -> f64 {
    discrete_mutual_information(&equal_frequency_bins(column, MI_BINS), s)
}

/// Mean per-feature binned MI with `s` over the selected features.
pub fn mi_score(data: &Dataset, mask: &FeatureMask) -> Result<f64> {
    let cols = mask.indices();
    if cols.is_empty() {
        return Err(Error::EmptyMask);
    }
    let total: f64 = cols
        .iter()
        .map(|&c| feature_mi(&data.x.column(c), &data.s))
        .sum();
    Ok(total / cols.len() as f64)
}

/// Every raw score seen during one optimization run, in arrival order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreLog {
    f: Vec<f64>,
    mi: Vec<f64>,
}

impl ScoreLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, f: f64, mi: f64) {
        self.f.push(f);
        self.mi.push(mi);
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn f_scores(&self) -> &[f64] {
        &self.f
    }

    pub fn mi_scores(&self) -> &[f64] {
        &self.mi
    }
}

/// Population standard deviation.
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn log_divisor(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 1.0;
    }
    let std = population_std(values);
    if std > 0.0 {
        std
    } else {
        1.0
    }
}

/// `f / std(f_log) + mi / std(mi_log)`; a log with fewer than two entries or
/// zero spread divides by 1.
pub fn combined_score(f: f64, mi: f64, log: &ScoreLog) -> f64 {
    f / log_divisor(&log.f) + mi / log_divisor(&log.mi)
}

/// The clustering objective bound to a dataset, ready for the optimizer.
///
/// Per-feature MI values are computed once up front; the mask score is their
/// mean, identical to [`mi_score`].
pub struct FscpuObjective<'a> {
    data: &'a Dataset,
    cluster: ClusterConfig,
    feature_mi: Option<Vec<f64>>,
}

impl<'a> FscpuObjective<'a> {
    pub fn new(data: &'a Dataset, cluster: ClusterConfig, with_mi: bool) -> Self {
        let feature_mi = with_mi.then(|| {
            (0..data.n_features())
                .map(|c| feature_mi(&data.x.column(c), &data.s))
                .collect()
        });
        Self {
            data,
            cluster,
            feature_mi,
        }
    }

    pub fn report(&self, mask: &FeatureMask, seed: u64) -> Result<ObjectiveReport> {
        let mut report = evaluate_mask(
            self.data,
            mask,
            self.cluster.n_components,
            seed,
            &self.cluster,
        )?;
        if let Some(per_feature) = &self.feature_mi {
            let cols = mask.indices();
            report.mi = Some(cols.iter().map(|&c| per_feature[c]).sum::<f64>() / cols.len() as f64);
        }
        Ok(report)
    }
}

impl MaskObjective for FscpuObjective<'_> {
    fn evaluate(&self, mask: &FeatureMask, seed: u64) -> Result<Evaluation> {
        let report = self.report(mask, seed)?;
        Ok(Evaluation {
            f: report.f,
            mi: report.mi,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clustering(sizes: &[usize], labeled: &[usize]) -> Clustering {
        Clustering::from_counts(sizes, labeled).unwrap()
    }

    #[test]
    fn perfect_cluster() {
        let r = objective_value(&clustering(&[10, 10], &[10, 0])).unwrap();
        assert_eq!(r.f, 1.0);
        assert_eq!(r.chosen_clusters, vec![0]);
    }

    #[test]
    fn three_cluster_example() {
        // prefixes: 64/120, 144/240 = 0.6, 144/360
        let c = clustering(&[10, 10, 10], &[8, 4, 0]);
        let r = objective_value(&c).unwrap();
        assert!((r.f - 0.6).abs() < 1e-15);
        assert_eq!(r.chosen_clusters, vec![0, 1]);
        assert_eq!(r.exact.as_fraction(), (144, 240));
        assert_eq!(r.ratios, vec![0.8, 0.4, 0.0]);
        let b = brute_force_best_subset(&c).unwrap();
        assert_eq!(b.chosen_clusters, r.chosen_clusters);
        assert_eq!(b.exact, r.exact);
    }

    #[test]
    fn single_cluster() {
        let c = clustering(&[7], &[3]);
        let r = brute_force_best_subset(&c).unwrap();
        assert_eq!(r.chosen_clusters, vec![0]);
        assert!((r.f - 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn tie_goes_to_larger_prefix() {
        // {0}: 4/2 ; {0,1}: 16/8 -> equal
        let c = clustering(&[2, 6], &[2, 2]);
        let r = objective_value(&c).unwrap();
        assert_eq!(r.chosen_clusters, vec![0, 1]);
        assert_eq!(
            brute_force_best_subset(&c).unwrap().chosen_clusters,
            vec![0, 1]
        );
    }

    #[test]
    fn no_labeled_data_is_an_error() {
        let c = clustering(&[3, 3], &[0, 0]);
        assert!(matches!(objective_value(&c), Err(Error::NoLabeledData)));
        assert!(matches!(
            brute_force_best_subset(&c),
            Err(Error::NoLabeledData)
        ));
    }

    #[test]
    fn brute_force_guard() {
        let c = clustering(&[1; 21], &[1; 21]);
        assert!(matches!(
            brute_force_best_subset(&c),
            Err(Error::TooManyClusters { k: 21, .. })
        ));
    }

    #[test]
    fn large_k_is_linear() {
        let k = 200_000;
        let sizes: Vec<usize> = (0..k).map(|i| 1 + i % 5).collect();
        let labeled: Vec<usize> = (0..k).map(|i| (i % 3).min(1 + i % 5)).collect();
        let r = objective_value(&clustering(&sizes, &labeled)).unwrap();
        assert!(r.f > 0.0 && r.f <= 1.0);
    }

    #[test]
    fn bins_constant_column() {
        assert_eq!(equal_frequency_bins(&[5.0; 8], 10), vec![1; 8]);
    }

    #[test]
    fn mi_of_label_copy_is_label_entropy() {
        let s: Vec<bool> = (0..50).map(|i| i % 5 == 0).collect();
        let col: Vec<f64> = s.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        let p = 0.2f64;
        let h = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
        assert!((feature_mi(&col, &s) - h).abs() < 1e-12);
        assert_eq!(feature_mi(&[3.0; 50], &s), 0.0);
    }

    #[test]
    fn combined_score_examples() {
        let mut log = ScoreLog::new();
        log.push(1.0, 2.0);
        log.push(3.0, 2.0);
        assert_eq!(combined_score(3.0, 2.0, &log), 5.0);

        let mut log = ScoreLog::new();
        log.push(0.0, 0.0);
        log.push(2.0, 4.0);
        assert_eq!(combined_score(2.0, 4.0, &log), 4.0);

        let mut log = ScoreLog::new();
        log.push(0.3, 0.7);
        assert_eq!(combined_score(0.3, 0.7, &log), 0.3 + 0.7);
    }
}
