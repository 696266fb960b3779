use std::collections::{BTreeSet, HashMap};

use fscpu::checks::{random_clustering, ratio_gap_holds};
use fscpu::clustering::{ClusterConfig, Clustering};
use fscpu::dataset::{self, SyntheticSpec};
use fscpu::objective::{
    self, brute_force_best_subset, combined_score, evaluate_mask, mi_score, objective_value,
    ScoreLog,
};
use fscpu::optimizer::FeatureMask;
use fscpu::{rng, Dataset, Error, Matrix};
use proptest::prelude::*;
use rand::Rng as _;

fn entropy(counts: impl Iterator<Item = usize>, n: usize) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// MI by entropies of an explicit contingency table: H(B) + H(S) - H(B, S).
fn oracle_feature_mi(column: &[f64], s: &[bool]) -> f64 {
    let n = column.len();
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: BTreeSet<u64> = (1..10)
        .map(|i| sorted[(i * n / 10).min(n - 1)].to_bits())
        .collect();
    let edges: Vec<f64> = {
        let mut e: Vec<f64> = edges.into_iter().map(f64::from_bits).collect();
        e.sort_by(f64::total_cmp);
        e
    };
    let bin = |v: f64| edges.iter().filter(|&&e| e <= v).count();
    let mut table: HashMap<(usize, bool), usize> = HashMap::new();
    let mut bins: HashMap<usize, usize> = HashMap::new();
    let mut labels: HashMap<bool, usize> = HashMap::new();
    for (&v, &l) in column.iter().zip(s) {
        *table.entry((bin(v), l)).or_default() += 1;
        *bins.entry(bin(v)).or_default() += 1;
        *labels.entry(l).or_default() += 1;
    }
    let h_b = entropy(bins.values().copied(), n);
    let h_s = entropy(labels.values().copied(), n);
    let h_bs = entropy(table.values().copied(), n);
    h_b + h_s - h_bs
}

fn random_dataset(rng: &mut rng::Rng, n: usize, d: usize) -> Dataset {
    loop {
        let x: Vec<f64> = (0..n * d)
            .map(|_| {
                // mix of continuous and heavily tied values
                if rng.random_bool(0.3) {
                    rng.random_range(0..4) as f64
                } else {
                    rng.random_range(-3.0..3.0)
                }
            })
            .collect();
        let s: Vec<bool> = (0..n).map(|_| rng.random_bool(0.25)).collect();
        if let Ok(data) = Dataset::new(Matrix::new(n, d, x), s) {
            return data;
        }
    }
}

#[test]
fn worked_example() {
    let c = Clustering::from_counts(&[10, 10, 10], &[8, 4, 0]).unwrap();
    // every nonempty subset by hand
    let mut best = (0.0, vec![]);
    for bits in 1u32..8 {
        let sub: Vec<usize> = (0..3).filter(|j| bits & (1 << j) != 0).collect();
        let a: f64 = sub.iter().map(|&j| c.labeled_counts[j] as f64).sum();
        let size: f64 = sub.iter().map(|&j| c.sizes[j] as f64).sum();
        let f = a * a / (12.0 * size);
        if f > best.0 {
            best = (f, sub);
        }
    }
    assert!((best.0 - 0.6).abs() < 1e-15);
    let r = objective_value(&c).unwrap();
    assert_eq!(r.chosen_clusters, best.1);
    assert!((r.f - 0.6).abs() < 1e-15);
    assert_eq!(
        brute_force_best_subset(&c).unwrap().chosen_clusters,
        vec![0, 1]
    );

    let pure = Clustering::from_counts(&[10, 10], &[10, 0]).unwrap();
    let r = objective_value(&pure).unwrap();
    assert_eq!((r.f, r.chosen_clusters), (1.0, vec![0]));

    let single = Clustering::from_counts(&[40], &[10]).unwrap();
    let r = brute_force_best_subset(&single).unwrap();
    assert_eq!((r.f, r.chosen_clusters), (0.25, vec![0]));
}

#[test]
fn unlabeled_clustering_rejected() {
    let c = Clustering::from_counts(&[3, 4], &[0, 0]).unwrap();
    assert!(matches!(objective_value(&c), Err(Error::NoLabeledData)));
    let big = Clustering::from_counts(&[2; 21], &[1; 21]).unwrap();
    assert!(matches!(
        brute_force_best_subset(&big),
        Err(Error::TooManyClusters { .. })
    ));
}

#[test]
fn oracle_sweep() {
    let mut rng = rng::from_seed(2024);
    for _ in 0..1000 {
        let c = random_clustering(&mut rng, 12, 50);
        let fast = objective_value(&c).unwrap();
        let slow = brute_force_best_subset(&c).unwrap();
        assert_eq!(
            fast.exact.as_fraction().0 * slow.exact.as_fraction().1,
            slow.exact.as_fraction().0 * fast.exact.as_fraction().1
        );
        assert_eq!(
            fast.chosen_clusters, slow.chosen_clusters,
            "{:?} {:?}",
            c.sizes, c.labeled_counts
        );
        if fast.chosen_clusters.len() < c.k {
            assert!(ratio_gap_holds(&c, &fast.chosen_clusters));
        }
    }
}

#[test]
fn mi_matches_contingency_oracle() {
    let mut rng = rng::from_seed(77);
    for _ in 0..100 {
        let n = rng.random_range(20..200);
        let d = rng.random_range(1..5);
        let data = random_dataset(&mut rng, n, d);
        let mask = FeatureMask::ones(d);
        let expected: f64 = (0..d)
            .map(|j| oracle_feature_mi(&data.x.column(j), &data.s))
            .sum::<f64>()
            / d as f64;
        let got = mi_score(&data, &mask).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }
}

#[test]
fn mi_extremes() {
    let s: Vec<bool> = (0..100).map(|i| i % 5 == 0).collect();
    let x: Vec<f64> = s.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let p: f64 = 0.2;
    let h = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
    assert!((objective::feature_mi(&x, &s) - h).abs() < 1e-12);
    assert_eq!(objective::feature_mi(&[7.0; 100], &s), 0.0);
    let data = Dataset::new(Matrix::new(100, 1, x), s).unwrap();
    assert!(matches!(
        mi_score(&data, &FeatureMask::zeros(1)),
        Err(Error::EmptyMask)
    ));
}

#[test]
fn combined_examples() {
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

#[test]
fn relevant_mask_beats_irrelevant() {
    let config = ClusterConfig {
        max_iter: 50,
        ..ClusterConfig::default()
    };
    for seed in 0..5 {
        let data = dataset::generate(&SyntheticSpec::clustered(0.4, 8, 1, seed)).unwrap();
        let data = dataset::subsample_rows(&data, 1500, seed).unwrap();
        let data = dataset::normalize(&data);
        let truth = data.relevant_truth.clone().unwrap();
        let relevant = FeatureMask::new(truth.clone());
        let irrelevant = FeatureMask::new(truth.iter().map(|t| !t).collect());
        let good = evaluate_mask(&data, &relevant, 10, seed, &config).unwrap();
        let bad = evaluate_mask(&data, &irrelevant, 10, seed, &config).unwrap();
        assert!(good.f >= bad.f, "seed {seed}: {} < {}", good.f, bad.f);
        assert_eq!(
            good,
            evaluate_mask(&data, &relevant, 10, seed, &config).unwrap()
        );
        evaluate_mask(&data, &FeatureMask::ones(50), 10, seed, &config).unwrap();
    }
}

#[test]
fn large_k_uses_prefix_scan() {
    let k = 200_000;
    let sizes = vec![3usize; k];
    let labeled: Vec<usize> = (0..k).map(|i| i % 4).map(|v| v.min(3)).collect();
    let c = Clustering::from_counts(&sizes, &labeled).unwrap();
    let r = objective_value(&c).unwrap();
    assert!(r.f > 0.0 && r.f <= 1.0);
    assert!(ratio_gap_holds(&c, &r.chosen_clusters));
}

fn clustering_strategy() -> impl Strategy<Value = Clustering> {
    prop::collection::vec((1usize..40, 0.0f64..=1.0), 1..10).prop_filter_map("needs a label", |v| {
        let sizes: Vec<usize> = v.iter().map(|p| p.0).collect();
        let labeled: Vec<usize> = v
            .iter()
            .map(|&(c, r)| (c as f64 * r).floor() as usize)
            .collect();
        if labeled.iter().sum::<usize>() == 0 {
            None
        } else {
            Clustering::from_counts(&sizes, &labeled).ok()
        }
    })
}

proptest! {
    #[test]
    fn prop_bounds_and_oracle(c in clustering_strategy()) {
        let r = objective_value(&c).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.f));
        let slow = brute_force_best_subset(&c).unwrap();
        prop_assert_eq!(&r.chosen_clusters, &slow.chosen_clusters);
        // f = 1 exactly when the chosen clusters hold all labels and nothing else
        let (a, size) = (r.exact.labeled, r.exact.size);
        prop_assert_eq!(r.f == 1.0, a == c.n_labeled() as u64 && a == size);
    }
}
