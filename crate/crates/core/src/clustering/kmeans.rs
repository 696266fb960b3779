//! Lloyd's k-means with k-means++ seeding. Alternate backend for the objective.

use super::{kmeans_plus_plus, sq_dist, ClusterConfig, Clustering};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centers: Matrix,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub n_iter: usize,
}

impl KMeansFit {
    pub fn clustering(&self) -> Clustering {
        Clustering::from_assignment(&self.labels, self.centers.rows())
    }
}

fn assign(x: &Matrix, centers: &Matrix, labels: &mut [usize], dist: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for i in 0..x.rows() {
        let xi = x.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centers.rows() {
            let d = sq_dist(xi, centers.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        dist[i] = best_d;
        inertia += best_d;
    }
    inertia
}

pub fn fit(x: &Matrix, k: usize, seed: u64, config: &ClusterConfig) -> KMeansFit {
    let n = x.rows();
    let d = x.cols();
    let k = k.clamp(1, n.max(1));
    let mut rng = rng::from_seed(seed);
    let seeds = kmeans_plus_plus(x, k, &mut rng);
    let mut centers = x.select_rows(&seeds);
    let mut labels = vec![0; n];
    let mut dist = vec![0.0; n];
    let mut inertia = assign(x, &centers, &mut labels, &mut dist);
    let mut n_iter = 0;

    while n_iter < config.max_iter {
        n_iter += 1;
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        // empty clusters take the rows farthest from their current centers
        let mut far: Vec<usize> = (0..n).collect();
        far.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
        let mut next_far = 0;
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            } else {
                let r = far[next_far % n];
                next_far += 1;
                centers.row_mut(c).copy_from_slice(x.row(r));
            }
        }
        let previous = labels.clone();
        let new_inertia = assign(x, &centers, &mut labels, &mut dist);
        let improvement = inertia - new_inertia;
        inertia = new_inertia;
        if labels == previous || improvement.abs() < config.tol * inertia.max(f64::MIN_POSITIVE) {
            break;
        }
    }

    KMeansFit {
        centers,
        labels,
        inertia,
        n_iter,
    }
}
