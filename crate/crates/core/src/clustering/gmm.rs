//! Diagonal-covariance Gaussian mixture fitted by EM.
//!
//! Initialization is one k-means++ draw followed by a hard assignment of every
//! row to its nearest seed. Variances are clamped from below at `var_floor`;
//! the clamp is the exact maximizer of the per-dimension likelihood under the
//! floor constraint, so each EM step still cannot lower the likelihood.
//! A component whose mass vanishes is re-seeded at the worst-explained row
//! (lowest log-likelihood under the current model).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{kmeans_plus_plus, sq_dist, ClusterConfig, Clustering};
use crate::matrix::Matrix;
use crate::rng;

/// Mixture mass below which a component is treated as collapsed.
const MIN_COMPONENT_MASS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    /// `k x d` component means.
    pub means: Matrix,
    /// `k x d` diagonal variances.
    pub variances: Matrix,
}

impl GmmParams {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub params: GmmParams,
    /// Raw component label per row (before empty components are dropped).
    pub labels: Vec<usize>,
    /// Mean per-row log-likelihood after each E-step.
    pub log_likelihood: Vec<f64>,
    /// `reseeded[i]` is true when the parameters behind `log_likelihood[i]`
    /// came out of an M-step that re-seeded a collapsed component.
    pub reseeded: Vec<bool>,
    pub converged: bool,
    /// Final responsibilities, `n x k`.
    pub responsibilities: Matrix,
}

impl GmmFit {
    pub fn clustering(&self) -> Clustering {
        Clustering::from_assignment(&self.labels, self.params.n_components())
    }
}

/// Per-component constants for the log-density.
struct Precomputed {
    log_norm: Vec<f64>,
    inv_var: Matrix,
}

fn precompute(params: &GmmParams) -> Precomputed {
    let k = params.n_components();
    let d = params.means.cols();
    let mut log_norm = Vec::with_capacity(k);
    let mut inv_var = Matrix::zeros(k, d);
    for c in 0..k {
        let var = params.variances.row(c);
        let log_det: f64 = var.iter().map(|v| (2.0 * PI * v).ln()).sum();
        log_norm.push(params.weights[c].ln() - 0.5 * log_det);
        for (j, v) in var.iter().enumerate() {
            inv_var.set(c, j, 1.0 / v);
        }
    }
    Precomputed { log_norm, inv_var }
}

/// E-step: fills `resp` (n x k) and returns per-row log-likelihoods.
fn e_step(x: &Matrix, params: &GmmParams, resp: &mut Matrix) -> Vec<f64> {
    let k = params.n_components();
    let pre = precompute(params);
    let mut row_ll = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let xi = x.row(i);
        let out = resp.row_mut(i);
        let mut max = f64::NEG_INFINITY;
        for c in 0..k {
            let mu = params.means.row(c);
            let iv = pre.inv_var.row(c);
            let mut maha = 0.0;
            for j in 0..xi.len() {
                let diff = xi[j] - mu[j];
                maha += diff * diff * iv[j];
            }
            let lp = pre.log_norm[c] - 0.5 * maha;
            out[c] = lp;
            if lp > max {
                max = lp;
            }
        }
        let sum: f64 = out.iter().map(|lp| (lp - max).exp()).sum();
        let lse = max + sum.ln();
        for v in out.iter_mut() {
            *v = (*v - lse).exp();
        }
        row_ll.push(lse);
    }
    row_ll
}

/// M-step. Returns true when a collapsed component was re-seeded.
fn m_step(
    x: &Matrix,
    resp: &Matrix,
    row_ll: Option<&[f64]>,
    var_floor: f64,
    global_var: &[f64],
    params: &mut GmmParams,
) -> bool {
    let n = x.rows();
    let d = x.cols();
    let k = params.n_components();

    let mut mass = vec![0.0; k];
    let mut means = Matrix::zeros(k, d);
    for i in 0..n {
        let xi = x.row(i);
        let ri = resp.row(i);
        for c in 0..k {
            let r = ri[c];
            if r == 0.0 {
                continue;
            }
            mass[c] += r;
            let mu = means.row_mut(c);
            for j in 0..d {
                mu[j] += r * xi[j];
            }
        }
    }
    for c in 0..k {
        if mass[c] > MIN_COMPONENT_MASS {
            for v in means.row_mut(c) {
                *v /= mass[c];
            }
        }
    }

    let mut vars = Matrix::zeros(k, d);
    for i in 0..n {
        let xi = x.row(i);
        let ri = resp.row(i);
        for c in 0..k {
            let r = ri[c];
            if r == 0.0 {
                continue;
            }
            let mu = means.row(c);
            let var = vars.row_mut(c);
            for j in 0..d {
                let diff = xi[j] - mu[j];
                var[j] += r * diff * diff;
            }
        }
    }

    let collapsed: Vec<usize> = (0..k).filter(|&c| mass[c] <= MIN_COMPONENT_MASS).collect();
    let mut weights: Vec<f64> = mass.iter().map(|m| m / n as f64).collect();
    for c in 0..k {
        if mass[c] > MIN_COMPONENT_MASS {
            for v in vars.row_mut(c) {
                *v = (*v / mass[c]).max(var_floor);
            }
        }
    }

    if !collapsed.is_empty() {
        // worst-explained rows first; ties by index
        let mut order: Vec<usize> = (0..n).collect();
        if let Some(ll) = row_ll {
            order.sort_by(|&a, &b| ll[a].total_cmp(&ll[b]).then(a.cmp(&b)));
        }
        for (slot, &c) in collapsed.iter().enumerate() {
            let row = x.row(order[slot % n]);
            means.row_mut(c).copy_from_slice(row);
            for (j, v) in vars.row_mut(c).iter_mut().enumerate() {
                *v = global_var[j].max(var_floor);
            }
            weights[c] = 1.0 / n as f64;
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
    }

    params.weights = weights;
    params.means = means;
    params.variances = vars;
    !collapsed.is_empty()
}

fn column_variances(x: &Matrix) -> Vec<f64> {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
        })
        .collect()
}

/// Fit a diagonal GMM with `min(k, n)` components.
pub fn fit(x: &Matrix, k: usize, seed: u64, config: &ClusterConfig) -> GmmFit {
    let n = x.rows();
    let d = x.cols();
    let k = k.clamp(1, n.max(1));
    let mut rng = rng::from_seed(seed);
    let global_var = column_variances(x);

    // hard initial responsibilities from k-means++ seeds
    let seeds = kmeans_plus_plus(x, k, &mut rng);
    let mut resp = Matrix::zeros(n, k);
    for i in 0..n {
        let xi = x.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, &s) in seeds.iter().enumerate() {
            let dist = sq_dist(xi, x.row(s));
            if dist < best_d {
                best_d = dist;
                best = c;
            }
        }
        resp.set(i, best, 1.0);
    }
    let mut params = GmmParams {
        weights: vec![1.0 / k as f64; k],
        means: Matrix::zeros(k, d),
        variances: Matrix::zeros(k, d),
    };
    let mut reseed = m_step(x, &resp, None, config.var_floor, &global_var, &mut params);

    let mut log_likelihood: Vec<f64> = Vec::new();
    let mut reseeded = Vec::new();
    let mut converged = false;
    let mut row_ll = e_step(x, &params, &mut resp);
    loop {
        let ll: f64 = row_ll.iter().sum::<f64>() / n as f64;
        if let Some(&prev) = log_likelihood.last() {
            if !reseed && (ll - prev).abs() < config.tol {
                log_likelihood.push(ll);
                reseeded.push(reseed);
                converged = true;
                break;
            }
        }
        log_likelihood.push(ll);
        reseeded.push(reseed);
        if log_likelihood.len() > config.max_iter {
            break;
        }
        reseed = m_step(
            x,
            &resp,
            Some(&row_ll),
            config.var_floor,
            &global_var,
            &mut params,
        );
        row_ll = e_step(x, &params, &mut resp);
    }

    let labels = (0..n)
        .map(|i| {
            let r = resp.row(i);
            let mut best = 0;
            for c in 1..k {
                if r[c] > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect();

    GmmFit {
        params,
        labels,
        log_likelihood,
        reseeded,
        converged,
        responsibilities: resp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Matrix {
        let mut rows = Vec::new();
        for i in 0..20 {
            rows.push(vec![(i % 5) as f64 * 0.1]);
            rows.push(vec![100.0 + (i % 7) as f64 * 0.1]);
        }
        Matrix::from_rows(&rows)
    }

    #[test]
    fn separates_far_blobs() {
        let x = blobs();
        let fit = fit(&x, 2, 3, &ClusterConfig::default());
        let c = fit.clustering();
        assert_eq!(c.k, 2);
        for i in (0..40).step_by(2) {
            assert_eq!(c.assignment[i], c.assignment[0]);
            assert_eq!(c.assignment[i + 1], c.assignment[1]);
        }
        assert_ne!(c.assignment[0], c.assignment[1]);
    }

    #[test]
    fn weights_and_floor() {
        let x = blobs();
        let fit = fit(&x, 4, 1, &ClusterConfig::default());
        let total: f64 = fit.params.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(fit.params.variances.as_slice().iter().all(|&v| v >= 1e-6));
        for i in 0..x.rows() {
            let s: f64 = fit.responsibilities.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_rows_do_not_blow_up() {
        let x = Matrix::from_rows(&vec![vec![1.0, 1.0]; 6]);
        let fit = fit(&x, 3, 0, &ClusterConfig::default());
        let c = fit.clustering();
        assert!(c.k >= 1 && c.k <= 3);
        assert_eq!(c.sizes.iter().sum::<usize>(), 6);
        assert!(fit.log_likelihood.iter().all(|v| v.is_finite()));
    }
}
