//! k-means (Lloyd with k-means++ seeding) and clustering agreement scores.

use rand::Rng;

use crate::dmcca::rng_stream;
use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Matrix<f64>,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    pub restart: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterReport {
    pub labels: Vec<usize>,
    pub nmi: f64,
    pub completeness: f64,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &Matrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(x: &Matrix<f64>, k: usize, rng: &mut R) -> Matrix<f64> {
    let t = x.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..t));
    let mut dist: Vec<f64> = (0..t).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = t - 1;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            if dist[pick] == 0.0 {
                pick = dist.iter().rposition(|&d| d > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // All remaining points coincide with a centroid; take an unused index.
            let unused: Vec<usize> = (0..t).filter(|i| !chosen.contains(i)).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    x.select_rows(&chosen)
}

fn lloyd(x: &Matrix<f64>, mut centroids: Matrix<f64>, max_iters: usize) -> (Vec<usize>, Matrix<f64>, Vec<f64>) {
    let (t, d) = x.shape();
    let k = centroids.rows();
    let mut labels = vec![usize::MAX; t];
    let mut trace = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, dist) = nearest(x.row(i), &centroids);
            inertia += dist;
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        let mut sums = Matrix::<f64>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &label) in labels.iter().enumerate() {
            counts[label] += 1;
            for (s, &v) in sums.row_mut(label).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let inv = 1.0 / count as f64;
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
    }
    (labels, centroids, trace)
}

/// Best of `restarts` seeded k-means runs by final inertia (ties keep the
/// lowest restart index).
pub fn kmeans_with_restarts<T: Scalar>(
    x: &Matrix<T>,
    k: usize,
    seed: u64,
    max_iters: usize,
    restarts: usize,
) -> Result<KMeansResult> {
    if k == 0 || k > x.rows() {
        return Err(invalid(format!("k = {k} must lie in 1..={}", x.rows())));
    }
    if !x.is_finite() {
        return Err(crate::error::Error::NonFinite("k-means input".into()));
    }
    let data: Matrix<f64> = x.cast();
    let mut best: Option<KMeansResult> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = rng_stream(seed, 1000 + restart as u64);
        let init = plus_plus_init(&data, k, &mut rng);
        let (labels, centroids, inertia_trace) = lloyd(&data, init, max_iters);
        let inertia = labels.iter().enumerate().map(|(i, &c)| sq_dist(data.row(i), centroids.row(c))).sum();
        if best.as_ref().is_none_or(|b| inertia < b.inertia) {
            best = Some(KMeansResult { labels, centroids, inertia, inertia_trace, restart });
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn kmeans<T: Scalar>(x: &Matrix<T>, k: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    kmeans_with_restarts(x, k, seed, max_iters, DEFAULT_RESTARTS)
}

fn entropy(counts: impl Iterator<Item = usize>, total: f64) -> f64 {
    counts.filter(|&c| c > 0).map(|c| {
        let p = c as f64 / total;
        -p * p.ln()
    }).sum()
}

fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mapped = labels.iter().map(|l| distinct.binary_search(l).unwrap()).collect();
    (mapped, distinct.len())
}

/// NMI with geometric-mean normalization, `I(L; C) / √(H(L) H(C))`, and
/// completeness `1 − H(L | C) / H(L)`, for predicted labels `L` and truth `C`.
///
/// NMI is 0 when either entropy vanishes; completeness is 1 when `H(L) = 0`.
pub fn nmi_and_completeness(labels: &[usize], truth: &[usize]) -> Result<(f64, f64)> {
    if labels.len() != truth.len() {
        return Err(invalid(format!("{} labels vs {} truth values", labels.len(), truth.len())));
    }
    if labels.is_empty() {
        return Err(invalid("empty label vectors"));
    }
    let total = labels.len() as f64;
    let (l, nl) = relabel(labels);
    let (c, nc) = relabel(truth);
    let mut joint = vec![0usize; nl * nc];
    let mut count_l = vec![0usize; nl];
    let mut count_c = vec![0usize; nc];
    for (&a, &b) in l.iter().zip(&c) {
        joint[a * nc + b] += 1;
        count_l[a] += 1;
        count_c[b] += 1;
    }
    let h_l = entropy(count_l.iter().copied(), total);
    let h_c = entropy(count_c.iter().copied(), total);
    let h_joint = entropy(joint.iter().copied(), total);
    let mi = (h_l + h_c - h_joint).max(0.0);
    let nmi = if h_l > 0.0 && h_c > 0.0 { (mi / (h_l * h_c).sqrt()).clamp(0.0, 1.0) } else { 0.0 };
    // H(L | C) = H(L, C) − H(C)
    let completeness = if h_l > 0.0 { (1.0 - (h_joint - h_c) / h_l).clamp(0.0, 1.0) } else { 1.0 };
    Ok((nmi, completeness))
}

/// k-means on `x` scored against ground-truth classes.
pub fn cluster_report<T: Scalar>(
    x: &Matrix<T>,
    truth: &[usize],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterReport> {
    let km = kmeans(x, k, seed, max_iters)?;
    let (nmi, completeness) = nmi_and_completeness(&km.labels, truth)?;
    Ok(ClusterReport { labels: km.labels, nmi, completeness, inertia: km.inertia })
}

/// Compares label vectors up to a permutation of label names.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut pairs: Vec<(usize, usize)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_unstable();
    pairs.dedup();
    let mut left: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let mut right: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    left.dedup();
    right.sort_unstable();
    right.dedup();
    left.len() == pairs.len() && right.len() == pairs.len()
}
