//! K-Means distance-to-centroid scoring.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansDetector<T> {
    centroids: Matrix<T>,
    iterations: usize,
}

fn sq_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(T::zero(), |s, v| s + v)
}

/// Index of the nearest centroid (lowest index on ties) and the squared
/// distance to it.
fn nearest<T: Scalar>(centroids: &Matrix<T>, x: &[T]) -> (usize, T) {
    let mut best = (0, sq_distance(centroids.row(0), x));
    for c in 1..centroids.rows() {
        let d = sq_distance(centroids.row(c), x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm from `clusters` distinct rows drawn uniformly with the
/// seeded generator. Stops when assignments no longer change or after
/// `iters` rounds. An empty cluster is re-seeded with the point farthest
/// from its own centroid.
pub fn fit_kmeans<T: Scalar>(x: &Matrix<T>, clusters: usize, seed: u64, iters: usize) -> Result<KMeansDetector<T>> {
    let n = x.rows();
    if clusters == 0 {
        return Err(Error::invalid("k-means needs at least one cluster"));
    }
    if n < clusters {
        return Err(Error::invalid(format!("k-means with {clusters} clusters needs at least {clusters} points, got {n}")));
    }
    if iters == 0 {
        return Err(Error::invalid("k-means needs at least one iteration"));
    }
    let dim = x.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = index::sample(&mut rng, n, clusters).into_vec();
    let mut centroids = x.select_rows(&init);
    let mut assignment: Vec<usize> = vec![usize::MAX; n];
    let mut iterations = 0;
    for _ in 0..iters {
        iterations += 1;
        let nearest_all: Vec<(usize, T)> = (0..n).into_par_iter().map(|i| nearest(&centroids, x.row(i))).collect();
        let changed = nearest_all.iter().zip(&assignment).any(|(a, &b)| a.0 != b);
        for (a, (c, _)) in assignment.iter_mut().zip(&nearest_all) {
            *a = *c;
        }
        if !changed {
            break;
        }
        let mut sums = vec![T::zero(); clusters * dim];
        let mut counts = vec![0usize; clusters];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(x.row(i)) {
                *s = *s + v;
            }
        }
        let mut next = Matrix::with_capacity(dim, clusters);
        let mut taken = vec![false; n];
        for c in 0..clusters {
            if counts[c] > 0 {
                let row: Vec<T> = sums[c * dim..(c + 1) * dim]
                    .iter()
                    .map(|&s| s / T::of_usize(counts[c]))
                    .collect();
                next.push_row(&row);
            } else {
                let mut far: Option<(usize, T)> = None;
                for (i, &(_, d)) in nearest_all.iter().enumerate() {
                    if !taken[i] && far.is_none_or(|(_, fd)| d > fd) {
                        far = Some((i, d));
                    }
                }
                let (i, _) = far.expect("n >= clusters leaves a point to re-seed from");
                taken[i] = true;
                next.push_row(x.row(i));
            }
        }
        centroids = next;
    }
    Ok(KMeansDetector { centroids, iterations })
}

impl<T: Scalar> KMeansDetector<T> {
    pub fn centroids(&self) -> &Matrix<T> {
        &self.centroids
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Euclidean distance to the nearest centroid.
    pub fn score(&self, x: &[T]) -> T {
        nearest(&self.centroids, x).1.sqrt()
    }
}
