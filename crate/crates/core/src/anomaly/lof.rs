//! Local Outlier Factor.

use rayon::prelude::*;

use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Added to the mean reachability distance before inverting, so duplicated
/// points get a large but finite density.
pub const LRD_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LocalOutlierFactor<T> {
    reference: Matrix<T>,
    k: usize,
    k_distance: Vec<T>,
    lrd: Vec<T>,
}

fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(T::zero(), |s, v| s + v)
        .sqrt()
}

/// The `k` nearest reference points to `x`, nearest first, equal distances
/// ordered by reference index. `exclude` is left out.
fn nearest<T: Scalar>(reference: &Matrix<T>, x: &[T], k: usize, exclude: Option<usize>) -> Vec<(T, usize)> {
    let mut all: Vec<(T, usize)> = (0..reference.rows())
        .filter(|&i| Some(i) != exclude)
        .map(|i| (distance(x, reference.row(i)), i))
        .collect();
    let cmp = |a: &(T, usize), b: &(T, usize)| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    };
    if all.len() > k {
        all.select_nth_unstable_by(k - 1, cmp);
        all.truncate(k);
    }
    all.sort_by(cmp);
    all
}

pub fn fit_lof<T: Scalar>(x: &Matrix<T>, k: usize) -> Result<LocalOutlierFactor<T>> {
    if k == 0 {
        return Err(Error::invalid("LOF neighbor count must be at least 1"));
    }
    let n = x.rows();
    if n <= k {
        return Err(Error::invalid(format!("LOF with k={k} needs more than {k} points, got {n}")));
    }
    let neighbors: Vec<Vec<(T, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| nearest(x, x.row(i), k, Some(i)))
        .collect();
    let k_distance: Vec<T> = neighbors.iter().map(|nb| nb[k - 1].0).collect();
    let lrd = neighbors
        .iter()
        .map(|nb| local_density(nb, &k_distance))
        .collect();
    Ok(LocalOutlierFactor {
        reference: x.clone(),
        k,
        k_distance,
        lrd,
    })
}

fn local_density<T: Scalar>(neighbors: &[(T, usize)], k_distance: &[T]) -> T {
    let sum = neighbors
        .iter()
        .map(|&(d, o)| d.max(k_distance[o]))
        .fold(T::zero(), |s, v| s + v);
    let mean = sum / T::of_usize(neighbors.len());
    T::one() / (mean + T::of(LRD_EPSILON))
}

impl<T: Scalar> LocalOutlierFactor<T> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn reference(&self) -> &Matrix<T> {
        &self.reference
    }

    pub fn local_reachability_density(&self, i: usize) -> T {
        self.lrd[i]
    }

    /// Mean ratio of neighbour densities to the density of `x`.
    pub fn score(&self, x: &[T]) -> T {
        self.score_excluding(x, None)
    }

    /// As [`score`](Self::score), leaving reference point `exclude` out of
    /// the neighbourhood (used when `x` is that reference point).
    pub fn score_excluding(&self, x: &[T], exclude: Option<usize>) -> T {
        let nb = nearest(&self.reference, x, self.k, exclude);
        let own = local_density(&nb, &self.k_distance);
        let sum = nb.iter().map(|&(_, o)| self.lrd[o]).fold(T::zero(), |s, v| s + v);
        sum / T::of_usize(nb.len()) / own
    }
}
