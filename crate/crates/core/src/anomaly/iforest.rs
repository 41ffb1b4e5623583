//! Isolation Forest.

use std::sync::OnceLock;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Harmonic numbers up to this index are exact running sums; beyond it the
/// asymptotic expansion `ln i + gamma + 1/(2i) - 1/(12 i^2)` is used.
pub const HARMONIC_TABLE_LIMIT: usize = 100_000;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn harmonic_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(HARMONIC_TABLE_LIMIT + 1);
        let mut h = 0.0;
        t.push(h);
        for k in 1..=HARMONIC_TABLE_LIMIT {
            h += 1.0 / k as f64;
            t.push(h);
        }
        t
    })
}

/// `H(i) = 1 + 1/2 + ... + 1/i`.
pub fn harmonic(i: usize) -> f64 {
    if i <= HARMONIC_TABLE_LIMIT {
        harmonic_table()[i]
    } else {
        let x = i as f64;
        x.ln() + EULER_GAMMA + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x)
    }
}

/// Average path length of an unsuccessful search in a binary search tree of
/// `n` points: `2 H(n-1) - 2 (n-1) / n`, with `c(0) = c(1) = 0`, `c(2) = 1`.
pub fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => 2.0 * harmonic(n - 1) - 2.0 * (n - 1) as f64 / n as f64,
    }
}

/// `2^(-h / c)`.
pub fn score_from_path_length(h: f64, c: f64) -> f64 {
    (-h / c).exp2()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node<T> {
    Internal {
        feature: usize,
        split: T,
        left: usize,
        right: usize,
    },
    External {
        size: usize,
    },
}

/// Nodes are stored in an arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree<T> {
    nodes: Vec<Node<T>>,
    height_limit: usize,
}

impl<T: Scalar> IsolationTree<T> {
    /// Builds from explicit nodes; used for hand-made trees.
    pub fn from_nodes(nodes: Vec<Node<T>>, height_limit: usize) -> Self {
        IsolationTree { nodes, height_limit }
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn height_limit(&self) -> usize {
        self.height_limit
    }

    /// Longest root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::External { .. } => 0,
                Node::Internal { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    fn grow(x: &Matrix<T>, sample: &mut [usize], height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = IsolationTree {
            nodes: Vec::new(),
            height_limit,
        };
        let mut ranges = Vec::with_capacity(x.cols());
        tree.build(x, sample, 0, rng, &mut ranges);
        tree
    }

    fn build(
        &mut self,
        x: &Matrix<T>,
        idx: &mut [usize],
        depth: usize,
        rng: &mut ChaCha8Rng,
        candidates: &mut Vec<(usize, T, T)>,
    ) -> usize {
        let me = self.nodes.len();
        self.nodes.push(Node::External { size: idx.len() });
        if depth >= self.height_limit || idx.len() <= 1 {
            return me;
        }
        candidates.clear();
        for f in 0..x.cols() {
            let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
            for &i in idx.iter() {
                let v = x.get(i, f);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let mid = lo + (hi - lo) / T::of(2.0);
            if mid > lo && mid < hi {
                candidates.push((f, lo, hi));
            }
        }
        if candidates.is_empty() {
            return me;
        }
        let (feature, lo, hi) = candidates[rng.random_range(0..candidates.len())];
        let split = uniform_between(lo, hi, rng);

        let mut boundary = 0;
        for k in 0..idx.len() {
            if x.get(idx[k], feature) < split {
                idx.swap(k, boundary);
                boundary += 1;
            }
        }
        let (l, r) = idx.split_at_mut(boundary);
        let left = self.build(x, l, depth + 1, rng, candidates);
        let right = self.build(x, r, depth + 1, rng, candidates);
        self.nodes[me] = Node::Internal {
            feature,
            split,
            left,
            right,
        };
        me
    }
}

/// A value strictly inside `(lo, hi)`; the caller guarantees one exists.
fn uniform_between<T: Scalar>(lo: T, hi: T, rng: &mut ChaCha8Rng) -> T {
    for _ in 0..16 {
        let u: f64 = rng.random();
        let v = lo + (hi - lo) * T::of(u);
        if v > lo && v < hi {
            return v;
        }
    }
    lo + (hi - lo) / T::of(2.0)
}

/// Edges from the root to the external node `x` reaches, plus `c(size)` of
/// that node.
pub fn path_length<T: Scalar>(x: &[T], tree: &IsolationTree<T>) -> f64 {
    let mut i = 0;
    let mut edges = 0usize;
    loop {
        match &tree.nodes[i] {
            Node::External { size } => return edges as f64 + c_factor(*size),
            Node::Internal {
                feature,
                split,
                left,
                right,
            } => {
                i = if x[*feature] < *split { *left } else { *right };
                edges += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForest<T> {
    trees: Vec<IsolationTree<T>>,
    psi: usize,
    c_norm: f64,
}

/// Seed of tree `index` derived from the forest seed (SplitMix64 finalizer),
/// so trees can be grown in any order.
fn tree_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fit_iforest<T: Scalar>(x: &Matrix<T>, trees: usize, psi: usize, seed: u64) -> Result<IsolationForest<T>> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::invalid(format!("isolation forest needs at least 2 points, got {n}")));
    }
    if trees == 0 {
        return Err(Error::invalid("tree count must be at least 1"));
    }
    if psi < 2 {
        return Err(Error::invalid("subsample size must be at least 2"));
    }
    let psi_eff = psi.min(n);
    let height_limit = (psi_eff as f64).log2().ceil() as usize;
    let trees = (0..trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(seed, t));
            let mut sample = index::sample(&mut rng, n, psi_eff).into_vec();
            IsolationTree::grow(x, &mut sample, height_limit, &mut rng)
        })
        .collect();
    Ok(IsolationForest {
        trees,
        psi: psi_eff,
        c_norm: c_factor(psi_eff),
    })
}

impl<T: Scalar> IsolationForest<T> {
    pub fn trees(&self) -> &[IsolationTree<T>] {
        &self.trees
    }

    /// Effective subsample size, `min(psi, n)`.
    pub fn psi(&self) -> usize {
        self.psi
    }

    pub fn mean_path_length(&self, x: &[T]) -> f64 {
        self.trees.iter().map(|t| path_length(x, t)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn score(&self, x: &[T]) -> T {
        T::of(score_from_path_length(self.mean_path_length(x), self.c_norm))
    }
}
