//! Anomaly scoring and keep/remove labelling of standardized feature vectors.
//!
//! Higher scores are more anomalous for every detector. A point is removed
//! when its score reaches the threshold `tau`.

mod iforest;
mod kmeans;
mod lof;
mod matrix;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use iforest::{
    c_factor, fit_iforest, harmonic, path_length, score_from_path_length, IsolationForest, IsolationTree, Node,
    HARMONIC_TABLE_LIMIT,
};
pub use kmeans::{fit_kmeans, KMeansDetector};
pub use lof::{fit_lof, LocalOutlierFactor, LRD_EPSILON};
pub use matrix::Matrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_CONTAMINATION: f64 = 0.0769;
pub const DEFAULT_TREES: usize = 100;
pub const DEFAULT_PSI: usize = 256;
pub const DEFAULT_LOF_K: usize = 20;
pub const DEFAULT_KMEANS_CLUSTERS: usize = 8;
pub const DEFAULT_KMEANS_ITERS: usize = 100;
pub const DEFAULT_SEED: u64 = 42;

/// Keep (+1) or remove (-1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Keep,
    Remove,
}

impl Label {
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Keep => 1,
            Label::Remove => -1,
        }
    }

    pub fn from_i64(v: i64) -> Option<Self> {
        match v {
            1 => Some(Label::Keep),
            -1 => Some(Label::Remove),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyVerdict<T> {
    pub score: T,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    IForest,
    Lof,
    KMeans,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iforest" | "isolation-forest" => Ok(Algorithm::IForest),
            "lof" => Ok(Algorithm::Lof),
            "kmeans" | "k-means" => Ok(Algorithm::KMeans),
            other => Err(Error::invalid(format!("unknown detector {other:?}"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::IForest => "iforest",
            Algorithm::Lof => "lof",
            Algorithm::KMeans => "kmeans",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub algorithm: Algorithm,
    pub contamination: f64,
    /// Fixed threshold; replaces the contamination quantile when set.
    pub tau: Option<f64>,
    pub trees: usize,
    pub psi: usize,
    pub lof_k: usize,
    pub kmeans_clusters: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
    /// Zero-based feature columns to use; `None` uses all of them.
    pub feature_mask: Option<Vec<usize>>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            algorithm: Algorithm::IForest,
            contamination: DEFAULT_CONTAMINATION,
            tau: None,
            trees: DEFAULT_TREES,
            psi: DEFAULT_PSI,
            lof_k: DEFAULT_LOF_K,
            kmeans_clusters: DEFAULT_KMEANS_CLUSTERS,
            kmeans_iters: DEFAULT_KMEANS_ITERS,
            seed: DEFAULT_SEED,
            feature_mask: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.contamination > 0.0 && self.contamination < 1.0) {
            return Err(Error::invalid(format!(
                "contamination must lie in (0, 1), got {}",
                self.contamination
            )));
        }
        if let Some(t) = self.tau {
            if !t.is_finite() {
                return Err(Error::invalid("threshold override must be finite"));
            }
        }
        if self.trees == 0 {
            return Err(Error::invalid("tree count must be at least 1"));
        }
        if self.psi < 2 {
            return Err(Error::invalid("subsample size must be at least 2"));
        }
        if self.lof_k == 0 {
            return Err(Error::invalid("LOF neighbor count must be at least 1"));
        }
        if self.kmeans_clusters == 0 {
            return Err(Error::invalid("k-means needs at least one cluster"));
        }
        if self.kmeans_iters == 0 {
            return Err(Error::invalid("k-means needs at least one iteration"));
        }
        self.columns(dim)?;
        Ok(())
    }

    /// The sorted, distinct columns the detector sees.
    pub fn columns(&self, dim: usize) -> Result<Vec<usize>> {
        match &self.feature_mask {
            None => Ok((0..dim).collect()),
            Some(mask) => {
                let mut cols = mask.clone();
                cols.sort_unstable();
                cols.dedup();
                if cols.is_empty() {
                    return Err(Error::invalid("feature mask must keep at least one feature"));
                }
                if let Some(&bad) = cols.iter().find(|&&c| c >= dim) {
                    return Err(Error::invalid(format!("feature index {bad} out of range 0..{dim}")));
                }
                Ok(cols)
            }
        }
    }

    /// Drops one zero-based feature from the mask.
    pub fn without_feature(mut self, feature: usize, dim: usize) -> Self {
        let cols: Vec<usize> = (0..dim)
            .filter(|&c| c != feature && self.feature_mask.as_ref().is_none_or(|m| m.contains(&c)))
            .collect();
        self.feature_mask = Some(cols);
        self
    }
}

#[derive(Debug, Clone)]
pub enum Detector<T> {
    IForest(IsolationForest<T>),
    Lof(LocalOutlierFactor<T>),
    KMeans(KMeansDetector<T>),
}

/// A fitted detector together with the columns it was fitted on and its
/// threshold.
#[derive(Debug, Clone)]
pub struct DetectorModel<T> {
    pub detector: Detector<T>,
    pub columns: Vec<usize>,
    pub tau: T,
    pub seed: u64,
}

impl<T: Scalar> DetectorModel<T> {
    pub fn algorithm(&self) -> Algorithm {
        match self.detector {
            Detector::IForest(_) => Algorithm::IForest,
            Detector::Lof(_) => Algorithm::Lof,
            Detector::KMeans(_) => Algorithm::KMeans,
        }
    }

    fn project(&self, row: &[T], buf: &mut Vec<T>) {
        buf.clear();
        buf.extend(self.columns.iter().map(|&c| row[c]));
    }

    /// Scores a full-width row.
    pub fn score(&self, row: &[T]) -> T {
        let mut buf = Vec::with_capacity(self.columns.len());
        self.project(row, &mut buf);
        self.score_projected(&buf, None)
    }

    fn score_projected(&self, x: &[T], reference: Option<usize>) -> T {
        match &self.detector {
            Detector::IForest(f) => f.score(x),
            Detector::Lof(l) => l.score_excluding(x, reference),
            Detector::KMeans(k) => k.score(x),
        }
    }

    /// Scores every row of `x` in parallel. `reference_of[i]`, when given,
    /// names the fitted reference point that row `i` is, so LOF can leave it
    /// out of its own neighbourhood.
    pub fn score_rows(&self, x: &Matrix<T>, reference_of: Option<&[Option<usize>]>) -> Vec<T> {
        (0..x.rows())
            .into_par_iter()
            .map_init(
                || Vec::with_capacity(self.columns.len()),
                |buf, i| {
                    self.project(x.row(i), buf);
                    self.score_projected(buf, reference_of.and_then(|r| r[i]))
                },
            )
            .collect()
    }

    pub fn classify(&self, score: T) -> Label {
        classify(score, self.tau)
    }
}

/// Fits the configured detector on the masked columns of `x`. The returned
/// model's `tau` is NaN until a threshold is chosen.
pub fn fit_detector<T: Scalar>(x: &Matrix<T>, config: &DetectorConfig) -> Result<DetectorModel<T>> {
    config.validate(x.cols())?;
    let columns = config.columns(x.cols())?;
    let projected = x.project(&columns);
    let detector = match config.algorithm {
        Algorithm::IForest => Detector::IForest(fit_iforest(&projected, config.trees, config.psi, config.seed)?),
        Algorithm::Lof => Detector::Lof(fit_lof(&projected, config.lof_k)?),
        Algorithm::KMeans => Detector::KMeans(fit_kmeans(
            &projected,
            config.kmeans_clusters,
            config.seed,
            config.kmeans_iters,
        )?),
    };
    Ok(DetectorModel {
        detector,
        columns,
        tau: T::nan(),
        seed: config.seed,
    })
}

/// `+1` below the threshold, `-1` at or above it.
pub fn classify<T: Scalar>(score: T, tau: T) -> Label {
    if score < tau {
        Label::Keep
    } else {
        Label::Remove
    }
}

fn quantile_position(n: usize, contamination: f64) -> f64 {
    (1.0 - contamination) * (n - 1) as f64
}

/// The threshold: `tau_override` if given, else the `1 - contamination`
/// empirical quantile of `scores` with linear interpolation.
pub fn choose_tau<T: Scalar>(scores: &[T], contamination: f64, tau_override: Option<T>) -> Result<T> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no scores to threshold".into()));
    }
    if let Some(t) = tau_override {
        return Ok(t);
    }
    if !(contamination > 0.0 && contamination < 1.0) {
        return Err(Error::invalid(format!("contamination must lie in (0, 1), got {contamination}")));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let pos = quantile_position(sorted.len(), contamination);
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return Ok(sorted[lo]);
    }
    Ok(sorted[lo] + T::of(frac) * (sorted[lo + 1] - sorted[lo]))
}

/// Number of points the contamination quantile removes when scores are
/// distinct.
pub fn removal_count(n: usize, contamination: f64) -> usize {
    if n == 0 {
        return 0;
    }
    n - quantile_position(n, contamination).ceil() as usize
}

/// Labels by rank: the [`removal_count`] highest scores are removed, equal
/// scores ordered by index so later points go first. With distinct scores
/// this is exactly `classify(score, choose_tau(..))`.
pub fn label_by_contamination<T: Scalar>(scores: &[T], contamination: f64) -> Vec<Label> {
    let n = scores.len();
    let m = removal_count(n, contamination);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut labels = vec![Label::Keep; n];
    for &i in &order[n - m..] {
        labels[i] = Label::Remove;
    }
    labels
}

/// Fitted model plus one verdict per input row.
#[derive(Debug, Clone)]
pub struct Detection<T> {
    pub model: DetectorModel<T>,
    pub verdicts: Vec<AnomalyVerdict<T>>,
}

/// Fits, scores every row, picks the threshold and labels.
pub fn detect<T: Scalar>(x: &Matrix<T>, config: &DetectorConfig) -> Result<Detection<T>> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("no vectors to score".into()));
    }
    let mut model = fit_detector(x, config)?;
    let reference: Vec<Option<usize>> = (0..x.rows()).map(Some).collect();
    let scores = model.score_rows(x, Some(&reference));
    let labels = label_scores(&scores, config);
    model.tau = choose_tau(&scores, config.contamination, config.tau.map(T::of))?;
    let verdicts = scores
        .into_iter()
        .zip(labels)
        .map(|(score, label)| AnomalyVerdict { score, label })
        .collect();
    Ok(Detection { model, verdicts })
}

/// Threshold labelling used by [`detect`] and the pipeline.
pub fn label_scores<T: Scalar>(scores: &[T], config: &DetectorConfig) -> Vec<Label> {
    match config.tau {
        Some(t) => scores.iter().map(|&s| classify(s, T::of(t))).collect(),
        None => label_by_contamination(scores, config.contamination),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn classify_examples() {
        assert_eq!(classify(0.3, 0.5), Label::Keep);
        assert_eq!(classify(0.5, 0.5), Label::Remove);
        assert_eq!(classify(0.9, 0.5), Label::Remove);
    }

    #[test]
    fn tau_on_ten_scores() {
        let scores: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let tau = choose_tau(&scores, 0.1, None).unwrap();
        assert_eq!(scores.iter().filter(|&&s| s >= tau).count(), 1);
        assert_eq!(label_by_contamination(&scores, 0.1).iter().filter(|l| **l == Label::Remove).count(), 1);
    }

    #[test]
    fn tau_override_and_errors() {
        assert_eq!(choose_tau(&[0.1, 0.9], 0.3, Some(0.5)).unwrap(), 0.5);
        assert!(choose_tau::<f64>(&[], 0.1, None).is_err());
        assert!(choose_tau(&[1.0], 0.0, None).is_err());
        assert!(choose_tau(&[1.0], 1.0, None).is_err());
    }

    #[test]
    fn default_contamination_on_ten_thousand() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let tau = choose_tau(&scores, DEFAULT_CONTAMINATION, None).unwrap();
        let removed = scores.iter().filter(|&&s| classify(s, tau) == Label::Remove).count();
        assert!((768..=770).contains(&removed), "{removed}");
    }

    #[test]
    fn rank_labels_match_threshold_for_distinct_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 3, 10, 97, 1000] {
            for c in [0.01, 0.0769, 0.25, 0.5, 0.9] {
                let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
                let tau = choose_tau(&scores, c, None).unwrap();
                let by_tau: Vec<Label> = scores.iter().map(|&s| classify(s, tau)).collect();
                assert_eq!(by_tau, label_by_contamination(&scores, c), "n={n} c={c}");
                let removed = by_tau.iter().filter(|l| **l == Label::Remove).count() as f64;
                assert!((removed / n as f64 - c).abs() <= 1.0 / n as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn tied_scores_remove_configured_fraction() {
        let labels = label_by_contamination(&[0.5f64; 20], 0.1);
        let removed: Vec<usize> = (0..20).filter(|&i| labels[i] == Label::Remove).collect();
        assert_eq!(removed, vec![18, 19]);
    }

    #[test]
    fn config_validation() {
        let ok = DetectorConfig::default();
        assert!(ok.validate(8).is_ok());
        for bad in [
            DetectorConfig { contamination: 1.5, ..ok.clone() },
            DetectorConfig { contamination: 0.0, ..ok.clone() },
            DetectorConfig { trees: 0, ..ok.clone() },
            DetectorConfig { psi: 1, ..ok.clone() },
            DetectorConfig { lof_k: 0, ..ok.clone() },
            DetectorConfig { feature_mask: Some(vec![]), ..ok.clone() },
            DetectorConfig { feature_mask: Some(vec![8]), ..ok.clone() },
            DetectorConfig { tau: Some(f64::NAN), ..ok.clone() },
        ] {
            assert!(bad.validate(8).is_err(), "{bad:?}");
        }
        let ablated = ok.without_feature(6, 8);
        assert_eq!(ablated.columns(8).unwrap(), vec![0, 1, 2, 3, 4, 5, 7]);
    }

    #[test]
    fn algorithm_names() {
        for a in [Algorithm::IForest, Algorithm::Lof, Algorithm::KMeans] {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert!("svm".parse::<Algorithm>().is_err());
    }

    fn normal_matrix(n: usize, dim: usize, seed: u64) -> Matrix<f64> {
        use rand_distr_free::standard_normal;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::with_capacity(dim, n);
        for _ in 0..n {
            let row: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
            m.push_row(&row);
        }
        m
    }

    mod rand_distr_free {
        use rand::Rng;

        /// Box-Muller.
        pub fn standard_normal(rng: &mut impl Rng) -> f64 {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }

    #[test]
    fn detect_contamination_count() {
        let x = normal_matrix(1000, 8, 5);
        for algorithm in [Algorithm::IForest, Algorithm::Lof, Algorithm::KMeans] {
            let cfg = DetectorConfig {
                algorithm,
                contamination: 0.1,
                ..Default::default()
            };
            let d = detect(&x, &cfg).unwrap();
            let removed = d.verdicts.iter().filter(|v| v.label == Label::Remove).count();
            assert!((99..=101).contains(&removed), "{algorithm}: {removed}");
        }
    }

    #[test]
    fn mask_equals_projection() {
        let x = normal_matrix(300, 8, 9);
        for algorithm in [Algorithm::IForest, Algorithm::Lof, Algorithm::KMeans] {
            let cfg = DetectorConfig {
                algorithm,
                ..Default::default()
            };
            let masked = detect(&x, &cfg.clone().without_feature(6, 8)).unwrap();
            let projected = detect(&x.project(&[0, 1, 2, 3, 4, 5, 7]), &cfg).unwrap();
            assert_eq!(masked.verdicts, projected.verdicts, "{algorithm}");
        }
    }

    #[test]
    fn identical_points_remove_fraction() {
        let mut x = Matrix::with_capacity(8, 100);
        for _ in 0..100 {
            x.push_row(&[1.0f64; 8]);
        }
        let d = detect(&x, &DetectorConfig { contamination: 0.1, ..Default::default() }).unwrap();
        let first = d.verdicts[0].score;
        assert!(d.verdicts.iter().all(|v| v.score == first));
        let removed: Vec<usize> = (0..100).filter(|&i| d.verdicts[i].label == Label::Remove).collect();
        assert_eq!(removed.len(), removal_count(100, 0.1));
        assert_eq!(removed, (90..100).collect::<Vec<_>>());
    }

    #[test]
    fn detection_is_deterministic() {
        let x = normal_matrix(400, 8, 21);
        for algorithm in [Algorithm::IForest, Algorithm::Lof, Algorithm::KMeans] {
            let cfg = DetectorConfig { algorithm, ..Default::default() };
            assert_eq!(detect(&x, &cfg).unwrap().verdicts, detect(&x, &cfg).unwrap().verdicts);
        }
    }

    #[test]
    fn f32_detection() {
        let x64 = normal_matrix(200, 4, 2);
        let mut x = Matrix::<f32>::with_capacity(4, 200);
        for i in 0..200 {
            let row: Vec<f32> = x64.row(i).iter().map(|&v| v as f32).collect();
            x.push_row(&row);
        }
        let d = detect(&x, &DetectorConfig::default()).unwrap();
        assert!(d.verdicts.iter().all(|v| v.score > 0.0 && v.score <= 1.0));
    }
}
