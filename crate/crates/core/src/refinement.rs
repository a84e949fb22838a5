//! Learning-based refinement of the coarse map.
//!
//! Superpixels are split by their coarse score into confident positives,
//! confident negatives and "tough" samples in between. Tough samples get a
//! soft label from their spatial neighbors, and a ridge projection from raw
//! features to `[salient, background]` is fit with class-balancing weights.
//! Tough superpixels are then re-scored by the projection.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::saliency::{normalize_scores, SaliencyMap, SaliencyStage};
use crate::superpixel::SuperpixelMap;

pub const DEFAULT_LAMBDA: f64 = 10.0;
pub const DEFAULT_TAU2_FACTOR: f64 = 3.0;
pub const TOUGH_WEIGHT: f64 = 0.5;
pub const NEGATIVE_WEIGHT: f64 = 1.0;
/// Upper clamp of the positive threshold relative to the maximum score.
const TAU2_MAX_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    Positive,
    Negative,
    Tough,
}

/// Disjoint split of all superpixels, with per-superpixel labels and weights
/// indexed by superpixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePartition {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub toughs: Vec<usize>,
    pub tau1: f64,
    pub tau2: f64,
    pub kinds: Vec<SampleKind>,
    pub labels: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl SamplePartition {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Replace the labels of the tough samples, given in `toughs` order.
    pub fn set_tough_labels(&mut self, labels: &[[f64; 2]]) -> Result<()> {
        if labels.len() != self.toughs.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} tough samples",
                labels.len(),
                self.toughs.len()
            )));
        }
        for (&j, &label) in self.toughs.iter().zip(labels) {
            self.labels[j] = label;
        }
        Ok(())
    }
}

/// Split superpixels by coarse score. `tau1` is the mean score; `tau2` is
/// `tau2_factor * tau1`, clamped below the maximum score so that some
/// positives always exist.
pub fn partition_samples(coarse: &SaliencyMap, tau2_factor: f64) -> Result<SamplePartition> {
    let scores = &coarse.scores;
    if scores.is_empty() {
        return Err(Error::invalid("empty saliency map"));
    }
    if !(tau2_factor > 1.0) {
        return Err(Error::invalid("tau2 factor must exceed 1"));
    }
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(Error::DegeneratePartition);
    }

    let tau1 = scores.iter().sum::<f64>() / scores.len() as f64;
    let mut tau2 = (tau2_factor * tau1).min(TAU2_MAX_FRACTION * hi);
    if tau2 <= tau1 {
        // Scores crowd near the maximum; split the gap instead.
        tau2 = 0.5 * (tau1 + hi);
    }

    let kinds: Vec<SampleKind> = scores
        .iter()
        .map(|&s| {
            if s > tau2 {
                SampleKind::Positive
            } else if s < tau1 {
                SampleKind::Negative
            } else {
                SampleKind::Tough
            }
        })
        .collect();
    let indices = |kind| -> Vec<usize> { (0..kinds.len()).filter(|&j| kinds[j] == kind).collect() };
    let positives = indices(SampleKind::Positive);
    let negatives = indices(SampleKind::Negative);
    let toughs = indices(SampleKind::Tough);

    let positive_weight = negatives.len() as f64 / positives.len() as f64;
    let (labels, weights) = kinds
        .iter()
        .zip(scores)
        .map(|(kind, &s)| match kind {
            SampleKind::Positive => ([1.0, 0.0], positive_weight),
            SampleKind::Negative => ([0.0, 1.0], NEGATIVE_WEIGHT),
            SampleKind::Tough => ([s, 1.0 - s], TOUGH_WEIGHT),
        })
        .unzip();

    Ok(SamplePartition {
        positives,
        negatives,
        toughs,
        tau1,
        tau2,
        kinds,
        labels,
        weights,
    })
}

/// Soft labels `[s, 1 - s]` for tough samples, where `s` is the
/// pixel-count-weighted mean coarse score of the adjacent superpixels.
pub fn tough_labels(
    partition: &SamplePartition,
    coarse: &SaliencyMap,
    map: &SuperpixelMap,
) -> Result<Vec<[f64; 2]>> {
    if coarse.scores.len() != map.region_count() || partition.len() != map.region_count() {
        return Err(Error::invalid("partition, scores and map disagree on region count"));
    }
    partition
        .toughs
        .iter()
        .map(|&j| {
            let neighbors = map.adjacency_of(j)?;
            if neighbors.is_empty() {
                return Err(Error::Internal(format!("tough region {j} has no neighbors")));
            }
            let (num, den) = neighbors.iter().fold((0.0, 0.0), |(num, den), &k| {
                let px = map.pixel_count(k) as f64;
                (num + coarse.scores[k] * px, den + px)
            });
            let s = (num / den).clamp(0.0, 1.0);
            Ok([s, 1.0 - s])
        })
        .collect()
}

/// Learned `D x 2` projection from features to `[salient, background]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementModel {
    pub projection: DMatrix<f64>,
    pub lambda: f64,
}

impl RefinementModel {
    /// Salient-column response for one feature vector.
    pub fn predict(&self, feature: impl IntoIterator<Item = f64>) -> f64 {
        feature
            .into_iter()
            .zip(self.projection.column(0).iter())
            .map(|(a, m)| a * m)
            .sum()
    }
}

/// Closed-form minimizer of
/// `1/2 ||M||_F^2 + lambda/2 sum_i w_i ||a_i M - y_i||^2`, i.e.
/// `M = (I + lambda A^T W A)^{-1} (lambda A^T W Y)`.
pub fn learn_projection(
    samples: &DMatrix<f64>,
    labels: &DMatrix<f64>,
    weights: &[f64],
    lambda: f64,
) -> Result<RefinementModel> {
    let (n, d) = samples.shape();
    if labels.nrows() != n || weights.len() != n {
        return Err(Error::invalid(format!(
            "{n} samples but {} labels and {} weights",
            labels.nrows(),
            weights.len()
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda must be positive and finite"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    if samples.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numeric(0, "non-finite samples or labels"));
    }

    let mut weighted = samples.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= weights[i];
    }
    let at_w = weighted.transpose(); // A^T W
    let system = DMatrix::identity(d, d) + (&at_w * samples) * lambda;
    let rhs = (&at_w * labels) * lambda;
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::numeric(0, "refinement system is not positive definite"))?;
    let projection = chol.solve(&rhs);
    if projection.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(0, "non-finite projection"));
    }
    Ok(RefinementModel { projection, lambda })
}

/// Re-score the tough superpixels of a coarse map.
///
/// Confident superpixels keep their coarse score; tough ones take the clamped
/// salient response of the learned projection. The result is renormalized.
/// If the coarse scores are all equal the coarse map is returned with
/// `degenerate` set.
pub fn refine(
    coarse: &SaliencyMap,
    features: &FeatureMatrix,
    map: &SuperpixelMap,
    lambda: f64,
    tau2_factor: f64,
) -> Result<SaliencyMap> {
    Ok(refine_with_model(coarse, features, map, lambda, tau2_factor)?.0)
}

/// As [`refine`], also returning the partition and model when one was fit.
pub fn refine_with_model(
    coarse: &SaliencyMap,
    features: &FeatureMatrix,
    map: &SuperpixelMap,
    lambda: f64,
    tau2_factor: f64,
) -> Result<(SaliencyMap, Option<(SamplePartition, RefinementModel)>)> {
    let n = map.region_count();
    if coarse.scores.len() != n || features.count() != n {
        return Err(Error::invalid(format!(
            "{} scores and {} feature columns for {n} regions",
            coarse.scores.len(),
            features.count()
        )));
    }

    let mut partition = match partition_samples(coarse, tau2_factor) {
        Ok(p) => p,
        Err(Error::DegeneratePartition) => {
            let out = SaliencyMap {
                scores: coarse.scores.clone(),
                stage: SaliencyStage::Refined,
                degenerate: true,
            };
            return Ok((out, None));
        }
        Err(e) => return Err(e),
    };
    if partition.toughs.is_empty() {
        let out = SaliencyMap {
            scores: coarse.scores.clone(),
            stage: SaliencyStage::Refined,
            degenerate: false,
        };
        return Ok((out, None));
    }

    let soft = tough_labels(&partition, coarse, map)?;
    partition.set_tough_labels(&soft)?;

    let samples = features.values().transpose();
    let labels = DMatrix::from_fn(n, 2, |i, c| partition.labels[i][c]);
    let model = learn_projection(&samples, &labels, &partition.weights, lambda)?;

    let mut scores = coarse.scores.clone();
    for &j in &partition.toughs {
        scores[j] = model.predict(samples.row(j).iter().copied()).clamp(0.0, 1.0);
    }
    let out = SaliencyMap {
        scores: normalize_scores(&scores),
        stage: SaliencyStage::Refined,
        degenerate: false,
    };
    Ok((out, Some((partition, model))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn partition_hand_trace() {
        let coarse = SaliencyMap::coarse(vec![0.0, 0.1, 0.9, 1.0]);
        let p = partition_samples(&coarse, 3.0).unwrap();
        assert_eq!(p.tau1, 0.5);
        assert_eq!(p.tau2, 0.95);
        assert_eq!(p.positives, vec![3]);
        assert_eq!(p.negatives, vec![0, 1]);
        assert_eq!(p.toughs, vec![2]);
        assert_eq!(p.weights, vec![1.0, 1.0, 0.5, 2.0]);
        for label in &p.labels {
            assert!((label[0] + label[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_scores() {
        let coarse = SaliencyMap::coarse(vec![0.5; 6]);
        assert!(matches!(
            partition_samples(&coarse, 3.0),
            Err(Error::DegeneratePartition)
        ));
    }

    #[test]
    fn positive_weight_balances_classes() {
        let mut scores = vec![0.0; 10];
        scores.extend([1.0, 1.0]);
        let p = partition_samples(&SaliencyMap::coarse(scores), 3.0).unwrap();
        assert_eq!(p.negatives.len(), 10);
        assert_eq!(p.positives.len(), 2);
        assert_eq!(p.weights[10], 5.0);
    }

    #[test]
    fn crowded_scores_keep_thresholds_ordered() {
        let mut scores = vec![1.0; 9];
        scores.push(0.0);
        let p = partition_samples(&SaliencyMap::coarse(scores), 3.0).unwrap();
        assert!(p.tau1 < p.tau2);
        assert!(!p.positives.is_empty() && !p.negatives.is_empty());
    }

    fn strip_map() -> SuperpixelMap {
        // One row of regions: 0 (100 px) | 1 (tough, 50 px) | 2 (300 px)
        let mut labels = vec![0; 100];
        labels.extend(vec![1; 50]);
        labels.extend(vec![2; 300]);
        SuperpixelMap::from_labels(450, 1, labels).unwrap()
    }

    #[test]
    fn tough_label_is_pixel_weighted_neighbor_mean() {
        let map = strip_map();
        let coarse = SaliencyMap::coarse(vec![0.2, 0.5, 0.8]);
        let mut p = partition_samples(&coarse, 3.0).unwrap();
        p.toughs = vec![1];
        let labels = tough_labels(&p, &coarse, &map).unwrap();
        assert!((labels[0][0] - 0.65).abs() < 1e-12);
        assert!((labels[0][1] - 0.35).abs() < 1e-12);
    }

    #[test]
    fn tough_label_extremes() {
        let map = strip_map();
        for (edge, expected) in [(0.0, [0.0, 1.0]), (1.0, [1.0, 0.0])] {
            let coarse = SaliencyMap::coarse(vec![edge, 0.5, edge]);
            let mut p = partition_samples(&SaliencyMap::coarse(vec![0.0, 0.5, 1.0]), 3.0).unwrap();
            p.toughs = vec![1];
            assert_eq!(tough_labels(&p, &coarse, &map).unwrap(), vec![expected]);
        }
    }

    #[test]
    fn vanishing_lambda_gives_zero_projection() {
        let a = dmatrix![1.0, 0.0; 0.0, 1.0; 1.0, 1.0];
        let y = dmatrix![1.0, 0.0; 0.0, 1.0; 0.5, 0.5];
        let m = learn_projection(&a, &y, &[1.0, 1.0, 0.5], 1e-12).unwrap();
        assert!(m.projection.norm() <= 1e-6);
    }

    #[test]
    fn learn_projection_rejects_bad_inputs() {
        let a = dmatrix![1.0, 0.0; 0.0, 1.0];
        let y = dmatrix![1.0, 0.0; 0.0, 1.0];
        assert!(learn_projection(&a, &y, &[1.0], 1.0).is_err());
        assert!(learn_projection(&a, &y, &[1.0, -1.0], 1.0).is_err());
        assert!(learn_projection(&a, &y, &[1.0, 1.0], 0.0).is_err());
        let nan = dmatrix![f64::NAN, 0.0; 0.0, 1.0];
        assert!(learn_projection(&nan, &y, &[1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn binary_coarse_map_is_unchanged() {
        let map = SuperpixelMap::from_labels(4, 1, vec![0, 1, 2, 3]).unwrap();
        let features = FeatureMatrix::from_matrix(DMatrix::from_element(3, 4, 0.5)).unwrap();
        let coarse = SaliencyMap::coarse(vec![0.0, 1.0, 0.0, 0.0]);
        let refined = refine(&coarse, &features, &map, 10.0, 3.0).unwrap();
        assert_eq!(refined.scores, coarse.scores);
        assert_eq!(refined.stage, SaliencyStage::Refined);
        assert!(!refined.degenerate);
    }

    #[test]
    fn degenerate_coarse_map_falls_back() {
        let map = SuperpixelMap::from_labels(3, 1, vec![0, 1, 2]).unwrap();
        let features = FeatureMatrix::from_matrix(DMatrix::from_element(2, 3, 0.5)).unwrap();
        let coarse = SaliencyMap::coarse(vec![0.0; 3]);
        let refined = refine(&coarse, &features, &map, 10.0, 3.0).unwrap();
        assert!(refined.degenerate);
        assert_eq!(refined.scores, coarse.scores);
    }
}
