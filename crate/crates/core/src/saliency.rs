//! Per-superpixel saliency scores and their pixel rendering.

use image::{GrayImage, Luma};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::superpixel::SuperpixelMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaliencyStage {
    Coarse,
    Refined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub scores: Vec<f64>,
    pub stage: SaliencyStage,
    /// Set when refinement fell back to the coarse scores.
    pub degenerate: bool,
}

impl SaliencyMap {
    pub fn coarse(scores: Vec<f64>) -> Self {
        SaliencyMap {
            scores,
            stage: SaliencyStage::Coarse,
            degenerate: false,
        }
    }

    pub fn render(&self, map: &SuperpixelMap) -> Result<GrayImage> {
        render(&self.scores, map)
    }
}

/// Min-max scale to [0, 1]; all-equal inputs map to all zeros.
pub fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo > 0.0 {
        raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

/// Coarse saliency: the l1 norm of each column of the sparse component,
/// min-max normalized.
pub fn saliency_from_sparse(sparse: &DMatrix<f64>) -> SaliencyMap {
    let raw: Vec<f64> = sparse
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum())
        .collect();
    SaliencyMap::coarse(normalize_scores(&raw))
}

/// Paint each region with `round(255 * score)`.
pub fn render(scores: &[f64], map: &SuperpixelMap) -> Result<GrayImage> {
    if scores.len() != map.region_count() {
        return Err(Error::invalid(format!(
            "{} scores for {} regions",
            scores.len(),
            map.region_count()
        )));
    }
    let levels: Vec<u8> = scores
        .iter()
        .map(|s| (255.0 * s.clamp(0.0, 1.0)).round() as u8)
        .collect();
    let w = map.width();
    Ok(GrayImage::from_fn(w as u32, map.height() as u32, |x, y| {
        Luma([levels[map.labels()[y as usize * w + x as usize]]])
    }))
}
