//! Per-superpixel descriptors and the prior weighting applied before
//! decomposition.
//!
//! Each superpixel is described by 53 values: five color channels
//! (R, G, B, hue, saturation), twelve steered second-derivative-of-Gaussian
//! magnitudes (4 orientations x scales {1, 2, 4} px) and thirty-six Gabor
//! magnitudes (12 orientations x wavelengths {2, 4, 8} px). Every dimension
//! is min-max normalized over the superpixels of one image.

mod filters;
mod priors;

use image::RgbImage;
use nalgebra::DMatrix;

pub use filters::FilterBank;
pub use priors::{compute_priors, PriorVector, LOCATION_SIGMA, PRIOR_FLOOR};

use crate::color::{hue_saturation, luma};
use crate::error::{Error, Result};
use crate::superpixel::SuperpixelMap;
use filters::{Plane, GABOR_ORIENTATIONS, GABOR_WAVELENGTHS, STEERABLE_ORIENTATIONS, STEERABLE_SCALES};

pub const FEATURE_DIM: usize = 53;
pub const COLOR_DIMS: usize = 5;
const STEERABLE_OFFSET: usize = COLOR_DIMS;
const GABOR_OFFSET: usize = COLOR_DIMS + 12;
/// Dimensions whose spread across regions is below this are treated as
/// constant (filter round-off on flat images would otherwise be amplified).
const CONSTANT_RANGE: f64 = 1e-9;

/// D x N matrix whose column `j` describes superpixel `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    dim_names: Vec<String>,
    normalization: Vec<(f64, f64)>,
}

impl FeatureMatrix {
    /// Wrap an already-normalized matrix; used for synthetic inputs.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature matrix contains non-finite entries"));
        }
        let dim_names = (0..values.nrows()).map(|i| format!("f{i}")).collect();
        let normalization = vec![(0.0, 1.0); values.nrows()];
        Ok(FeatureMatrix {
            values,
            dim_names,
            normalization,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn count(&self) -> usize {
        self.values.ncols()
    }

    pub fn dim_names(&self) -> &[String] {
        &self.dim_names
    }

    /// Per-dimension `(min, max)` of the raw region means before scaling.
    pub fn normalization(&self) -> &[(f64, f64)] {
        &self.normalization
    }
}

pub fn dim_names() -> Vec<String> {
    let mut names: Vec<String> = ["red", "green", "blue", "hue", "saturation"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for &sigma in &STEERABLE_SCALES {
        for k in 0..STEERABLE_ORIENTATIONS {
            names.push(format!("steer_s{sigma}_o{}", k * 180 / STEERABLE_ORIENTATIONS));
        }
    }
    for &lambda in &GABOR_WAVELENGTHS {
        for k in 0..GABOR_ORIENTATIONS {
            names.push(format!("gabor_l{lambda}_o{}", k * 180 / GABOR_ORIENTATIONS));
        }
    }
    names
}

/// Extract the 53 x N normalized feature matrix using a fresh filter bank.
pub fn extract_features(image: &RgbImage, map: &SuperpixelMap) -> Result<FeatureMatrix> {
    extract_features_with(image, map, &FilterBank::new())
}

pub fn extract_features_with(
    image: &RgbImage,
    map: &SuperpixelMap,
    bank: &FilterBank,
) -> Result<FeatureMatrix> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w != map.width() || h != map.height() {
        return Err(Error::invalid(format!(
            "image is {w}x{h} but superpixel map is {}x{}",
            map.width(),
            map.height()
        )));
    }
    let n = map.region_count();
    let mut raw = DMatrix::<f64>::zeros(FEATURE_DIM, n);
    let inv_counts: Vec<f64> = (0..n).map(|r| 1.0 / map.pixel_count(r) as f64).collect();
    let labels = map.labels();

    let mut accumulate = |row: usize, plane: &[f64]| {
        let mut sums = vec![0.0; n];
        for (&l, &v) in labels.iter().zip(plane) {
            sums[l] += v;
        }
        for (j, s) in sums.into_iter().enumerate() {
            raw[(row, j)] = s * inv_counts[j];
        }
    };

    let mut channels = vec![vec![0.0; w * h]; COLOR_DIMS];
    let mut gray = vec![0.0; w * h];
    for (i, p) in image.pixels().enumerate() {
        let (hue, sat) = hue_saturation(p.0);
        channels[0][i] = p.0[0] as f64 / 255.0;
        channels[1][i] = p.0[1] as f64 / 255.0;
        channels[2][i] = p.0[2] as f64 / 255.0;
        channels[3][i] = hue;
        channels[4][i] = sat;
        gray[i] = luma(p.0);
    }
    for (c, plane) in channels.iter().enumerate() {
        accumulate(c, plane);
    }

    let plane = Plane {
        width: w,
        height: h,
        data: &gray,
    };
    filters::for_each_steerable_response(&plane, |i, resp| accumulate(STEERABLE_OFFSET + i, resp));
    bank.for_each_response(&plane, |i, resp| accumulate(GABOR_OFFSET + i, resp));

    let mut normalization = Vec::with_capacity(FEATURE_DIM);
    for mut row in raw.row_iter_mut() {
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        for v in row.iter_mut() {
            *v = if range > CONSTANT_RANGE { (*v - lo) / range } else { 0.0 };
        }
        normalization.push((lo, hi));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(0, "non-finite feature value"));
    }

    Ok(FeatureMatrix {
        values: raw,
        dim_names: dim_names(),
        normalization,
    })
}

/// Scale column `j` of the features by `priors[j]`.
pub fn apply_priors(features: &FeatureMatrix, priors: &PriorVector) -> Result<FeatureMatrix> {
    let p = priors.values();
    if p.len() != features.count() {
        return Err(Error::invalid(format!(
            "prior vector has {} entries for {} feature columns",
            p.len(),
            features.count()
        )));
    }
    let mut values = features.values.clone();
    for (j, mut col) in values.column_iter_mut().enumerate() {
        col *= p[j];
    }
    Ok(FeatureMatrix {
        values,
        dim_names: features.dim_names.clone(),
        normalization: features.normalization.clone(),
    })
}
