use image::RgbImage;

use super::FeatureMatrix;
use crate::color::rgb_to_lab;
use crate::error::{Error, Result};
use crate::superpixel::SuperpixelMap;

/// Width of the center-bias Gaussian, in image-normalized coordinates.
pub const LOCATION_SIGMA: f64 = 0.25;
/// Lower bound on the combined prior so no column is zeroed out.
pub const PRIOR_FLOOR: f64 = 0.1;
/// Bandwidth of the boundary color similarity, on CIELAB / 100.
const BACKGROUND_SIGMA_SQ: f64 = 0.05;

/// Per-superpixel top-down weight in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PriorVector {
    values: Vec<f64>,
    location: Vec<f64>,
    contrast: Vec<f64>,
    background: Vec<f64>,
}

impl PriorVector {
    /// A prior with no component breakdown.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("prior values must lie in [0, 1]"));
        }
        if !values.iter().any(|&v| v > 0.0) {
            return Err(Error::invalid("prior must have at least one positive entry"));
        }
        Ok(PriorVector {
            values,
            location: Vec::new(),
            contrast: Vec::new(),
            background: Vec::new(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn location(&self) -> &[f64] {
        &self.location
    }

    pub fn contrast(&self) -> &[f64] {
        &self.contrast
    }

    pub fn background(&self) -> &[f64] {
        &self.background
    }
}

/// Min-max scale into [0, 1]; a constant input maps to `constant`.
fn min_max(values: &[f64], constant: f64) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo > 0.0 {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![constant; values.len()]
    }
}

/// Location, contrast and background priors combined multiplicatively.
pub fn compute_priors(
    image: &RgbImage,
    map: &SuperpixelMap,
    features: &FeatureMatrix,
) -> Result<PriorVector> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w != map.width() || h != map.height() {
        return Err(Error::invalid("image and superpixel map sizes differ"));
    }
    let n = map.region_count();
    if features.count() != n {
        return Err(Error::invalid(format!(
            "{} feature columns for {n} regions",
            features.count()
        )));
    }

    let location: Vec<f64> = (0..n)
        .map(|r| {
            let (cx, cy) = map.centroid(r);
            let dx = cx / w as f64 - 0.5;
            let dy = cy / h as f64 - 0.5;
            (-(dx * dx + dy * dy) / (2.0 * LOCATION_SIGMA * LOCATION_SIGMA)).exp()
        })
        .collect();

    let f = features.values();
    let mean_distance: Vec<f64> = (0..n)
        .map(|j| {
            if n < 2 {
                return 0.0;
            }
            let total: f64 = (0..n)
                .filter(|&k| k != j)
                .map(|k| (f.column(j) - f.column(k)).norm())
                .sum();
            total / (n - 1) as f64
        })
        .collect();
    let contrast = min_max(&mean_distance, 0.0);

    let colors = region_lab_means(image, map);
    let boundary = map.boundary_regions();
    let similarity: Vec<f64> = colors
        .iter()
        .map(|c| {
            let total: f64 = boundary
                .iter()
                .map(|&b| {
                    let d2: f64 = (0..3).map(|i| (c[i] - colors[b][i]).powi(2)).sum();
                    (-d2 / (2.0 * BACKGROUND_SIGMA_SQ)).exp()
                })
                .sum();
            total / boundary.len() as f64
        })
        .collect();
    let background: Vec<f64> = min_max(&similarity, 0.0).iter().map(|s| 1.0 - s).collect();

    let product: Vec<f64> = (0..n)
        .map(|j| location[j] * contrast[j] * background[j])
        .collect();
    let values = min_max(&product, 1.0)
        .into_iter()
        .map(|v| v.max(PRIOR_FLOOR))
        .collect();

    Ok(PriorVector {
        values,
        location,
        contrast,
        background,
    })
}

/// Mean CIELAB color per region, scaled by 1/100.
fn region_lab_means(image: &RgbImage, map: &SuperpixelMap) -> Vec<[f64; 3]> {
    let mut sums = vec![[0.0; 3]; map.region_count()];
    for (p, px) in image.pixels().enumerate() {
        let lab = rgb_to_lab(px.0);
        let s = &mut sums[map.labels()[p]];
        for i in 0..3 {
            s[i] += lab[i] / 100.0;
        }
    }
    sums.iter()
        .enumerate()
        .map(|(r, s)| {
            let n = map.pixel_count(r) as f64;
            [s[0] / n, s[1] / n, s[2] / n]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::extract_features;
    use crate::superpixel::segment;
    use image::Rgb;

    #[test]
    fn center_region_has_unit_location_prior() {
        // 3x3 grid of 10x10 cells: region 4 is centered exactly.
        let labels = (0..900).map(|p| (p / 30 / 10) * 3 + (p % 30) / 10).collect();
        let map = SuperpixelMap::from_labels(30, 30, labels).unwrap();
        let img = RgbImage::from_pixel(30, 30, Rgb([50, 60, 70]));
        let f = extract_features(&img, &map).unwrap();
        let p = compute_priors(&img, &map, &f).unwrap();
        assert!((p.location()[4] - 1.0).abs() < 1e-15);
        assert!(p.location()[0] < 1.0);
        // Constant image: contrast and background carry no signal.
        assert!(p.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn centered_disk_outranks_corners() {
        let img = RgbImage::from_fn(96, 96, |x, y| {
            let (dx, dy) = (x as f64 - 48.0, y as f64 - 48.0);
            if dx * dx + dy * dy < 18.0 * 18.0 {
                Rgb([240, 230, 60])
            } else {
                Rgb([30, 40, 50])
            }
        });
        let map = segment(&img, 36).unwrap();
        let f = extract_features(&img, &map).unwrap();
        let p = compute_priors(&img, &map, &f).unwrap();
        let center = map.label_at(48, 48);
        for (x, y) in [(1, 1), (94, 1), (1, 94), (94, 94)] {
            let corner = map.label_at(x, y);
            assert!(
                p.values()[center] > p.values()[corner],
                "center {} corner {}",
                p.values()[center],
                p.values()[corner]
            );
        }
        assert!(p.values().iter().all(|&v| (PRIOR_FLOOR..=1.0).contains(&v)));
    }
}
