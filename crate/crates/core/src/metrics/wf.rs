//! Weighted F-measure: precision and recall computed from an error map in
//! which errors are spread to dependent neighbors by a Gaussian and false
//! positives far from the object are amplified.

use super::{check_dims, BinaryMask, ScoreMap};
use crate::error::Result;

pub const BETA_SQ: f64 = 0.3;
/// Dependency kernel: 7x7 Gaussian with standard deviation 5 px.
const KERNEL_RADIUS: isize = 3;
const KERNEL_SIGMA: f64 = 5.0;
/// Importance of a false positive grows as `2 - exp(ln(0.5)/5 * distance)`.
const IMPORTANCE_DECAY: f64 = -std::f64::consts::LN_2 / 5.0;

pub fn weighted_f(pred: &ScoreMap, gt: &BinaryMask) -> Result<f64> {
    check_dims(pred.width, pred.height, gt)?;
    let (w, h) = (gt.width, gt.height);
    let fg = &gt.data;
    let fg_count = fg.iter().filter(|&&b| b).count();
    if fg_count == 0 {
        let empty = pred.data.iter().all(|&v| v == 0.0);
        return Ok(if empty { 1.0 } else { 0.0 });
    }

    let error: Vec<f64> = pred
        .data
        .iter()
        .zip(fg)
        .map(|(&p, &g)| (p - if g { 1.0 } else { 0.0 }).abs())
        .collect();
    let (dist, nearest) = distance_transform(fg, w, h);

    // Background pixels take the error of their nearest foreground pixel.
    let spread: Vec<f64> = (0..w * h)
        .map(|i| if fg[i] { error[i] } else { error[nearest[i]] })
        .collect();
    let smoothed = gaussian_filter(&spread, w, h);

    let mut weighted_fg = 0.0;
    let mut weighted_bg = 0.0;
    for i in 0..w * h {
        if fg[i] {
            weighted_fg += error[i].min(smoothed[i]);
        } else {
            weighted_bg += error[i] * (2.0 - (IMPORTANCE_DECAY * dist[i]).exp());
        }
    }

    let eps = f64::EPSILON;
    let tp = fg_count as f64 - weighted_fg;
    let recall = 1.0 - weighted_fg / fg_count as f64;
    let precision = tp / (eps + tp + weighted_bg);
    let score = (1.0 + BETA_SQ) * recall * precision / (eps + recall + BETA_SQ * precision);
    Ok(score.clamp(0.0, 1.0))
}

/// `fspecial('gaussian', 7, 5)` applied with zero padding ("same" size).
fn gaussian_filter(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let side = (2 * KERNEL_RADIUS + 1) as usize;
    let mut kernel = Vec::with_capacity(side * side);
    for y in -KERNEL_RADIUS..=KERNEL_RADIUS {
        for x in -KERNEL_RADIUS..=KERNEL_RADIUS {
            kernel.push((-((x * x + y * y) as f64) / (2.0 * KERNEL_SIGMA * KERNEL_SIGMA)).exp());
        }
    }
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for ky in -KERNEL_RADIUS..=KERNEL_RADIUS {
                let sy = y + ky;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in -KERNEL_RADIUS..=KERNEL_RADIUS {
                    let sx = x + kx;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let k = kernel[((ky + KERNEL_RADIUS) as usize) * side + (kx + KERNEL_RADIUS) as usize];
                    acc += k * src[sy as usize * w + sx as usize];
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

/// Exact Euclidean distance to the nearest `true` pixel together with that
/// pixel's index (separable lower-envelope algorithm). Requires at least one
/// `true` pixel.
pub(crate) fn distance_transform(mask: &[bool], w: usize, h: usize) -> (Vec<f64>, Vec<usize>) {
    const NONE: usize = usize::MAX;
    // Column pass: squared vertical distance to the nearest foreground row.
    let mut col_d2 = vec![f64::INFINITY; w * h];
    let mut col_row = vec![NONE; w * h];
    for x in 0..w {
        let mut last = NONE;
        for y in 0..h {
            if mask[y * w + x] {
                last = y;
            }
            if last != NONE {
                col_row[y * w + x] = last;
                col_d2[y * w + x] = ((y - last) * (y - last)) as f64;
            }
        }
        let mut last = NONE;
        for y in (0..h).rev() {
            if mask[y * w + x] {
                last = y;
            }
            if last != NONE {
                let d2 = ((last - y) * (last - y)) as f64;
                if d2 < col_d2[y * w + x] {
                    col_d2[y * w + x] = d2;
                    col_row[y * w + x] = last;
                }
            }
        }
    }

    // Row pass: lower envelope of parabolas rooted at finite column values.
    let mut dist = vec![0.0; w * h];
    let mut nearest = vec![0; w * h];
    let mut sites: Vec<usize> = Vec::with_capacity(w);
    let mut bounds: Vec<f64> = Vec::with_capacity(w + 1);
    for y in 0..h {
        let f = |x: usize| col_d2[y * w + x];
        sites.clear();
        bounds.clear();
        for q in (0..w).filter(|&q| f(q).is_finite()) {
            loop {
                match sites.last() {
                    None => {
                        sites.push(q);
                        bounds.push(f64::NEG_INFINITY);
                        break;
                    }
                    Some(&v) => {
                        let s = ((f(q) + (q * q) as f64) - (f(v) + (v * v) as f64))
                            / (2.0 * q as f64 - 2.0 * v as f64);
                        if s <= *bounds.last().expect("bounds track sites") {
                            sites.pop();
                            bounds.pop();
                        } else {
                            sites.push(q);
                            bounds.push(s);
                            break;
                        }
                    }
                }
            }
        }
        let mut k = 0;
        for x in 0..w {
            while k + 1 < sites.len() && bounds[k + 1] < x as f64 {
                k += 1;
            }
            let v = sites[k];
            let dx = x as f64 - v as f64;
            dist[y * w + x] = (dx * dx + f(v)).sqrt();
            nearest[y * w + x] = col_row[y * w + v] * w + v;
        }
    }
    (dist, nearest)
}
