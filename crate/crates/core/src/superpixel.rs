//! SLIC over-segmentation and the region adjacency structure built on top of it.

use std::collections::{BTreeSet, VecDeque};

use image::RgbImage;

use crate::color::rgb_to_lab;
use crate::error::{Error, Result};

/// Tunables for SLIC. Defaults are the values from the original SLIC
/// publication (compactness 10 in CIELAB, 10 iterations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicParams {
    pub compactness: f64,
    pub iterations: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        SlicParams {
            compactness: 10.0,
            iterations: 10,
        }
    }
}

/// A partition of an image into 4-connected regions.
///
/// Immutable after construction. Pixels are addressed row-major, i.e. the
/// pixel at `(x, y)` has index `y * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    labels: Vec<usize>,
    region_pixels: Vec<Vec<usize>>,
    adjacency: Vec<Vec<usize>>,
    boundary_regions: Vec<usize>,
}

impl SuperpixelMap {
    /// Build a map from a dense label field, validating the partition
    /// invariants (labels dense in `0..count`, every region non-empty and
    /// 4-connected).
    pub fn from_labels(width: usize, height: usize, labels: Vec<usize>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("label field must be non-empty"));
        }
        if labels.len() != width * height {
            return Err(Error::invalid(format!(
                "label field has {} entries, expected {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        let map = Self::build(width, height, labels);
        if map.region_pixels.iter().any(Vec::is_empty) {
            return Err(Error::invalid("labels are not dense: some region is empty"));
        }
        for region in 0..map.region_count() {
            if !map.is_connected(region) {
                return Err(Error::invalid(format!(
                    "region {region} is not 4-connected"
                )));
            }
        }
        Ok(map)
    }

    // Assumes a well-formed label field; callers inside the crate guarantee it.
    fn build(width: usize, height: usize, labels: Vec<usize>) -> Self {
        let count = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut region_pixels = vec![Vec::new(); count];
        for (idx, &l) in labels.iter().enumerate() {
            region_pixels[l].push(idx);
        }

        let mut adjacency = vec![BTreeSet::new(); count];
        for y in 0..height {
            for x in 0..width {
                let a = labels[y * width + x];
                if x + 1 < width {
                    let b = labels[y * width + x + 1];
                    if a != b {
                        adjacency[a].insert(b);
                        adjacency[b].insert(a);
                    }
                }
                if y + 1 < height {
                    let b = labels[(y + 1) * width + x];
                    if a != b {
                        adjacency[a].insert(b);
                        adjacency[b].insert(a);
                    }
                }
            }
        }

        let mut boundary = BTreeSet::new();
        for x in 0..width {
            boundary.insert(labels[x]);
            boundary.insert(labels[(height - 1) * width + x]);
        }
        for y in 0..height {
            boundary.insert(labels[y * width]);
            boundary.insert(labels[y * width + width - 1]);
        }

        SuperpixelMap {
            width,
            height,
            labels,
            region_pixels,
            adjacency: adjacency.into_iter().map(|s| s.into_iter().collect()).collect(),
            boundary_regions: boundary.into_iter().collect(),
        }
    }

    fn is_connected(&self, region: usize) -> bool {
        let pixels = &self.region_pixels[region];
        let mut seen = vec![false; self.labels.len()];
        let mut queue = VecDeque::from([pixels[0]]);
        seen[pixels[0]] = true;
        let mut reached = 0;
        while let Some(p) = queue.pop_front() {
            reached += 1;
            for q in neighbors4(p, self.width, self.height) {
                if !seen[q] && self.labels[q] == region {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        reached == pixels.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn region_count(&self) -> usize {
        self.region_pixels.len()
    }

    /// Row-major label field.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_at(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x]
    }

    /// Row-major pixel indices belonging to `region`.
    pub fn pixels(&self, region: usize) -> &[usize] {
        &self.region_pixels[region]
    }

    pub fn pixel_count(&self, region: usize) -> usize {
        self.region_pixels[region].len()
    }

    /// Regions touching the image border, ascending.
    pub fn boundary_regions(&self) -> &[usize] {
        &self.boundary_regions
    }

    pub fn is_boundary(&self, region: usize) -> bool {
        self.boundary_regions.binary_search(&region).is_ok()
    }

    /// Regions sharing at least one 4-connected pixel boundary with `region`,
    /// ascending.
    pub fn adjacency_of(&self, region: usize) -> Result<&[usize]> {
        self.adjacency
            .get(region)
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "region {region} out of range (count {})",
                    self.region_count()
                ))
            })
    }

    /// Iterator over adjacent pairs `(i, j)` with `i < j`.
    pub fn adjacent_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Mean pixel-center position `(x, y)` of `region`, in pixel units.
    pub fn centroid(&self, region: usize) -> (f64, f64) {
        let pixels = &self.region_pixels[region];
        let (mut sx, mut sy) = (0.0, 0.0);
        for &p in pixels {
            sx += (p % self.width) as f64 + 0.5;
            sy += (p / self.width) as f64 + 0.5;
        }
        let n = pixels.len() as f64;
        (sx / n, sy / n)
    }
}

fn neighbors4(p: usize, width: usize, height: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (p % width, p / width);
    let left = (x > 0).then(|| p - 1);
    let right = (x + 1 < width).then(|| p + 1);
    let up = (y > 0).then(|| p - width);
    let down = (y + 1 < height).then(|| p + width);
    [left, right, up, down].into_iter().flatten()
}

/// Over-segment `image` into roughly `target_regions` superpixels with SLIC.
pub fn segment(image: &RgbImage, target_regions: usize) -> Result<SuperpixelMap> {
    segment_with(image, target_regions, &SlicParams::default())
}

pub fn segment_with(
    image: &RgbImage,
    target_regions: usize,
    params: &SlicParams,
) -> Result<SuperpixelMap> {
    let (width, height) = (image.width() as usize, image.height() as usize);
    let n_pixels = width * height;
    if n_pixels <= 1 {
        return Err(Error::invalid("image must contain more than one pixel"));
    }
    if target_regions < 2 {
        return Err(Error::invalid("target_regions must be at least 2"));
    }
    if target_regions > n_pixels {
        return Err(Error::invalid(format!(
            "target_regions {target_regions} exceeds pixel count {n_pixels}"
        )));
    }

    let lab: Vec<[f64; 3]> = image.pixels().map(|p| rgb_to_lab(p.0)).collect();
    let labels = slic_cluster(&lab, width, height, target_regions, params);
    let labels = enforce_connectivity(&labels, width, height, target_regions);
    Ok(SuperpixelMap::build(width, height, labels))
}

#[derive(Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

fn slic_cluster(
    lab: &[[f64; 3]],
    width: usize,
    height: usize,
    target: usize,
    params: &SlicParams,
) -> Vec<usize> {
    let step = ((width * height) as f64 / target as f64).sqrt();
    let nx = ((width as f64 / step).round() as usize).clamp(1, width);
    let ny = ((height as f64 / step).round() as usize).clamp(1, height);
    let (dx, dy) = (width as f64 / nx as f64, height as f64 / ny as f64);

    let gradient = |x: usize, y: usize| -> f64 {
        let at = |x: usize, y: usize| lab[y * width + x];
        let d2 = |a: [f64; 3], b: [f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
        let gx = d2(at((x + 1).min(width - 1), y), at(x.saturating_sub(1), y));
        let gy = d2(at(x, (y + 1).min(height - 1)), at(x, y.saturating_sub(1)));
        gx + gy
    };

    let mut labels = vec![0usize; width * height];
    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = (((i as f64 + 0.5) * dx) as usize).min(width - 1);
            let cy = (((j as f64 + 0.5) * dy) as usize).min(height - 1);
            // Move the seed to the lowest-gradient position in its 3x3 neighborhood.
            let (mut bx, mut by, mut best) = (cx, cy, gradient(cx, cy));
            for y in cy.saturating_sub(1)..=(cy + 1).min(height - 1) {
                for x in cx.saturating_sub(1)..=(cx + 1).min(width - 1) {
                    let g = gradient(x, y);
                    if g < best {
                        (bx, by, best) = (x, y, g);
                    }
                }
            }
            centers.push(Center {
                lab: lab[by * width + bx],
                x: bx as f64,
                y: by as f64,
            });
            // Initial assignment: the grid cell, so no pixel is ever unlabeled.
            let x0 = (i as f64 * dx) as usize;
            let x1 = (((i + 1) as f64 * dx) as usize).min(width);
            let y0 = (j as f64 * dy) as usize;
            let y1 = (((j + 1) as f64 * dy) as usize).min(height);
            let k = centers.len() - 1;
            for y in y0..y1 {
                for x in x0..x1 {
                    labels[y * width + x] = k;
                }
            }
        }
    }

    let window = dx.max(dy).ceil() as isize;
    let spatial_weight = (params.compactness / step).powi(2);
    let mut dist = vec![f64::INFINITY; width * height];
    for _ in 0..params.iterations {
        dist.fill(f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.x.round() as isize, c.y.round() as isize);
            let x0 = (cx - window).max(0) as usize;
            let x1 = ((cx + window) as usize).min(width - 1);
            let y0 = (cy - window).max(0) as usize;
            let y1 = ((cy + window) as usize).min(height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = y * width + x;
                    let l = lab[p];
                    let dc = (l[0] - c.lab[0]).powi(2)
                        + (l[1] - c.lab[1]).powi(2)
                        + (l[2] - c.lab[2]).powi(2);
                    let ds = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                    let d = dc + ds * spatial_weight;
                    if d < dist[p] {
                        dist[p] = d;
                        labels[p] = k;
                    }
                }
            }
        }

        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for (p, &k) in labels.iter().enumerate() {
            let s = &mut sums[k];
            s[0] += lab[p][0];
            s[1] += lab[p][1];
            s[2] += lab[p][2];
            s[3] += (p % width) as f64;
            s[4] += (p / width) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                *c = Center {
                    lab: [s[0] / s[5], s[1] / s[5], s[2] / s[5]],
                    x: s[3] / s[5],
                    y: s[4] / s[5],
                };
            }
        }
    }
    labels
}

/// Relabel into 4-connected components. A component survives as a region if
/// it is the largest piece of its cluster or at least a quarter of the
/// nominal superpixel size; the remaining orphans are absorbed by the nearest
/// surviving region (breadth-first growth, so regions stay connected).
fn enforce_connectivity(labels: &[usize], width: usize, height: usize, target: usize) -> Vec<usize> {
    const UNSET: usize = usize::MAX;
    let min_size = ((width * height) / target / 4).max(1);

    let mut component_of = vec![UNSET; labels.len()];
    let mut sizes: Vec<usize> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if component_of[start] != UNSET {
            continue;
        }
        let id = sizes.len();
        component_of[start] = id;
        stack.push(start);
        let mut size = 0;
        while let Some(p) = stack.pop() {
            size += 1;
            for q in neighbors4(p, width, height) {
                if component_of[q] == UNSET && labels[q] == labels[start] {
                    component_of[q] = id;
                    stack.push(q);
                }
            }
        }
        sizes.push(size);
    }

    // Largest component per cluster; the first one wins ties.
    let cluster_count = labels.iter().max().map_or(0, |m| m + 1);
    let mut largest = vec![UNSET; cluster_count];
    let mut first_pixel = vec![UNSET; sizes.len()];
    for (p, &c) in component_of.iter().enumerate() {
        if first_pixel[c] == UNSET {
            first_pixel[c] = p;
            let k = labels[p];
            if largest[k] == UNSET || sizes[c] > sizes[largest[k]] {
                largest[k] = c;
            }
        }
    }

    let mut region_of_component = vec![UNSET; sizes.len()];
    let mut next = 0;
    for (c, &p) in first_pixel.iter().enumerate() {
        if sizes[c] >= min_size || largest[labels[p]] == c {
            region_of_component[c] = next;
            next += 1;
        }
    }

    let mut out: Vec<usize> = component_of.iter().map(|&c| region_of_component[c]).collect();
    let mut queue: VecDeque<usize> = (0..out.len()).filter(|&p| out[p] != UNSET).collect();
    while let Some(p) = queue.pop_front() {
        for q in neighbors4(p, width, height) {
            if out[q] == UNSET {
                out[q] = out[p];
                queue.push_back(q);
            }
        }
    }
    out
}
