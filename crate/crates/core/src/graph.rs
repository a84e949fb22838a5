//! Un-normalized graph Laplacian over superpixels.
//!
//! Edges join spatially adjacent regions, and every pair of regions on the
//! image border. Weights are Gaussian in feature distance.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::superpixel::SuperpixelMap;

pub const DEFAULT_SIGMA_SQ: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    values: DMatrix<f64>,
    edge_weights: BTreeMap<(usize, usize), f64>,
}

impl LaplacianMatrix {
    /// `G = Deg - W` from explicit weighted edges over `n` nodes. Keys are
    /// normalized to `(min, max)`; self-loops are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = ((usize, usize), f64)>) -> Result<Self> {
        let mut edge_weights = BTreeMap::new();
        for ((i, j), w) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::invalid(format!("bad edge ({i}, {j}) for {n} nodes")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!("edge ({i}, {j}) has weight {w}")));
            }
            edge_weights.insert((i.min(j), i.max(j)), w);
        }
        let mut values = DMatrix::zeros(n, n);
        for (&(i, j), &w) in &edge_weights {
            values[(i, j)] -= w;
            values[(j, i)] -= w;
            values[(i, i)] += w;
            values[(j, j)] += w;
        }
        Ok(LaplacianMatrix { values, edge_weights })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn edge_weights(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.edge_weights
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }
}

/// Laplacian of the superpixel graph with `w_ij = exp(-|f_i - f_j|^2 / (2 sigma_sq))`.
pub fn build_laplacian(
    features: &FeatureMatrix,
    map: &SuperpixelMap,
    sigma_sq: f64,
) -> Result<LaplacianMatrix> {
    let n = map.region_count();
    if n < 2 {
        return Err(Error::invalid("graph needs at least two regions"));
    }
    if features.count() != n {
        return Err(Error::invalid(format!(
            "{} feature columns for {n} regions",
            features.count()
        )));
    }
    if !(sigma_sq > 0.0) {
        return Err(Error::invalid("sigma_sq must be positive"));
    }
    let f = features.values();
    let weight = |i: usize, j: usize| {
        let d2 = (f.column(i) - f.column(j)).norm_squared();
        ((i, j), (-d2 / (2.0 * sigma_sq)).exp())
    };

    let boundary = map.boundary_regions();
    let boundary_pairs = boundary
        .iter()
        .enumerate()
        .flat_map(|(a, &i)| boundary[a + 1..].iter().map(move |&j| (i, j)));
    let edges: Vec<_> = map
        .adjacent_pairs()
        .chain(boundary_pairs)
        .map(|(i, j)| weight(i, j))
        .collect();
    LaplacianMatrix::from_edges(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn identical_pair() {
        let map = SuperpixelMap::from_labels(2, 1, vec![0, 1]).unwrap();
        let f = FeatureMatrix::from_matrix(dmatrix![0.3, 0.3; 0.7, 0.7]).unwrap();
        let g = build_laplacian(&f, &map, DEFAULT_SIGMA_SQ).unwrap();
        assert_eq!(g.values(), &dmatrix![1.0, -1.0; -1.0, 1.0]);
        assert_eq!(g.edge_weights().get(&(0, 1)), Some(&1.0));
    }

    #[test]
    fn isolated_node_has_zero_row() {
        let g = LaplacianMatrix::from_edges(3, [((0, 1), 0.5)]).unwrap();
        assert!(g.values().row(2).iter().all(|&v| v == 0.0));
        assert!(g.values().column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_single_region() {
        let map = SuperpixelMap::from_labels(2, 1, vec![0, 0]).unwrap();
        let f = FeatureMatrix::from_matrix(dmatrix![0.3; 0.7]).unwrap();
        assert!(build_laplacian(&f, &map, DEFAULT_SIGMA_SQ).is_err());
    }

    #[test]
    fn boundary_regions_are_fully_connected() {
        // 3x3 grid of 2x2 cells: 8 border regions, 1 interior.
        let labels = (0..36).map(|p| (p / 6 / 2) * 3 + (p % 6) / 2).collect();
        let map = SuperpixelMap::from_labels(6, 6, labels).unwrap();
        let f = FeatureMatrix::from_matrix(DMatrix::zeros(2, 9)).unwrap();
        let g = build_laplacian(&f, &map, DEFAULT_SIGMA_SQ).unwrap();
        // 12 grid edges; border pairs C(8,2) = 28 of which 8 are grid edges.
        assert_eq!(g.edge_weights().len(), 12 + 28 - 8);
        assert!(g.edge_weights().contains_key(&(0, 8)));
        assert_eq!(g.values()[(4, 4)], 4.0);
    }
}
