#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use saliency_core::LaplacianMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

/// Rank-`rank` plus sparse instance: `(L0, S0)` with `density` of the
/// entries of `S0` set to +-1.
pub fn rpca_instance(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    rank: usize,
    density: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let low = gaussian(rng, rows, rank) * gaussian(rng, rank, cols);
    let sparse = DMatrix::from_fn(rows, cols, |_, _| {
        if rng.random_bool(density) {
            if rng.random_bool(0.5) { 1.0 } else { -1.0 }
        } else {
            0.0
        }
    });
    (low, sparse)
}

/// Random weighted graph: a path through all nodes (so it is connected)
/// plus extra random edges.
pub fn random_laplacian(rng: &mut ChaCha8Rng, n: usize, extra_edges: usize) -> LaplacianMatrix {
    let mut edges: Vec<((usize, usize), f64)> =
        (1..n).map(|i| ((i - 1, i), rng.random::<f64>())).collect();
    for _ in 0..extra_edges {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            edges.push(((i, j), rng.random::<f64>()));
        }
    }
    LaplacianMatrix::from_edges(n, edges).unwrap()
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Gradient of `1/2 ||M||^2 + lambda/2 sum_i w_i ||a_i M - y_i||^2`.
pub fn ridge_gradient(
    a: &DMatrix<f64>,
    y: &DMatrix<f64>,
    w: &[f64],
    lambda: f64,
    m: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut r = a * m - y;
    for (i, mut row) in r.row_iter_mut().enumerate() {
        row *= w[i];
    }
    m + a.transpose() * r * lambda
}

/// Matrix-free conjugate gradient on the ridge objective above, never forming
/// or factoring the normal matrix.
pub fn ridge_by_cg(a: &DMatrix<f64>, y: &DMatrix<f64>, w: &[f64], lambda: f64) -> DMatrix<f64> {
    let d = a.ncols();
    let mut m = DMatrix::zeros(d, y.ncols());
    // Residual of the stationarity condition H m = b is minus the gradient.
    let mut r = -ridge_gradient(a, y, w, lambda, &m);
    let mut p = r.clone();
    let zero = DMatrix::zeros(a.nrows(), y.ncols());
    let apply = |v: &DMatrix<f64>| ridge_gradient(a, &zero, w, lambda, v);
    let mut rr = r.norm_squared();
    for _ in 0..10 * d * y.ncols() {
        if rr.sqrt() < 1e-15 {
            break;
        }
        let hp = apply(&p);
        let step = rr / p.component_mul(&hp).sum();
        m += &p * step;
        r -= hp * step;
        let next = r.norm_squared();
        p = &r + p * (next / rr);
        rr = next;
    }
    m
}

/// Weighted F-measure computed pixel by pixel with brute-force nearest
/// foreground search. Only meaningful where the error on the foreground is
/// constant, so nearest-pixel ties cannot change the result.
pub fn weighted_f_brute(pred: &[f64], gt: &[bool], w: usize, h: usize) -> f64 {
    let n = w * h;
    let err: Vec<f64> = (0..n).map(|i| (if gt[i] { 1.0 } else { 0.0 } - pred[i]).abs()).collect();
    let fg: Vec<usize> = (0..n).filter(|&i| gt[i]).collect();
    let mut dist = vec![0.0; n];
    let mut et = err.clone();
    for i in 0..n {
        if gt[i] {
            continue;
        }
        let (x, y) = ((i % w) as f64, (i / w) as f64);
        let (best, d2) = fg
            .iter()
            .map(|&j| (j, ((j % w) as f64 - x).powi(2) + ((j / w) as f64 - y).powi(2)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        dist[i] = d2.sqrt();
        et[i] = err[best];
    }
    let mut kernel = [[0.0; 7]; 7];
    for (dy, row) in kernel.iter_mut().enumerate() {
        for (dx, k) in row.iter_mut().enumerate() {
            let (u, v) = (dx as f64 - 3.0, dy as f64 - 3.0);
            *k = (-(u * u + v * v) / 50.0).exp();
        }
    }
    let total: f64 = kernel.iter().flatten().sum();
    let mut ew = vec![0.0; n];
    for i in 0..n {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        let mut ea = 0.0;
        for dy in -3..=3i64 {
            for dx in -3..=3i64 {
                let (sx, sy) = (x + dx, y + dy);
                if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                    ea += kernel[(dy + 3) as usize][(dx + 3) as usize] / total * et[sy as usize * w + sx as usize];
                }
            }
        }
        let e = if gt[i] && ea < err[i] { ea } else { err[i] };
        let importance = if gt[i] { 1.0 } else { 2.0 - (0.5f64.ln() / 5.0 * dist[i]).exp() };
        ew[i] = e * importance;
    }
    let eps = f64::EPSILON;
    let fg_err: f64 = (0..n).filter(|&i| gt[i]).map(|i| ew[i]).sum();
    let tp = fg.len() as f64 - fg_err;
    let fp: f64 = (0..n).filter(|&i| !gt[i]).map(|i| ew[i]).sum();
    let recall = 1.0 - fg_err / fg.len() as f64;
    let precision = tp / (eps + tp + fp);
    (1.0 + 0.3) * recall * precision / (eps + recall + 0.3 * precision)
}

/// `side x side` square mask in a `w x h` frame.
pub fn square(w: usize, h: usize, x0: usize, y0: usize, side: usize) -> Vec<bool> {
    (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)
        })
        .collect()
}
