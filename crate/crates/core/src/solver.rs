//! ADMM solver for the Laplacian-regularized low-rank + sparse decomposition
//!
//! ```text
//! min ||L||_* + alpha ||S||_1 + gamma tr(S G S^T)   s.t.  F = L + S
//! ```
//!
//! split with an auxiliary `Z = S` so that every block update has a closed
//! form. `gamma = 0` reduces to plain robust PCA.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::LaplacianMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Weight of the l1 sparsity term.
    pub alpha: f64,
    /// Weight of the Laplacian smoothness term.
    pub gamma: f64,
    pub mu0: f64,
    pub mu_max: f64,
    /// Penalty growth factor per iteration.
    pub rho: f64,
    /// Relative feasibility tolerance.
    pub eps1: f64,
    /// Absolute step tolerance on L and S.
    pub eps2: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 0.35,
            gamma: 1.1,
            mu0: 0.1,
            mu_max: 1e10,
            rho: 1.1,
            eps1: 1e-6,
            eps2: 1e-6,
            max_iters: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.alpha > 0.0, "alpha must be > 0"),
            (self.gamma >= 0.0, "gamma must be >= 0"),
            (self.mu0 > 0.0, "mu0 must be > 0"),
            (self.mu_max >= self.mu0, "mu_max must be >= mu0"),
            (self.rho > 1.0, "rho must be > 1"),
            (self.eps1 > 0.0 && self.eps2 > 0.0, "tolerances must be > 0"),
            (self.max_iters > 0, "max_iters must be > 0"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::invalid(*msg)),
            None => Ok(()),
        }
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `||F - L - S||_F / ||F||_F`
    pub residual: f64,
    pub step_l: f64,
    pub step_s: f64,
    pub objective: f64,
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    pub auxiliary: DMatrix<f64>,
    pub dual_feasibility: DMatrix<f64>,
    pub dual_split: DMatrix<f64>,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
}

impl DecompositionResult {
    pub fn final_record(&self) -> Option<&IterationRecord> {
        self.trace.last()
    }

    /// Write the trace as CSV: `iteration,residual,step_l,step_s,objective,mu`.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,residual,step_l,step_s,objective,mu")?;
        for r in &self.trace {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e}",
                r.iteration, r.residual, r.step_l, r.step_s, r.objective, r.mu
            )?;
        }
        Ok(())
    }
}

/// Elementwise shrinkage toward zero by `eps`.
pub fn shrink(x: f64, eps: f64) -> f64 {
    if x > eps {
        x - eps
    } else if x < -eps {
        x + eps
    } else {
        0.0
    }
}

pub fn soft_threshold(x: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    x.map(|v| shrink(v, eps))
}

/// Singular value thresholding, returning the result and its nuclear norm.
fn svt_with_norm(m: DMatrix<f64>, tau: f64) -> Option<(DMatrix<f64>, f64)> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Some((m, 0.0));
    }
    let svd = m.try_svd(true, true, f64::EPSILON, 0)?;
    let u = svd.u?;
    let v_t = svd.v_t?;
    let mut nuclear = 0.0;
    let mut result = DMatrix::zeros(rows, cols);
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        let shrunk = sigma - tau;
        if shrunk > 0.0 {
            nuclear += shrunk;
            result.ger(shrunk, &u.column(k), &v_t.row(k).transpose(), 1.0);
        }
    }
    Some((result, nuclear))
}

/// `U Γ_tau[Σ] V^T` for `m = U Σ V^T`.
pub fn svt(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if tau < 0.0 {
        return Err(Error::invalid("svt threshold must be non-negative"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(0, "svt input is not finite"));
    }
    svt_with_norm(m.clone(), tau)
        .map(|(r, _)| r)
        .ok_or_else(|| Error::numeric(0, "SVD did not converge"))
}

/// Sparse-block update: the exact minimizer over `S` of the augmented
/// Lagrangian, `Γ_{alpha/(2mu)}[ ((F - L + Y1/mu) + (Z - Y2/mu)) / 2 ]`.
pub fn update_s(
    f: &DMatrix<f64>,
    l: &DMatrix<f64>,
    z: &DMatrix<f64>,
    y1: &DMatrix<f64>,
    y2: &DMatrix<f64>,
    alpha: f64,
    mu: f64,
) -> DMatrix<f64> {
    let eps = alpha / (2.0 * mu);
    let inv_mu = 1.0 / mu;
    DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| {
        let a = f[(i, j)] - l[(i, j)] + y1[(i, j)] * inv_mu;
        let b = z[(i, j)] - y2[(i, j)] * inv_mu;
        shrink(0.5 * (a + b), eps)
    })
}

/// Auxiliary-block update: solve `Z (mu I + 2 gamma G) = mu S + Y2` by
/// Cholesky factorization of the (symmetric positive definite) system.
pub fn update_z(
    s: &DMatrix<f64>,
    y2: &DMatrix<f64>,
    mu: f64,
    gamma: f64,
    g: &LaplacianMatrix,
) -> Result<DMatrix<f64>> {
    if mu <= 0.0 {
        return Err(Error::invalid("mu must be positive"));
    }
    let rhs = s * mu + y2;
    if gamma == 0.0 {
        return Ok(rhs / mu);
    }
    let n = s.ncols();
    if g.size() != n {
        return Err(Error::invalid(format!("Laplacian is {0}x{0} for {n} columns", g.size())));
    }
    let system = DMatrix::identity(n, n) * mu + g.values() * (2.0 * gamma);
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::numeric(0, "Z-system is not positive definite"))?;
    // Z A = B with A symmetric  <=>  A Z^T = B^T
    Ok(chol.solve(&rhs.transpose()).transpose())
}

/// Objective value `||L||_* + alpha ||S||_1 + gamma tr(S G S^T)`.
pub fn objective(
    l: &DMatrix<f64>,
    s: &DMatrix<f64>,
    g: &LaplacianMatrix,
    alpha: f64,
    gamma: f64,
) -> f64 {
    let nuclear: f64 = l.singular_values().iter().sum();
    nuclear + alpha * l1(s) + gamma * laplacian_energy(s, g.values())
}

fn l1(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

fn laplacian_energy(s: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    (s * g).component_mul(s).sum()
}

/// Spectral factorization of `G`, reused across iterations: with
/// `G = Q Λ Q^T`, `(mu I + 2 gamma G)^{-1} = Q diag(1 / (mu + 2 gamma λ)) Q^T`.
struct SpectralLaplacian {
    basis: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl SpectralLaplacian {
    fn new(g: &LaplacianMatrix) -> Self {
        let eig = SymmetricEigen::new(g.values().clone());
        SpectralLaplacian {
            basis: eig.eigenvectors,
            // Round-off can leave tiny negative eigenvalues on a PSD matrix.
            eigenvalues: eig.eigenvalues.map(|v| v.max(0.0)),
        }
    }

    fn solve(&self, rhs: &DMatrix<f64>, mu: f64, gamma: f64) -> DMatrix<f64> {
        let mut projected = rhs * &self.basis;
        for (k, mut col) in projected.column_iter_mut().enumerate() {
            col /= mu + 2.0 * gamma * self.eigenvalues[k];
        }
        projected * self.basis.transpose()
    }

    fn energy(&self, s: &DMatrix<f64>) -> f64 {
        let projected = s * &self.basis;
        projected
            .column_iter()
            .zip(self.eigenvalues.iter())
            .map(|(c, &lambda)| lambda * c.norm_squared())
            .sum()
    }
}

/// Decompose the (prior-weighted) feature matrix.
pub fn decompose(
    features: &FeatureMatrix,
    g: &LaplacianMatrix,
    config: &SolverConfig,
) -> Result<DecompositionResult> {
    decompose_matrix(features.values(), g, config)
}

pub fn decompose_matrix(
    f: &DMatrix<f64>,
    g: &LaplacianMatrix,
    config: &SolverConfig,
) -> Result<DecompositionResult> {
    config.validate()?;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("feature matrix is not finite"));
    }
    let (d, n) = f.shape();
    if config.gamma > 0.0 && g.size() != n {
        return Err(Error::invalid(format!("Laplacian is {0}x{0} for {n} columns", g.size())));
    }
    let spectral = (config.gamma > 0.0).then(|| SpectralLaplacian::new(g));

    let f_norm = f.norm();
    let scale = if f_norm > 0.0 { f_norm } else { 1.0 };

    let mut l = DMatrix::zeros(d, n);
    let mut s = DMatrix::zeros(d, n);
    let mut z = DMatrix::zeros(d, n);
    let mut y1 = DMatrix::zeros(d, n);
    let mut y2 = DMatrix::zeros(d, n);
    let mut mu = config.mu0;
    let mut trace = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_iters {
        let (l_next, nuclear) = svt_with_norm(f - &s + &y1 / mu, 1.0 / mu)
            .ok_or_else(|| Error::numeric(iteration, "SVD did not converge"))?;
        let s_next = update_s(f, &l_next, &z, &y1, &y2, config.alpha, mu);
        let rhs = &s_next * mu + &y2;
        let z_next = match &spectral {
            Some(sp) => sp.solve(&rhs, mu, config.gamma),
            None => rhs / mu,
        };

        let feasibility = f - &l_next - &s_next;
        y1 += &feasibility * mu;
        y2 += (&s_next - &z_next) * mu;

        let record = IterationRecord {
            iteration,
            residual: feasibility.norm() / scale,
            step_l: (&l_next - &l).norm(),
            step_s: (&s_next - &s).norm(),
            objective: nuclear
                + config.alpha * l1(&s_next)
                + spectral.as_ref().map_or(0.0, |sp| config.gamma * sp.energy(&s_next)),
            mu,
        };
        l = l_next;
        s = s_next;
        z = z_next;
        trace.push(record);

        if !(record.residual.is_finite() && record.objective.is_finite())
            || y1.iter().chain(y2.iter()).any(|v| !v.is_finite())
        {
            return Err(Error::numeric(iteration, "non-finite iterate"));
        }
        if record.residual < config.eps1 && record.step_l.max(record.step_s) < config.eps2 {
            converged = true;
            break;
        }
        mu = (config.rho * mu).min(config.mu_max);
    }

    Ok(DecompositionResult {
        iterations: trace.len(),
        low_rank: l,
        sparse: s,
        auxiliary: z,
        dual_feasibility: y1,
        dual_split: y2,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn shrink_values() {
        assert!((shrink(1.2, 0.5) - 0.7).abs() < 1e-15);
        assert_eq!(shrink(-0.3, 0.5), 0.0);
        assert_eq!(shrink(-2.0, 0.5), -1.5);
        assert_eq!(shrink(0.5, 0.5), 0.0);
        assert_eq!(shrink(-4.25, 0.0), -4.25);
    }

    #[test]
    fn svt_rank_one() {
        let u = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let v = DVector::from_vec(vec![0.0, 1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0]);
        let m = &u * v.transpose() * 3.0;
        let out = svt(&m, 1.0).unwrap();
        let expected = &u * v.transpose() * 2.0;
        assert!((out - expected).norm() < 1e-12);
        assert!(svt(&m, 3.0).unwrap().norm() < 1e-12);
        assert!((svt(&m, 0.0).unwrap() - &m).norm() < 1e-12);
    }

    #[test]
    fn svt_rejects_non_finite() {
        let m = dmatrix![1.0, f64::NAN];
        assert!(matches!(svt(&m, 0.1), Err(Error::Numeric { .. })));
        assert!(svt(&dmatrix![1.0], -1.0).is_err());
    }

    #[test]
    fn update_s_zero_argument() {
        let f = dmatrix![1.0, 2.0; -3.0, 0.5];
        let zero = DMatrix::zeros(2, 2);
        let s = update_s(&f, &f, &zero, &zero, &zero, 0.35, 0.7);
        assert_eq!(s, zero);
    }

    #[test]
    fn update_s_without_threshold_is_midpoint() {
        let f = dmatrix![1.0, 2.0; -3.0, 0.5];
        let l = dmatrix![0.5, 0.1; 0.2, 0.3];
        let z = dmatrix![0.25, -0.5; 1.0, 0.0];
        let y1 = dmatrix![0.1, 0.2; 0.3, 0.4];
        let y2 = dmatrix![-0.2, 0.0; 0.6, 0.1];
        let mu = 2.0;
        let s = update_s(&f, &l, &z, &y1, &y2, 0.0, mu);
        let expected = ((&f - &l + &y1 / mu) + (&z - &y2 / mu)) * 0.5;
        assert_eq!(s, expected);
    }

    #[test]
    fn update_z_without_laplacian_term() {
        let g = LaplacianMatrix::from_edges(2, [((0, 1), 1.0)]).unwrap();
        let s = dmatrix![1.0, 2.0];
        let y2 = dmatrix![0.5, -0.5];
        let z = update_z(&s, &y2, 4.0, 0.0, &g).unwrap();
        assert_eq!(z, &s + &y2 / 4.0);
    }

    #[test]
    fn zero_input_converges_immediately() {
        let f = DMatrix::zeros(5, 4);
        let g = LaplacianMatrix::from_edges(4, [((0, 1), 1.0), ((2, 3), 0.5)]).unwrap();
        let r = decompose_matrix(&f, &g, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.low_rank, f);
        assert_eq!(r.sparse, f);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut f = DMatrix::zeros(3, 3);
        f[(1, 1)] = f64::INFINITY;
        let g = LaplacianMatrix::from_edges(3, []).unwrap();
        assert!(decompose_matrix(&f, &g, &SolverConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig { rho: 1.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { alpha: 0.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn trace_csv_has_one_row_per_iteration() {
        let f = dmatrix![1.0, 0.0, 0.2; 0.0, 1.0, 0.3];
        let g = LaplacianMatrix::from_edges(3, [((0, 1), 1.0), ((1, 2), 1.0)]).unwrap();
        let r = decompose_matrix(&f, &g, &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        r.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), r.iterations + 1);
        assert_eq!(r.trace.len(), r.iterations);
    }
}
