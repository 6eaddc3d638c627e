//! Sparse PLS: an L1-penalized rank-one decomposition of the cross-product
//! matrix `M = XᵀY`.
//!
//! The solver alternates the two exact block minimizers of
//! `F(ũ, ṽ) = ½‖M − ũṽᵀ‖_F² + γ‖ũ‖₁` subject to `‖ṽ‖₂ = 1`:
//! component-wise soft thresholding `ũ ← sgn(Mṽ)(|Mṽ| − γ)₊` and the
//! normalized back-projection `ṽ ← Mᵀũ/‖Mᵀũ‖₂`, warm-started from the
//! leading singular pair. Each step can only lower `F`, so the objective
//! trace is non-increasing. Only the X-side weights are penalized; `ṽ`
//! stays dense with unit norm. One component is fitted; there is no
//! deflation rule for further sparse components.

use ndarray::{ArrayView1, ArrayView2};

use crate::numkernel::{svd_truncated, validate_finite, Matrix, Vector};
use crate::pls::DataBlock;
use crate::{Error, Result};

/// Default convergence tolerance on the max-norm change of `ũ`.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 500;

/// A penalized rank-one fit.
#[derive(Debug, Clone)]
pub struct SparseFit {
    /// Sparse X-weights; not normalized (its scale absorbs the singular
    /// value).
    pub u_sparse: Vector,
    /// Dense unit-norm Y-weights.
    pub v_unit: Vector,
    /// Penalty the fit was solved at.
    pub gamma: f64,
    /// Number of nonzero entries of `u_sparse`.
    pub nnz: usize,
    /// Iterations actually performed.
    pub iterations: usize,
    /// Whether the max-norm change dropped below tolerance.
    pub converged: bool,
    /// Objective value at the warm start and after every iteration.
    pub objective_trace: Vec<f64>,
}

/// Component-wise soft thresholding `sgn(z)(|z| − γ)₊`.
pub fn soft_threshold(z: &ArrayView1<'_, f64>, gamma: f64) -> Result<Vector> {
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "soft threshold needs gamma >= 0, got {gamma}"
        )));
    }
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("soft threshold input"));
    }
    Ok(z.mapv(|v| v.signum() * (v.abs() - gamma).max(0.0)))
}

fn objective(m: &ArrayView2<'_, f64>, u: &Vector, v: &Vector, gamma: f64) -> f64 {
    let mut quad = 0.0;
    for (idx, &mv) in m.indexed_iter() {
        let d = mv - u[idx.0] * v[idx.1];
        quad += d * d;
    }
    0.5 * quad + gamma * u.iter().map(|x| x.abs()).sum::<f64>()
}

pub(crate) struct WarmStart {
    pub u1: Vector,
    pub v1: Vector,
}

pub(crate) fn warm_start(m: &ArrayView2<'_, f64>) -> Result<WarmStart> {
    let svd = svd_truncated(m, 1)?;
    Ok(WarmStart {
        u1: svd.u.column(0).to_owned(),
        v1: svd.v.column(0).to_owned(),
    })
}

pub(crate) fn sparse_rank_one_from(
    warm: &WarmStart,
    m: &ArrayView2<'_, f64>,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SparseFit> {
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::InvalidConfig(format!("tol must be > 0, got {tol}")));
    }
    if max_iter < 1 {
        return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
    }
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "penalty gamma must be >= 0, got {gamma}"
        )));
    }

    let mut u = warm.u1.clone();
    let mut v = warm.v1.clone();
    let mut trace = vec![objective(m, &u, &v, gamma)];
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..max_iter {
        iterations += 1;
        let u_new = soft_threshold(&m.dot(&v).view(), gamma)?;
        if u_new.iter().all(|&x| x == 0.0) {
            // fully shrunk: the zero vector is the exact minimizer in u
            trace.push(objective(m, &u_new, &v, gamma));
            return Ok(SparseFit {
                u_sparse: u_new,
                v_unit: v,
                gamma,
                nnz: 0,
                iterations,
                converged: true,
                objective_trace: trace,
            });
        }
        let w = m.t().dot(&u_new);
        let wn = w.dot(&w).sqrt();
        let v_new = if wn > 0.0 { w / wn } else { v.clone() };
        let delta = u_new
            .iter()
            .zip(u.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        u = u_new;
        v = v_new;
        trace.push(objective(m, &u, &v, gamma));
        if delta < tol {
            converged = true;
            break;
        }
    }

    let nnz = u.iter().filter(|&&x| x != 0.0).count();
    Ok(SparseFit {
        u_sparse: u,
        v_unit: v,
        gamma,
        nnz,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Solves the penalized rank-one problem at penalty `gamma` by alternating
/// soft thresholding and back-projection from the SVD warm start.
pub fn sparse_rank_one(
    m: &ArrayView2<'_, f64>,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SparseFit> {
    validate_finite(m, "sparse decomposition input")?;
    let warm = warm_start(m)?;
    sparse_rank_one_from(&warm, m, gamma, tol, max_iter)
}

pub(crate) fn gamma_max_from(m: &ArrayView2<'_, f64>, v1: &Vector) -> f64 {
    m.dot(v1).iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

/// Evenly spaced penalty grid from 0 to `γ_max = max_j |(Mv⁽¹⁾)_j|`, the
/// smallest penalty that zeroes `ũ` at the first iteration. Ascending,
/// exactly `count` values.
pub fn gamma_grid(m: &ArrayView2<'_, f64>, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidConfig(format!(
            "gamma grid needs at least 2 points, got {count}"
        )));
    }
    validate_finite(m, "gamma grid input")?;
    let warm = warm_start(m)?;
    let gmax = gamma_max_from(m, &warm.v1);
    Ok(evenly_spaced(gmax, count))
}

/// `count` evenly spaced values from 0 to `top`, both endpoints exact.
pub(crate) fn evenly_spaced(top: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| top * (i as f64 / (count - 1) as f64))
        .collect()
}

/// [`sparse_beta`] on bare centered matrices; used by the leave-one-out
/// loops whose deletion subsets are not wrapped in a [`DataBlock`].
pub(crate) fn sparse_beta_centered(
    x: &ArrayView2<'_, f64>,
    y: &ArrayView2<'_, f64>,
    fit: &SparseFit,
) -> Result<Matrix> {
    if fit.nnz == 0 {
        return Err(Error::FullyShrunk);
    }
    if fit.u_sparse.len() != x.ncols() || fit.v_unit.len() != y.ncols() {
        return Err(Error::Dimension(format!(
            "sparse fit is {}/{}-dimensional, data is {}x{}",
            fit.u_sparse.len(),
            fit.v_unit.len(),
            x.ncols(),
            y.ncols()
        )));
    }
    let unorm = fit.u_sparse.dot(&fit.u_sparse).sqrt();
    let u_hat = fit.u_sparse.mapv(|v| v / unorm);
    let t = x.dot(&u_hat);
    let s = y.dot(&fit.v_unit);
    let tt = t.dot(&t);
    if tt <= 1e-12 {
        return Err(Error::DegenerateFactor { factor: 1 });
    }
    let d = t.dot(&s) / tt;
    let ss = s.dot(&s);
    if ss <= 1e-12 {
        return Err(Error::DegenerateFactor { factor: 1 });
    }
    let q_t = y.t().dot(&s).mapv(|v| v / ss); // length q
    let (p, q) = (x.ncols(), y.ncols());
    let mut beta = ndarray::Array2::zeros((p, q));
    for j in 0..p {
        if u_hat[j] == 0.0 {
            continue;
        }
        for c in 0..q {
            beta[(j, c)] = u_hat[j] * d * q_t[c];
        }
    }
    Ok(beta)
}

/// Regression coefficients of the one-component sparse model:
/// `β = û D₁₁ q̃` with `û = ũ/‖ũ‖`, `t = Xû`, `s = Yṽ`,
/// `D₁₁ = (tᵀs)/(tᵀt)` and `q̃ = (sᵀs)⁻¹sᵀY`.
///
/// Rows of `β` at zeroed entries of `ũ` are exactly zero.
pub fn sparse_beta(data: &DataBlock, fit: &SparseFit) -> Result<Matrix> {
    sparse_beta_centered(&data.x(), &data.y(), fit)
}
