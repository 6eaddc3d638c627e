//! PRESS statistics: analytic leave-one-out prediction errors for OLS and
//! two-block PLS, brute-force LOOCV oracles, and the singular-value
//! perturbation check that backs the fixed-subspace shortcut.
//!
//! The analytic PLS PRESS keeps the weights `U`, `V` from the full-data fit
//! and removes one observation at a time from the latent-space least-squares
//! problems only. The inner coefficients are downdated per component through
//! the scalar identity `(tᵀt − t_i²)⁻¹`, the Y-loadings through the R×R
//! Sherman–Morrison–Woodbury downdate of `(SᵀS)⁻¹`. Both downdates are exact
//! in real arithmetic, so the result matches the fixed-subspace oracle that
//! re-solves every deletion from scratch; the only approximation relative to
//! full LOOCV is the frozen subspace. The whole pass costs `O(n(R² + Rq))`
//! after the fit.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::numkernel::{spd_inverse, spd_solve, svd_truncated, validate_finite, Matrix, Vector};
use crate::pls::{fit_centered, DataBlock, PlsFit};
use crate::{Error, Result};

/// How a [`PressResult`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PressMethod {
    /// Single fit plus rank-one downdates.
    Analytic,
    /// Explicit per-deletion least squares with the subspace held fixed.
    OracleFixedSubspace,
    /// Full refit (including re-centering and a fresh SVD) per deletion.
    OracleFull,
}

/// Per-observation leave-one-out residuals `e(i)` and their aggregate
/// `PRESS = (1/n) Σᵢ ‖e(i)‖²`.
#[derive(Debug, Clone)]
pub struct PressResult {
    /// n×q matrix whose i-th row is `e(i)`.
    pub loo_residuals: Matrix,
    /// Mean squared row norm of `loo_residuals`.
    pub press_value: f64,
    pub method: PressMethod,
    /// Wall-clock seconds spent computing the result.
    pub elapsed: f64,
}

impl PressResult {
    fn new(loo_residuals: Matrix, method: PressMethod, started: Instant) -> Self {
        let press_value = mean_squared_row_norm(&loo_residuals);
        PressResult {
            loo_residuals,
            press_value,
            method,
            elapsed: started.elapsed().as_secs_f64(),
        }
    }
}

fn mean_squared_row_norm(e: &Matrix) -> f64 {
    let n = e.nrows();
    let mut total = 0.0;
    for row in e.axis_iter(Axis(0)) {
        total += row.dot(&row);
    }
    total / n as f64
}

/// Analytic OLS PRESS: `e(i) = e_i / (1 − h_i)` with `h_i = x_i(XᵀX)⁻¹x_iᵀ`.
///
/// Equals an explicit leave-one-out refit exactly in real arithmetic. The
/// design must be tall (`n > p`) and well conditioned; an observation with
/// leverage at 1 is pivotal and aborts the computation.
pub fn press_ols(x: &ArrayView2<'_, f64>, y: &ArrayView2<'_, f64>) -> Result<PressResult> {
    let started = Instant::now();
    validate_finite(x, "X")?;
    validate_finite(y, "Y")?;
    let (n, p) = x.dim();
    if y.nrows() != n {
        return Err(Error::Dimension(format!(
            "X has {n} rows but Y has {}",
            y.nrows()
        )));
    }
    if n <= p {
        return Err(Error::Dimension(format!(
            "OLS PRESS needs n > p, got n = {n}, p = {p}"
        )));
    }
    let gram = x.t().dot(x);
    // condition check through the eigenvalues of the Gram matrix
    let eigs = svd_truncated(&gram.view(), p)?.g;
    let ratio = eigs[p - 1] / eigs[0];
    if ratio.is_nan() || ratio <= 1e-12 {
        return Err(Error::SingularDesign { ratio });
    }
    let inv = spd_inverse(&gram.view())?;
    let beta = inv.dot(&x.t().dot(y));
    let resid = y - &x.dot(&beta);
    let xp = x.dot(&inv); // n×p, row i = x_i (XᵀX)⁻¹
    let mut loo = resid.clone();
    for i in 0..n {
        let h = xp.row(i).dot(&x.row(i));
        if h >= 1.0 - 1e-10 {
            return Err(Error::Pivotal {
                index: i,
                block: "design",
                leverage: h,
            });
        }
        let scale = 1.0 / (1.0 - h);
        loo.row_mut(i).mapv_inplace(|v| v * scale);
    }
    Ok(PressResult::new(loo, PressMethod::Analytic, started))
}

/// Leave-one-out residuals for a fixed pair of latent-factor blocks,
/// computed analytically via rank-one downdates.
///
/// `t` and `s` are the n×R latent factors, `y` the n×q responses. For each
/// deletion the diagonal inner coefficients are downdated per component and
/// the joint Y-loading solve is downdated with Sherman–Morrison–Woodbury;
/// the i-th residual is `y_i − (t_i D(i)) Q(i)ᵀ`.
pub(crate) fn loo_residuals_fixed_factors(
    t: &ArrayView2<'_, f64>,
    s: &ArrayView2<'_, f64>,
    y: &ArrayView2<'_, f64>,
) -> Result<Matrix> {
    let (n, r) = t.dim();
    let q = y.ncols();

    // per-component sums for the diagonal inner model
    let mut t_dot_t = Array1::zeros(r);
    let mut t_dot_s = Array1::zeros(r);
    for k in 0..r {
        let tk = t.column(k);
        let tt = tk.dot(&tk);
        if tt <= 1e-12 {
            return Err(Error::DegenerateFactor { factor: k + 1 });
        }
        t_dot_t[k] = tt;
        t_dot_s[k] = tk.dot(&s.column(k));
    }

    let p_t = spd_inverse(&t.t().dot(t).view())?;
    let p_s = spd_inverse(&s.t().dot(s).view())?;
    let a = s.t().dot(y); // R×q
    let q_t = p_s.dot(&a); // Qᵀ, R×q

    let mut loo = Array2::zeros((n, q));
    for i in 0..n {
        let t_i = t.row(i);
        let s_i = s.row(i);

        let h_t = t_i.dot(&p_t.dot(&t_i));
        if h_t >= 1.0 - 1e-10 {
            return Err(Error::Pivotal {
                index: i,
                block: "X-latent",
                leverage: h_t,
            });
        }
        // SMW downdate of (SᵀS)⁻¹ folded into the deleted normal equations:
        // Q(i)ᵀ = Qᵀ − P_s s_iᵀ (y_i − s_i Qᵀ) / (1 − h_s)
        let w = p_s.dot(&s_i); // P_s s_iᵀ
        let h_s = s_i.dot(&w);
        if h_s >= 1.0 - 1e-10 {
            return Err(Error::Pivotal {
                index: i,
                block: "Y-latent",
                leverage: h_s,
            });
        }
        let scale = 1.0 / (1.0 - h_s);

        // latent prediction row z = t_i D(i), with the scalar downdate
        // D(i)_kk = (tᵀs − t_ik s_ik) / (tᵀt − t_ik²)
        let mut z = Array1::zeros(r);
        for k in 0..r {
            let d_down = (t_dot_s[k] - t_i[k] * s_i[k]) / (t_dot_t[k] - t_i[k] * t_i[k]);
            z[k] = t_i[k] * d_down;
        }

        // e_q = y_i − s_i Qᵀ (residual of the loading regression at row i)
        let y_i = y.row(i);
        for c in 0..q {
            let mut pred = 0.0;
            let mut eq_c = y_i[c];
            for k in 0..r {
                eq_c -= s_i[k] * q_t[(k, c)];
            }
            for k in 0..r {
                let q_down = q_t[(k, c)] - w[k] * eq_c * scale;
                pred += z[k] * q_down;
            }
            loo[(i, c)] = y_i[c] - pred;
        }
    }
    Ok(loo)
}

/// Analytic PRESS for a fitted two-block PLS model: every leave-one-out
/// residual from the single full-data fit, no refitting.
pub fn press_pls(fit: &PlsFit, data: &DataBlock) -> Result<PressResult> {
    let started = Instant::now();
    if fit.t.nrows() != data.n() {
        return Err(Error::Dimension(format!(
            "fit has {} observations, data has {}",
            fit.t.nrows(),
            data.n()
        )));
    }
    let loo = loo_residuals_fixed_factors(&fit.t.view(), &fit.s.view(), &data.y())?;
    Ok(PressResult::new(loo, PressMethod::Analytic, started))
}

/// Fixed-subspace LOOCV oracle: `U`, `V` stay frozen from the full-data fit
/// while the inner coefficients and Y-loadings are re-estimated by explicit
/// least squares on the remaining n−1 rows for every deletion.
///
/// This is what [`press_pls`] computes analytically; the two must agree to
/// floating-point accuracy.
pub fn loocv_pls_fixed_subspace(data: &DataBlock, r: usize) -> Result<PressResult> {
    let started = Instant::now();
    let fit = crate::pls::fit_pls(data, r)?;
    let t = &fit.t;
    let s = &fit.s;
    let y = data.y();
    let n = data.n();
    let q = data.q();

    let rows: Vec<Result<Vector>> = (0..n)
        .into_par_iter()
        .map(|i| {
            // deleted per-component inner coefficients
            let mut d_del = Array1::zeros(r);
            for k in 0..r {
                let mut tt = 0.0;
                let mut ts = 0.0;
                for o in 0..n {
                    if o != i {
                        tt += t[(o, k)] * t[(o, k)];
                        ts += t[(o, k)] * s[(o, k)];
                    }
                }
                if tt <= 1e-12 {
                    return Err(Error::DeletionFit {
                        index: i,
                        source: Box::new(Error::DegenerateFactor { factor: k + 1 }),
                    });
                }
                d_del[k] = ts / tt;
            }
            // deleted joint loading solve from explicitly rebuilt sums
            let mut gram = Array2::zeros((r, r));
            let mut rhs = Array2::zeros((r, q));
            for o in 0..n {
                if o == i {
                    continue;
                }
                for k in 0..r {
                    for l in 0..r {
                        gram[(k, l)] += s[(o, k)] * s[(o, l)];
                    }
                    for c in 0..q {
                        rhs[(k, c)] += s[(o, k)] * y[(o, c)];
                    }
                }
            }
            let q_t = spd_solve(&gram.view(), &rhs.view()).map_err(|e| Error::DeletionFit {
                index: i,
                source: Box::new(e),
            })?;
            let mut e_row = Array1::zeros(q);
            for c in 0..q {
                let mut pred = 0.0;
                for k in 0..r {
                    pred += t[(i, k)] * d_del[k] * q_t[(k, c)];
                }
                e_row[c] = y[(i, c)] - pred;
            }
            Ok(e_row)
        })
        .collect();

    let mut loo = Array2::zeros((n, q));
    for (i, row) in rows.into_iter().enumerate() {
        loo.row_mut(i).assign(&row?);
    }
    Ok(PressResult::new(
        loo,
        PressMethod::OracleFixedSubspace,
        started,
    ))
}

/// Full LOOCV oracle: for every deletion the model is refitted from scratch,
/// including re-centering the n−1 remaining rows and recomputing the SVD of
/// `X(i)ᵀY(i)`. The held-out observation is centered with the training
/// means of its own deletion.
pub fn loocv_pls_full(data: &DataBlock, r: usize) -> Result<PressResult> {
    let started = Instant::now();
    let x = data.x();
    let y = data.y();
    let n = data.n();
    let p = data.p();
    let q = data.q();
    if n < 3 {
        return Err(Error::Dimension(format!(
            "LOOCV needs at least 3 observations, got {n}"
        )));
    }

    let rows: Vec<Result<Vector>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let m = n - 1;
            let mut xd = Array2::zeros((m, p));
            let mut yd = Array2::zeros((m, q));
            let mut rr = 0;
            for o in 0..n {
                if o != i {
                    xd.row_mut(rr).assign(&x.row(o));
                    yd.row_mut(rr).assign(&y.row(o));
                    rr += 1;
                }
            }
            let mean_x = xd.mean_axis(Axis(0)).expect("m >= 2");
            let mean_y = yd.mean_axis(Axis(0)).expect("m >= 2");
            let xc = xd - &mean_x;
            let yc = yd - &mean_y;
            let fit = fit_centered(&xc.view(), &yc.view(), r).map_err(|e| Error::DeletionFit {
                index: i,
                source: Box::new(e),
            })?;
            let x_held = &x.row(i) - &mean_x;
            let pred = x_held.dot(&fit.beta) + &mean_y;
            Ok(&y.row(i) - &pred)
        })
        .collect();

    let mut loo = Array2::zeros((n, q));
    for (i, row) in rows.into_iter().enumerate() {
        loo.row_mut(i).assign(&row?);
    }
    Ok(PressResult::new(loo, PressMethod::OracleFull, started))
}

/// Per-observation singular-value stability report for the cross-product
/// matrix.
///
/// With `M = (1/n) XᵀY`, removing observation i subtracts the rank-one term
/// `(1/n) x_iᵀ y_i`. `per_obs_gap[i]` is the largest movement among the
/// top-R singular values under that removal, and `rank_one_norms[i]` the
/// spectral norm `‖x_i‖‖y_i‖/n` of the removed term, which bounds the
/// movement exactly (Weyl's perturbation bound).
#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    /// `max_{r<=R} |g_r(M) − g_r(M − (1/n)x_iᵀy_i)|` per observation.
    pub per_obs_gap: Vec<f64>,
    /// Spectral norm of each removed rank-one term, same normalization.
    pub rank_one_norms: Vec<f64>,
    /// Largest entry of `per_obs_gap`.
    pub max_gap: f64,
}

/// Computes the [`PerturbationReport`] for the top `r` singular values.
pub fn sv_perturbation_gap(data: &DataBlock, r: usize) -> Result<PerturbationReport> {
    let x = data.x();
    let y = data.y();
    let n = data.n();
    if r < 1 || r > data.p().min(data.q()) {
        return Err(Error::Dimension(format!(
            "rank {r} out of range for p = {}, q = {}",
            data.p(),
            data.q()
        )));
    }
    let scale = 1.0 / n as f64;
    let m_full = x.t().dot(&y).mapv(|v| v * scale);
    let g_full = svd_truncated(&m_full.view(), r)?.g;

    let per_obs: Vec<Result<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let yi = y.row(i);
            let mut m_del = m_full.clone();
            for a in 0..m_del.nrows() {
                for b in 0..m_del.ncols() {
                    m_del[(a, b)] -= scale * xi[a] * yi[b];
                }
            }
            let g_del = svd_truncated(&m_del.view(), r)?.g;
            let gap = g_full
                .iter()
                .zip(g_del.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            let rank_one = scale * xi.dot(&xi).sqrt() * yi.dot(&yi).sqrt();
            Ok((gap, rank_one))
        })
        .collect();

    let mut per_obs_gap = Vec::with_capacity(n);
    let mut rank_one_norms = Vec::with_capacity(n);
    for item in per_obs {
        let (gap, rank_one) = item?;
        per_obs_gap.push(gap);
        rank_one_norms.push(rank_one);
    }
    let max_gap = per_obs_gap.iter().copied().fold(0.0f64, f64::max);
    Ok(PerturbationReport {
        per_obs_gap,
        rank_one_norms,
        max_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::testutil::{random_matrix, rng};
    use crate::numkernel::{smw_downdate, SmwState};
    use crate::pls::fit_pls;
    use crate::simgen::{simulate, SimConfig};
    use ndarray::{arr2, s};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    fn random_block(n: usize, p: usize, q: usize, seed: u64) -> DataBlock {
        let x = random_matrix(n, p, seed);
        let y = random_matrix(n, q, seed.wrapping_add(0x9e3779b9));
        DataBlock::center(&x.view(), &y.view()).unwrap()
    }

    /// Explicit-deletion OLS LOOCV oracle: refit without row i, predict it.
    fn ols_loo_oracle(x: &Matrix, y: &Matrix) -> Matrix {
        let (n, p) = x.dim();
        let q = y.ncols();
        let mut out = Array2::zeros((n, q));
        for i in 0..n {
            let mut xd = Array2::zeros((n - 1, p));
            let mut yd = Array2::zeros((n - 1, q));
            let mut rr = 0;
            for o in 0..n {
                if o != i {
                    xd.row_mut(rr).assign(&x.row(o));
                    yd.row_mut(rr).assign(&y.row(o));
                    rr += 1;
                }
            }
            let gram = xd.t().dot(&xd);
            let beta = spd_solve(&gram.view(), &xd.t().dot(&yd).view()).unwrap();
            let pred = x.row(i).dot(&beta);
            for c in 0..q {
                out[(i, c)] = y[(i, c)] - pred[c];
            }
        }
        out
    }

    #[test]
    fn press_ols_hand_example() {
        // X = column of ones, y = (0, 0, 3): slope 1, uniform leverage 1/3,
        // LOO residuals 1.5x the plain residuals, PRESS = 4.5
        let x = arr2(&[[1.0], [1.0], [1.0]]);
        let y = arr2(&[[0.0], [0.0], [3.0]]);
        let res = press_ols(&x.view(), &y.view()).unwrap();
        let expect = [-1.5, -1.5, 3.0];
        for i in 0..3 {
            assert!((res.loo_residuals[(i, 0)] - expect[i]).abs() < 1e-12);
        }
        assert!((res.press_value - 4.5).abs() < 1e-12);
        assert_eq!(res.method, PressMethod::Analytic);
        let oracle = ols_loo_oracle(&x, &y);
        for i in 0..3 {
            assert!((res.loo_residuals[(i, 0)] - oracle[(i, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn press_ols_interpolation_is_zero() {
        let x = random_matrix(20, 4, 61);
        let beta0 = random_matrix(4, 2, 62);
        let y = x.dot(&beta0);
        let res = press_ols(&x.view(), &y.view()).unwrap();
        let max = res.loo_residuals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(max <= 1e-10);
        assert!(res.press_value <= 1e-20);
    }

    #[test]
    fn press_ols_matches_explicit_refit() {
        let x = random_matrix(50, 10, 63);
        let y = random_matrix(50, 3, 64);
        let res = press_ols(&x.view(), &y.view()).unwrap();
        let oracle = ols_loo_oracle(&x, &y);
        let max = res
            .loo_residuals
            .iter()
            .zip(oracle.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max <= 1e-10, "max deviation {max}");
    }

    #[test]
    fn press_ols_rejects_singular_and_fat_designs() {
        let x = random_matrix(5, 8, 65);
        let y = random_matrix(5, 1, 66);
        assert!(matches!(
            press_ols(&x.view(), &y.view()),
            Err(Error::Dimension(_))
        ));
        // duplicate column -> singular design
        let base = random_matrix(20, 2, 67);
        let mut xs = Array2::zeros((20, 3));
        for i in 0..20 {
            xs[(i, 0)] = base[(i, 0)];
            xs[(i, 1)] = base[(i, 1)];
            xs[(i, 2)] = base[(i, 0)];
        }
        let y = random_matrix(20, 1, 68);
        assert!(matches!(
            press_ols(&xs.view(), &y.view()),
            Err(Error::SingularDesign { .. })
        ));
    }

    #[test]
    fn press_pls_matches_fixed_subspace_oracle() {
        let data = random_block(100, 20, 20, 71);
        let fit = fit_pls(&data, 3).unwrap();
        let analytic = press_pls(&fit, &data).unwrap();
        let oracle = loocv_pls_fixed_subspace(&data, 3).unwrap();
        let rel = (analytic.press_value - oracle.press_value).abs() / oracle.press_value;
        assert!(rel <= 1e-8, "press gap {rel}");
        for i in 0..data.n() {
            let ynorm = data.y().row(i).dot(&data.y().row(i)).sqrt();
            for c in 0..data.q() {
                let d = (analytic.loo_residuals[(i, c)] - oracle.loo_residuals[(i, c)]).abs();
                assert!(d <= 1e-8 * (1.0 + ynorm));
            }
        }
    }

    #[test]
    fn downdate_folding_matches_materialized_smw() {
        // the folded Q(i) update inside the analytic pass equals the
        // materialized downdate (SᵀS − s_iᵀs_i)⁻¹ (SᵀY − s_iᵀ y_i)
        let data = random_block(30, 6, 4, 73);
        let fit = fit_pls(&data, 2).unwrap();
        let analytic = press_pls(&fit, &data).unwrap();
        let s = &fit.s;
        let t = &fit.t;
        let y = data.y();
        let state = SmwState::new(s.t().dot(s)).unwrap();
        let a = s.t().dot(&y);
        for i in 0..data.n() {
            let (p_down, _) = smw_downdate(&state, &s.row(i)).unwrap();
            let mut a_down = a.clone();
            for k in 0..2 {
                for c in 0..data.q() {
                    a_down[(k, c)] -= s[(i, k)] * y[(i, c)];
                }
            }
            let q_down = p_down.dot(&a_down);
            let mut tt = [0.0; 2];
            let mut ts = [0.0; 2];
            for o in 0..data.n() {
                if o != i {
                    for k in 0..2 {
                        tt[k] += t[(o, k)] * t[(o, k)];
                        ts[k] += t[(o, k)] * s[(o, k)];
                    }
                }
            }
            for c in 0..data.q() {
                let mut pred = 0.0;
                for k in 0..2 {
                    pred += t[(i, k)] * (ts[k] / tt[k]) * q_down[(k, c)];
                }
                let expect = y[(i, c)] - pred;
                assert!((analytic.loo_residuals[(i, c)] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn null_observation_makes_oracles_agree_exactly() {
        // appending an all-zero row to centered data leaves M unchanged, so
        // for that row the fixed-subspace and full oracles coincide at zero
        let base = random_block(20, 4, 3, 79);
        let n = 21;
        let mut x = Array2::zeros((n, 4));
        let mut y = Array2::zeros((n, 3));
        x.slice_mut(s![..20, ..]).assign(&base.x());
        y.slice_mut(s![..20, ..]).assign(&base.y());
        let data = DataBlock::from_centered(x, y).unwrap();
        let fixed = loocv_pls_fixed_subspace(&data, 2).unwrap();
        let full = loocv_pls_full(&data, 2).unwrap();
        for c in 0..3 {
            assert!(fixed.loo_residuals[(20, c)].abs() < 1e-10);
            assert!(full.loo_residuals[(20, c)].abs() < 1e-10);
        }
    }

    #[test]
    fn duplicated_rows_shrink_loo_residuals() {
        // leaving out one copy of a duplicated row keeps its twin in the
        // training set, so the LOO residual can only shrink
        let base = random_block(15, 4, 2, 83);
        let undup = loocv_pls_full(&base, 2).unwrap();
        let mut x2 = Array2::zeros((30, 4));
        let mut y2 = Array2::zeros((30, 2));
        for i in 0..15 {
            for dst in [2 * i, 2 * i + 1] {
                x2.row_mut(dst).assign(&base.x().row(i));
                y2.row_mut(dst).assign(&base.y().row(i));
            }
        }
        let dup = DataBlock::from_centered(x2, y2).unwrap();
        let dup_res = loocv_pls_full(&dup, 2).unwrap();
        for i in 0..15 {
            let undup_norm = undup.loo_residuals.row(i).dot(&undup.loo_residuals.row(i));
            let dup_norm = dup_res
                .loo_residuals
                .row(2 * i)
                .dot(&dup_res.loo_residuals.row(2 * i));
            assert!(
                dup_norm <= undup_norm + 1e-9,
                "row {i}: duplicated LOO residual {dup_norm} vs {undup_norm}"
            );
        }
    }

    #[test]
    fn loocv_full_minimal_case_matches_hand_loop() {
        // n = 3, p = q = 1, R = 1: LOOCV residuals computed by a bare scalar
        // loop with re-centering
        let x = arr2(&[[1.0], [2.0], [4.0]]);
        let y = arr2(&[[2.1], [3.9], [8.2]]);
        let data = DataBlock::center(&x.view(), &y.view()).unwrap();
        let res = loocv_pls_full(&data, 1).unwrap();
        for i in 0..3 {
            let others: Vec<usize> = (0..3).filter(|&o| o != i).collect();
            let mx: f64 = others.iter().map(|&o| x[(o, 0)]).sum::<f64>() / 2.0;
            let my: f64 = others.iter().map(|&o| y[(o, 0)]).sum::<f64>() / 2.0;
            // R = 1 two-block PLS on scalars: t = (x - mx) u with u = ±1 from
            // the sign of the cross-product, s = y - my
            let cross: f64 = others
                .iter()
                .map(|&o| (x[(o, 0)] - mx) * (y[(o, 0)] - my))
                .sum();
            let u = if cross >= 0.0 { 1.0 } else { -1.0 };
            let tvals: Vec<f64> = others.iter().map(|&o| (x[(o, 0)] - mx) * u).collect();
            let svals: Vec<f64> = others.iter().map(|&o| y[(o, 0)] - my).collect();
            let d: f64 = tvals.iter().zip(&svals).map(|(a, b)| a * b).sum::<f64>()
                / tvals.iter().map(|a| a * a).sum::<f64>();
            let ql: f64 = svals.iter().zip(&svals).map(|(a, b)| a * b).sum::<f64>()
                / svals.iter().map(|a| a * a).sum::<f64>();
            let pred = (x[(i, 0)] - mx) * u * d * ql + my;
            let expect = y[(i, 0)] - pred;
            assert!(
                (res.loo_residuals[(i, 0)] - expect).abs() < 1e-12,
                "row {i}: {} vs {expect}",
                res.loo_residuals[(i, 0)]
            );
        }
    }

    #[test]
    fn noise_free_data_interpolates_out_of_sample() {
        let config = SimConfig::new(40, 6, 5, 2, 91).with_noise_sd(0.0);
        let sim = simulate(&config).unwrap();
        let fit = fit_pls(&sim.data, 2).unwrap();
        let analytic = press_pls(&fit, &sim.data).unwrap();
        assert!(
            analytic.press_value <= 1e-8,
            "press {}",
            analytic.press_value
        );
        let full = loocv_pls_full(&sim.data, 2).unwrap();
        assert!(full.press_value <= 1e-8, "loocv {}", full.press_value);
        let fixed = loocv_pls_fixed_subspace(&sim.data, 2).unwrap();
        assert!(fixed.press_value <= 1e-8);
    }

    #[test]
    fn univariate_single_factor_reduces_to_latent_ols_press() {
        // with q = 1 and R = 1 the analytic PLS PRESS collapses to the OLS
        // PRESS of the regression of y on the latent factor t
        let data = random_block(50, 10, 1, 97);
        let fit = fit_pls(&data, 1).unwrap();
        let pls_press = press_pls(&fit, &data).unwrap();
        let t = fit.t.clone();
        let y = data.y().to_owned();
        let ols = press_ols(&t.view(), &y.view()).unwrap();
        for i in 0..50 {
            assert!(
                (pls_press.loo_residuals[(i, 0)] - ols.loo_residuals[(i, 0)]).abs() < 1e-10
            );
        }
        assert!((pls_press.press_value - ols.press_value).abs() < 1e-12);
    }

    #[test]
    fn aligned_latent_blocks_give_zero_press() {
        // y proportional to the leading left singular vector of X makes
        // S ∝ T and the model exact, so every LOO residual vanishes
        let x = random_matrix(30, 5, 101);
        let xc = &x - &x.mean_axis(Axis(0)).unwrap();
        let svd = svd_truncated(&xc.view(), 1).unwrap();
        let y = xc.dot(&svd.v); // n×1 = g1 × leading left singular vector
        let data = DataBlock::from_centered(xc.clone(), y.clone()).unwrap();
        let fit = fit_pls(&data, 1).unwrap();
        // S = c T for this construction
        let c = fit.s[(0, 0)] / fit.t[(0, 0)];
        for i in 0..30 {
            let scale = fit.s[(i, 0)].abs().max(1.0);
            assert!((fit.s[(i, 0)] - c * fit.t[(i, 0)]).abs() < 1e-8 * scale);
        }
        let res = press_pls(&fit, &data).unwrap();
        assert!(res.press_value <= 1e-16);
        let ols = press_ols(&fit.t.view(), &data.y().to_owned().view()).unwrap();
        assert!((res.press_value - ols.press_value).abs() <= 1e-16);
    }

    #[test]
    fn fixed_subspace_single_factor_matches_scripted_implementation() {
        // independent scalar-form implementation of the R = 1 fixed-subspace
        // leave-one-out loop
        let data = random_block(50, 10, 10, 103);
        let res = loocv_pls_fixed_subspace(&data, 1).unwrap();
        let fit = fit_pls(&data, 1).unwrap();
        let n = data.n();
        let q = data.q();
        let t: Vec<f64> = (0..n).map(|i| fit.t[(i, 0)]).collect();
        let s: Vec<f64> = (0..n).map(|i| fit.s[(i, 0)]).collect();
        for i in 0..n {
            let mut tt = 0.0;
            let mut ts = 0.0;
            let mut ss = 0.0;
            for o in 0..n {
                if o != i {
                    tt += t[o] * t[o];
                    ts += t[o] * s[o];
                    ss += s[o] * s[o];
                }
            }
            let d = ts / tt;
            for c in 0..q {
                let mut sy = 0.0;
                for o in 0..n {
                    if o != i {
                        sy += s[o] * data.y()[(o, c)];
                    }
                }
                let qc = sy / ss;
                let expect = data.y()[(i, c)] - t[i] * d * qc;
                assert!((res.loo_residuals[(i, c)] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn perturbation_bound_holds_on_duplicated_rows() {
        let base = random_matrix(8, 4, 107);
        let ybase = random_matrix(8, 3, 109);
        let k = 3;
        let mut x = Array2::zeros((24, 4));
        let mut y = Array2::zeros((24, 3));
        for i in 0..8 {
            for c in 0..k {
                x.row_mut(k * i + c).assign(&base.row(i));
                y.row_mut(k * i + c).assign(&ybase.row(i));
            }
        }
        let data = DataBlock::center(&x.view(), &y.view()).unwrap();
        let report = sv_perturbation_gap(&data, 3).unwrap();
        for i in 0..24 {
            assert!(report.per_obs_gap[i] <= report.rank_one_norms[i] + 1e-9);
        }
    }

    #[test]
    fn perturbation_gaps_match_explicit_deletion_oracle() {
        let data = random_block(3, 2, 2, 113);
        let report = sv_perturbation_gap(&data, 2).unwrap();
        let n = 3;
        let scale = 1.0 / n as f64;
        let g_full = svd_truncated(&data.x().t().dot(&data.y()).mapv(|v| v * scale).view(), 2)
            .unwrap()
            .g;
        for i in 0..n {
            // direct recomputation: sum the remaining rank-one contributions
            let mut m = Array2::zeros((2, 2));
            for o in 0..n {
                if o != i {
                    for a in 0..2 {
                        for b in 0..2 {
                            m[(a, b)] += scale * data.x()[(o, a)] * data.y()[(o, b)];
                        }
                    }
                }
            }
            let g_del = svd_truncated(&m.view(), 2).unwrap().g;
            let gap = (0..2)
                .map(|k| (g_full[k] - g_del[k]).abs())
                .fold(0.0f64, f64::max);
            assert!((report.per_obs_gap[i] - gap).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_gap_shrinks_with_sample_size() {
        let mut medians = Vec::new();
        for &n in &[50usize, 100, 200, 400] {
            let mut gaps = Vec::new();
            for seed in 0..20u64 {
                let data = random_block(n, 20, 20, 127 + seed * 17);
                let report = sv_perturbation_gap(&data, 3).unwrap();
                gaps.push(report.max_gap);
            }
            gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push((gaps[9] + gaps[10]) / 2.0);
        }
        for w in medians.windows(2) {
            assert!(w[1] < w[0], "medians not decreasing: {medians:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        /// Analytic OLS PRESS equals explicit-deletion LOOCV on random
        /// well-conditioned instances.
        #[test]
        fn press_ols_equals_refit(seed in 0u64..4000) {
            let x = random_matrix(40, 6, seed);
            let y = random_matrix(40, 2, seed ^ 0xf00d);
            let res = press_ols(&x.view(), &y.view()).unwrap();
            let oracle = ols_loo_oracle(&x, &y);
            let max = res.loo_residuals.iter().zip(oracle.iter())
                .map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
            prop_assert!(max <= 1e-10);
        }

        /// The analytic PLS PRESS equals the fixed-subspace oracle on random
        /// instances with n >= 5(R + 2).
        #[test]
        fn press_pls_equals_fixed_subspace(seed in 0u64..4000, r in 1usize..4) {
            let n = 5 * (r + 2) + 10;
            let data = random_block(n, 2 * r + 3, r + 2, seed);
            let fit = fit_pls(&data, r).unwrap();
            let analytic = press_pls(&fit, &data).unwrap();
            let oracle = loocv_pls_fixed_subspace(&data, r).unwrap();
            let rel = (analytic.press_value - oracle.press_value).abs()
                / oracle.press_value;
            prop_assert!(rel <= 1e-8);
            for i in 0..data.n() {
                let ynorm = data.y().row(i).dot(&data.y().row(i)).sqrt();
                for c in 0..data.q() {
                    let d = (analytic.loo_residuals[(i, c)] - oracle.loo_residuals[(i, c)]).abs();
                    prop_assert!(d <= 1e-8 * (1.0 + ynorm));
                }
            }
        }

        /// The Weyl bound on singular-value movement holds for every
        /// observation on random inputs.
        #[test]
        fn perturbation_bound_property(seed in 0u64..4000, n in 3usize..24, p in 2usize..10, q in 2usize..10) {
            let data = random_block(n, p, q, seed);
            let r = p.min(q).min(3);
            let report = sv_perturbation_gap(&data, r).unwrap();
            for i in 0..n {
                prop_assert!(report.per_obs_gap[i] <= report.rank_one_norms[i] + 1e-9);
            }
        }

        /// Jointly permuting rows permutes the LOO residuals identically and
        /// leaves the PRESS value unchanged.
        #[test]
        fn press_permutation_invariance(seed in 0u64..4000) {
            let n = 30;
            let data = random_block(n, 5, 3, seed);
            let fit = fit_pls(&data, 2).unwrap();
            let res = press_pls(&fit, &data).unwrap();

            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng(seed ^ 0x5eed));
            let mut xp = Array2::zeros((n, 5));
            let mut yp = Array2::zeros((n, 3));
            for (dst, &src) in order.iter().enumerate() {
                xp.row_mut(dst).assign(&data.x().row(src));
                yp.row_mut(dst).assign(&data.y().row(src));
            }
            let pdata = DataBlock::from_centered(xp, yp).unwrap();
            let pfit = fit_pls(&pdata, 2).unwrap();
            let pres = press_pls(&pfit, &pdata).unwrap();

            let scale = res.press_value.max(1.0);
            prop_assert!((res.press_value - pres.press_value).abs() <= 1e-12 * scale);
            for (dst, &src) in order.iter().enumerate() {
                for c in 0..3 {
                    let d = (pres.loo_residuals[(dst, c)] - res.loo_residuals[(src, c)]).abs();
                    prop_assert!(d <= 1e-10);
                }
            }
        }
    }
}
