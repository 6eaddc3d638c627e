//! The two-block PLS latent-factor model.
//!
//! `X` (n×p) and `Y` (n×q) are assumed to share R latent factors. The
//! weights `U`, `V` are the top-R singular vectors of the cross-product
//! `M = XᵀY`, the factors are `T = XU` and `S = YV`, a diagonal inner
//! regression `S = TD + H` links the two blocks, and the Y-loadings solve
//! `Y ~ SQᵀ` by least squares. Predictions use `β = U D Qᵀ`.
//!
//! There is no deflation between components: the R directions come straight
//! from one truncated SVD, so the factors can be estimated independently.

use ndarray::{Array1, ArrayView2, Axis};

use crate::numkernel::{column_means, spd_solve, svd_truncated, validate_finite, Matrix, Vector};
use crate::{Error, Result};

/// A paired, centered covariate block `X` (n×p) and response block `Y`
/// (n×q), with the removed column means kept for predicting new data.
#[derive(Debug, Clone)]
pub struct DataBlock {
    x: Matrix,
    y: Matrix,
    centered: bool,
    mean_x: Vector,
    mean_y: Vector,
}

impl DataBlock {
    /// Removes column means from a raw `(X, Y)` pair. The means are stored
    /// so that predictions on new data can be shifted back.
    pub fn center(x_raw: &ArrayView2<'_, f64>, y_raw: &ArrayView2<'_, f64>) -> Result<Self> {
        validate_finite(x_raw, "X")?;
        validate_finite(y_raw, "Y")?;
        if x_raw.nrows() != y_raw.nrows() {
            return Err(Error::Dimension(format!(
                "X has {} rows but Y has {}",
                x_raw.nrows(),
                y_raw.nrows()
            )));
        }
        if x_raw.nrows() < 3 {
            return Err(Error::Dimension(format!(
                "need at least 3 observations, got {}",
                x_raw.nrows()
            )));
        }
        let mean_x = column_means(x_raw);
        let mean_y = column_means(y_raw);
        let x = x_raw - &mean_x;
        let y = y_raw - &mean_y;
        Ok(DataBlock {
            x,
            y,
            centered: true,
            mean_x,
            mean_y,
        })
    }

    /// Wraps matrices that are already centered (column means zero within
    /// `1e-10` of the column scale). The stored means are zero.
    pub fn from_centered(x: Matrix, y: Matrix) -> Result<Self> {
        validate_finite(&x.view(), "X")?;
        validate_finite(&y.view(), "Y")?;
        if x.nrows() != y.nrows() {
            return Err(Error::Dimension(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() < 3 {
            return Err(Error::Dimension(format!(
                "need at least 3 observations, got {}",
                x.nrows()
            )));
        }
        for (name, m) in [("X", &x), ("Y", &y)] {
            for (j, col) in m.axis_iter(Axis(1)).enumerate() {
                let mean = col.mean().unwrap_or(0.0);
                let scale = col.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
                if mean.abs() > 1e-10 * scale {
                    return Err(Error::InvalidConfig(format!(
                        "{name} column {} is not centered (mean {mean:.3e})",
                        j + 1
                    )));
                }
            }
        }
        let p = x.ncols();
        let q = y.ncols();
        Ok(DataBlock {
            x,
            y,
            centered: true,
            mean_x: Array1::zeros(p),
            mean_y: Array1::zeros(q),
        })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn mean_x(&self) -> &Vector {
        &self.mean_x
    }

    pub fn mean_y(&self) -> &Vector {
        &self.mean_y
    }
}

/// A fitted two-block PLS model.
#[derive(Debug, Clone)]
pub struct PlsFit {
    /// Number of latent factors.
    pub r: usize,
    /// X-weights, p×R, columns orthonormal.
    pub u: Matrix,
    /// Y-weights, q×R, columns orthonormal.
    pub v: Matrix,
    /// Singular values of XᵀY, descending.
    pub g: Vector,
    /// X latent factors `T = XU`, n×R.
    pub t: Matrix,
    /// Y latent factors `S = YV`, n×R.
    pub s: Matrix,
    /// Diagonal of the inner coefficient matrix `D`.
    pub d: Vector,
    /// Y-loadings `Q`, q×R, least-squares solution of `Y ~ SQᵀ`.
    pub q_load: Matrix,
    /// X-loadings `P = XᵀT(TᵀT)⁻¹`, p×R. Not used by prediction.
    pub p_load: Matrix,
    /// Regression coefficients `β = U D Qᵀ`, p×q.
    pub beta: Matrix,
    /// Inner residuals `H = S − TD`, n×R.
    pub h_resid: Matrix,
    /// Outer residuals `E_y = Y − Xβ`, n×q.
    pub ey_resid: Matrix,
}

/// Core of `fit_pls` operating on centered matrices directly; also used for
/// the deletion refits inside leave-one-out loops, where the reduced data
/// set is not wrapped in a [`DataBlock`].
pub(crate) fn fit_centered(
    x: &ArrayView2<'_, f64>,
    y: &ArrayView2<'_, f64>,
    r: usize,
) -> Result<PlsFit> {
    let p = x.ncols();
    let q = y.ncols();
    if r < 1 || r > p.min(q) {
        return Err(Error::Dimension(format!(
            "factor count {r} out of range for p = {p}, q = {q}"
        )));
    }
    let m = x.t().dot(y);
    let svd = svd_truncated(&m.view(), r)?;
    let t = x.dot(&svd.u);
    let s = y.dot(&svd.v);

    let mut d = Array1::zeros(r);
    for k in 0..r {
        let tk = t.column(k);
        let tt = tk.dot(&tk);
        if tt <= 1e-12 {
            return Err(Error::DegenerateFactor { factor: k + 1 });
        }
        d[k] = tk.dot(&s.column(k)) / tt;
    }

    let gram_s = s.t().dot(&s);
    let qt = spd_solve(&gram_s.view(), &s.t().dot(y).view())?; // R×q
    let q_load = qt.t().to_owned();

    let gram_t = t.t().dot(&t);
    let zt = spd_solve(&gram_t.view(), &t.t().dot(x).view())?; // R×p
    let p_load = zt.t().to_owned();

    // β = U D Qᵀ
    let mut ud = svd.u.clone();
    for k in 0..r {
        ud.column_mut(k).mapv_inplace(|v| v * d[k]);
    }
    let beta = ud.dot(&qt);

    let mut h_resid = s.clone();
    for k in 0..r {
        let tk = t.column(k).to_owned();
        ndarray::Zip::from(h_resid.column_mut(k))
            .and(&tk)
            .for_each(|h, &tv| *h -= d[k] * tv);
    }
    let ey_resid = y - &x.dot(&beta);

    Ok(PlsFit {
        r,
        u: svd.u,
        v: svd.v,
        g: svd.g,
        t,
        s,
        d,
        q_load,
        p_load,
        beta,
        h_resid,
        ey_resid,
    })
}

/// Fits the two-block PLS model with `r` latent factors on centered data.
pub fn fit_pls(data: &DataBlock, r: usize) -> Result<PlsFit> {
    if !data.is_centered() {
        return Err(Error::InvalidConfig("data block is not centered".into()));
    }
    fit_centered(&data.x(), &data.y(), r)
}

/// Predicts responses for new rows: `(Xnew − mean_x) β + mean_y`.
pub fn predict(fit: &PlsFit, x_new: &ArrayView2<'_, f64>, means: &DataBlock) -> Result<Matrix> {
    if x_new.ncols() != fit.beta.nrows() {
        return Err(Error::Dimension(format!(
            "new data has {} columns, model expects {}",
            x_new.ncols(),
            fit.beta.nrows()
        )));
    }
    let centered = x_new - means.mean_x();
    Ok(centered.dot(&fit.beta) + means.mean_y())
}
