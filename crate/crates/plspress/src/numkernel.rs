//! Dense linear-algebra kernels shared by every other module: truncated SVD,
//! Gram–Schmidt orthonormalization, small symmetric positive definite solves
//! and rank-one Sherman–Morrison–Woodbury downdates.
//!
//! Values are plain `ndarray` types; every kernel validates that its inputs
//! are finite and rejects anything else. Tolerances quoted in the error
//! conditions are failure thresholds, not runtime clamps: kernels never
//! round their outputs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::{JobSvd, SVDDC};

use crate::{Error, Result};

/// Dense `f64` matrix in row-major (logical) order.
pub type Matrix = Array2<f64>;

/// Dense `f64` vector.
pub type Vector = Array1<f64>;

/// Rank-R truncated singular value decomposition `M ~ U diag(g) Vᵀ`.
///
/// `u` (p×R) and `v` (q×R) have orthonormal columns, `g` holds the R largest
/// singular values in descending order. Signs are fixed so that for each
/// column of `u` the entry of largest magnitude (lowest index on ties) is
/// positive, which makes the output deterministic.
#[derive(Debug, Clone)]
pub struct SvdTruncated {
    pub u: Matrix,
    pub v: Matrix,
    pub g: Vector,
}

/// An R×R symmetric positive definite Gram matrix together with its inverse,
/// ready for rank-one downdating.
#[derive(Debug, Clone)]
pub struct SmwState {
    /// Inverse of `gram`.
    pub inv: Matrix,
    /// The Gram matrix itself.
    pub gram: Matrix,
}

/// Checks that every entry of `m` is finite.
pub fn validate_finite(m: &ArrayView2<'_, f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn validate_nonempty(m: &ArrayView2<'_, f64>, what: &'static str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "{what} must have at least one row and one column, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Best rank-R approximation of `m` via the singular value decomposition.
///
/// The heavy lifting is delegated to LAPACK's divide-and-conquer routine;
/// this function truncates, enforces the sign convention and checks the
/// contract. Fails if `r` is out of range or `m` has non-finite entries.
pub fn svd_truncated(m: &ArrayView2<'_, f64>, r: usize) -> Result<SvdTruncated> {
    validate_nonempty(m, "svd input")?;
    validate_finite(m, "svd input")?;
    let k = m.nrows().min(m.ncols());
    if r < 1 || r > k {
        return Err(Error::Dimension(format!(
            "rank {r} out of range for a {}x{} matrix (need 1 <= R <= {k})",
            m.nrows(),
            m.ncols()
        )));
    }
    let (u_opt, s, vt_opt) = m
        .to_owned()
        .svddc(JobSvd::Some)
        .map_err(|e| Error::Backend(format!("svd failed: {e}")))?;
    let u_thin = u_opt.expect("JobSvd::Some returns U");
    let vt_thin = vt_opt.expect("JobSvd::Some returns Vt");

    let mut u = u_thin.slice(ndarray::s![.., ..r]).to_owned();
    let mut v = vt_thin.slice(ndarray::s![..r, ..]).t().to_owned();
    let g = Array1::from_iter(s.iter().take(r).copied());

    // Joint sign flip per component: largest-|entry| coordinate of u_r
    // (lowest index on ties) is made positive.
    for j in 0..r {
        let col = u.column(j);
        let mut imax = 0;
        let mut best = f64::NEG_INFINITY;
        for (i, &x) in col.iter().enumerate() {
            if x.abs() > best {
                best = x.abs();
                imax = i;
            }
        }
        if u[(imax, j)] < 0.0 {
            u.column_mut(j).mapv_inplace(|x| -x);
            v.column_mut(j).mapv_inplace(|x| -x);
        }
    }

    Ok(SvdTruncated { u, v, g })
}

/// Orthonormalizes the columns of `a` by modified Gram–Schmidt with a second
/// re-orthogonalization pass.
///
/// Column `r` of the output depends only on columns `1..=r` of the input, so
/// prefix spans are preserved. A pivot below `1e-12` of the corresponding
/// input column norm means the input is numerically rank deficient.
pub fn qr_orthonormalize(a: &ArrayView2<'_, f64>) -> Result<Matrix> {
    validate_nonempty(a, "qr input")?;
    validate_finite(a, "qr input")?;
    let (n, k) = a.dim();
    if k > n {
        return Err(Error::Dimension(format!(
            "cannot orthonormalize {k} columns in dimension {n}"
        )));
    }
    let mut q = a.to_owned();
    for j in 0..k {
        let orig_norm = a.column(j).dot(&a.column(j)).sqrt();
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i).to_owned();
                let proj = qi.dot(&q.column(j));
                ndarray::Zip::from(q.column_mut(j))
                    .and(&qi)
                    .for_each(|x, &b| *x -= proj * b);
            }
        }
        let pivot = q.column(j).dot(&q.column(j)).sqrt();
        if pivot <= 1e-12 * orig_norm || pivot == 0.0 {
            return Err(Error::RankDeficient { column: j + 1 });
        }
        q.column_mut(j).mapv_inplace(|x| x / pivot);
    }
    Ok(q)
}

impl SmwState {
    /// Builds the state from a symmetric positive definite Gram matrix.
    pub fn new(gram: Matrix) -> Result<Self> {
        validate_finite(&gram.view(), "gram matrix")?;
        let inv = spd_inverse(&gram.view())?;
        Ok(SmwState { inv, gram })
    }
}

/// Removes one observation `x` from the Gram matrix behind `state`,
/// returning the downdated inverse `(gram − xᵀx)⁻¹` and the leverage
/// `h = xᵀ gram⁻¹ x`.
///
/// Uses the Sherman–Morrison identity
/// `(gram − xᵀx)⁻¹ = P + P x xᵀ P / (1 − h)` with `P = gram⁻¹`.
/// Fails with a leverage singularity once `h >= 1 − 1e-10`: the downdated
/// Gram matrix is then singular and the observation is pivotal.
pub fn smw_downdate(state: &SmwState, x: &ArrayView1<'_, f64>) -> Result<(Matrix, f64)> {
    let r = state.inv.nrows();
    if x.len() != r {
        return Err(Error::Dimension(format!(
            "downdate vector has length {}, Gram matrix is {r}x{r}",
            x.len()
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("downdate vector"));
    }
    let px = state.inv.dot(x);
    let h = x.dot(&px);
    if h >= 1.0 - 1e-10 {
        return Err(Error::LeverageSingular { leverage: h });
    }
    let scale = 1.0 / (1.0 - h);
    let mut down = state.inv.clone();
    for i in 0..r {
        for j in 0..r {
            down[(i, j)] += px[i] * px[j] * scale;
        }
    }
    Ok((down, h))
}

/// Cholesky factor (lower triangular) of a symmetric positive definite
/// matrix.
fn cholesky(a: &ArrayView2<'_, f64>) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "cholesky needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let mut l: Matrix = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::NotPositiveDefinite(format!(
                        "pivot {sum:.3e} at index {i}"
                    )));
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky
/// factorization.
pub fn spd_solve(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> Result<Matrix> {
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "solve rhs has {} rows, matrix is {n}x{n}",
            b.nrows()
        )));
    }
    let l = cholesky(a)?;
    let m = b.ncols();
    let mut x = b.to_owned();
    // forward substitution L Z = B
    for col in 0..m {
        for i in 0..n {
            let mut sum = x[(i, col)];
            for k in 0..i {
                sum -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = sum / l[(i, i)];
        }
    }
    // back substitution Lᵀ X = Z
    for col in 0..m {
        for i in (0..n).rev() {
            let mut sum = x[(i, col)];
            for k in (i + 1)..n {
                sum -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = sum / l[(i, i)];
        }
    }
    Ok(x)
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &ArrayView2<'_, f64>) -> Result<Matrix> {
    let n = a.nrows();
    let eye: Matrix = Array2::eye(n);
    spd_solve(a, &eye.view())
}

/// Column means of a matrix.
pub fn column_means(m: &ArrayView2<'_, f64>) -> Vector {
    m.mean_axis(Axis(0)).expect("non-empty matrix")
}
