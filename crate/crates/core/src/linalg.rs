//! Matrix decompositions on top of LAPACK: truncated SVD with a weight report,
//! sign-fixed QR/LQ, polar factors and Hermitian square-root factors.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Eig, Eigh, JobSvd, QR, SVDDC, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tensor, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub kept: usize,
    /// Sum of squared discarded singular values.
    pub discarded_weight: f64,
    /// Retained singular values, descending.
    pub spectrum: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SvdTruncation {
    pub u: Array2<C64>,
    pub s: Vec<f64>,
    pub vt: Array2<C64>,
    pub report: TruncationReport,
}

/// Truncated SVD of a two-index tensor.
pub fn svd_truncate(m: &Tensor, chi_max: usize, weight_tol: f64) -> Result<SvdTruncation> {
    let mat = m.to_matrix()?;
    svd_truncate_matrix(mat.view(), chi_max, weight_tol)
}

/// Keeps at most `chi_max` singular values and drops any below
/// `weight_tol * s_max`.
pub fn svd_truncate_matrix(m: ArrayView2<C64>, chi_max: usize, weight_tol: f64) -> Result<SvdTruncation> {
    if chi_max == 0 {
        return Err(Error::InvalidArgument("chi_max must be at least 1".into()));
    }
    if weight_tol < 0.0 || !weight_tol.is_finite() {
        return Err(Error::InvalidArgument(format!("weight_tol must be a finite non-negative number, got {weight_tol}")));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    let (u, sv, vt) = svd_thin(m)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let mut kept = sv.iter().take(chi_max).take_while(|&&x| x > weight_tol * smax && x > 0.0).count();
    if kept == 0 {
        kept = 1;
    }
    let discarded_weight: f64 = sv.iter().skip(kept).map(|x| x * x).sum();
    let spectrum: Vec<f64> = sv.iter().take(kept).copied().collect();
    Ok(SvdTruncation {
        u: u.slice(s![.., ..kept]).to_owned(),
        s: spectrum.clone(),
        vt: vt.slice(s![..kept, ..]).to_owned(),
        report: TruncationReport { kept, discarded_weight, spectrum },
    })
}

/// Thin SVD, `m = u * diag(s) * vt`, singular values descending.
pub(crate) fn svd_thin(m: ArrayView2<C64>) -> Result<(Array2<C64>, Vec<f64>, Array2<C64>)> {
    let (u, s, vt) = m.svddc(JobSvd::Some)?;
    let u = u.ok_or_else(|| Error::Linalg("svd returned no U".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("svd returned no V".into()))?;
    Ok((u, s.to_vec(), vt))
}

/// Thin QR with the diagonal of `r` real and non-negative.
pub(crate) fn qr_positive(m: ArrayView2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let (mut q, mut r) = m.qr()?;
    let k = r.nrows().min(r.ncols());
    for i in 0..k {
        let d = r[[i, i]];
        let n = d.norm();
        if n > 0.0 {
            let ph = d / n;
            r.row_mut(i).mapv_inplace(|z| z * ph.conj());
            q.column_mut(i).mapv_inplace(|z| z * ph);
        }
    }
    Ok((q, r))
}

/// Thin LQ (`m = l * q` with `q` having orthonormal rows), diagonal of `l`
/// real and non-negative.
pub(crate) fn lq_positive(m: ArrayView2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let mh = dagger(m);
    let (q, r) = qr_positive(mh.view())?;
    Ok((dagger(r.view()), dagger(q.view())))
}

/// Unitary (isometric) polar factor `u * vt` of `m = u s vt`.
pub(crate) fn polar(m: ArrayView2<C64>) -> Result<Array2<C64>> {
    let (u, _, vt) = svd_thin(m)?;
    Ok(u.dot(&vt))
}

pub(crate) fn dagger(m: ArrayView2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

pub(crate) fn hermitian_part(m: ArrayView2<C64>) -> Array2<C64> {
    (&m + &dagger(m)).mapv(|z| z * 0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub(crate) fn eigh(m: ArrayView2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    // The LAPACK wrapper returns conjugated eigenvectors for row-major
    // complex input, so hand it a column-major copy.
    let h = hermitian_part(m).reversed_axes().as_standard_layout().into_owned().reversed_axes();
    let (w, v) = h.eigh(UPLO::Upper)?;
    Ok((w.to_vec(), v))
}

/// Dense eigen-decomposition of a general square matrix (right eigenvectors as
/// columns).
pub(crate) fn eig_dense(m: ArrayView2<C64>) -> Result<(Array1<C64>, Array2<C64>)> {
    Ok(m.eig()?)
}

/// For a Hermitian positive semi-definite `m`, returns `x` with `x^† x = m`,
/// keeping only eigen-directions above `rel_cut * lambda_max`.
pub(crate) fn psd_sqrt_factor(m: ArrayView2<C64>, rel_cut: f64) -> Result<Array2<C64>> {
    let (w, v) = eigh(m)?;
    let wmax = w.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > rel_cut * wmax && w[i] > 0.0).collect();
    if keep.is_empty() {
        return Err(Error::Linalg("positive semi-definite factor of a zero matrix".into()));
    }
    let mut x = Array2::<C64>::zeros((keep.len(), m.ncols()));
    for (row, &i) in keep.iter().enumerate() {
        let sq = w[i].sqrt();
        for j in 0..m.ncols() {
            x[[row, j]] = v[[j, i]].conj() * sq;
        }
    }
    Ok(x)
}

pub(crate) fn frobenius(m: ArrayView2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Rescales columns so that the largest-modulus entry of each is real positive.
#[allow(dead_code)]
pub(crate) fn fix_column_phases(m: &mut Array2<C64>) {
    for mut col in m.axis_iter_mut(Axis(1)) {
        let mut v = col.to_vec();
        fix_phase(&mut v);
        col.assign(&Array1::from(v));
    }
}

/// Makes the largest-modulus amplitude of `v` real and positive.
pub fn fix_phase(v: &mut [C64]) {
    let mut best = C64::new(0.0, 0.0);
    let mut bn = -1.0;
    for z in v.iter() {
        // Prefer the first of (numerically) equal maxima so ties are stable.
        if z.norm() > bn * (1.0 + 1e-10) {
            bn = z.norm();
            best = *z;
        }
    }
    if bn > 0.0 {
        let ph = (best / bn).conj();
        for z in v.iter_mut() {
            *z *= ph;
        }
    }
}
